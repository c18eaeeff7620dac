from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp_

from conedex.catalog import get_model, model_b
from conedex.indicial import (BSpectrum, IndicialFamily, NonRealRoot, OnSpectrumWeight, ParityViolation, Root,
                              b_spectrum, boundary_pairing, boundary_pairing_closed_form, defect, formal_nullspace,
                              model_residual, relative_index_ledger, root_residuals, spectrum_of)
from conedex.model import conjugate_to_b
from conedex.phg import builtin_cutoffs
from conedex.spectral import v0_spectrum

A2 = np.array([[0, 1], [-1, 0]], dtype=complex)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)


def _sym_roots(fam):
    lam = sp_.symbols("lambda")
    M = sp_.Matrix(fam.M0.real.round(12).tolist()) + lam * sp_.Matrix(fam.M1.real.round(12).tolist())
    return sorted(float(r) for r in sp_.solve(sp_.nsimplify(M.det()), lam))


@pytest.mark.parametrize("side", ["minus", "plus"])
def test_model_b_roots_against_determinant(side):
    frag = conjugate_to_b(model_b(0.75), side)
    spec = b_spectrum(frag)
    assert spec.values() == pytest.approx(_sym_roots(IndicialFamily.of(frag)), abs=1e-12)
    assert all(r.order == 1 and r.nullity == 1 and r.dim_f == 1 for r in spec.roots)
    assert max(root_residuals(frag, spec)) < 1e-12


def test_model_d_roots():
    spec = v0_spectrum(get_model("MODEL-D"))
    for side in ("minus", "plus"):
        assert spec.values(side) == pytest.approx([-1.3, -0.75, 0.75, 1.3], abs=1e-12)
    assert spec.is_symmetric()


def test_window_filters_reporting_only():
    frag = conjugate_to_b(get_model("MODEL-D"), "plus")
    assert b_spectrum(frag, window=(-1.0, 1.0)).values() == pytest.approx([-0.75, 0.75])


def test_non_real_root_flagged():
    fam = IndicialFamily(np.eye(2, dtype=complex), A2)
    with pytest.raises(NonRealRoot):
        b_spectrum(fam)
    spec = b_spectrum(fam, self_adjoint=False)
    assert sorted(abs(r.imag) for r in spec.roots) == pytest.approx([1.0, 1.0])


def test_jordan_block_order_two():
    # K = -M1^{-1} M0 = [[0.5, 1], [0, 0.5]]: double root 0.5 with one eigenvector
    M1 = np.eye(2, dtype=complex)
    M0 = -np.array([[0.5, 1.0], [0.0, 0.5]], dtype=complex)
    (root,) = b_spectrum(IndicialFamily(M0, M1)).roots
    assert (root.value, root.order, root.nullity, root.dim_f) == (pytest.approx(0.5), 2, 1, 2)
    sols = formal_nullspace(IndicialFamily(M0, M1), 0.5)
    assert sorted(u.log_power for u in sols) == [0, 1]
    for u in sols:
        assert model_residual(IndicialFamily(M0, M1), u) < 1e-12


def test_unequal_jordan_blocks_count_algebraic_multiplicity():
    # blocks of sizes 2 and 1 at the same root: dim F = 3, not order * nullity = 4
    K = np.array([[0.5, 1, 0], [0, 0.5, 0], [0, 0, 0.5]], dtype=complex)
    (root,) = b_spectrum(IndicialFamily(-K, np.eye(3, dtype=complex))).roots
    assert (root.order, root.nullity, root.dim_f) == (2, 2, 3)


def test_formal_solutions_solve_model_operator():
    frag = conjugate_to_b(model_b(), "plus")
    fam = IndicialFamily.of(frag)
    for r in (0.75, -0.75):
        (u,) = formal_nullspace(frag, r)
        assert u.log_power == 0
        assert model_residual(fam, u) < 1e-12
        s = np.array([0.3])
        lhs = u.s_derivative(s) @ fam.M1.T + u(s) @ fam.M0.T
        assert np.abs(lhs).max() < 1e-12


def test_adjoint_pencil_roots_reflect():
    fam = IndicialFamily.of(conjugate_to_b(get_model("MODEL-D"), "plus"))
    a = b_spectrum(fam.adjoint()).values()
    assert sorted(a) == pytest.approx(sorted(-x for x in b_spectrum(fam).values()))


def _pairing_pair(side="plus"):
    P = model_b()
    fam = IndicialFamily.of(conjugate_to_b(P, side))
    (u,) = formal_nullspace(fam, 0.75)
    (v,) = formal_nullspace(fam.adjoint(), -0.75)
    return fam, u, v


def test_pairing_symbolic_commutator_oracle():
    # (1/i) int [<L(phi u), phi v> - <phi u, L*(phi v)>] ds/s with the cutoff left symbolic:
    # the integrand is a total derivative, so the value is -(1/i) <M1 w, y> phi(0)^2 = i <M1 w, y>
    fam, u, v = _pairing_pair()
    s = sp_.symbols("s", positive=True)
    phi = sp_.Function("phi")
    r = sp_.Rational(3, 4)
    M1 = sp_.Matrix(fam.M1.real.tolist())
    M0 = sp_.Matrix(np.round(fam.M0.real, 12).tolist()).applyfunc(sp_.nsimplify)
    w = sp_.Matrix(sp_.symbols("w0:2"))
    y = sp_.Matrix(sp_.symbols("y0:2"))
    U = phi(s) * s**r * w
    V = phi(s) * s ** (-r) * y
    LU = M1 * U.diff(s) * s + M0 * U
    LsV = -M1.T * V.diff(s) * s + M0.T * V
    integrand = sp_.simplify(((V.T * LU)[0] - (LsV.T * U)[0]) / s)
    antider = sp_.simplify((V.T * M1 * U)[0])
    assert sp_.simplify(integrand - antider.diff(s)) == 0
    # phi = 1 at 0 and 0 past the outer radius
    symbolic = -antider.subs(phi(s), 1) / sp_.I
    val = complex(symbolic.subs(dict(zip(w, u.coeffs[0].real))).subs(dict(zip(y, v.coeffs[0].real))))
    closed = boundary_pairing_closed_form(u, v, fam)
    assert abs(val - closed) < 1e-12


@pytest.mark.parametrize("cut", builtin_cutoffs(), ids=lambda c: c.template)
def test_pairing_quadrature_matches_closed_form(cut):
    fam, u, v = _pairing_pair()
    res = boundary_pairing(u, v, cut, fam)
    assert abs(res.value - boundary_pairing_closed_form(u, v, fam)) < 1e-8
    assert abs(res.value) > 0.1


def test_pairing_rejects_mismatched_exponents():
    fam, u, _ = _pairing_pair()
    (v,) = formal_nullspace(fam.adjoint(), 0.75)
    assert boundary_pairing(u, v, builtin_cutoffs()[0], fam).divergent


def test_relative_ledger_and_defect_model_b():
    spec = v0_spectrum(model_b())
    assert relative_index_ledger(spec, -1.0, 1.0) == 4
    assert relative_index_ledger(spec, -0.2, 0.2) == 0
    assert relative_index_ledger(spec, 1.0, -1.0) == -4
    assert [defect(spec, a) for a in (-1.0, -0.2, 0.2, 1.0)] == [2, 0, 0, -2]
    with pytest.raises(OnSpectrumWeight):
        defect(spec, 0.75)


def test_defect_antisymmetric_and_jumps():
    spec = v0_spectrum(get_model("MODEL-D"))
    grid = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
    vals = {a: defect(spec, a) for a in grid}
    for a in grid:
        assert vals[a] == -vals[-a]
    assert vals[0.5] - vals[1.0] == relative_index_ledger(spec, 0.5, 1.0)


def test_parity_violation():
    root = Root(0.0, 1, 1, 1, np.zeros((2, 1)), np.zeros((2, 1)), "plus")
    with pytest.raises(ParityViolation):
        defect(BSpectrum((root,)), 0.5)


def test_spectrum_of_merges_ends():
    P = model_b()
    spec = spectrum_of([conjugate_to_b(P, s) for s in ("minus", "plus")])
    assert len(spec.roots) == 4
    assert math.isinf(BSpectrum().distance(0.0))
