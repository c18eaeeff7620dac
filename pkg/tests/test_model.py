from __future__ import annotations

import numpy as np
import pytest
import sympy as sp_

from conedex.catalog import CATALOG, builtin_models, get_model, model_b, model_c
from conedex.model import (ModelError, Term, conjugate_to_b, dumps_config, formal_adjoint, fragment_from_pencil,
                           fully_elliptic, loads_config, make_operator, split_blocks, v0_block_operator,
                           validate_assumptions)

A2 = np.array([[0, 1], [-1, 0]], dtype=complex)


@pytest.mark.parametrize("P", builtin_models(), ids=lambda P: P.name)
def test_builtins_validate(P):
    rep = validate_assumptions(P)
    assert rep.passed, [c for c in rep.failures()]


@pytest.mark.parametrize("P", builtin_models(), ids=lambda P: P.name)
def test_config_round_trip_is_byte_exact(P):
    text = dumps_config(P)
    assert dumps_config(loads_config(text)) == text


def test_end_data_from_profiles():
    B = model_b(0.75)
    for e in B.ends:
        assert np.all(e.phi_infinity == 0)
    s1 = np.array([[0, 1], [1, 0]])
    np.testing.assert_array_equal(B.end("plus").b_term, 0.75 * s1)
    np.testing.assert_array_equal(B.end("minus").b_term, -0.75 * s1)
    A = get_model("MODEL-A")
    np.testing.assert_array_equal(A.end("plus").phi_infinity, 1j * np.eye(2))
    np.testing.assert_array_equal(A.end("minus").phi_infinity, -1j * np.eye(2))


def test_potential_matches_expansion_far_out():
    B = model_b()
    t = np.array([1e3, -1e3])
    np.testing.assert_allclose(B.potential(t[:1]), B.declared_expansion("plus", t[:1]), atol=1e-8)
    np.testing.assert_allclose(B.potential(t[1:]), B.declared_expansion("minus", t[1:]), atol=1e-8)
    np.testing.assert_allclose(B.potential(t[:1])[0], B.end("plus").b_term / 1e3, atol=1e-9)


def test_full_ellipticity():
    assert fully_elliptic(get_model("MODEL-A"))
    assert not fully_elliptic(model_b())
    assert fully_elliptic(model_c(), "plus") is False


def test_block_split_of_hybrid():
    split = split_blocks(model_c())
    for side in ("minus", "plus"):
        sp = split.end(side)
        assert (sp.dim_v0, sp.dim_v1) == (2, 2)
        np.testing.assert_array_equal(sp.projector_v0, np.diag([1, 1, 0, 0]))
        assert split.offdiag_decay[side] == pytest.approx(2.0, abs=0.05)


def test_bad_clifford_rejected():
    bad = make_operator(np.array([[0, 2], [-2, 0]]), [Term("tanh", 1j * np.eye(2))])
    assert not validate_assumptions(bad).get("clifford").passed


def test_noncommuting_phi_rejected():
    bad = make_operator(A2, [Term("tanh", 1j * np.diag([1.0, -1.0]))])
    assert not validate_assumptions(bad).get("commutes[plus]").passed


def test_slow_offdiag_decay_rejected():
    m = 4
    A = np.kron(np.eye(2), A2)
    K = np.zeros((m, m), dtype=complex)
    K[:2, 2:] = np.eye(2)
    K[2:, :2] = np.eye(2)
    V1 = np.zeros((m, m), dtype=complex)
    V1[2:, 2:] = 1j * np.eye(2)
    P = make_operator(A, [Term("tanh", V1), Term("power-decay", 0.3 * K, {"power": 1.0})])
    rep = validate_assumptions(P)
    assert not rep.get("decay-offdiag[plus]").passed


def test_unknown_profile():
    with pytest.raises(ModelError):
        Term("gaussian", np.eye(2))


def test_formal_adjoint_is_involutive():
    P = model_c()
    Q = formal_adjoint(formal_adjoint(P))
    t = np.linspace(-5, 5, 7)
    np.testing.assert_allclose(Q.potential(t), P.potential(t))
    np.testing.assert_array_equal(formal_adjoint(P).clifford, -P.clifford.conj().T)


def _symbolic_pencil(A, B, side):
    # apply A d/dt + B/|t| to x^lam v with x = 1/|t| and divide by x^(lam+1)
    x, lam = sp_.symbols("x lambda", positive=True)
    Am, Bm = sp_.Matrix(A), sp_.Matrix(B)
    v = sp_.Matrix(sp_.symbols("v0:%d" % A.shape[0]))
    u = x**lam * v
    dt = (lambda f: -x**2 * sp_.diff(f, x)) if side == "plus" else (lambda f: x**2 * sp_.diff(f, x))
    expr = (Am * u.applyfunc(dt) + Bm * x * u) / x ** (lam + 1)
    expr = sp_.simplify(expr)
    M0 = expr.subs(lam, 0).jacobian(v)
    M1 = sp_.simplify(expr.jacobian(v) - M0).subs(lam, 1)
    return np.array(M0, dtype=complex), np.array(M1, dtype=complex)


@pytest.mark.parametrize("side", ["minus", "plus"])
@pytest.mark.parametrize("name", ["MODEL-B", "MODEL-D"])
def test_conjugate_to_b_matches_symbolic_oracle(name, side):
    P = get_model(name)
    frag = conjugate_to_b(P, side)
    M0, M1 = _symbolic_pencil(P.clifford.real.astype(int), P.end(side).b_term.real, side)
    np.testing.assert_allclose(frag.M0, M0, atol=1e-14)
    np.testing.assert_allclose(frag.M1, M1, atol=1e-14)


def test_fragment_round_trip():
    frag = conjugate_to_b(model_c(), "plus")
    back = fragment_from_pencil("plus", 1, frag.M0, frag.M1)
    np.testing.assert_array_equal(back.M0, frag.M0)
    np.testing.assert_array_equal(back.M1, frag.M1)


def test_v0_block_of_hybrid_is_model_b():
    Q = v0_block_operator(model_c())
    B = model_b()
    t = np.linspace(-30, 30, 11)
    np.testing.assert_allclose(Q.potential(t), B.potential(t))
    with pytest.raises(ModelError):
        v0_block_operator(get_model("MODEL-A"))


def test_catalog_errors():
    assert set(CATALOG) == {"MODEL-A", "MODEL-B", "MODEL-C", "MODEL-D"}
    with pytest.raises(ModelError):
        get_model("MODEL-Z")
    with pytest.raises(ModelError):
        get_model("MODEL-B", c=1.0)


def test_malformed_config():
    with pytest.raises(ModelError):
        loads_config("{not json")
    with pytest.raises(ModelError):
        loads_config('{"dim": 2}')
