from __future__ import annotations

import numpy as np
import pytest

from conedex.catalog import builtin_models, get_model, model_b, model_c
from conedex.index import (BoundaryIndexError, ChiSpec, boundary_index_data, boundary_index_point,
                           callias_index_fullrank, channel_family, deform_family, free_dirac_channel,
                           grading_invariance_check, hybrid_index, indicial_flip_check, profile_phi, tf_index,
                           tf_model, verify_identities)
from conedex.model import SIDES, Term, conjugate_to_b, make_operator, split_blocks, validate_assumptions
from conedex.spectral import TolPolicy, numerical_index, shooting_oracle

A2 = np.array([[0, 1], [-1, 0]], dtype=complex)
FAST = TolPolicy(refine=False)


def _random_full_rank(rng):
    """m = 4 potential commuting with A = I (x) i sigma2 at both ends, plus a decaying generic term."""
    A = np.kron(np.eye(2), A2)

    def commutant():
        X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        Y = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        return np.kron(0.5 * (X - X.conj().T), np.eye(2)) + np.kron(0.5 * (Y + Y.conj().T), A2)

    while True:
        Mt, Mc = commutant(), 0.5 * commutant()
        if all(np.linalg.svd(Mc + s * Mt, compute_uv=False)[-1] > 0.3 for s in (-1, 1)):
            break
    R = 0.3 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    return make_operator(A, [Term("tanh", Mt), Term("const", Mc), Term("exp-decay", R)], name="random")


def test_model_a_boundary_index_zero():
    P = get_model("MODEL-A")
    assert [boundary_index_point(P, s) for s in SIDES] == [0, 0]
    d = boundary_index_data(P, "plus")
    assert (d.dim_plus, d.dim_minus) == (1, 1)
    assert callias_index_fullrank(P) == 0


def test_one_dimensional_boundary_index_can_be_nonzero(small_grid):
    # Phi = c tanh(t) A: V+ is an eigenspace of A itself, so the grading is pure at each end
    P = make_operator(A2, [Term("tanh", 1.0 * A2)], name="tanh-A")
    assert [boundary_index_point(P, s) for s in SIDES] == [1, 1]
    rep = numerical_index(P, small_grid, 0.0)
    assert (rep.dim_ker, rep.dim_coker) == (2, 0)
    sh = shooting_oracle(P, 0.0)
    assert (sh.dim_ker, sh.dim_coker) == (2, 0)


def test_callias_requires_full_ellipticity():
    with pytest.raises(BoundaryIndexError):
        callias_index_fullrank(model_b())


@pytest.mark.parametrize("seed", range(5))
def test_callias_identity_random_full_rank(seed, small_grid):
    P = _random_full_rank(np.random.default_rng(seed))
    assert validate_assumptions(P).passed
    rep = numerical_index(P, small_grid, 0.0, FAST)
    assert rep.index == callias_index_fullrank(P)
    sh = shooting_oracle(P, 0.0)
    assert (sh.dim_ker, sh.dim_coker) == (rep.dim_ker, rep.dim_coker)


@pytest.mark.parametrize("alpha,defect", [(-1.0, 2), (-0.2, 0), (0.2, 0), (1.0, -2), (-1.6, 4), (1.6, -4)])
def test_hybrid_breakdown(alpha, defect):
    P = model_c(b_values=(0.75, 1.3))
    br = hybrid_index(P, alpha)
    assert (br.boundary, br.defect, br.total) == (0, defect, defect)


def test_hybrid_formula_matches_numerics(small_grid):
    P = model_c()
    for alpha, total in ((-1.0, 2), (0.2, 0)):
        assert numerical_index(P, small_grid, alpha, FAST).index == hybrid_index(P, alpha).total == total


def test_grading_invariance():
    rng = np.random.default_rng(7)
    for P in builtin_models():
        assert grading_invariance_check(P, rng).passed


@pytest.mark.parametrize("name", ["MODEL-B", "MODEL-C", "MODEL-D"])
def test_flip_identity_exact(name):
    fc = indicial_flip_check(tf_model(get_model(name)))
    assert fc.ok
    assert all(d == (0.0, 0.0) for d in fc.diffs.values())


def test_flip_negative_control():
    model = tf_model(model_b())
    frag = conjugate_to_b(model.tf_operators["plus"], "minus")
    M0 = frag.M0.copy()
    M0[0, 1] += 1e-15
    assert not indicial_flip_check(model, {"plus": (M0, frag.M1)}).ok
    assert not indicial_flip_check(model, {"plus": (frag.M0, frag.M1 * (1 + 2**-52))}).ok


def test_tf_profile_endpoints():
    model = tf_model(model_b())
    t = np.array([-60.0, 60.0])
    np.testing.assert_allclose(profile_phi(model, "plus", t), [0.0, 1.0], atol=1e-20)
    np.testing.assert_allclose(profile_phi(model, "minus", t), [1.0, 0.0], atol=1e-20)
    for side, op in model.tf_operators.items():
        sc = model.sc_end_of(side)
        np.testing.assert_array_equal(op.end(sc).phi_infinity, -1j * np.eye(2))
        assert validate_assumptions(op).passed


def test_tf_index_profile_independent(small_grid):
    for scale in (1.0, 0.5):
        total, comps = tf_index(tf_model(model_b(), scale), -1.0, small_grid, FAST)
        assert (total, comps) == (2, {"minus": 1, "plus": 1})


def test_deform_family():
    P = model_b()
    assert deform_family(P, 0.0).terms == P.terms
    Q = deform_family(P, 0.1, ChiSpec(2.0))
    for s in SIDES:
        np.testing.assert_allclose(Q.end(s).phi_infinity, -0.1j * np.eye(2))
    np.testing.assert_allclose(Q.potential(np.array([0.5])), P.potential(np.array([0.5])))
    with pytest.raises(ValueError):
        deform_family(P, 1.0)


def test_deformed_index(small_grid):
    for tau in (1e-2, 0.5):
        assert numerical_index(deform_family(model_b(), tau), small_grid, 1.0, FAST).index == 0


def test_channel_model():
    fam = channel_family(2)
    assert [(k, d) for k, _, d in fam] == [(-1, 2), (1, 2), (-2, 4), (2, 4)]
    op = free_dirac_channel(3)
    assert sorted(conjugate_to_b(op, "minus").M0.real.ravel()) == [0, 0, 3, 3]
    assert split_blocks(op).end("plus").dim_v1 == 2
    assert boundary_index_point(op, "plus") == 0
    with pytest.raises(ValueError):
        free_dirac_channel(0)


@pytest.mark.parametrize("kappa", [-2, 1])
def test_channel_index(kappa, small_grid):
    op = free_dirac_channel(kappa)
    assert numerical_index(op, small_grid, 0.0, FAST).index == 0
    sh = shooting_oracle(op, 0.0)
    assert (sh.dim_ker, sh.dim_coker) == (0, 0)


def test_verify_identities(small_grid):
    checks = verify_identities(model_b(), [1.0], small_grid, FAST)
    assert [c.name for c in checks] == ["index[alpha=1]", "flip"]
    assert all(c.passed for c in checks)
    assert checks[0].detail["defect"] == -2
