from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from conedex.catalog import get_model, model_b
from conedex.model import split_blocks
from conedex.spectral import (IndeterminateIndex, SweepAborted, TolPolicy, WeightedGrid, WeightError, WeightSpec,
                              alpha_sweep, check_weight, count_small, discretize, nullspace_asymptotics,
                              numerical_index, shooting_oracle, smallest_singular_values, v0_spectrum)


def test_grid_geometry():
    g = WeightedGrid(1200, 4.0)
    assert g.t[-1] == pytest.approx(np.sqrt(1e8 - 1), rel=1e-12)
    assert g.t[0] == -g.t[-1]
    assert g.nodes_per_decade > 100
    r = g.refined()
    e = g.extended()
    assert r.nodes == 1800 and r.decades == 4.0
    assert e.decades == 5.0 and e.nodes == 1500
    assert e.nodes_per_decade == pytest.approx(g.nodes_per_decade, rel=0.05)


def test_grid_rejects_coarse_tails():
    with pytest.raises(WeightError):
        WeightedGrid(100, 4.0)
    with pytest.raises(WeightError):
        WeightedGrid(200, 12.0)


def test_weight_exponents_and_duality():
    w = WeightSpec(1.0)
    assert w.exponents() == {"in": (0.5, 1.5), "out": (1.5, 1.5)}
    a = WeightSpec(1.0, adjoint=True).exponents()
    # adjoint input weight is the inverse of the primal output weight
    assert a["in"] == (-1.5, -1.5) and a["out"] == (-0.5, -1.5)
    assert w.threshold == 1.0


def test_weight_on_spectrum_rejected():
    spec = v0_spectrum(model_b())
    check_weight(0.5, spec)
    with pytest.raises(WeightError):
        check_weight(0.76, spec)


def test_count_small_gap_rule():
    assert count_small(np.array([1e-14, 1e-13, 0.1, 0.2]), 1e-15, 1e3) == (2, pytest.approx(1e12))
    assert count_small(np.array([0.05, 0.1]), 1e-15, 1e3)[0] == 0
    with pytest.raises(IndeterminateIndex):
        count_small(np.array([1e-3, 1e-2, 1e-1]), 1e-5, 1e3)


def test_sparse_and_dense_singular_values_agree():
    rng = np.random.default_rng(3)
    n = 300
    M = sp.diags([rng.normal(size=n - 1), rng.normal(size=n), rng.normal(size=n)], [-1, 0, 1],
                 shape=(n, n + 1), format="csc")
    d = smallest_singular_values(M, 4, "dense").values
    s = smallest_singular_values(M, 4, "sparse").values
    np.testing.assert_allclose(s, d, rtol=1e-8, atol=1e-12)


def test_discrete_index_counts_end_conditions(small_grid):
    P = model_b()
    D = discretize(P, small_grid, WeightSpec(1.0), split_blocks(P))
    assert D.discrete_index == -2
    D = discretize(P, small_grid, WeightSpec(-1.0), split_blocks(P))
    assert D.discrete_index == 2


@pytest.mark.parametrize("alpha,expected", [(-1.0, (2, 0)), (0.2, (1, 1)), (1.0, (0, 2))])
def test_model_b_kernels(small_grid, alpha, expected):
    rep = numerical_index(model_b(), small_grid, alpha)
    assert (rep.dim_ker, rep.dim_coker) == expected
    assert rep.gap_ratio > 1e6
    assert [(h["dim_ker"], h["dim_coker"]) for h in rep.refinements] == [expected] * 3


@pytest.mark.parametrize("alpha,expected", [(-1.0, (2, 0)), (0.2, (1, 1)), (1.0, (0, 2))])
def test_shooting_oracle_model_b(alpha, expected):
    sh = shooting_oracle(model_b(), alpha)
    assert (sh.dim_ker, sh.dim_coker) == expected
    assert not sh.flagged


def test_shooting_oracle_full_rank():
    sh = shooting_oracle(get_model("MODEL-A"), 0.0)
    assert (sh.dim_ker, sh.dim_coker) == (1, 1)


def test_sweep_ledger_and_antisymmetry(small_grid):
    res = alpha_sweep(model_b(), [-1.0, -0.2, 0.2, 1.0], small_grid, TolPolicy(refine=False), jobs=2)
    assert res.indices() == [2, 0, 0, -2]
    assert all(ok for *_, ok in res.ledger_checks())
    assert all(ok for *_, ok in res.antisymmetry_checks())


def test_sweep_aborts_with_partial_rows(small_grid):
    # an unattainable gap requirement makes the first weight indeterminate
    with pytest.raises(SweepAborted) as info:
        alpha_sweep(model_b(), [0.2, 1.0], small_grid, TolPolicy(gap=1e30, refine=False))
    assert info.value.partial == []


def test_nullspace_model_b(small_grid):
    rep = nullspace_asymptotics(model_b(), small_grid, -1.0)
    assert rep.dim_ker == 2
    assert rep.expected == {"minus": -0.75, "plus": -0.75}
    for f in rep.fits:
        assert f.block == "V0" and f.k == 0
        assert f.z == pytest.approx(-0.75, rel=0.02)
    for side in ("minus", "plus"):
        assert rep.filtration[side] == pytest.approx([-0.75, 0.75], rel=0.02)


def test_nullspace_full_rank_is_superpolynomial(small_grid):
    rep = nullspace_asymptotics(get_model("MODEL-A"), small_grid, 0.0)
    assert rep.dim_ker == 1
    assert all(f.block == "V1" and f.superpolynomial for f in rep.fits)
