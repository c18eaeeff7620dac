"""Weighted discretization, singular-value index counting, shooting oracle.

The line is mapped by t = t0 sinh(s) with s uniform, so the grid is uniform
near the core and uniform in log<t> out to <t> ~ 10^L.  Unknowns sit on the
nodes, equations on the midpoints (fourth-order staggered differences).  At
each truncation point the boundary node is restricted to the admissible
subspace of the frozen asymptotic system (exponents z > alpha in x = 1/|t|
for b-type directions, exponential decay for scattering directions); the
non-admissible directions are set to zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate, linalg

from . import indicial
from .model import (SIDES, BlockSplit, ModelError, RadialOperator, conjugate_to_b, formal_adjoint, split_blocks,
                    split_end)
from .phg import LeadingFit, fit_leading_order

ROOT_MARGIN = 0.02
MIN_NODES = 200
MIN_NODES_PER_DECADE = 24
DENSE_LIMIT = 600


class SpectralError(RuntimeError):
    pass


class IndeterminateIndex(SpectralError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class WeightError(SpectralError, ValueError):
    pass


class SweepAborted(SpectralError):
    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


# -- grid --------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedGrid:
    nodes: int = 1200
    decades: float = 4.0
    t0: float = 1.0

    def __post_init__(self):
        if self.nodes < MIN_NODES:
            raise WeightError(f"need at least {MIN_NODES} nodes")
        if self.nodes_per_decade < MIN_NODES_PER_DECADE:
            raise WeightError(f"tail resolution {self.nodes_per_decade:.1f} nodes/decade < {MIN_NODES_PER_DECADE}")

    @property
    def s_max(self) -> float:
        return float(np.arccosh(10.0**self.decades))

    @property
    def s(self) -> np.ndarray:
        return np.linspace(-self.s_max, self.s_max, self.nodes)

    @property
    def ds(self) -> float:
        return 2 * self.s_max / (self.nodes - 1)

    @property
    def nodes_per_decade(self) -> float:
        return math.log(10.0) / (2 * self.s_max / (self.nodes - 1))

    @property
    def t(self) -> np.ndarray:
        return self.t0 * np.sinh(self.s)

    @property
    def jac(self) -> np.ndarray:
        return self.t0 * np.cosh(self.s)

    @property
    def s_mid(self) -> np.ndarray:
        s = self.s
        return 0.5 * (s[:-1] + s[1:])

    @property
    def t_mid(self) -> np.ndarray:
        return self.t0 * np.sinh(self.s_mid)

    @property
    def jac_mid(self) -> np.ndarray:
        return self.t0 * np.cosh(self.s_mid)

    def refined(self, factor: float = 1.5) -> "WeightedGrid":
        return replace(self, nodes=int(round(self.nodes * factor)))

    def extended(self, extra_decades: float = 1.0) -> "WeightedGrid":
        # keep the node density of the tail fixed
        nodes = int(round(self.nodes * (self.decades + extra_decades) / self.decades))
        return replace(self, nodes=nodes, decades=self.decades + extra_decades)


@dataclass(frozen=True)
class WeightSpec:
    """b-weight alpha on V0 and scattering weight beta on V1 (beta = alpha + 1/2 by default)."""

    alpha: float
    beta: float | None = None
    adjoint: bool = False

    @property
    def beta_eff(self) -> float:
        return self.alpha + 0.5 if self.beta is None else self.beta

    def exponents(self) -> dict:
        """Powers of <t> on (V0, V1) for input and output."""
        a, b = self.alpha, self.beta_eff
        if not self.adjoint:
            return {"in": (a - 0.5, b), "out": (a + 0.5, b)}
        # dual spaces: W_in* = W_out^-1, W_out* = W_in^-1
        return {"in": (-a - 0.5, -b), "out": (-a + 0.5, -b)}

    @property
    def threshold(self) -> float:
        """Admissible exponents z > threshold for b-type directions."""
        return self.exponents()["in"][0] + 0.5


def _bracket(t):
    return np.sqrt(1.0 + t * t)


def _weights_at(t: np.ndarray, split: BlockSplit, powers: tuple) -> np.ndarray:
    m = split.end("plus").projector_v0.shape[0]
    out = np.empty((t.size, m, m), dtype=complex)
    br = _bracket(t)
    for side in SIDES:
        esp = split.end(side)
        mask = t >= 0 if side == "plus" else t < 0
        if not np.any(mask):
            continue
        w0 = br[mask] ** powers[0]
        w1 = br[mask] ** powers[1]
        out[mask] = w0[:, None, None] * esp.projector_v0 + w1[:, None, None] * esp.projector_v1
    return out


def build_weights(grid: WeightedGrid, split: BlockSplit, weight: WeightSpec) -> tuple[np.ndarray, np.ndarray]:
    """(W_in at nodes, W_out at midpoints), each an array of m x m diagonal-in-block matrices."""
    ex = weight.exponents()
    return _weights_at(grid.t, split, ex["in"]), _weights_at(grid.t_mid, split, ex["out"])


def check_weight(alpha: float, spectrum: indicial.BSpectrum, margin: float = ROOT_MARGIN):
    d = spectrum.distance(alpha)
    if d < margin:
        raise WeightError(f"weight {alpha} within {d:.3g} of the b-spectrum (margin {margin})")


def v0_spectrum(P: RadialOperator, split: BlockSplit | None = None) -> indicial.BSpectrum:
    split = split or split_blocks(P)
    spec = indicial.BSpectrum()
    for side in SIDES:
        frag = conjugate_to_b(P, side, split)
        if frag.dim:
            spec = spec.merge(indicial.b_spectrum(frag, window=(-math.inf, math.inf)))
    return spec


# -- assembly ----------------------------------------------------------------


def _stencil(offsets, deriv: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


_OFFS_INTERIOR = (-1.5, -0.5, 0.5, 1.5)
_OFFS_LEFT = (-0.5, 0.5, 1.5, 2.5)
_OFFS_RIGHT = (-2.5, -1.5, -0.5, 0.5)


@dataclass
class DiscretizedOperator:
    matrix: sp.csc_matrix
    W_in: np.ndarray
    W_out: np.ndarray
    grid: WeightedGrid
    weight: WeightSpec
    end_bases: dict  # side -> (orthonormal basis Q in scaled unknowns, admissible E in fiber)
    dim: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def discrete_index(self) -> int:
        p, q = self.matrix.shape
        return q - p

    def nodal(self, y: np.ndarray) -> np.ndarray:
        """Undo the scaling and the weights: coefficient vector -> u(t_j), shape (N, m)."""
        g, m = self.grid, self.dim
        N = g.nodes
        q = np.sqrt(g.jac * g.ds)
        Qm = self.end_bases["minus"][0]
        Qp = self.end_bases["plus"][0]
        km, kp = Qm.shape[1], Qp.shape[1]
        v = np.zeros((N, m), dtype=complex)
        v[0] = Qm @ y[:km] if km else 0.0
        v[1:N - 1] = y[km:km + (N - 2) * m].reshape(N - 2, m)
        v[N - 1] = Qp @ y[km + (N - 2) * m:] if kp else 0.0
        u = np.linalg.solve(self.W_in, (v / q[:, None])[..., None])[..., 0]
        return u


def _admissible_subspace(P: RadialOperator, t_end: float, threshold: float) -> np.ndarray:
    A = P.clifford
    G = -np.linalg.solve(A, P.potential(t_end))
    K = abs(t_end) * (G if t_end > 0 else -G)
    # local solutions behave like |t|^mu for the eigenvalues mu of K; admissible
    # means decaying faster than |t|^-threshold
    T, Z, sdim = linalg.schur(K.astype(complex), output="complex", sort=lambda z: z.real < -threshold)
    return Z[:, :sdim]


def discretize(P: RadialOperator, grid: WeightedGrid, weight: WeightSpec,
               split: BlockSplit | None = None) -> DiscretizedOperator:
    """M = W_out P_h W_in^-1 with admissible-subspace closures at both truncation ends."""
    for e in P.ends:
        if e.n != 1:
            raise ModelError("numerics are implemented for n = 1 (the line) only")
    split = split or split_blocks(P)
    m = P.dim
    N = grid.nodes
    ds = grid.ds
    W_in, W_out = build_weights(grid, split, weight)
    W_in_inv = np.linalg.inv(W_in)
    col_scale = 1.0 / np.sqrt(grid.jac * ds)
    row_scale = np.sqrt(grid.jac_mid * ds)

    nm = N - 1
    idx = np.empty((nm, 4), dtype=int)
    dw = np.empty((nm, 4))
    iw = np.empty((nm, 4))
    base = np.arange(nm)
    idx[:] = base[:, None] + np.array([-1, 0, 1, 2])
    dw[:] = _stencil(_OFFS_INTERIOR, 1)
    iw[:] = _stencil(_OFFS_INTERIOR, 0)
    idx[0] = [0, 1, 2, 3]
    dw[0] = _stencil(_OFFS_LEFT, 1)
    iw[0] = _stencil(_OFFS_LEFT, 0)
    idx[-1] = [N - 4, N - 3, N - 2, N - 1]
    dw[-1] = _stencil(_OFFS_RIGHT, 1)
    iw[-1] = _stencil(_OFFS_RIGHT, 0)
    dw /= ds

    A = P.clifford
    C = P.potential(grid.t_mid)  # (nm, m, m)
    # local operator block for midpoint i and stencil slot k
    loc = (dw / grid.jac_mid[:, None])[:, :, None, None] * A[None, None] + iw[:, :, None, None] * C[:, None]
    blk = row_scale[:, None, None, None] * np.einsum("iab,ikbc->ikac", W_out, loc)
    blk = np.einsum("ikab,ikbc->ikac", blk, W_in_inv[idx]) * col_scale[idx][:, :, None, None]

    rows = np.broadcast_to(base[:, None, None, None] * m + np.arange(m)[None, None, :, None], blk.shape)
    cols = np.broadcast_to(idx[:, :, None, None] * m + np.arange(m)[None, None, None, :], blk.shape)
    full = sp.csc_matrix((blk.ravel(), (rows.ravel(), cols.ravel())), shape=(nm * m, N * m))

    thr = weight.threshold
    bases = {}
    parts = []
    t = grid.t
    for side, j in (("minus", 0), ("plus", N - 1)):
        E = _admissible_subspace(P, t[j], thr)
        V = (W_in[j] @ E) / col_scale[j]
        Q = np.linalg.qr(V)[0] if V.shape[1] else V
        bases[side] = (Q, E)
    Qm, Qp = bases["minus"][0], bases["plus"][0]
    if Qm.shape[1]:
        parts.append(full[:, :m] @ sp.csc_matrix(Qm))
    parts.append(full[:, m:(N - 1) * m])
    if Qp.shape[1]:
        parts.append(full[:, (N - 1) * m:] @ sp.csc_matrix(Qp))
    M = sp.hstack(parts).tocsc()
    M.eliminate_zeros()
    return DiscretizedOperator(M, W_in, W_out, grid, weight, bases, m)


# -- singular values ---------------------------------------------------------


def _norm_bound(M) -> float:
    return float(math.sqrt(spla.norm(M, 1) * spla.norm(M, np.inf)))


@dataclass
class SmallSingular:
    values: np.ndarray  # ascending, excluding the |p - q| structural zeros
    p: int
    q: int
    floor: float
    right_vectors: np.ndarray | None = None  # columns, matching values; plus structural null (q > p)
    structural: np.ndarray | None = None


def smallest_singular_values(M, k: int = 8, method: str = "auto", vectors: bool = False) -> SmallSingular:
    p, q = M.shape
    floor = 64 * np.finfo(float).eps * _norm_bound(M)
    if method == "auto":
        method = "dense" if min(p, q) <= DENSE_LIMIT else "sparse"
    if method == "dense":
        Md = M.toarray() if sp.issparse(M) else np.asarray(M)
        if vectors:
            U, s, Vh = np.linalg.svd(Md)
            order = np.argsort(s)
            s = s[order]
            V = Vh.conj().T
            right = V[:, :min(p, q)][:, order]
            struct = V[:, min(p, q):] if q > p else None
            return SmallSingular(s[:k], p, q, floor, right[:, :k], struct)
        s = np.sort(linalg.svdvals(Md))
        return SmallSingular(s[:k], p, q, floor)
    if method != "sparse":
        raise ValueError(f"unknown method {method!r}")
    H = sp.bmat([[None, M], [M.conj().T, None]]).tocsc()
    extra = abs(p - q)
    nev = min(extra + 2 * k, p + q - 2)
    try:
        # fixed start vector: ARPACK's default is random and would make reports irreproducible
        v0 = np.random.default_rng(0).standard_normal(H.shape[0])
        res = spla.eigsh(H, k=nev, sigma=1e-8 * max(1.0, floor), which="LM", return_eigenvectors=vectors, v0=v0)
    except (spla.ArpackNoConvergence, RuntimeError) as exc:
        raise IndeterminateIndex(f"eigensolver failure: {exc}") from exc
    if vectors:
        w, X = res
    else:
        w, X = res, None
    order = np.argsort(np.abs(w))
    a = np.abs(w)[order]
    vals = a[extra:][::2]
    if not vectors:
        return SmallSingular(vals, p, q, floor)
    Y = X[p:, order] * math.sqrt(2.0)  # right-singular parts of the augmented eigenvectors
    return SmallSingular(vals, p, q, floor, Y, None)


def count_small(values: np.ndarray, floor: float, tol_gap: float) -> tuple[int, float]:
    """Number of singular values below the largest relative gap, and that gap."""
    v = np.asarray(values, dtype=float)
    best_j, best_r = 0, 0.0
    prev = floor
    for j, x in enumerate(v):
        r = x / max(prev, floor)
        if r > best_r:
            best_j, best_r = j, r
        prev = x
    if best_r < tol_gap:
        raise IndeterminateIndex(f"no decisive singular-value gap (best ratio {best_r:.3g} < {tol_gap:.3g})",
                                 {"singular_values": v.tolist(), "floor": floor})
    return best_j, float(best_r)


@dataclass(frozen=True)
class TolPolicy:
    gap: float = 1e3
    k_sv: int = 8
    method: str = "auto"
    refine: bool = True


@dataclass
class CountResult:
    dim_ker: int
    dim_coker: int
    gap_ker: float
    gap_coker: float
    sv_ker: list
    sv_coker: list
    shape: tuple
    discrete_index: int
    nodes: int
    decades: float

    @property
    def gap_ratio(self) -> float:
        return min(self.gap_ker, self.gap_coker)

    def as_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "decades": self.decades,
            "dim_ker": self.dim_ker,
            "dim_coker": self.dim_coker,
            "gap_ratio": self.gap_ratio,
        }


def _kernel_dim(D: DiscretizedOperator, tol: TolPolicy) -> tuple[int, float, np.ndarray]:
    p, q = D.shape
    k = tol.k_sv
    while True:
        ss = smallest_singular_values(D.matrix, k=k, method=tol.method)
        n, gap = count_small(ss.values, ss.floor, tol.gap)
        if n < len(ss.values) - 1 or k >= min(p, q):
            break
        k *= 2
    return n + max(q - p, 0), gap, ss.values


def count_kernels(P: RadialOperator, grid: WeightedGrid, weight: WeightSpec, tol: TolPolicy,
                  split: BlockSplit | None = None) -> CountResult:
    split = split or split_blocks(P)
    D = discretize(P, grid, replace(weight, adjoint=False), split)
    Da = discretize(formal_adjoint(P), grid, replace(weight, adjoint=True), split)
    nk, gk, sk = _kernel_dim(D, tol)
    nc, gc, sc = _kernel_dim(Da, tol)
    return CountResult(nk, nc, gk, gc, [float(x) for x in sk], [float(x) for x in sc], D.shape,
                       D.discrete_index, grid.nodes, grid.decades)


@dataclass
class IndexReport:
    alpha: float
    beta: float
    dim_ker: int
    dim_coker: int
    gap_ratio: float
    nodes: int
    decades: float
    refinements: list = field(default_factory=list)
    singular_values: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    discrete_index: int = 0

    @property
    def index(self) -> int:
        return self.dim_ker - self.dim_coker

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "dim_ker": self.dim_ker,
            "dim_coker": self.dim_coker,
            "index": self.index,
            "gap_ratio": self.gap_ratio,
            "grid_nodes": self.nodes,
            "grid_decades": self.decades,
            "refinements": self.refinements,
            "singular_values": self.singular_values,
        }


def numerical_index(P: RadialOperator, grid: WeightedGrid | None = None, alpha: float = 0.0,
                    tol: TolPolicy | None = None, beta: float | None = None,
                    split: BlockSplit | None = None) -> IndexReport:
    """dim ker / dim coker on the weighted spaces, audited by two grid refinements."""
    grid = grid or WeightedGrid()
    tol = tol or TolPolicy()
    split = split or split_blocks(P)
    check_weight(alpha, v0_spectrum(P, split))
    weight = WeightSpec(alpha, beta)
    base = count_kernels(P, grid, weight, tol, split)
    history = [base.as_dict()]
    if tol.refine:
        for g in (grid.refined(1.5), grid.extended(1.0)):
            r = count_kernels(P, g, weight, tol, split)
            history.append(r.as_dict())
            if (r.dim_ker, r.dim_coker) != (base.dim_ker, base.dim_coker):
                raise IndeterminateIndex("kernel dimensions change under grid refinement", {"history": history})
    return IndexReport(alpha, weight.beta_eff, base.dim_ker, base.dim_coker, base.gap_ratio, grid.nodes,
                       grid.decades, history, {"ker": base.sv_ker, "coker": base.sv_coker},
                       discrete_index=base.discrete_index)


# -- shooting oracle ---------------------------------------------------------


@dataclass
class ShootingSide:
    side: str
    start: np.ndarray  # admissible directions at the start point
    t_start: float
    at_zero: np.ndarray  # orthonormal basis of the propagated space at t = 0


@dataclass
class ShootingResult:
    dim_ker: int
    dim_coker: int
    matching_sv: dict
    condition: dict
    flagged: bool

    @property
    def index(self) -> int:
        return self.dim_ker - self.dim_coker


def _start_space(P: RadialOperator, side: str, threshold: float, t_b: float, t_sc: float):
    e = P.end(side)
    esp = split_end(P, side)
    cols = []
    if esp.dim_v0:
        frag = conjugate_to_b(P, side)
        spec = indicial.b_spectrum(frag, window=(-math.inf, math.inf))
        for r in spec.roots:
            if r.value > threshold:
                cols.append(esp.basis_v0 @ r.generalized_basis)
    H = P.clifford @ e.phi_infinity
    H = 0.5 * (H + H.conj().T)
    mu, X = np.linalg.eigh(H)
    # u' = A C u ~ A Phi u: decay toward +inf needs mu < 0, toward -inf mu > 0
    scale = max(1.0, np.abs(mu).max(initial=0.0))
    good = mu < -1e-8 * scale if side == "plus" else mu > 1e-8 * scale
    if np.any(good):
        cols.append(X[:, good])
    S = np.hstack(cols) if cols else np.zeros((P.dim, 0), dtype=complex)
    if esp.dim_v0:
        T = t_b
    elif np.any(np.abs(mu) > 1e-8 * scale):
        T = float(np.clip(30.0 / np.abs(mu[np.abs(mu) > 1e-8 * scale]).min(), 5.0, 1e3))
    else:
        T = t_sc
    return S, (T if side == "plus" else -T)


def _propagate(P: RadialOperator, S: np.ndarray, t_start: float, rtol: float) -> np.ndarray:
    m, k = S.shape
    if k == 0:
        return S
    A = P.clifford

    def rhs(t, y):
        Y = y.reshape(m, k)
        return (A @ P.potential(t) @ Y).ravel()

    # segment the path so that no piece amplifies by more than ~e^20
    a = abs(t_start)
    marks = [a]
    while marks[-1] > 1.0:
        marks.append(max(1.0, marks[-1] / 2))
    marks.append(0.0)
    pts = [marks[0]]
    for lo_hi in zip(marks[:-1], marks[1:]):
        hi, lo = lo_hi
        cnorm = max(np.linalg.norm(P.potential(x if t_start > 0 else -x), 2) for x in (hi, lo, 0.5 * (hi + lo)))
        pieces = max(1, int(math.ceil((hi - lo) * cnorm / 20.0)))
        pts.extend(np.linspace(hi, lo, pieces + 1)[1:])
    sgn = 1.0 if t_start > 0 else -1.0
    Y, _ = np.linalg.qr(S)
    for hi, lo in zip(pts[:-1], pts[1:]):
        sol = integrate.solve_ivp(rhs, (sgn * hi, sgn * lo), Y.ravel(), method="DOP853", rtol=rtol, atol=1e-14)
        if not sol.success:
            raise SpectralError(f"integration failed: {sol.message}")
        Y, _ = np.linalg.qr(sol.y[:, -1].reshape(m, k))
    return Y


def _match(P: RadialOperator, threshold: float, t_b: float, rtol: float) -> tuple[int, np.ndarray, float, bool]:
    spaces = []
    for side in SIDES:
        S, t0 = _start_space(P, side, threshold, t_b, 30.0)
        spaces.append(_propagate(P, S, t0, rtol))
    Sm, Sp = spaces
    km, kp = Sm.shape[1], Sp.shape[1]
    if km == 0 or kp == 0:
        return 0, np.zeros(0), 1.0, False
    sv = linalg.svdvals(np.hstack([Sm, Sp]))
    rank = int((sv > 1e-6).sum())
    nonzero = sv[sv > 1e-6]
    cond = float(nonzero.max() / nonzero.min()) if nonzero.size else math.inf
    ambiguous = bool(np.any((sv > 1e-10) & (sv < 1e-4))) or cond > 1e8
    return km + kp - rank, sv, cond, ambiguous


def shooting_oracle(P: RadialOperator, alpha: float, t_b: float = 1e3, rtol: float = 1e-10) -> ShootingResult:
    """Kernel and cokernel dimensions by integrating the admissible solution spaces to t = 0."""
    nk, svk, ck, fk = _match(P, alpha, t_b, rtol)
    nc, svc, cc, fc = _match(formal_adjoint(P), -alpha, t_b, rtol)
    return ShootingResult(nk, nc, {"ker": svk.tolist(), "coker": svc.tolist()}, {"ker": ck, "coker": cc}, fk or fc)


# -- nullspace asymptotics ---------------------------------------------------


@dataclass
class NullspaceFit:
    side: str
    vector: int
    block: str  # "V0" or "V1"
    z: float
    k: int
    residual: float
    superpolynomial: bool = False
    low_confidence: bool = False
    expected_z: float | None = None


@dataclass
class NullspaceReport:
    alpha: float
    dim_ker: int
    fits: list
    filtration: dict  # side -> exponents of an adapted basis, most growing first
    expected: dict  # side -> r = min{ root > alpha }


def kernel_vectors(P: RadialOperator, grid: WeightedGrid, weight: WeightSpec, dim: int,
                   split: BlockSplit | None = None, method: str = "auto") -> tuple[np.ndarray, DiscretizedOperator]:
    """Nodal kernel basis, shape (dim, N, m)."""
    D = discretize(P, grid, weight, split)
    p, q = D.shape
    ss = smallest_singular_values(D.matrix, k=max(dim, 1) + 2, method=method, vectors=True)
    cols = []
    if ss.structural is not None:
        cols.append(ss.structural)
    cols.append(ss.right_vectors)
    Y = np.hstack(cols)
    # the kernel is the span of the right vectors with the smallest singular values
    res = np.linalg.norm(D.matrix @ Y, axis=0) / np.linalg.norm(Y, axis=0)
    order = np.argsort(res)
    Yk = Y[:, order[:dim]]
    Yk = np.linalg.qr(Yk)[0]
    U = np.stack([D.nodal(y) for y in Yk.T]) if dim else np.zeros((0, grid.nodes, P.dim))
    return U, D


def _window_samples(t: np.ndarray, vals: np.ndarray, side: str, lo: float, hi: float, count: int = 16):
    tt = t if side == "plus" else -t
    sel = np.where((tt >= lo) & (tt <= hi))[0]
    if sel.size < 8:
        raise SpectralError("too few nodes in the fit window")
    pick = sel[np.unique(np.linspace(0, sel.size - 1, count).round().astype(int))]
    pick = pick[np.argsort(-tt[pick])]  # x = 1/|t| decreasing toward 0 last
    return [(1.0 / tt[i], vals[i]) for i in pick[::-1]][::-1]


def fit_tail(t: np.ndarray, vals: np.ndarray, side: str, lo: float, hi: float) -> LeadingFit:
    """Leading order in x = 1/|t| of nodal values on lo <= |t| <= hi at one end."""
    return fit_leading_order(_window_samples(t, vals, side, lo, hi))


def _superpolynomial(t, vals, side, windows=((2.0, 8.0), (8.0, 25.0))) -> tuple[bool, list]:
    zs = []
    for lo, hi in windows:
        try:
            zs.append(fit_tail(t, vals, side, lo, hi).z)
        except (SpectralError, ValueError):
            return False, zs
    return bool(zs[1] > 1.5 * zs[0] + 1.0), zs


def nullspace_asymptotics(P: RadialOperator, grid: WeightedGrid | None = None, alpha: float = 0.0,
                          tol: TolPolicy | None = None, window: tuple | None = None) -> NullspaceReport:
    grid = grid or WeightedGrid()
    tol = tol or TolPolicy()
    split = split_blocks(P)
    rep = numerical_index(P, grid, alpha, replace(tol, refine=False), split=split)
    if rep.dim_ker == 0:
        raise SpectralError("trivial kernel")
    U, D = kernel_vectors(P, grid, WeightSpec(alpha), rep.dim_ker, split)
    t = grid.t
    lo, hi = window or (10.0, 10.0 ** (grid.decades - 1))
    fits, filtration, expected = [], {}, {}
    for side in SIDES:
        esp = split.end(side)
        roots = [r.value for r in v0_spectrum(P, split).at(side).roots if r.value > alpha]
        expected[side] = min(roots) if roots else None
        for i, u in enumerate(U):
            if esp.dim_v0:
                v0 = u @ esp.basis_v0.conj()
                f = fit_tail(t, v0, side, lo, hi)
                fits.append(NullspaceFit(side, i, "V0", f.z, f.k, f.residual, False, f.low_confidence,
                                         expected[side]))
            if esp.dim_v1:
                v1 = u @ esp.basis_v1.conj()
                sup, zs = _superpolynomial(t, v1, side)
                z = zs[-1] if zs else math.nan
                fits.append(NullspaceFit(side, i, "V1", z, 0, 0.0, sup, not sup))
        if esp.dim_v0 and U.shape[0]:
            filtration[side] = _filtration(t, U, esp.basis_v0, side, lo, hi)
    return NullspaceReport(alpha, rep.dim_ker, fits, filtration, expected)


def _filtration(t, U, V0, side, lo, hi) -> list:
    """Exponents of a kernel basis adapted to decay at this end (generic first)."""
    tt = t if side == "plus" else -t
    near = np.where((tt >= lo) & (tt <= 2 * lo))[0]
    far = np.where((tt >= hi / 2) & (tt <= hi))[0]
    vals = np.einsum("knm,mj->knj", U, V0.conj())
    Fn = vals[:, near].reshape(U.shape[0], -1).T
    Ff = vals[:, far].reshape(U.shape[0], -1).T
    # generalized eigenvectors of (far Gram, near Gram): ratio far/near per direction
    w, C = linalg.eigh(Ff.conj().T @ Ff, Fn.conj().T @ Fn)
    out = []
    for c in C.T[::-1]:
        comb = np.einsum("k,knj->nj", c, vals)
        out.append(fit_tail(t, comb, side, lo, hi).z)
    return out


# -- sweeps ------------------------------------------------------------------


@dataclass
class SweepRow:
    alpha: float
    dim_ker: int
    dim_coker: int
    index: int
    gap_ratio: float
    grid_nodes: int

    def as_dict(self) -> dict:
        return dict(alpha=self.alpha, dim_ker=self.dim_ker, dim_coker=self.dim_coker, index=self.index,
                    gap_ratio=self.gap_ratio, grid_nodes=self.grid_nodes)


@dataclass
class SweepResult:
    rows: list
    spectrum: indicial.BSpectrum

    def indices(self) -> list[int]:
        return [r.index for r in self.rows]

    def ledger_checks(self) -> list[tuple[float, float, int, int, bool]]:
        """(a1, a2, index drop, ledger value, ok) for consecutive sweep points."""
        out = []
        rows = sorted(self.rows, key=lambda r: r.alpha)
        for r1, r2 in zip(rows[:-1], rows[1:]):
            led = indicial.relative_index_ledger(self.spectrum, r1.alpha, r2.alpha)
            drop = r1.index - r2.index
            out.append((r1.alpha, r2.alpha, drop, led, drop == led))
        return out

    def antisymmetry_checks(self) -> list[tuple[float, int, int, bool]]:
        by = {r.alpha: r.index for r in self.rows}
        out = []
        for a, i in sorted(by.items()):
            if a > 0 and -a in by:
                out.append((a, i, by[-a], i == -by[-a]))
        return out


def alpha_sweep(P: RadialOperator, alphas, grid: WeightedGrid | None = None, tol: TolPolicy | None = None,
                jobs: int = 1) -> SweepResult:
    grid = grid or WeightedGrid()
    tol = tol or TolPolicy()
    split = split_blocks(P)
    spec = v0_spectrum(P, split)
    for a in alphas:
        check_weight(a, spec)

    def job(a):
        return numerical_index(P, grid, a, tol, split=split)

    rows = []
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            futures = [ex.submit(job, a) for a in alphas]
            results = []
            for f in futures:
                try:
                    results.append(f.result())
                except IndeterminateIndex as exc:
                    raise SweepAborted(str(exc), [SweepRow(r.alpha, r.dim_ker, r.dim_coker, r.index, r.gap_ratio,
                                                           r.nodes) for r in results]) from exc
    else:
        results = []
        for a in alphas:
            try:
                results.append(job(a))
            except IndeterminateIndex as exc:
                raise SweepAborted(str(exc), [SweepRow(r.alpha, r.dim_ker, r.dim_coker, r.index, r.gap_ratio,
                                                       r.nodes) for r in results]) from exc
    for r in results:
        rows.append(SweepRow(r.alpha, r.dim_ker, r.dim_coker, r.index, r.gap_ratio, r.nodes))
    return SweepResult(rows, spec)
