"""Index engines: boundary index, hybrid formula, deformation and transition models, channels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import indicial
from .model import (SIDES, ModelError, RadialOperator, Term, conjugate_to_b, fully_elliptic, make_operator,
                    split_blocks, v0_block_operator)
from .spectral import TolPolicy, WeightedGrid, numerical_index, shooting_oracle, v0_spectrum

GRADING_TOL = 1e-8


class BoundaryIndexError(ModelError):
    pass


# -- boundary points ---------------------------------------------------------


@dataclass(frozen=True)
class BoundaryIndexData:
    side: str
    v_plus: np.ndarray  # orthonormal columns spanning the +i eigenspace of Phi_inf
    grading: np.ndarray  # s_end * i A restricted to V+
    dim_plus: int
    dim_minus: int

    @property
    def index(self) -> int:
        return self.dim_plus - self.dim_minus


def boundary_index_data(P: RadialOperator, side: str) -> BoundaryIndexData:
    e = P.end(side)
    A = P.clifford
    phi = e.phi_infinity
    # Phi skew: -i Phi is Hermitian, V+ = its positive eigenspace
    H = -1j * phi
    H = 0.5 * (H + H.conj().T)
    mu, X = np.linalg.eigh(H)
    scale = max(1.0, np.abs(mu).max(initial=0.0))
    Vp = X[:, mu > GRADING_TOL * scale]
    if np.linalg.norm(A @ Vp - Vp @ (Vp.conj().T @ A @ Vp)) > 1e-8:
        raise BoundaryIndexError("V+ is not invariant under the Clifford action")
    Gr = e.orientation * 1j * (Vp.conj().T @ A @ Vp)
    Gr = 0.5 * (Gr + Gr.conj().T)
    ev = np.linalg.eigvalsh(Gr) if Vp.shape[1] else np.zeros(0)
    if np.any(np.abs(np.abs(ev) - 1) > 1e-8):
        raise BoundaryIndexError(f"grading eigenvalues {ev} are not +-1")
    return BoundaryIndexData(side, Vp, Gr, int((ev > 0).sum()), int((ev < 0).sum()))


def boundary_index_point(P: RadialOperator, side: str) -> int:
    """dim V+^+ - dim V+^- at one end (index of the graded boundary operator on a point)."""
    return boundary_index_data(P, side).index


def callias_index_fullrank(P: RadialOperator) -> int:
    if not fully_elliptic(P):
        raise BoundaryIndexError("operator is not fully elliptic")
    return sum(boundary_index_point(P, s) for s in SIDES)


@dataclass(frozen=True)
class IndexBreakdown:
    alpha: float
    boundary: int
    defect: int

    @property
    def total(self) -> int:
        return self.boundary + self.defect

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "boundary": self.boundary, "defect": self.defect, "total": self.total}


def hybrid_index(P: RadialOperator, alpha: float) -> IndexBreakdown:
    """Boundary term on V1 plus the defect of the V0 b-spectrum."""
    split = split_blocks(P)
    spec = v0_spectrum(P, split)
    return IndexBreakdown(alpha, sum(boundary_index_point(P, s) for s in SIDES), indicial.defect(spec, alpha))


# -- deformation family ------------------------------------------------------


@dataclass(frozen=True)
class ChiSpec:
    """chi = 1 for |t| >= 2 width, 0 for |t| <= width."""

    width: float = 2.0


def deform_family(P: RadialOperator, tau: float, chi: ChiSpec = ChiSpec()) -> RadialOperator:
    """P - i tau chi on the V0 block."""
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    split = split_blocks(P)
    Pm, Pp = split.end("minus").projector_v0, split.end("plus").projector_v0
    terms = list(P.terms)
    if tau:
        if np.array_equal(Pm, Pp):
            terms.append(Term("plateau", -1j * tau * Pp, {"width": chi.width, "side": "both"}))
        else:
            terms.append(Term("plateau", -1j * tau * Pp, {"width": chi.width, "side": "plus"}))
            terms.append(Term("plateau", -1j * tau * Pm, {"width": chi.width, "side": "minus"}))
    ends = [(e.n, e.epsilon, e.epsilon_prime) for e in P.ends]
    name = f"{P.name}[tau={tau:g}]" if P.name else ""
    return make_operator(P.clifford, terms, name=name, n=ends[0][0], epsilon=ends[0][1], epsilon_prime=ends[0][2])


# -- transition models -------------------------------------------------------


@dataclass(frozen=True)
class TransitionModel:
    zf_operator: RadialOperator
    tf_operators: dict  # zf side -> operator on the line, b-end at the opposite side
    phi_scale: float = 1.0

    @staticmethod
    def b_end_of(zf_side: str) -> str:
        return "minus" if zf_side == "plus" else "plus"

    @staticmethod
    def sc_end_of(zf_side: str) -> str:
        return zf_side


def tf_model(P: RadialOperator, phi_scale: float = 1.0) -> TransitionModel:
    """Interpolating models N_tf = A d/dt + B0 (1 - phi)/<t> - i phi, one per end of the V0 block.

    phi = eta/(1+eta), eta = exp(t/phi_scale) (reflected for the minus end), so
    phi = 0 at the b-end and 1 at the scattering end.
    """
    zf = v0_block_operator(P)
    out = {}
    m0 = zf.dim
    for side in SIDES:
        frag = conjugate_to_b(zf, side)
        B0 = frag.b_term0
        reflect = side == "minus"
        terms = [
            Term("logistic-tail", B0, {"power": 1.0, "scale": phi_scale}, reflect),
            Term("logistic", -1j * np.eye(m0), {"scale": phi_scale}, reflect),
        ]
        out[side] = make_operator(frag.clifford0, terms, name=f"{P.name}:tf[{side}]" if P.name else "")
    return TransitionModel(zf, out, phi_scale)


def profile_phi(model: TransitionModel, zf_side: str, t) -> np.ndarray:
    op = model.tf_operators[zf_side]
    return op.terms[1].scalar(t)


def _exact(M: np.ndarray) -> list:
    return [[(Fraction(float(z.real)), Fraction(float(z.imag))) for z in row] for row in np.asarray(M)]


@dataclass(frozen=True)
class FlipCheck:
    ok: bool
    diffs: dict  # side -> (max |M0 diff|, max |M1 + M1'|)


def indicial_flip_check(model: TransitionModel, overrides: dict | None = None) -> FlipCheck:
    """Exact check of I(N_tf, lam) = I(N_zf, -lam) at every end, coefficientwise."""
    ok = True
    diffs = {}
    for side, tf in model.tf_operators.items():
        zf = conjugate_to_b(model.zf_operator, side)
        bf = conjugate_to_b(tf, TransitionModel.b_end_of(side))
        M0t, M1t = bf.M0, bf.M1
        if overrides and side in overrides:
            M0t, M1t = overrides[side]
        e0 = _exact(M0t) == _exact(zf.M0)
        e1 = _exact(M1t) == _exact(-zf.M1)
        diffs[side] = (float(np.abs(M0t - zf.M0).max(initial=0.0)), float(np.abs(M1t + zf.M1).max(initial=0.0)))
        ok = ok and e0 and e1
    return FlipCheck(ok, diffs)


@dataclass
class TransitionReport:
    alpha: float
    tau_indices: dict  # (chi width, tau) -> index
    ind_zf: int
    ind_tf: int
    ind_tf_components: dict
    jump: dict
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def tf_index(model: TransitionModel, weight: float, grid: WeightedGrid, tol: TolPolicy) -> tuple[int, dict]:
    """ind(N_tf, weight): b-weight `weight` at the b-end of each component."""
    comps = {}
    for side, op in model.tf_operators.items():
        comps[side] = numerical_index(op, grid, weight, tol).index
    return sum(comps.values()), comps


def transition_additivity(P: RadialOperator, alpha: float, taus: Sequence[float] = (1e-3, 1e-2, 1e-1, 0.5),
                          grid: WeightedGrid | None = None, tol: TolPolicy | None = None,
                          chis: Sequence[ChiSpec] = (ChiSpec(2.0), ChiSpec(1.0)),
                          phi_scales: Sequence[float] = (1.0, 0.5)) -> TransitionReport:
    grid = grid or WeightedGrid()
    tol = tol or TolPolicy()
    tau_idx = {}
    for chi in chis:
        for tau in taus:
            tau_idx[(chi.width, tau)] = numerical_index(deform_family(P, tau, chi), grid, alpha, tol).index
    model = tf_model(P, phi_scales[0])
    ind_zf = numerical_index(model.zf_operator, grid, alpha, tol).index
    ind_tf, comps = tf_index(model, -alpha, grid, tol)
    # the tf index must not depend on the interpolating profile
    other_tf = {sc: tf_index(tf_model(P, sc), -alpha, grid, tol)[0] for sc in phi_scales[1:]}

    # jump of the tf index across the flipped root nearest to -alpha on the side of 0
    spec = v0_spectrum(model.zf_operator)
    vals = sorted({r.value for r in spec.roots})
    between = [r for r in vals if min(0.0, alpha) < r < max(0.0, alpha)] if alpha else []
    jump = {}
    if between:
        r0 = max(between, key=abs)
        # adjacent root on the side of 0, so that [a_in, alpha] brackets r0 alone
        toward = [r for r in vals if (r < r0 if alpha > 0 else r > r0)]
        nxt = min(toward, key=lambda r: abs(r - r0)) if toward else None
        a_in = 0.5 * (r0 + nxt) if nxt is not None else r0 - math.copysign(0.5, r0)
        w = sorted([-alpha + 0.0, -a_in + 0.0])
        lo, _ = tf_index(model, w[0], grid, tol)
        hi, _ = tf_index(model, w[1], grid, tol)
        tf_spec = indicial.BSpectrum()
        for side, op in model.tf_operators.items():
            tf_spec = tf_spec.merge(indicial.b_spectrum(conjugate_to_b(op, TransitionModel.b_end_of(side)),
                                                        window=(-math.inf, math.inf)))
        dim_f = sum(r.dim_f for r in spec.roots if abs(r.value - r0) < 1e-10)
        jump = {"root": r0, "weights": w, "ind_lo": lo, "ind_hi": hi, "jump": hi - lo, "dim_F": dim_f,
                "ledger": indicial.relative_index_ledger(tf_spec, w[0], w[1])}
    vals_tau = set(tau_idx.values())
    checks = [
        ("tau-constant", len(vals_tau) == 1, f"indices {sorted(vals_tau)}"),
        ("additivity", all(v == ind_zf + ind_tf for v in vals_tau), f"{sorted(vals_tau)} vs {ind_zf}+{ind_tf}"),
        ("zf+tf=0", ind_zf + ind_tf == 0, f"{ind_zf}+{ind_tf}"),
        ("flip", indicial_flip_check(model).ok, "pencil identity"),
        ("tf-profile", all(v == ind_tf for v in other_tf.values()), f"{ind_tf} vs {other_tf}"),
    ]
    if jump:
        checks.append(("tf-jump", jump["jump"] == -jump["dim_F"], f"jump {jump['jump']} vs -dim F = {-jump['dim_F']}"))
    return TransitionReport(alpha, {f"{k[0]:g}:{k[1]:g}": v for k, v in tau_idx.items()}, ind_zf, ind_tf, comps,
                            jump, checks)


# -- channels ----------------------------------------------------------------

CHANNEL_CLIFFORD = np.array([[0, -1], [1, 0]], dtype=complex)


def free_dirac_channel(kappa: int, c: float = 1.0) -> RadialOperator:
    """Partial wave kappa of the free 3-D Dirac operator plus i c tanh(r), moved to the line.

    With r = (t + <t>)/2 one has dr/dt = r/<t>; multiplying the radial system
    [[0, -d/dr + kappa/r], [d/dr + kappa/r, 0]] + Phi(r) by r/<t> gives
    A d/dt + kappa sigma1/<t> + (r/<t>) Phi(r).  The origin becomes a b-type
    end at t -> -inf with b-spectrum {-|kappa|, |kappa|}.
    """
    if kappa == 0:
        raise ValueError("kappa must be a nonzero integer")
    s1 = np.array([[0, 1], [1, 0]], dtype=complex)
    terms = [Term("power-decay", kappa * s1, {"power": 1.0, "parity": "even"}),
             Term("radial-tanh", 1j * c * np.eye(2))]
    return make_operator(CHANNEL_CLIFFORD, terms, name=f"channel[kappa={kappa}]")


@dataclass
class ChannelRow:
    kappa: int
    degeneracy: int
    dim_ker: int
    dim_coker: int
    index: int
    boundary_index: int

    def as_dict(self) -> dict:
        return dict(kappa=self.kappa, degeneracy=self.degeneracy, dim_ker=self.dim_ker, dim_coker=self.dim_coker,
                    index=self.index, boundary_index=self.boundary_index)


@dataclass
class ChannelReport:
    rows: list
    weighted_sum: int
    boundary_sum: int


def channel_family(kappa_max: int, c: float = 1.0) -> list[tuple[int, RadialOperator, int]]:
    out = []
    for k in range(1, kappa_max + 1):
        for kappa in (-k, k):
            out.append((kappa, free_dirac_channel(kappa, c), 2 * abs(kappa)))
    return out


def channel_index_sum(kappa_max: int = 6, c: float = 1.0, alpha: float = 0.0, grid: WeightedGrid | None = None,
                      tol: TolPolicy | None = None) -> ChannelReport:
    grid = grid or WeightedGrid()
    tol = tol or TolPolicy()
    rows = []
    for kappa, op, deg in channel_family(kappa_max, c):
        rep = numerical_index(op, grid, alpha, tol)
        bnd = sum(boundary_index_point(op, s) for s in SIDES)
        rows.append(ChannelRow(kappa, deg, rep.dim_ker, rep.dim_coker, rep.index, bnd))
    return ChannelReport(rows, sum(r.degeneracy * r.index for r in rows),
                         sum(r.degeneracy * r.boundary_index for r in rows))


# -- identity harness --------------------------------------------------------


@dataclass
class IdentityCheck:
    name: str
    passed: bool
    detail: dict


def predicted_index(P: RadialOperator, alpha: float) -> IndexBreakdown:
    return hybrid_index(P, alpha)


def verify_identities(P: RadialOperator, alphas: Sequence[float], grid: WeightedGrid | None = None,
                      tol: TolPolicy | None = None) -> list[IdentityCheck]:
    """numerical index = shooting oracle = boundary + defect at each weight, plus the flip identity."""
    grid = grid or WeightedGrid()
    tol = tol or TolPolicy()
    out = []
    for a in alphas:
        rep = numerical_index(P, grid, a, tol)
        sh = shooting_oracle(P, a)
        br = hybrid_index(P, a)
        ok = rep.index == br.total and (rep.dim_ker, rep.dim_coker) == (sh.dim_ker, sh.dim_coker) and not sh.flagged
        out.append(IdentityCheck(f"index[alpha={a:g}]", ok, {
            "alpha": a, "boundary": br.boundary, "defect": br.defect, "predicted": br.total,
            "numerical": rep.index, "dim_ker": rep.dim_ker, "dim_coker": rep.dim_coker,
            "shooting": [sh.dim_ker, sh.dim_coker], "gap_ratio": rep.gap_ratio}))
    split = split_blocks(P)
    if any(split.end(s).dim_v0 for s in SIDES):
        try:
            fc = indicial_flip_check(tf_model(P))
            out.append(IdentityCheck("flip", fc.ok, {"diffs": fc.diffs}))
        except ModelError as exc:
            out.append(IdentityCheck("flip", False, {"error": str(exc)}))
    return out


def random_commuting_unitary(P: RadialOperator, rng: np.random.Generator) -> np.ndarray:
    """exp(i H) with H a random real combination of iA, -i Phi_+ and their product (all commuting)."""
    from scipy.linalg import expm

    iA = 1j * P.clifford
    gens = [iA, np.eye(P.dim)]
    for s in SIDES:
        H = -1j * P.end(s).phi_infinity
        if np.linalg.norm(H @ iA - iA @ H) < 1e-12:
            gens += [H, 0.5 * (H @ iA + iA @ H)]
    X = sum(rng.normal() * g for g in gens)
    X = 0.5 * (X + X.conj().T)
    return expm(1j * X)


def conjugate_operator(P: RadialOperator, U: np.ndarray) -> RadialOperator:
    Uh = U.conj().T
    terms = [Term(tm.profile, U @ tm.matrix @ Uh, dict(tm.params), tm.reflect) for tm in P.terms]
    e = P.ends[0]
    return make_operator(U @ P.clifford @ Uh, terms, name=P.name, n=e.n, epsilon=e.epsilon,
                         epsilon_prime=e.epsilon_prime)


def grading_invariance_check(P: RadialOperator, rng: np.random.Generator, trials: int = 3) -> IdentityCheck:
    """Boundary indices are unchanged by unitaries commuting with A and Phi_inf."""
    base = [boundary_index_point(P, s) for s in SIDES]
    seen = []
    for _ in range(trials):
        Q = conjugate_operator(P, random_commuting_unitary(P, rng))
        seen.append([boundary_index_point(Q, s) for s in SIDES])
    return IdentityCheck("grading-invariance", all(x == base for x in seen), {"base": base, "trials": seen})
