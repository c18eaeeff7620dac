"""Radial Callias-type operators A d/dt + C(t) on the line with two conic ends.

Each end of the line is an asymptotically conic end with boundary defining
function x = 1/|t|.  The potential is a finite sum of named scalar profiles
times constant matrices, which keeps models serializable and lets the
per-end asymptotic data (Phi at infinity, the 1/|t| coefficient) be read off
exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import special

from .phg import PhgExpansion

SIDES = ("minus", "plus")

# Sign multiplying the Clifford term in the b-reduced pencil at each end:
# at the plus end d/dt = -x^2 d/dx, at the minus end d/dt = +x^2 d/dx.
# Confirmed against the shooting oracle (MODEL-B staircase direction).
ORIENTATION = {"plus": -1, "minus": +1}

RANK_ZERO_TOL = 1e-12
RANK_NONZERO_TOL = 1e-8
DECAY_SAMPLES = (1e1, 1e2, 1e3, 1e4)
DECAY_SLACK = 0.05

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


class ModelError(ValueError):
    pass


class IllConditionedRank(ModelError):
    pass


# -- profiles ----------------------------------------------------------------

PROFILES = ("const", "tanh", "exp-decay", "power-decay", "logistic", "logistic-tail", "plateau", "radial-tanh")


def _bracket(t):
    return np.sqrt(1.0 + t * t)


def _smooth_step(u):
    # C-infinity step: 1 for u <= 0, 0 for u >= 1
    u = np.asarray(u, dtype=float)
    out = np.where(u <= 0, 1.0, 0.0)
    mid = (u > 0) & (u < 1)
    if np.any(mid):
        v = u[mid]
        out[mid] = special.expit(1.0 / v - 1.0 / (1.0 - v))
    return out


def _profile_raw(name: str, t: np.ndarray, p: dict) -> np.ndarray:
    scale = float(p.get("scale", 1.0))
    if name == "const":
        return np.ones_like(t)
    if name == "tanh":
        return np.tanh(t / scale)
    if name == "exp-decay":
        return np.exp(-np.abs(t) / scale)
    if name == "power-decay":
        power = float(p.get("power", 1.0))
        out = _bracket(t) ** (-power)
        if p.get("parity", "even") == "odd":
            out = out * t / _bracket(t)
        return out
    if name == "logistic":
        return special.expit(t / scale)
    if name == "logistic-tail":
        power = float(p.get("power", 1.0))
        return special.expit(-t / scale) * _bracket(t) ** (-power)
    if name == "plateau":
        width = float(p.get("width", 1.0))
        side = p.get("side", "both")
        out = 1.0 - _smooth_step(np.abs(t) / width - 1.0)
        if side == "plus":
            out = np.where(t > 0, out, 0.0)
        elif side == "minus":
            out = np.where(t < 0, out, 0.0)
        return out
    if name == "radial-tanh":
        # (r/<t>) tanh(r/scale), r = (t + <t>)/2 the radius of the half-line chart
        r = 0.5 * (t + _bracket(t))
        return r / _bracket(t) * np.tanh(r / scale)
    raise ModelError(f"unknown profile {name!r}")


def _profile_asymptotics_raw(name: str, side: str, p: dict) -> tuple[float, float]:
    """(limit, coefficient of 1/|t|) of the unreflected profile at the given end."""
    sgn = 1.0 if side == "plus" else -1.0
    power = float(p.get("power", 1.0))
    if name == "const":
        return 1.0, 0.0
    if name == "tanh":
        return sgn, 0.0
    if name == "exp-decay":
        return 0.0, 0.0
    if name == "power-decay":
        if power < 1.0:
            return 0.0, 0.0
        if power == 1.0:
            return 0.0, (sgn if p.get("parity", "even") == "odd" else 1.0)
        return 0.0, 0.0
    if name == "logistic":
        return (1.0 if side == "plus" else 0.0), 0.0
    if name == "logistic-tail":
        if side == "minus" and power == 1.0:
            return 0.0, 1.0
        return 0.0, 0.0
    if name == "plateau":
        s = p.get("side", "both")
        return (1.0 if s in ("both", side) else 0.0), 0.0
    if name == "radial-tanh":
        return (1.0 if side == "plus" else 0.0), 0.0
    raise ModelError(f"unknown profile {name!r}")


@dataclass(frozen=True)
class Term:
    """profile(t) * matrix; reflect=True evaluates the profile at -t."""

    profile: str
    matrix: np.ndarray
    params: dict = field(default_factory=dict)
    reflect: bool = False

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ModelError(f"unknown profile {self.profile!r}")
        object.__setattr__(self, "matrix", np.array(self.matrix, dtype=complex))

    def scalar(self, t):
        t = np.asarray(t, dtype=float)
        return _profile_raw(self.profile, -t if self.reflect else t, self.params)

    def asymptotics(self, side: str) -> tuple[float, float]:
        if self.reflect:
            other = "minus" if side == "plus" else "plus"
            return _profile_asymptotics_raw(self.profile, other, self.params)
        return _profile_asymptotics_raw(self.profile, side, self.params)


# -- end data and operators --------------------------------------------------


@dataclass(frozen=True)
class EndData:
    side: str
    phi_infinity: np.ndarray
    b_term: np.ndarray
    n: int = 1
    epsilon: float = 0.5
    epsilon_prime: float = 0.5
    subleading: PhgExpansion | None = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise ModelError(f"side must be one of {SIDES}")
        if self.n < 1 or self.n % 2 == 0:
            raise ModelError("n must be an odd positive integer")
        object.__setattr__(self, "phi_infinity", np.array(self.phi_infinity, dtype=complex))
        object.__setattr__(self, "b_term", np.array(self.b_term, dtype=complex))

    @property
    def orientation(self) -> int:
        return ORIENTATION[self.side]


@dataclass(frozen=True)
class RadialOperator:
    """P = A d/dt + C(t), C(t) = sum_i f_i(t) M_i."""

    clifford: np.ndarray
    terms: tuple
    ends: tuple  # (minus, plus)
    name: str = ""

    def __post_init__(self):
        A = np.array(self.clifford, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ModelError("clifford must be square")
        object.__setattr__(self, "clifford", A)
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.matrix.shape != A.shape:
                raise ModelError(f"term matrix shape {term.matrix.shape} != {A.shape}")
        if len(self.ends) != 2 or self.ends[0].side != "minus" or self.ends[1].side != "plus":
            raise ModelError("ends must be (minus, plus)")

    @property
    def dim(self) -> int:
        return self.clifford.shape[0]

    def end(self, side: str) -> EndData:
        return self.ends[SIDES.index(side)]

    def potential(self, t):
        """C(t); shape (m, m) for scalar t, (len(t), m, m) for arrays."""
        t_arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t_arr)
        out = np.zeros((flat.size, self.dim, self.dim), dtype=complex)
        for term in self.terms:
            out += term.scalar(flat)[:, None, None] * term.matrix
        return out[0] if t_arr.ndim == 0 else out

    def declared_expansion(self, side: str, t):
        """Phi_inf + B0/|t| (+ subleading in x = 1/|t|)."""
        e = self.end(side)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = 1.0 / np.abs(t)
        out = e.phi_infinity[None] + x[:, None, None] * e.b_term[None]
        if e.subleading is not None:
            out = out + e.subleading(x)
        return out


def end_data_from_terms(clifford, terms, side: str, n: int = 1, epsilon: float = 0.5,
                        epsilon_prime: float = 0.5) -> EndData:
    m = np.asarray(clifford).shape[0]
    lim = np.zeros((m, m), dtype=complex)
    btm = np.zeros((m, m), dtype=complex)
    for term in terms:
        a, b = term.asymptotics(side)
        lim += a * term.matrix
        btm += b * term.matrix
    return EndData(side, lim, btm, n, epsilon, epsilon_prime)


def make_operator(clifford, terms, name: str = "", n: int = 1, epsilon: float = 0.5,
                  epsilon_prime: float = 0.5, ends: tuple | None = None) -> RadialOperator:
    terms = tuple(terms)
    if ends is None:
        ends = tuple(end_data_from_terms(clifford, terms, s, n, epsilon, epsilon_prime) for s in SIDES)
    return RadialOperator(np.asarray(clifford, dtype=complex), terms, ends, name)


def formal_adjoint(P: RadialOperator) -> RadialOperator:
    """A d/dt + C(t)^*; the profiles are real so C^* = sum f_i M_i^*."""
    terms = tuple(replace(tm, matrix=tm.matrix.conj().T) for tm in P.terms)
    ends = tuple(replace(e, phi_infinity=e.phi_infinity.conj().T, b_term=e.b_term.conj().T,
                         subleading=_adjoint_phg(e.subleading)) for e in P.ends)
    name = P.name[:-1] if P.name.endswith("*") else (P.name + "*" if P.name else "")
    return RadialOperator(P.clifford, terms, ends, name)


def _adjoint_phg(u: PhgExpansion | None) -> PhgExpansion | None:
    if u is None:
        return None
    return PhgExpansion({key: a.conj().T for key, a in u.terms.items()}, (u.shape[1], u.shape[0]), u.horizon)


def scattering_symbol(P: RadialOperator, side: str, xi: float) -> np.ndarray:
    return P.clifford * (1j * xi) + P.end(side).phi_infinity


def fully_elliptic(P: RadialOperator, side: str | None = None, tol: float = 1e-10) -> bool:
    """Invertibility of the scattering symbol for every real xi."""
    sides = SIDES if side is None else (side,)
    for s in sides:
        scale = max(1.0, np.linalg.norm(P.end(s).phi_infinity, 2))
        xis = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 121)])
        for xi in np.concatenate([xis, -xis[1:]]):
            if np.linalg.svd(scattering_symbol(P, s, xi), compute_uv=False)[-1] < tol * scale:
                return False
    return True


# -- block splitting ---------------------------------------------------------


@dataclass(frozen=True)
class EndSplit:
    side: str
    projector_v0: np.ndarray
    basis_v0: np.ndarray
    basis_v1: np.ndarray

    @property
    def dim_v0(self) -> int:
        return self.basis_v0.shape[1]

    @property
    def dim_v1(self) -> int:
        return self.basis_v1.shape[1]

    @property
    def projector_v1(self) -> np.ndarray:
        return np.eye(self.projector_v0.shape[0]) - self.projector_v0


@dataclass(frozen=True)
class BlockSplit:
    ends: tuple  # (minus, plus) EndSplit
    offdiag_decay: dict  # side -> measured exponent of L01, L10

    def end(self, side: str) -> EndSplit:
        return self.ends[SIDES.index(side)]

    def blocks(self, P: RadialOperator, side: str, t) -> dict:
        """D0/D1+Phi1/L01/L10 parts of C(t) relative to the splitting at this end."""
        sp = self.end(side)
        C = P.potential(t)
        V0, V1 = sp.basis_v0, sp.basis_v1
        return {
            "C00": V0.conj().T @ C @ V0,
            "C01": V0.conj().T @ C @ V1,
            "C10": V1.conj().T @ C @ V0,
            "C11": V1.conj().T @ C @ V1,
        }


def numerical_rank(svals: np.ndarray, scale: float) -> int:
    zero = svals <= RANK_ZERO_TOL * scale
    nonzero = svals >= RANK_NONZERO_TOL * scale
    if np.any(~zero & ~nonzero):
        raise IllConditionedRank(f"singular values {svals} straddle the rank threshold (scale {scale})")
    return int(nonzero.sum())


def split_end(P: RadialOperator, side: str) -> EndSplit:
    phi = P.end(side).phi_infinity
    m = P.dim
    # Phi_inf is normal; its SVD nullspace is its kernel
    U, s, Vh = np.linalg.svd(phi)
    scale = max(1.0, float(s[0]) if s.size else 1.0)
    r = numerical_rank(s, scale)
    eye = np.eye(m, dtype=complex)
    zero_coords = [i for i in range(m) if not np.any(phi[i]) and not np.any(phi[:, i])]
    if len(zero_coords) == m - r:
        # coordinate-aligned splitting: use the exact coordinate basis
        V0 = eye[:, zero_coords]
        V1 = eye[:, [i for i in range(m) if i not in zero_coords]]
    else:
        V0 = Vh[r:].conj().T
        V1 = Vh[:r].conj().T
    Pi0 = V0 @ V0.conj().T if V0.shape[1] else np.zeros((m, m), dtype=complex)
    return EndSplit(side, Pi0, V0, V1)


def split_blocks(P: RadialOperator) -> BlockSplit:
    ends = tuple(split_end(P, s) for s in SIDES)
    decay = {}
    for sp in ends:
        vals = [_offdiag_norm(P, sp, tt) for tt in _sample_points(sp.side)]
        decay[sp.side] = measured_decay(np.array(DECAY_SAMPLES), np.array(vals), _potential_scale(P))
    return BlockSplit(ends, decay)


def _sample_points(side: str) -> np.ndarray:
    pts = np.array(DECAY_SAMPLES)
    return pts if side == "plus" else -pts


def _potential_scale(P: RadialOperator) -> float:
    return max(1.0, max((np.linalg.norm(tm.matrix, 2) for tm in P.terms), default=1.0))


def _offdiag_norm(P: RadialOperator, sp: EndSplit, t: float) -> float:
    C = P.potential(t)
    P0, P1 = sp.projector_v0, sp.projector_v1
    return float(np.linalg.norm(P0 @ C @ P1, 2) + np.linalg.norm(P1 @ C @ P0, 2))


def measured_decay(ts: np.ndarray, norms: np.ndarray, scale: float) -> float:
    """Exponent p in norm ~ |t|^(-p) from a log-log fit; inf when below roundoff."""
    floor = 1e-13 * scale
    keep = norms > floor
    if keep.sum() < 2:
        return math.inf
    slope = np.polyfit(np.log(np.abs(ts[keep])), np.log(norms[keep]), 1)[0]
    return float(-slope)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    measured: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    ranks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_assumptions(P: RadialOperator, tol: float = 1e-10) -> ValidationReport:
    A = P.clifford
    m = P.dim
    checks = []
    ranks = {}
    err_skew = np.linalg.norm(A.conj().T + A)
    err_unit = np.linalg.norm(A.conj().T @ A - np.eye(m))
    checks.append(Check("clifford", err_skew < tol and err_unit < tol,
                        f"|A*+A|={err_skew:.2e}, |A*A-I|={err_unit:.2e}"))
    scale = _potential_scale(P)
    for e in P.ends:
        phi = e.phi_infinity
        sk = float(np.linalg.norm(phi + phi.conj().T))
        checks.append(Check(f"skew[{e.side}]", sk < tol * scale, f"|Phi+Phi*|={sk:.2e}", sk))
        cm = float(np.linalg.norm(phi @ A - A @ phi))
        checks.append(Check(f"commutes[{e.side}]", cm < tol * scale, f"|[Phi,A]|={cm:.2e}", cm))
        try:
            sp = split_end(P, e.side)
        except IllConditionedRank as exc:
            checks.append(Check(f"rank[{e.side}]", False, str(exc)))
            continue
        ranks[e.side] = sp.dim_v1
        checks.append(_rank_check(P, sp))
        pts = _sample_points(e.side)
        off = np.array([_offdiag_norm(P, sp, tt) for tt in pts])
        p_off = measured_decay(pts, off, scale)
        need = 1.0 + e.epsilon
        checks.append(Check(f"decay-offdiag[{e.side}]", p_off >= need - DECAY_SLACK,
                            f"measured {p_off:.3f}, need >= {need:.3f}", p_off))
        phi00 = []
        for tt in pts:
            C = P.potential(tt)
            skew = 0.5 * (C - C.conj().T)
            phi00.append(np.linalg.norm(sp.projector_v0 @ skew @ sp.projector_v0, 2))
        p_00 = measured_decay(pts, np.array(phi00), scale)
        need0 = 1.0 + e.epsilon_prime
        checks.append(Check(f"decay-phi00[{e.side}]", p_00 >= need0 - DECAY_SLACK,
                            f"measured {p_00:.3f}, need >= {need0:.3f}", p_00))
        res = np.linalg.norm(P.potential(pts) - P.declared_expansion(e.side, pts), ord=2, axis=(1, 2))
        p_res = measured_decay(pts, res, scale)
        checks.append(Check(f"expansion[{e.side}]", p_res > need - DECAY_SLACK,
                            f"residual decay {p_res:.3f}, need > {need:.3f}", p_res))
    return ValidationReport(tuple(checks), ranks)


def _rank_check(P: RadialOperator, sp: EndSplit) -> Check:
    # the V1 block of the skew part must stay invertible far out
    phi = P.end(sp.side).phi_infinity
    if sp.dim_v1 == 0:
        return Check(f"rank[{sp.side}]", True, "rank 0")
    smin = np.linalg.svd(sp.basis_v1.conj().T @ phi @ sp.basis_v1, compute_uv=False)[-1]
    worst = math.inf
    for tt in _sample_points(sp.side):
        C = P.potential(tt)
        skew = 0.5 * (C - C.conj().T)
        blk = sp.basis_v1.conj().T @ skew @ sp.basis_v1
        worst = min(worst, np.linalg.svd(blk, compute_uv=False)[-1])
    ok = worst >= 0.5 * smin
    return Check(f"rank[{sp.side}]", bool(ok), f"rank {sp.dim_v1}, min sigma on V1 {worst:.3e}", float(worst))


# -- b-reduction -------------------------------------------------------------


@dataclass(frozen=True)
class BFragment:
    """b-reduced V0 block at one end: pencil I(lam) = M0 + lam M1."""

    side: str
    n: int
    clifford0: np.ndarray
    b_term0: np.ndarray
    basis_v0: np.ndarray

    @property
    def M1(self) -> np.ndarray:
        return ORIENTATION[self.side] * self.clifford0

    @property
    def M0(self) -> np.ndarray:
        return self.b_term0 + ORIENTATION[self.side] * self.clifford0 * ((self.n - 1) // 2)

    @property
    def dim(self) -> int:
        return self.clifford0.shape[0]


def conjugate_to_b(P: RadialOperator, side: str, split: BlockSplit | None = None) -> BFragment:
    """x^{-(n+1)/2} P_00 x^{(n-1)/2} near the given end, as an indicial pencil."""
    sp = (split or split_blocks(P)).end(side)
    V0 = sp.basis_v0
    A0 = V0.conj().T @ P.clifford @ V0
    if A0.size and np.linalg.svd(A0, compute_uv=False)[-1] < 1e-12:
        raise ModelError("Clifford block on V0 is not invertible")
    B0 = V0.conj().T @ P.end(side).b_term @ V0
    return BFragment(side, P.end(side).n, A0, B0, V0)


def fragment_from_pencil(side: str, n: int, M0: np.ndarray, M1: np.ndarray) -> BFragment:
    """Undo conjugate_to_b: recover (A0, B0) from the pencil coefficients."""
    s = ORIENTATION[side]
    A0 = np.asarray(M1, dtype=complex) * s
    B0 = np.asarray(M0, dtype=complex) - s * A0 * ((n - 1) // 2)
    return BFragment(side, n, A0, B0, np.eye(A0.shape[0], dtype=complex))


def v0_block_operator(P: RadialOperator, split: BlockSplit | None = None) -> RadialOperator:
    """The V0 block P_00 as an operator, for models with one V0 for both ends."""
    split = split or split_blocks(P)
    Pm, Pp = split.end("minus").projector_v0, split.end("plus").projector_v0
    if np.linalg.norm(Pm - Pp) > 1e-12:
        raise ModelError("V0 differs between the two ends")
    V0 = split.end("plus").basis_v0
    if V0.shape[1] == 0:
        raise ModelError("V0 is trivial")
    A0 = V0.conj().T @ P.clifford @ V0
    terms = [replace(tm, matrix=V0.conj().T @ tm.matrix @ V0) for tm in P.terms]
    terms = [tm for tm in terms if np.any(tm.matrix != 0)]
    ends = tuple(replace(e, phi_infinity=V0.conj().T @ e.phi_infinity @ V0,
                         b_term=V0.conj().T @ e.b_term @ V0, subleading=None) for e in P.ends)
    return RadialOperator(A0, terms, ends, (P.name + "/V0") if P.name else "")


# -- configuration -----------------------------------------------------------


def _mat_to_json(M: np.ndarray) -> dict:
    M = np.asarray(M, dtype=complex)
    # adding 0.0 maps -0.0 to 0.0 so that serialization is canonical
    return {"re": (M.real + 0.0).tolist(), "im": (M.imag + 0.0).tolist()}


def _mat_from_json(d: Any) -> np.ndarray:
    if isinstance(d, dict):
        re = np.array(d["re"], dtype=float)
        out = np.zeros(re.shape, dtype=complex)
        out.real = re
        if "im" in d:
            out.imag = np.array(d["im"], dtype=float)
        return out
    return np.array(d, dtype=complex)


def to_config(P: RadialOperator) -> dict:
    ends = {}
    for e in P.ends:
        if e.subleading is not None:
            raise ModelError("subleading expansions are not serializable")
        ends[e.side] = {
            "n": e.n,
            "epsilon": e.epsilon,
            "epsilon_prime": e.epsilon_prime,
            "phi_infinity": _mat_to_json(e.phi_infinity),
            "b_term": _mat_to_json(e.b_term),
        }
    return {
        "name": P.name,
        "dim": P.dim,
        "clifford": _mat_to_json(P.clifford),
        "potential": [
            {"profile": tm.profile, "params": dict(tm.params), "reflect": tm.reflect, "matrix": _mat_to_json(tm.matrix)}
            for tm in P.terms
        ],
        "ends": ends,
    }


def from_config(cfg: dict) -> RadialOperator:
    try:
        A = _mat_from_json(cfg["clifford"])
        dim = int(cfg.get("dim", A.shape[0]))
        if A.shape != (dim, dim):
            raise ModelError(f"clifford shape {A.shape} does not match dim {dim}")
        terms = []
        for item in cfg.get("potential", []):
            terms.append(Term(item["profile"], _mat_from_json(item["matrix"]), dict(item.get("params", {})),
                              bool(item.get("reflect", False))))
        ends = []
        for side in SIDES:
            spec = cfg.get("ends", {}).get(side, {})
            derived = end_data_from_terms(A, terms, side, int(spec.get("n", 1)),
                                          float(spec.get("epsilon", 0.5)), float(spec.get("epsilon_prime", 0.5)))
            phi = _mat_from_json(spec["phi_infinity"]) if "phi_infinity" in spec else derived.phi_infinity
            btm = _mat_from_json(spec["b_term"]) if "b_term" in spec else derived.b_term
            ends.append(replace(derived, phi_infinity=phi, b_term=btm))
        return RadialOperator(A, tuple(terms), tuple(ends), str(cfg.get("name", "")))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model config: {exc}") from exc


def dumps_config(P: RadialOperator) -> str:
    return json.dumps(to_config(P), indent=2, sort_keys=True)


def loads_config(text: str) -> RadialOperator:
    try:
        return from_config(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}") from exc
