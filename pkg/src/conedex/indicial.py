"""Indicial pencils, b-spectra, formal nullspaces, boundary pairing and defect."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, linalg

from .model import SIDES, BFragment
from .phg import CutoffSpec

ROOT_CLUSTER_TOL = 1e-6  # defective roots split by ~eps^(1/order)
IMAG_TOL = 1e-8
RESIDUAL_TOL = 1e-10
ON_SPECTRUM_TOL = 1e-10
DEFAULT_WINDOW = (-10.0, 10.0)


class IndicialError(ValueError):
    pass


class NonRealRoot(IndicialError):
    pass


class OnSpectrumWeight(IndicialError):
    pass


class ParityViolation(IndicialError):
    pass


@dataclass(frozen=True)
class IndicialFamily:
    M0: np.ndarray
    M1: np.ndarray
    side: str = "plus"
    n: int = 1

    @classmethod
    def of(cls, frag: BFragment) -> "IndicialFamily":
        return cls(frag.M0, frag.M1, frag.side, frag.n)

    def __call__(self, lam: complex) -> np.ndarray:
        return self.M0 + lam * self.M1

    @property
    def dim(self) -> int:
        return self.M0.shape[0]

    def adjoint(self) -> "IndicialFamily":
        """Pencil of the formal adjoint model operator -M1^* s d/ds + M0^*."""
        return IndicialFamily(self.M0.conj().T, -self.M1.conj().T, self.side, self.n)


def indicial_family(frag: BFragment | IndicialFamily, lam: complex) -> np.ndarray:
    fam = frag if isinstance(frag, IndicialFamily) else IndicialFamily.of(frag)
    return fam(lam)


@dataclass(frozen=True)
class Root:
    value: float
    order: int  # pole order of I(lam)^-1
    nullity: int  # dim Null I(value)
    multiplicity: int  # dim F = dim of the generalized eigenspace
    basis: np.ndarray  # columns: Null I(value)
    generalized_basis: np.ndarray  # columns: generalized eigenspace
    side: str
    imag: float = 0.0

    @property
    def dim_f(self) -> int:
        return self.multiplicity


@dataclass(frozen=True)
class BSpectrum:
    roots: tuple = ()

    def values(self, side: str | None = None) -> list[float]:
        return [r.value for r in self.roots if side is None or r.side == side]

    def at(self, side: str) -> "BSpectrum":
        return BSpectrum(tuple(r for r in self.roots if r.side == side))

    def merge(self, other: "BSpectrum") -> "BSpectrum":
        return BSpectrum(tuple(sorted(self.roots + other.roots, key=lambda r: (r.value, SIDES.index(r.side)))))

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        for side in {r.side for r in self.roots}:
            rs = [r for r in self.roots if r.side == side]
            for r in rs:
                if not any(abs(q.value + r.value) < tol and q.multiplicity == r.multiplicity and q.order == r.order
                           for q in rs):
                    return False
        return True

    def distance(self, alpha: float) -> float:
        return min((abs(r.value - alpha) for r in self.roots), default=math.inf)


def _null_basis(M: np.ndarray, tol: float) -> np.ndarray:
    if M.size == 0:
        return np.zeros((M.shape[1], 0), dtype=complex)
    U, s, Vh = np.linalg.svd(M)
    scale = max(1.0, s[0] if s.size else 1.0)
    r = int((s > tol * scale).sum())
    return Vh[r:].conj().T


def b_spectrum(frag: BFragment | IndicialFamily, window: tuple = DEFAULT_WINDOW,
               self_adjoint: bool = True) -> BSpectrum:
    """Roots of det(M0 + lam M1) with their pole orders and nullspaces."""
    fam = frag if isinstance(frag, IndicialFamily) else IndicialFamily.of(frag)
    m = fam.dim
    if m == 0:
        return BSpectrum()
    if np.linalg.svd(fam.M1, compute_uv=False)[-1] < 1e-12:
        raise IndicialError("M1 is not invertible")
    # M0 v = lam (-M1) v; with M1 invertible this is the spectrum of K = -M1^{-1} M0
    K = -np.linalg.solve(fam.M1, fam.M0)
    try:
        w = linalg.eigvals(K)
    except linalg.LinAlgError as exc:
        raise IndicialError(f"eigensolver failure: {exc}") from exc
    clusters: list[list[complex]] = []
    for lam in sorted(w, key=lambda z: (z.real, z.imag)):
        for cl in clusters:
            if abs(cl[0] - lam) < ROOT_CLUSTER_TOL and len(cl) < m:
                cl.append(lam)
                break
        else:
            clusters.append([lam])
    roots = []
    for cl in clusters:
        lam0 = complex(np.mean(cl))
        if abs(lam0.imag) > IMAG_TOL and self_adjoint:
            raise NonRealRoot(f"non-real root {lam0}")
        if not (window[0] <= lam0.real <= window[1]):
            continue
        a = len(cl)
        N = K - lam0 * np.eye(m)
        # pole order = nilpotency index of N on the generalized eigenspace
        order, Np = 1, N.copy()
        while _null_basis(Np, 1e-7).shape[1] < a and order < m:
            Np = Np @ N
            order += 1
        gen = _null_basis(Np, 1e-7)
        null = _null_basis(fam(lam0), 1e-9)
        roots.append(Root(float(lam0.real), order, null.shape[1], a, null, gen,
                          getattr(frag, "side", "plus"), float(lam0.imag)))
    return BSpectrum(tuple(roots))


def root_residuals(frag: BFragment | IndicialFamily, spec: BSpectrum) -> list[float]:
    fam = frag if isinstance(frag, IndicialFamily) else IndicialFamily.of(frag)
    out = []
    for r in spec.roots:
        for v in r.basis.T:
            out.append(float(np.linalg.norm(fam(r.value) @ v) / np.linalg.norm(v)))
    return out


# -- formal solutions --------------------------------------------------------


@dataclass(frozen=True)
class FormalSolution:
    """s^lam sum_j (log s)^j w_j, annihilated by the model operator M1 s d/ds + M0."""

    exponent: float
    coeffs: tuple  # w_0, w_1, ...
    side: str = "plus"

    @property
    def log_power(self) -> int:
        return len(self.coeffs) - 1

    @property
    def dim(self) -> int:
        return self.coeffs[0].shape[0]

    def scaled(self, c: complex) -> "FormalSolution":
        return FormalSolution(self.exponent, tuple(c * w for w in self.coeffs), self.side)

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        ls = np.log(s)
        out = np.zeros((s.size, self.dim), dtype=complex)
        for j, w in enumerate(self.coeffs):
            out += (s**self.exponent * ls**j)[:, None] * w
        return out

    def s_derivative(self, s):
        """s d/ds applied to the solution."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        ls = np.log(s)
        out = np.zeros((s.size, self.dim), dtype=complex)
        p = self.log_power
        for j in range(p + 1):
            w = self.exponent * self.coeffs[j]
            if j < p:
                w = w + (j + 1) * self.coeffs[j + 1]
            out += (s**self.exponent * ls**j)[:, None] * w
        return out


def model_residual(fam: IndicialFamily, u: FormalSolution) -> float:
    """Max coefficient norm of (M1 s d/ds + M0) u, term by term in log powers."""
    p = u.log_power
    worst = 0.0
    for j in range(p + 1):
        r = fam(u.exponent) @ u.coeffs[j]
        if j < p:
            r = r + (j + 1) * fam.M1 @ u.coeffs[j + 1]
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def formal_nullspace(frag: BFragment | IndicialFamily, r: float, tol: float = 1e-8) -> list[FormalSolution]:
    """Basis of F(P, r): one solution per vector of the generalized eigenspace at r."""
    fam = frag if isinstance(frag, IndicialFamily) else IndicialFamily.of(frag)
    spec = b_spectrum(fam, window=(-math.inf, math.inf), self_adjoint=False)
    side = getattr(frag, "side", "plus")
    out = []
    for root in spec.roots:
        if abs(root.value - r) > tol:
            continue
        K = -np.linalg.solve(fam.M1, fam.M0)
        N = K - root.value * np.eye(fam.dim)
        # order the generalized eigenvectors by chain depth so that the
        # top-of-chain vectors produce the log terms
        G = root.generalized_basis
        for w0 in G.T:
            coeffs = [w0]
            for j in range(1, root.order):
                nxt = N @ coeffs[-1] / j
                if np.linalg.norm(nxt) < 1e-12 * max(1.0, np.linalg.norm(w0)):
                    break
                coeffs.append(nxt)
            out.append(FormalSolution(root.value, tuple(coeffs), side))
    return out


# -- boundary pairing --------------------------------------------------------


@dataclass(frozen=True)
class PairingResult:
    value: complex
    error: float
    divergent: bool = False


def boundary_pairing(u: FormalSolution, v: FormalSolution, cutoff: CutoffSpec,
                     fam: IndicialFamily) -> PairingResult:
    """(1/i) int [<L(phi u), phi v> - <phi u, L*(phi v)>] ds/s with L = M1 s d/ds + M0.

    The inner product is linear in its first slot.  u lies in F(P, r),
    v in F(P*, -r) for the model pencil fam at one end.
    """
    if u.side != v.side:
        return PairingResult(0.0 + 0.0j, 0.0)
    if abs(u.exponent + v.exponent) > 1e-8:
        return PairingResult(complex("nan"), math.inf, divergent=True)
    adj = fam.adjoint()

    def apply(M0, M1, sol, s):
        phi = cutoff.value(s)[:, None]
        dphi = cutoff.derivative(s)[:, None]
        val = sol(s)
        sd = sol.s_derivative(s)
        return phi * (sd @ M1.T + val @ M0.T) + (s[:, None] * dphi) * (val @ M1.T)

    def integrand(s):
        s_arr = np.array([s])
        Lu = apply(fam.M0, fam.M1, u, s_arr)[0]
        Lv = apply(adj.M0, adj.M1, v, s_arr)[0]
        phi = cutoff.value(s_arr)[0]
        uu = phi * u(s_arr)[0]
        vv = phi * v(s_arr)[0]
        return (np.vdot(vv, Lu) - np.vdot(Lv, uu)) / s

    pts = sorted({cutoff.inner, cutoff.outer})
    lo = min(1e-12, pts[0] * 1e-6)
    kw = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    total = 0.0 + 0.0j
    err = 0.0
    for a, b in zip([lo] + pts, pts + [pts[-1] * 10.0]):
        re = integrate.quad(lambda s: integrand(s).real, a, b, **kw)
        im = integrate.quad(lambda s: integrand(s).imag, a, b, **kw)
        total += complex(re[0], im[0])
        err += math.hypot(re[1], im[1])
    return PairingResult(total / 1j, err)


def boundary_pairing_closed_form(u: FormalSolution, v: FormalSolution, fam: IndicialFamily) -> complex:
    """i <M1 w, y> for log-free u = s^r w, v = s^-r y (the commutator integrates phi^2 from 1 to 0)."""
    if u.log_power or v.log_power:
        raise IndicialError("closed form only for log-free solutions")
    if u.side != v.side:
        return 0.0 + 0.0j
    return 1j * complex(np.vdot(v.coeffs[0], fam.M1 @ u.coeffs[0]))


# -- index bookkeeping -------------------------------------------------------


def _check_off_spectrum(spec: BSpectrum, alphas: Iterable[float]):
    for a in alphas:
        if spec.distance(a) < ON_SPECTRUM_TOL:
            raise OnSpectrumWeight(f"weight {a} lies on the b-spectrum")


def relative_index_ledger(spec: BSpectrum, alpha1: float, alpha2: float) -> int:
    """Sum of dim F(P, r) over roots r in (alpha1, alpha2), all ends."""
    _check_off_spectrum(spec, (alpha1, alpha2))
    if alpha1 > alpha2:
        return -relative_index_ledger(spec, alpha2, alpha1)
    return sum(r.dim_f for r in spec.roots if alpha1 < r.value < alpha2)


def defect(spec: BSpectrum, alpha: float) -> int:
    """-(1/2) sign(alpha) sum_{|r| < |alpha|} dim F(P, r)."""
    _check_off_spectrum(spec, (alpha,))
    total = sum(r.dim_f for r in spec.roots if abs(r.value) < abs(alpha))
    if total % 2:
        raise ParityViolation(f"odd total dim F = {total} inside (-{abs(alpha)}, {abs(alpha)})")
    return -int(np.sign(alpha)) * (total // 2)


def spectrum_of(frags: Sequence[BFragment], window: tuple = DEFAULT_WINDOW) -> BSpectrum:
    out = BSpectrum()
    for f in frags:
        out = out.merge(b_spectrum(f, window))
    return out
