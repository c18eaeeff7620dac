"""Index sets, polyhomogeneous expansions, cutoffs and Mellin probes.

Exponents are real; an index set is a finite truncation of the (possibly
infinite) set of pairs (z, k) carried by a polyhomogeneous expansion
sum a_{z,k} x^z (log x)^k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special

DEFAULT_HORIZON = 6.0
_ZDIGITS = 12


def _norm_z(z: float) -> float:
    # keep float sums such as 0.1 + 0.2 from creating spurious distinct entries
    return float(round(float(z), _ZDIGITS)) + 0.0


@dataclass(frozen=True)
class IndexSet:
    entries: frozenset = frozenset()
    horizon: float = DEFAULT_HORIZON

    def __post_init__(self):
        clean = set()
        for z, k in self.entries:
            k = int(k)
            if k < 0:
                raise ValueError(f"negative log power {k}")
            z = _norm_z(z)
            if z <= self.horizon + 1e-12:
                clean.add((z, k))
        object.__setattr__(self, "entries", frozenset(clean))

    @classmethod
    def of(cls, pairs: Iterable[tuple[float, int]], horizon: float = DEFAULT_HORIZON) -> "IndexSet":
        return cls(frozenset((float(z), int(k)) for z, k in pairs), horizon)

    @classmethod
    def smooth(cls, pairs: Iterable[tuple[float, int]], horizon: float = DEFAULT_HORIZON) -> "IndexSet":
        """Smallest set containing pairs and closed under (z,k) -> (z+1, l), l <= k."""
        out = set()
        for z, k in pairs:
            zz = float(z)
            while zz <= horizon + 1e-12:
                for l in range(int(k) + 1):
                    out.add((zz, l))
                zz += 1.0
        return cls(frozenset(out), horizon)

    def is_empty(self) -> bool:
        return not self.entries

    def leading_order(self) -> float:
        """min re z; +inf for the empty set (rapid vanishing)."""
        if not self.entries:
            return math.inf
        return min(z for z, _ in self.entries)

    def leading_log_power(self) -> int:
        if not self.entries:
            return 0
        z0 = self.leading_order()
        return max(k for z, k in self.entries if z == z0)

    def is_smooth(self) -> bool:
        for z, k in self.entries:
            if z + 1.0 <= self.horizon + 1e-12:
                for l in range(k + 1):
                    if (_norm_z(z + 1.0), l) not in self.entries:
                        return False
        return True

    def __contains__(self, item) -> bool:
        z, k = item
        return (_norm_z(z), int(k)) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def sorted(self) -> list[tuple[float, int]]:
        return sorted(self.entries)

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self.entries | other.entries, min(self.horizon, other.horizon))


def extended_union(E: IndexSet, F: IndexSet) -> IndexSet:
    """E ∪ F ∪ {(z, k+l+1) : (z,k) in E, (z,l) in F}."""
    extra = set()
    fz: dict[float, list[int]] = {}
    for z, l in F.entries:
        fz.setdefault(z, []).append(l)
    for z, k in E.entries:
        for l in fz.get(z, ()):
            extra.add((z, k + l + 1))
    return IndexSet(E.entries | F.entries | frozenset(extra), min(E.horizon, F.horizon))


@dataclass
class PhgExpansion:
    """Finite matrix-valued sum of a_{z,k} x^z (log x)^k."""

    terms: dict = field(default_factory=dict)
    shape: tuple = (1, 1)
    horizon: float = DEFAULT_HORIZON

    def __post_init__(self):
        clean = {}
        for (z, k), a in self.terms.items():
            a = np.atleast_2d(np.asarray(a, dtype=complex))
            if a.shape != tuple(self.shape):
                raise ValueError(f"coefficient shape {a.shape} differs from {self.shape}")
            key = (_norm_z(z), int(k))
            clean[key] = clean.get(key, 0) + a
        self.terms = {key: a for key, a in clean.items() if key[0] <= self.horizon + 1e-12}

    @classmethod
    def scalar(cls, terms: dict, horizon: float = DEFAULT_HORIZON) -> "PhgExpansion":
        return cls({key: np.array([[a]], dtype=complex) for key, a in terms.items()}, (1, 1), horizon)

    @property
    def index_set(self) -> IndexSet:
        return IndexSet(frozenset(key for key, a in self.terms.items() if np.any(a != 0)), self.horizon)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + tuple(self.shape), dtype=complex)
        lx = np.log(x)
        for (z, k), a in self.terms.items():
            out += (x**z * lx**k)[..., None, None] * a
        return out

    def leading_term(self) -> tuple[float, int, np.ndarray] | None:
        live = [(z, k) for (z, k), a in self.terms.items() if np.any(a != 0)]
        if not live:
            return None
        z0 = min(z for z, _ in live)
        k0 = max(k for z, k in live if z == z0)
        return z0, k0, self.terms[(z0, k0)]


def phg_mul(u: PhgExpansion, v: PhgExpansion) -> PhgExpansion:
    """Pointwise (matrix) product; exponents and log powers add."""
    if u.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {u.shape} x {v.shape}")
    horizon = min(u.horizon, v.horizon)
    terms: dict = {}
    for (z1, k1), a in u.terms.items():
        for (z2, k2), b in v.terms.items():
            z = _norm_z(z1 + z2)
            if z > horizon + 1e-12:
                continue
            key = (z, k1 + k2)
            terms[key] = terms.get(key, 0) + a @ b
    return PhgExpansion(terms, (u.shape[0], v.shape[1]), horizon)


# -- cutoffs -----------------------------------------------------------------

CUTOFF_TEMPLATES = ("exp", "logexp", "tanh")


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth cutoff: 1 on (0, inner], 0 on [outer, inf)."""

    template: str = "exp"
    inner: float = 0.5
    outer: float = 1.0

    def __post_init__(self):
        if self.template not in CUTOFF_TEMPLATES:
            raise ValueError(f"unknown cutoff template {self.template!r}")
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    def _u(self, x):
        if self.template == "logexp":
            a, b = math.log(self.inner), math.log(self.outer)
            return (np.log(x) - a) / (b - a), 1.0 / (x * (b - a))
        return (x - self.inner) / (self.outer - self.inner), np.full_like(x, 1.0 / (self.outer - self.inner))

    def _step(self, u):
        # value and u-derivative of the 1 -> 0 transition on (0, 1)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.template == "tanh":
                g = (2 * u - 1) / (u * (1 - u))
                th = np.tanh(g)
                val = 0.5 * (1 - th)
                dg = (2 * u * u - 2 * u + 1) / (u * u * (1 - u) ** 2)
                der = -0.5 * (1 - th * th) * dg
            else:
                val = special.expit(1.0 / u - 1.0 / (1 - u))
                der = -val * (1 - val) * (1.0 / u**2 + 1.0 / (1 - u) ** 2)
        der = np.where(np.isfinite(der), der, 0.0)
        return val, der

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.inner, 1.0, 0.0)
        mid = (x > self.inner) & (x < self.outer)
        if np.any(mid):
            u, _ = self._u(x[mid])
            out[mid] = self._step(u)[0]
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        mid = (x > self.inner) & (x < self.outer)
        if np.any(mid):
            u, du = self._u(x[mid])
            out[mid] = self._step(u)[1] * du
        return out


def builtin_cutoffs(inner: float = 0.5, outer: float = 1.0) -> list[CutoffSpec]:
    return [CutoffSpec(t, inner, outer) for t in CUTOFF_TEMPLATES]


# -- Mellin probe ------------------------------------------------------------


class MellinDivergence(ValueError):
    pass


def _quad_complex(f, a, b, **kw):
    re = integrate.quad(lambda y: f(y).real, a, b, **kw)
    im = integrate.quad(lambda y: f(y).imag, a, b, **kw)
    return complex(re[0], im[0]), math.hypot(re[1], im[1])


def mellin_cutoff_power(z: float, k: int, cutoff: CutoffSpec, lam: complex) -> complex:
    """Quadrature of  int_0^inf x^(-lam) phi(x) x^z (log x)^k dx/x.

    Converges only for re(lam) < z; the value has a pole of order k+1 at lam = z.
    """
    lam = complex(lam)
    w = z - lam
    if abs(w) == 0:
        raise MellinDivergence("lam equals z (pole)")
    if w.real <= 0:
        raise MellinDivergence("re(lam) >= z: integral diverges at x = 0")
    kw = dict(epsabs=0.0, epsrel=1e-13, limit=400)

    # (0, inner]: phi == 1; x = exp(-y/re w) turns this into a Laplace-type tail
    y0 = -math.log(cutoff.inner) * w.real
    rot = w.imag / w.real

    def tail(y):
        return np.exp(-y) * np.exp(-1j * rot * y) * (-y / w.real) ** k / w.real

    v_tail, e1 = _quad_complex(tail, y0, np.inf, **kw)

    def body(x):
        return x ** (w - 1) * cutoff.value(np.array([x]))[0] * math.log(x) ** k

    v_body, e2 = _quad_complex(body, cutoff.inner, cutoff.outer, **kw)
    val = v_tail + v_body
    if not np.isfinite(val) or (e1 + e2) > 1e-6 * max(1.0, abs(val)):
        raise MellinDivergence("quadrature did not converge")
    return val


@dataclass(frozen=True)
class PoleProbe:
    z: float
    k: int
    order: int
    leading: complex
    slope: float


def mellin_pole_probe(z: float, k: int, cutoff: CutoffSpec, eps: Sequence[float] | None = None,
                      degree: int = 6) -> PoleProbe:
    """Fit the pole order and leading Laurent coefficient of the Mellin probe at lam = z.

    The order is read off the log-log slope of |value| as lam -> z from below;
    the leading coefficient is the constant term of a polynomial fit to
    eps^order * value(z - eps).
    """
    if eps is None:
        eps = np.geomspace(2e-3, 0.2, 14)
    eps = np.asarray(eps, dtype=float)
    vals = np.array([mellin_cutoff_power(z, k, cutoff, z - e) for e in eps])
    small = np.argsort(eps)[:3]
    slope = np.polyfit(np.log(eps[small]), np.log(np.abs(vals[small])), 1)[0]
    order = int(round(-slope))
    scaled = eps**order * vals
    V = np.vander(eps, degree + 1, increasing=True)
    coef = np.linalg.lstsq(V, scaled, rcond=None)[0]
    return PoleProbe(z, k, order, complex(coef[0]), float(slope))


# -- leading-order fits ------------------------------------------------------


@dataclass(frozen=True)
class LeadingFit:
    z: float
    k: int
    coeff: np.ndarray | complex | None
    residual: float
    vanishing: bool = False
    low_confidence: bool = False


def fit_leading_order(samples: Sequence[tuple[float, object]], k_max: int = 2,
                      confidence_tol: float = 5e-2) -> LeadingFit:
    """Fit value ~ coeff * x^z (log x)^k, k in {0..k_max}, from samples with x -> 0."""
    xs = np.array([float(x) for x, _ in samples])
    vals = [np.asarray(v, dtype=complex) for _, v in samples]
    if len(xs) < 8:
        raise ValueError("need at least 8 samples")
    if np.any(xs <= 0) or np.any(xs >= 1):
        raise ValueError("samples must lie in (0, 1)")
    mags = np.array([np.linalg.norm(v) for v in vals])
    if np.all(mags == 0):
        return LeadingFit(math.inf, 0, None, 0.0, vanishing=True)
    keep = mags > 0
    lx = np.log(xs[keep])
    llx = np.log(np.abs(lx))
    y = np.log(mags[keep])
    best = None
    for k in range(k_max + 1):
        X = np.column_stack([np.ones_like(lx), lx])
        sol, *_ = np.linalg.lstsq(X, y - k * llx, rcond=None)
        r = y - k * llx - X @ sol
        rms = float(np.sqrt(np.mean(r * r)))
        # prefer the smaller log power unless a larger one fits clearly better
        if best is None or (best[2] > 1e-10 and rms < 0.5 * best[2]):
            best = (float(sol[1]), k, rms)
    z, k, rms = best
    i0 = int(np.argmin(xs))
    coeff = vals[i0] / (xs[i0] ** z * math.log(xs[i0]) ** k)
    if coeff.ndim == 0:
        coeff = complex(coeff)
    X = np.column_stack([np.ones_like(lx), lx])
    cond = np.linalg.cond(X)
    low = rms > confidence_tol or cond > 1e8 or keep.sum() < 8
    return LeadingFit(z, k, coeff, rms, False, bool(low))
