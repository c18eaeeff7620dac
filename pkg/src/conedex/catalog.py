"""Built-in desk-scale models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import SIGMA1, SIGMA2, ModelError, RadialOperator, Term, make_operator

CLIFFORD_2 = 1j * SIGMA2  # [[0, 1], [-1, 0]]


def model_a(c: float = 1.0) -> RadialOperator:
    """Full rank at both ends: C = i c tanh(t) I, kernel and cokernel spanned by cosh(t)^(-c) modes."""
    return make_operator(CLIFFORD_2, [Term("tanh", 1j * c * np.eye(2))], name="MODEL-A")


def model_b(b: float = 0.75) -> RadialOperator:
    """Zero rank at both ends: C = b sigma1 t/<t>^2, b-spectrum {-b, b} per end."""
    return make_operator(CLIFFORD_2, [Term("power-decay", b * SIGMA1, {"power": 1.0, "parity": "odd"})],
                         name="MODEL-B")


def _zero_rank_blocks(b_values) -> tuple[np.ndarray, list[Term]]:
    k = len(b_values)
    A = np.kron(np.eye(k), CLIFFORD_2)
    B = np.zeros((2 * k, 2 * k), dtype=complex)
    for i, b in enumerate(b_values):
        B[2 * i:2 * i + 2, 2 * i:2 * i + 2] = b * SIGMA1
    return A, [Term("power-decay", B, {"power": 1.0, "parity": "odd"})]


def model_c(b_values: tuple = (0.75,), c: float = 1.0, gamma: float = 0.3) -> RadialOperator:
    """Hybrid: a MODEL-B type V0 block coupled by gamma <t>^-2 to a MODEL-A type V1 block."""
    A0, terms0 = _zero_rank_blocks(b_values)
    k0 = A0.shape[0]
    m = k0 + 2
    A = np.zeros((m, m), dtype=complex)
    A[:k0, :k0] = A0
    A[k0:, k0:] = CLIFFORD_2
    terms = []
    for tm in terms0:
        M = np.zeros((m, m), dtype=complex)
        M[:k0, :k0] = tm.matrix
        terms.append(Term(tm.profile, M, tm.params))
    Mv1 = np.zeros((m, m), dtype=complex)
    Mv1[k0:, k0:] = 1j * c * np.eye(2)
    terms.append(Term("tanh", Mv1))
    if gamma:
        K = np.zeros((m, m), dtype=complex)
        K[:2, k0:] = gamma * np.eye(2)
        K[k0:, :2] = gamma * np.eye(2)
        terms.append(Term("power-decay", K, {"power": 2.0, "parity": "even"}))
    return make_operator(A, terms, name="MODEL-C")


def model_d(b_values: tuple = (0.75, 1.3)) -> RadialOperator:
    """Zero rank, 4x4: b-spectrum {+-0.75, +-1.3} per end."""
    A, terms = _zero_rank_blocks(b_values)
    return make_operator(A, terms, name="MODEL-D")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    factory: Callable[..., RadialOperator]
    summary: str
    params: dict


CATALOG = {
    "MODEL-A": CatalogEntry("MODEL-A", model_a,
                            "m=2, A=i sigma2, C=i c tanh(t) I; fully elliptic, expected (ker, coker, index)=(1,1,0)",
                            {"c": 1.0}),
    "MODEL-B": CatalogEntry("MODEL-B", model_b,
                            "m=2, A=i sigma2, C=b sigma1 t/<t>^2; zero rank, b-spectrum {-b,b} per end",
                            {"b": 0.75}),
    "MODEL-C": CatalogEntry("MODEL-C", model_c,
                            "hybrid: MODEL-B blocks on V0 (one per b value), i c tanh(t) on V1, coupling gamma <t>^-2",
                            {"b_values": [0.75], "c": 1.0, "gamma": 0.3}),
    "MODEL-D": CatalogEntry("MODEL-D", model_d,
                            "m=4 zero rank, b-spectrum {+-b} for each b value per end",
                            {"b_values": [0.75, 1.3]}),
}


def get_model(name: str, **params) -> RadialOperator:
    key = name.upper()
    if key not in CATALOG:
        raise ModelError(f"unknown model {name!r}; known: {', '.join(CATALOG)}")
    entry = CATALOG[key]
    kw = {}
    for k, v in params.items():
        if k not in entry.params:
            raise ModelError(f"{key} has no parameter {k!r}")
        kw[k] = tuple(v) if isinstance(v, list) else v
    return entry.factory(**kw)


def builtin_models() -> list[RadialOperator]:
    return [get_model(name) for name in CATALOG]
