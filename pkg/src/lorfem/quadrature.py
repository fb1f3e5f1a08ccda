"""Legendre polynomials and Gauss-type quadrature rules on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class NodalRule:
    """Gauss-Lobatto points, weights and subinterval lengths of degree ``p``.

    The ``p + 1`` points are the roots of ``(1 - x**2) P_p'(x)``; they double
    as interpolation nodes and as the endpoints of the ``p`` histopolation
    subintervals.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def subinterval_lengths(self) -> np.ndarray:
        return np.diff(self.points)

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


def legendre_eval(p: int, x):
    """Return ``(P_p(x), P_p'(x))`` using the three-term recurrence.

    ``x`` may be a scalar or an array; the derivative uses
    ``P_k' = P_{k-2}' + (2k - 1) P_{k-1}``, which stays finite at ``x = +-1``.
    """
    if p < 0:
        raise ValueError(f"Legendre degree must be non-negative, got {p}")
    x = np.asarray(x, dtype=float)
    p_prev, p_cur = np.zeros_like(x), np.ones_like(x)
    d_prev, d_cur = np.zeros_like(x), np.zeros_like(x)
    for k in range(1, p + 1):
        p_next = ((2 * k - 1) * x * p_cur - (k - 1) * p_prev) / k
        d_next = d_prev + (2 * k - 1) * p_cur
        p_prev, p_cur = p_cur, p_next
        d_prev, d_cur = d_cur, d_next
    if x.ndim == 0:
        return float(p_cur), float(d_cur)
    return p_cur, d_cur


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def gauss_lobatto_rule(p: int) -> NodalRule:
    """Gauss-Lobatto rule with ``p + 1`` points, exact to degree ``2p - 1``."""
    if p < 1:
        raise ValueError(f"Gauss-Lobatto rule needs p >= 1, got {p}")
    n = p + 1
    x = -np.cos(np.pi * np.arange(n) / p)
    interior = x[1:-1].copy()
    # Newton on P_p'; (1 - x^2) P_p'' = 2x P_p' - p(p+1) P_p
    for _ in range(100):
        val, der = legendre_eval(p, interior)
        der2 = (2 * interior * der - p * (p + 1) * val) / (1 - interior**2)
        step = der / der2
        interior -= step
        if np.max(np.abs(step), initial=0.0) < 1e-16:
            break
    x[1:-1] = interior
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])
    if n % 2 == 1:
        x[p // 2] = 0.0
    pv, _ = legendre_eval(p, x)
    w = 2.0 / (p * (p + 1) * pv**2)
    w = 0.5 * (w + w[::-1])
    return NodalRule(p, _freeze(x), _freeze(w))


@lru_cache(maxsize=None)
def gauss_legendre_rule(q: int) -> QuadRule:
    """``q``-point Gauss-Legendre rule, exact to degree ``2q - 1``."""
    if q < 1:
        raise ValueError(f"Gauss-Legendre rule needs q >= 1, got {q}")
    x, w = np.polynomial.legendre.leggauss(q)
    return QuadRule(_freeze(x), _freeze(w))
