"""One-dimensional interpolation and histopolation bases and their Gram matrices.

Naming of 1D factor types used throughout the package:

``"I"``  interpolation (nodal) basis on the ``p + 1`` Gauss-Lobatto points,
``"H"``  discontinuous basis with ``p`` functions (histopolation by default),
``"dI"`` derivatives of the interpolation basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .eigen import generalized_eigvalsh
from .quadrature import NodalRule, gauss_legendre_rule, gauss_lobatto_rule


class BasisKind(str, enum.Enum):
    INTERPOLATION = "interpolation"
    HISTOPOLATION = "histopolation"
    LOW_ORDER_LINEAR = "low_order_linear"
    LOW_ORDER_CONSTANT = "low_order_constant"
    # alternative bases for components without continuity (mass comparisons)
    LEGENDRE = "legendre"
    LOBATTO = "lobatto"


class QuadMode(str, enum.Enum):
    EXACT = "exact"
    COLLOCATED = "collocated"


class LowQuad(str, enum.Enum):
    """Quadrature for lowest-order Grams: exact, or trapezoid at subcell vertices."""

    EXACT = "exact"
    VERTEX = "vertex"


def paired_low_quad(quad_mode) -> LowQuad:
    """Low-order quadrature matching a high-order mode (collocated <-> vertex)."""
    return LowQuad.VERTEX if QuadMode(quad_mode) is QuadMode.COLLOCATED else LowQuad.EXACT


class OperatorKind(str, enum.Enum):
    MASS_INTERP = "mass_interp"
    MASS_HISTOP = "mass_histop"
    STIFFNESS = "stiffness"


DISCONTINUOUS_VARIANTS = (BasisKind.HISTOPOLATION, BasisKind.LEGENDRE, BasisKind.LOBATTO)


@dataclass(frozen=True)
class Basis1D:
    kind: BasisKind
    rule: NodalRule

    @property
    def degree(self) -> int:
        return self.rule.degree

    @property
    def dimension(self) -> int:
        if self.kind in (BasisKind.INTERPOLATION, BasisKind.LOW_ORDER_LINEAR):
            return self.degree + 1
        return self.degree


def make_basis(kind, p: int) -> Basis1D:
    return Basis1D(BasisKind(kind), gauss_lobatto_rule(p))


# ---------------------------------------------------------------- Lagrange


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    # products over <= 65 nodes on [-1, 1] stay well inside double range
    lam = 1.0 / np.prod(diff, axis=1)
    return lam / np.max(np.abs(lam))


@lru_cache(maxsize=None)
def _nodal_differentiation(nodes_key: tuple) -> np.ndarray:
    """``D[k, j] = l_j'(x_k)`` for the Lagrange basis on ``nodes``."""
    nodes = np.array(nodes_key)
    lam = _barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (lam[None, :] / lam[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def lagrange_values(nodes: np.ndarray, x) -> np.ndarray:
    """Values of the Lagrange basis on ``nodes`` at points ``x``; shape ``(len(x), n)``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if nodes.size == 1:
        return np.ones((x.size, 1))
    lam = _barycentric_weights(nodes)
    diff = x[:, None] - nodes[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    terms = lam[None, :] / diff
    vals = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    vals[rows] = hit[rows].astype(float)
    return vals


def lagrange_derivatives(nodes: np.ndarray, x) -> np.ndarray:
    """Derivatives of the Lagrange basis at ``x``, via ``l_j' = sum_k l_k(x) l_j'(x_k)``."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size == 1:
        return np.zeros((np.atleast_1d(x).size, 1))
    return lagrange_values(nodes, x) @ _nodal_differentiation(tuple(nodes))


# ---------------------------------------------------------------- evaluation


def _tabulate(basis: Basis1D, x: np.ndarray, deriv: bool) -> np.ndarray:
    rule = basis.rule
    p = rule.degree
    kind = basis.kind
    if kind is BasisKind.INTERPOLATION:
        return (lagrange_derivatives if deriv else lagrange_values)(rule.points, x)
    if kind is BasisKind.HISTOPOLATION:
        if deriv:
            raise ValueError("derivatives of the histopolation basis are not provided")
        # theta_i = -h_i * sum_{k <= i} l_k'
        dl = lagrange_derivatives(rule.points, x)
        return -np.cumsum(dl, axis=1)[:, :p] * rule.subinterval_lengths
    if kind is BasisKind.LEGENDRE:
        if deriv:
            raise ValueError("derivatives of discontinuous bases are not provided")
        return lagrange_values(gauss_legendre_rule(p).points, x)
    if kind is BasisKind.LOBATTO:
        if deriv:
            raise ValueError("derivatives of discontinuous bases are not provided")
        nodes = np.zeros(1) if p == 1 else gauss_lobatto_rule(p - 1).points
        return lagrange_values(nodes, x)
    # lowest-order bases on the Lobatto subcells
    pts = rule.points
    cell = np.clip(np.searchsorted(pts, x, side="right") - 1, 0, p - 1)
    if kind is BasisKind.LOW_ORDER_CONSTANT:
        if deriv:
            raise ValueError("derivatives of the piecewise-constant basis are not provided")
        out = np.zeros((x.size, p))
        out[np.arange(x.size), cell] = 1.0
        return out
    h = rule.subinterval_lengths[cell]
    out = np.zeros((x.size, p + 1))
    rows = np.arange(x.size)
    if deriv:
        out[rows, cell] = -1.0 / h
        out[rows, cell + 1] = 1.0 / h
    else:
        t = (x - pts[cell]) / h
        out[rows, cell] = 1.0 - t
        out[rows, cell + 1] = t
    return out


def eval_basis(basis: Basis1D, x) -> np.ndarray:
    """Values of all basis functions at ``x``.

    Returns a vector for scalar ``x`` and a ``(len(x), dimension)`` table
    otherwise.
    """
    xs = np.asarray(x, dtype=float)
    vals = _tabulate(basis, np.atleast_1d(xs), deriv=False)
    return vals[0] if xs.ndim == 0 else vals


def eval_basis_deriv(basis: Basis1D, x) -> np.ndarray:
    """Derivatives of the interpolation or piecewise-linear basis at ``x``.

    For the piecewise-linear basis the one-sided derivative from the right
    is returned (from the left at ``x = 1``).
    """
    if basis.kind not in (BasisKind.INTERPOLATION, BasisKind.LOW_ORDER_LINEAR):
        raise ValueError(f"derivatives are only available for interpolatory bases, not {basis.kind.value}")
    xs = np.asarray(x, dtype=float)
    vals = _tabulate(basis, np.atleast_1d(xs), deriv=True)
    return vals[0] if xs.ndim == 0 else vals


def derivative_dof_map(rule: NodalRule, nodal) -> np.ndarray:
    """Histopolation DOFs of the derivative of a nodal interpolant.

    ``m_i = (u_{i+1} - u_i) / h_i`` along the last axis of ``nodal``.
    """
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape[-1] != len(rule):
        raise ValueError(f"expected {len(rule)} nodal values, got {nodal.shape[-1]}")
    return np.diff(nodal, axis=-1) / rule.subinterval_lengths


@lru_cache(maxsize=None)
def derivative_matrix(p: int) -> np.ndarray:
    """Dense ``(p, p + 1)`` matrix of :func:`derivative_dof_map`."""
    h = gauss_lobatto_rule(p).subinterval_lengths
    g = np.zeros((p, p + 1))
    idx = np.arange(p)
    g[idx, idx] = -1.0 / h
    g[idx, idx + 1] = 1.0 / h
    g.setflags(write=False)
    return g


# ---------------------------------------------------------------- Gram matrices


def _quad_points(p: int, quad_mode: QuadMode):
    if quad_mode is QuadMode.COLLOCATED:
        rule = gauss_lobatto_rule(p)
    else:
        rule = gauss_legendre_rule(p + 1)
    return rule.points, rule.weights


def _factor_table(p: int, ftype: str, x: np.ndarray, variant: BasisKind) -> np.ndarray:
    if ftype == "I":
        return eval_basis(make_basis(BasisKind.INTERPOLATION, p), x)
    if ftype == "dI":
        return eval_basis_deriv(make_basis(BasisKind.INTERPOLATION, p), x)
    if ftype == "H":
        return eval_basis(Basis1D(variant, gauss_lobatto_rule(p)), x)
    raise ValueError(f"unknown factor type {ftype!r}")


@lru_cache(maxsize=None)
def high_order_gram(p: int, ta: str, tb: str, quad_mode="collocated", variant="histopolation") -> np.ndarray:
    """Gram matrix ``int phi_i psi_j`` of two 1D factor types on [-1, 1].

    Exact mode uses a ``(p + 1)``-point Gauss-Legendre rule, collocated mode
    the Gauss-Lobatto nodes themselves.
    """
    quad_mode = QuadMode(quad_mode)
    variant = BasisKind(variant)
    x, w = _quad_points(p, quad_mode)
    a = _factor_table(p, ta, x, variant)
    b = _factor_table(p, tb, x, variant)
    g = a.T @ (w[:, None] * b)
    if ta == tb:
        g = 0.5 * (g + g.T)
    g.setflags(write=False)
    return g


@lru_cache(maxsize=None)
def low_order_gram(p: int, ta: str, tb: str, low_quad="exact") -> np.ndarray:
    """Gram matrix of the lowest-order bases on the Lobatto subcells of [-1, 1].

    ``"I"`` are hat functions, ``"H"`` subcell indicators and ``"dI"`` hat
    derivatives.  Vertex quadrature (trapezoid per subcell) only changes the
    hat-hat block, which becomes the lumped diagonal.
    """
    low_quad = LowQuad(low_quad)
    h = gauss_lobatto_rule(p).subinterval_lengths
    n = p + 1
    idx = np.arange(p)
    key = (ta, tb)
    if key == ("I", "I"):
        g = np.zeros((n, n))
        if low_quad is LowQuad.VERTEX:
            g[idx, idx] += h / 2
            g[idx + 1, idx + 1] += h / 2
        else:
            g[idx, idx] += h / 3
            g[idx + 1, idx + 1] += h / 3
            g[idx, idx + 1] += h / 6
            g[idx + 1, idx] += h / 6
    elif key == ("H", "H"):
        g = np.diag(h)
    elif key in (("I", "H"), ("H", "I")):
        g = np.zeros((n, p))
        g[idx, idx] = h / 2
        g[idx + 1, idx] = h / 2
        if key == ("H", "I"):
            g = g.T
    elif key == ("dI", "dI"):
        g = np.zeros((n, n))
        g[idx, idx] += 1 / h
        g[idx + 1, idx + 1] += 1 / h
        g[idx, idx + 1] -= 1 / h
        g[idx + 1, idx] -= 1 / h
    else:
        raise ValueError(f"unsupported low-order factor pair {key}")
    g.setflags(write=False)
    return g


@dataclass(frozen=True)
class OperatorPair1D:
    kind: OperatorKind
    high_order: np.ndarray
    low_order: np.ndarray


def operator_pair_1d(rule: NodalRule, kind, quad_mode="exact") -> OperatorPair1D:
    """High-order and matching lowest-order 1D Gram matrices.

    The low-order side is integrated exactly in exact mode and by vertex
    quadrature in collocated mode (the lowest-order analogue of collocation).
    """
    kind = OperatorKind(kind)
    quad_mode = QuadMode(quad_mode)
    p = rule.degree
    ftype = {OperatorKind.MASS_INTERP: "I", OperatorKind.MASS_HISTOP: "H", OperatorKind.STIFFNESS: "dI"}[kind]
    high = high_order_gram(p, ftype, ftype, quad_mode)
    low = low_order_gram(p, ftype, ftype, paired_low_quad(quad_mode))
    return OperatorPair1D(kind, high, low)


def _deflate_constants(a: np.ndarray, b: np.ndarray):
    n = a.shape[0]
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    z = q[:, 1:]
    return z.T @ a @ z, z.T @ b @ z


def pencil_extremes(pair: OperatorPair1D) -> tuple[float, float]:
    """Extreme generalized eigenvalues of ``(high_order, low_order)``.

    The constant kernel of the stiffness pair is deflated first.
    """
    a, b = pair.high_order, pair.low_order
    if pair.kind is OperatorKind.STIFFNESS:
        a, b = _deflate_constants(a, b)
    eig = generalized_eigvalsh(a, b, method="jacobi")
    if eig[0] <= 0.0:
        raise np.linalg.LinAlgError("high-order Gram matrix is numerically singular")
    return float(eig[0]), float(eig[-1])


def equivalence_constants(p: int, kind, quad_mode="exact") -> tuple[float, float]:
    """Extreme eigenvalues ``(c, C)`` of the 1D mass pencil (high, low).

    ``kind`` is ``"interp"`` or ``"histop"``.  ``c * m_low <= m_high <= C * m_low``
    holds for the squared norms, and ``C / c`` is the equivalence ratio.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    op = {"interp": OperatorKind.MASS_INTERP, "histop": OperatorKind.MASS_HISTOP}[str(kind).lower()]
    return pencil_extremes(operator_pair_1d(gauss_lobatto_rule(p), op, quad_mode))
