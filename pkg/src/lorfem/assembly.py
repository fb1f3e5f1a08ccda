"""High-order and LOR assembly of mass and stiffness operators, plus matrix-free mass.

Element matrices are sums over component pairs ``(c, c')`` of a constant
Piola metric entry times a Kronecker product of 1D Gram matrices.  The LOR
operator of a macro-element with constant Jacobian has exactly the same
structure with the lowest-order 1D Grams, so both share one code path.
Stiffness matrices are formed as ``Inc^T M_next Inc``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import BasisKind, LowQuad, QuadMode, high_order_gram, low_order_gram, paired_low_quad
from .derham import (RefElementLayout, SpaceKind, build_incidence, component_types, incidence_kind_for,
                     next_kind)
from .errors import InvariantError
from .spaces import FeSpace


class OpTag(str, enum.Enum):
    MASS = "mass"
    STIFFNESS = "stiffness"
    MASS_PLUS_STIFFNESS = "mass_plus_stiffness"
    IP_DG = "ip_dg"
    IP_DG_LOR = "ip_dg_lor"
    GRAPH_LAPLACIAN = "graph_laplacian"


@dataclass(frozen=True)
class Coefficients:
    """Piecewise-constant coefficients: ``alpha`` on the stiffness, ``beta`` on the mass."""

    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def uniform(cls, n_elements: int, alpha: float = 1.0, beta: float = 1.0) -> "Coefficients":
        return cls(np.full(n_elements, float(alpha)), np.full(n_elements, float(beta)))

    def check(self, n_elements: int) -> None:
        for name in ("alpha", "beta"):
            v = np.asarray(getattr(self, name))
            if v.shape != (n_elements,):
                raise ValueError(f"coefficient {name} has shape {v.shape}, expected ({n_elements},)")
            if not np.all(v > 0):
                raise ValueError(f"coefficient {name} must be positive")


def _coeffs(space: FeSpace, coefficients) -> Coefficients:
    if coefficients is None:
        return Coefficients.uniform(space.mesh.n_elements)
    coefficients.check(space.mesh.n_elements)
    return coefficients


@dataclass(frozen=True, eq=False)
class AssembledOp:
    matrix: sp.csr_matrix
    space: FeSpace
    tag: OpTag
    quad_mode: str
    coefficients: Coefficients | None = None
    info: dict = field(default_factory=dict)

    def check_symmetric(self, rtol: float = 1e-12) -> None:
        a = self.matrix
        scale = abs(a).max() if a.nnz else 0.0
        asym = abs(a - a.T).max() if a.nnz else 0.0
        if asym > rtol * max(scale, 1e-300):
            raise InvariantError(f"{self.tag.value} matrix not symmetric: |A - A^T| = {asym:.3e}")


def piola_metric(kind, jac: np.ndarray) -> np.ndarray:
    """Constant integrand weight ``(n_el, n_comp, n_comp)`` of the mapped mass form."""
    kind = SpaceKind.parse(kind)
    jac = np.asarray(jac, dtype=float)
    det = np.abs(np.linalg.det(jac))
    if np.any(det <= 0):
        raise ValueError("singular element Jacobian")
    if kind in (SpaceKind.H1, SpaceKind.DG):
        return det[:, None, None]
    if kind is SpaceKind.L2:
        return (1.0 / det)[:, None, None]
    if kind is SpaceKind.HCURL:
        inv = np.linalg.inv(jac)
        return inv @ inv.swapaxes(-1, -2) * det[:, None, None]
    return jac.swapaxes(-1, -2) @ jac / det[:, None, None]


def _axis_grams(space_kind, p, d, c, c2, order, quad_mode, low_quad, variant):
    comps = component_types(space_kind, d)
    out = []
    for ta, tb in zip(comps[c], comps[c2]):
        if order == "high":
            out.append(high_order_gram(p, ta, tb, quad_mode.value, variant.value))
        else:
            out.append(low_order_gram(p, ta, tb, low_quad.value))
    return out


def _kron(mats) -> sp.csr_matrix:
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), [sp.csr_matrix(m) for m in reversed(mats)])


def _resolve_quads(quad_mode, low_quad):
    quad_mode = QuadMode(quad_mode)
    low_quad = paired_low_quad(quad_mode) if low_quad is None else LowQuad(low_quad)
    return quad_mode, low_quad


def _mass_blocks(kind, p, d, order, quad_mode, low_quad, variant, metric):
    ncomp = metric.shape[1]
    blocks = {}
    for c in range(ncomp):
        for c2 in range(ncomp):
            if np.any(metric[:, c, c2] != 0.0):
                blocks[(c, c2)] = _kron(_axis_grams(kind, p, d, c, c2, order, quad_mode, low_quad, variant))
    return blocks


def _element_mass(blocks, ncomp, metric_e) -> sp.csr_matrix:
    grid = [[None] * ncomp for _ in range(ncomp)]
    for (c, c2), blk in blocks.items():
        grid[c][c2] = metric_e[c, c2] * blk
    for c in range(ncomp):
        if grid[c][c] is None:
            raise InvariantError("mass metric has a vanishing diagonal block")
    return sp.bmat(grid, format="csr")


def element_matrices(space: FeSpace, tag, quad_mode="collocated", coefficients=None, order="high",
                     low_quad=None) -> list:
    """Sparse element matrices in reference-layout order, one per element."""
    tag = OpTag(tag)
    quad_mode, low_quad = _resolve_quads(quad_mode, low_quad)
    coefficients = _coeffs(space, coefficients)
    mesh, p, d = space.mesh, space.p, space.d
    ne, nloc = space.elem_dofs.shape
    out = [sp.csr_matrix((nloc, nloc)) for _ in range(ne)]
    if tag in (OpTag.MASS, OpTag.MASS_PLUS_STIFFNESS):
        metric = piola_metric(space.kind, mesh.jacobians)
        blocks = _mass_blocks(space.kind, p, d, order, quad_mode, low_quad, space.variant, metric)
        ncomp = metric.shape[1]
        for e in range(ne):
            out[e] = out[e] + coefficients.beta[e] * _element_mass(blocks, ncomp, metric[e])
    if tag in (OpTag.STIFFNESS, OpTag.MASS_PLUS_STIFFNESS):
        if space.kind in (SpaceKind.L2, SpaceKind.DG):
            raise ValueError(f"no conforming stiffness for {space.kind.value}")
        if space.variant is not BasisKind.HISTOPOLATION:
            raise ValueError("stiffness requires the histopolation basis")
        nxt = next_kind(space.kind, d)
        inc = build_incidence(incidence_kind_for(space.kind, d), p, d).matrix
        metric = piola_metric(nxt, mesh.jacobians)
        blocks = _mass_blocks(nxt, p, d, order, quad_mode, low_quad, BasisKind.HISTOPOLATION, metric)
        ncomp = metric.shape[1]
        for e in range(ne):
            mn = _element_mass(blocks, ncomp, metric[e])
            out[e] = out[e] + coefficients.alpha[e] * (inc.T @ mn @ inc)
    return [m.tocsr() for m in out]


def _scatter(space: FeSpace, emats: list) -> sp.csr_matrix:
    dofs = space.elem_dofs
    rows, cols, vals = [], [], []
    for e, m in enumerate(emats):
        coo = m.tocoo()
        rows.append(dofs[e][coo.row])
        cols.append(dofs[e][coo.col])
        vals.append(coo.data)
    a = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.ndofs, space.ndofs)).tocsr()
    a.sum_duplicates()
    a.eliminate_zeros()
    return a


def assemble(space: FeSpace, op_tag, quad_mode="collocated", coefficients=None, *, order="high",
             low_quad=None) -> AssembledOp:
    """Assemble the high-order (``order="high"``) or LOR (``order="low"``) operator."""
    tag = OpTag(op_tag)
    if tag not in (OpTag.MASS, OpTag.STIFFNESS, OpTag.MASS_PLUS_STIFFNESS):
        raise ValueError(f"assemble handles mass/stiffness tags, got {tag.value}")
    emats = element_matrices(space, tag, quad_mode, coefficients, order, low_quad)
    a = _scatter(space, emats)
    a = 0.5 * (a + a.T)
    out = AssembledOp(a.tocsr(), space, tag, QuadMode(quad_mode).value, coefficients,
                      {"order": order, "low_quad": _resolve_quads(quad_mode, low_quad)[1].value})
    out.check_symmetric()
    return out


def assemble_lor(space: FeSpace, op_tag, coefficients=None, quad_mode="collocated", low_quad=None) -> AssembledOp:
    """Lowest-order operator on the Gauss-Lobatto refined mesh, indexed like ``space``.

    ``low_quad`` defaults to vertex quadrature when ``quad_mode`` is
    collocated and to exact integration otherwise.
    """
    if space.kind is SpaceKind.DG:
        raise ValueError("use dg.assemble_ip_dg_lor for DG spaces")
    return assemble(space, op_tag, quad_mode, coefficients, order="low", low_quad=low_quad)


def eliminate_dirichlet(a, dofs, b=None, values=None):
    """Symmetric elimination: zero rows/columns of ``dofs``, unit diagonal.

    Returns the modified matrix, or ``(matrix, rhs)`` when ``b`` is given;
    known ``values`` are moved to the right-hand side.
    """
    a = sp.csr_matrix(a, copy=True)
    n = a.shape[0]
    dofs = np.asarray(dofs, dtype=int)
    mask = np.zeros(n, dtype=bool)
    mask[dofs] = True
    if b is not None:
        b = np.array(b, dtype=float, copy=True)
        if values is not None:
            g = np.zeros(n)
            g[dofs] = values
            b -= a @ g
            b[dofs] = g[dofs]
        else:
            b[dofs] = 0.0
    keep = sp.diags((~mask).astype(float))
    a = (keep @ a @ keep + sp.diags(mask.astype(float))).tocsr()
    a.eliminate_zeros()
    return a if b is None else (a, b)


# ---------------------------------------------------------------- matrix-free


def _kron_apply(mats, x: np.ndarray) -> np.ndarray:
    """Apply ``kron`` of per-axis factors to a batch ``x`` of shape ``(n, n_{d-1}, ..., n_0)``."""
    nd = x.ndim - 1
    for a, m in enumerate(mats):
        ax = nd - a
        x = np.moveaxis(np.tensordot(m, x, axes=([1], [ax])), 0, ax)
    return x


class MassOperator:
    """Sum-factorized application of the (high- or low-order) mass matrix."""

    def __init__(self, space: FeSpace, coefficients=None, quad_mode="collocated", order="high", low_quad=None):
        self.space = space
        self.coefficients = _coeffs(space, coefficients)
        self.quad_mode, self.low_quad = _resolve_quads(quad_mode, low_quad)
        self.order = order
        self.metric = piola_metric(space.kind, space.mesh.jacobians) * self.coefficients.beta[:, None, None]
        layout = space.layout
        self._offsets = layout.component_offsets
        self._shapes = [tuple(reversed(layout.component_shape(c))) for c in range(len(layout.components))]
        self._grams = {}
        for c in range(len(layout.components)):
            for c2 in range(len(layout.components)):
                if np.any(self.metric[:, c, c2] != 0.0):
                    self._grams[(c, c2)] = _axis_grams(space.kind, space.p, space.d, c, c2, order,
                                                       self.quad_mode, self.low_quad, space.variant)

    @property
    def shape(self):
        return (self.space.ndofs, self.space.ndofs)

    def apply(self, u: np.ndarray) -> np.ndarray:
        dofs = self.space.elem_dofs
        ue = np.asarray(u, dtype=float)[dofs]
        ne = ue.shape[0]
        ye = np.zeros_like(ue)
        for (c, c2), mats in self._grams.items():
            xc = ue[:, self._offsets[c2]:self._offsets[c2 + 1]].reshape((ne,) + self._shapes[c2])
            yc = _kron_apply(mats, xc).reshape(ne, -1)
            ye[:, self._offsets[c]:self._offsets[c + 1]] += self.metric[:, c, c2, None] * yc
        return np.bincount(dofs.ravel(), weights=ye.ravel(), minlength=self.space.ndofs)

    __matmul__ = apply

    def diagonal(self) -> np.ndarray:
        dofs = self.space.elem_dofs
        ne = dofs.shape[0]
        de = np.zeros(dofs.shape)
        for c in range(len(self._offsets) - 1):
            mats = self._grams.get((c, c))
            if mats is None:
                continue
            dk = reduce(np.kron, [np.diag(m) for m in reversed(mats)])
            de[:, self._offsets[c]:self._offsets[c + 1]] = self.metric[:, c, c, None] * dk[None, :]
        return np.bincount(dofs.ravel(), weights=de.ravel(), minlength=self.space.ndofs)

    def as_linear_operator(self, n=None) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, dtype=float)


def apply_mass_matfree(space: FeSpace, coefficients, u, quad_mode="collocated") -> np.ndarray:
    return MassOperator(space, coefficients, quad_mode).apply(u)


def mass_diagonal(space: FeSpace, coefficients=None, basis_variant=None, quad_mode="exact", order="high") -> np.ndarray:
    """Diagonal of the mass matrix without global assembly.

    ``basis_variant`` overrides the basis of the discontinuous factors;
    ``order="low"`` gives the diagonal of the LOR mass matrix.
    """
    if basis_variant is not None and BasisKind(basis_variant) is not space.variant:
        space = FeSpace(space.kind, space.p, space.mesh, BasisKind(basis_variant))
    return MassOperator(space, coefficients, quad_mode, order).diagonal()


class SystemOperator:
    """Matrix-free ``A = M + Inc^T M_next Inc`` with optional Dirichlet elimination."""

    def __init__(self, space: FeSpace, coefficients=None, quad_mode="collocated", order="high", low_quad=None,
                 dirichlet=True):
        coefficients = _coeffs(space, coefficients)
        self.space = space
        self.mass = MassOperator(space, coefficients, quad_mode, order, low_quad)
        nxt = space.next_space()
        self.inc = space.incidence
        self.next_mass = MassOperator(nxt, Coefficients(np.ones_like(coefficients.alpha), coefficients.alpha),
                                      quad_mode, order, low_quad)
        self.fixed = space.boundary_dofs if dirichlet else np.zeros(0, dtype=int)
        self._mask = np.ones(space.ndofs)
        self._mask[self.fixed] = 0.0

    @property
    def shape(self):
        return (self.space.ndofs, self.space.ndofs)

    def apply(self, u):
        v = self._mask * u
        y = self.mass.apply(v) + self.inc.T @ self.next_mass.apply(self.inc @ v)
        y = self._mask * y
        y[self.fixed] = u[self.fixed]
        return y

    __matmul__ = apply

    def as_linear_operator(self, n=None) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, dtype=float)


def export_matrix_market(op, path) -> None:
    """Write a symmetric matrix in MatrixMarket coordinate format (1-based)."""
    a = op.matrix if isinstance(op, AssembledOp) else op
    scipy.io.mmwrite(str(path), sp.coo_matrix(a), symmetry="symmetric", field="real")
