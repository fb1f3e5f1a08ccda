"""Finite element spaces on Cartesian meshes: DOF numbering and incidence."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .basis import BasisKind, DISCONTINUOUS_VARIANTS
from .derham import (RefElementLayout, SpaceKind, build_incidence, factor_size, incidence_kind_for,
                     next_kind)
from .mesh import CartMesh


@dataclass(frozen=True, eq=False)
class FeSpace:
    """A high-order space on a :class:`CartMesh`.

    Conforming spaces (H1, HCurl, HDiv) number each component on a global
    tensor grid (axis 0 fastest, components x, y, z in blocks): along an
    interpolatory axis the grid has ``n * p + 1`` points, along a
    discontinuous axis ``n * p`` subintervals.  Sharing of nodal, tangential
    and normal DOFs across element interfaces follows from that numbering,
    and all orientation signs are ``+1`` because every edge and face is
    oriented along the global axes.  L2 and DG are numbered element by
    element.

    ``build_space(L2, p)`` is the histopolation space of degree ``p - 1``.
    """

    kind: SpaceKind
    p: int
    mesh: CartMesh
    variant: BasisKind = BasisKind.HISTOPOLATION

    @property
    def d(self) -> int:
        return self.mesh.d

    @cached_property
    def layout(self) -> RefElementLayout:
        return RefElementLayout(self.kind, self.p, self.d)

    @property
    def conforming(self) -> bool:
        return self.kind in (SpaceKind.H1, SpaceKind.HCURL, SpaceKind.HDIV)

    def _grid_shape(self, comp: int) -> tuple:
        types = self.layout.components[comp]
        return tuple(n * self.p + (1 if t == "I" else 0) for n, t in zip(self.mesh.counts, types))

    @cached_property
    def _comp_offsets(self) -> np.ndarray:
        sizes = [int(np.prod(self._grid_shape(c))) for c in range(len(self.layout.components))]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def ndofs(self) -> int:
        if self.conforming:
            return int(self._comp_offsets[-1])
        return self.mesh.n_elements * self.layout.ndofs

    @cached_property
    def elem_dofs(self) -> np.ndarray:
        """``(n_elements, n_local)`` global DOF indices in reference-layout order."""
        ne = self.mesh.n_elements
        nloc = self.layout.ndofs
        if not self.conforming:
            return np.arange(ne * nloc).reshape(ne, nloc)
        emi = self.mesh.element_multi_index()  # (d, ne)
        blocks = []
        for c in range(len(self.layout.components)):
            shape = self.layout.component_shape(c)
            loc = np.indices(tuple(reversed(shape))).reshape(self.d, -1)[::-1]  # (d, nc)
            g = emi[:, :, None] * self.p + loc[:, None, :]  # (d, ne, nc)
            gshape = self._grid_shape(c)
            flat = np.ravel_multi_index(tuple(g[::-1]), tuple(reversed(gshape)))
            blocks.append(flat + self._comp_offsets[c])
        out = np.concatenate(blocks, axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def elem_signs(self) -> np.ndarray:
        return np.ones(self.elem_dofs.shape)

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        """DOFs with a domain-boundary trace (none for L2 and DG)."""
        if not self.conforming:
            return np.zeros(0, dtype=int)
        out = []
        for c, types in enumerate(self.layout.components):
            gshape = self._grid_shape(c)
            idx = np.indices(tuple(reversed(gshape))).reshape(self.d, -1)[::-1]
            mask = np.zeros(idx.shape[1], dtype=bool)
            for a, t in enumerate(types):
                if t == "I":
                    mask |= (idx[a] == 0) | (idx[a] == gshape[a] - 1)
            out.append(np.flatnonzero(mask) + self._comp_offsets[c])
        return np.concatenate(out)

    def next_space(self) -> "FeSpace":
        return FeSpace(next_kind(self.kind, self.d), self.p, self.mesh)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Global grad/curl/div matrix into :meth:`next_space`."""
        if self.variant is not BasisKind.HISTOPOLATION:
            raise ValueError("incidence operators require the histopolation basis")
        target = self.next_space()
        ref = build_incidence(incidence_kind_for(self.kind, self.d), self.p, self.d).matrix.tocoo()
        rows = target.elem_dofs[:, ref.row].ravel()
        cols = self.elem_dofs[:, ref.col].ravel()
        vals = np.tile(ref.data, self.mesh.n_elements)
        # entries shared between elements are identical; keep one copy each
        key = rows.astype(np.int64) * self.ndofs + cols
        _, first = np.unique(key, return_index=True)
        return sp.csr_matrix((vals[first], (rows[first], cols[first])), shape=(target.ndofs, self.ndofs))


def expected_ndofs(kind, p: int, counts) -> int:
    """Closed-form global DOF count on a Cartesian grid."""
    kind = SpaceKind.parse(kind)
    d = len(counts)
    if kind in (SpaceKind.L2, SpaceKind.DG):
        loc = RefElementLayout(kind, p, d).ndofs
        return loc * int(np.prod(counts))
    total = 0
    for types in RefElementLayout(kind, p, d).components:
        total += int(np.prod([n * p + (1 if t == "I" else 0) for n, t in zip(counts, types)]))
    return total


def build_space(kind, p: int, mesh: CartMesh, basis_variant="histopolation") -> FeSpace:
    kind = SpaceKind.parse(kind)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    variant = BasisKind(basis_variant)
    if variant not in DISCONTINUOUS_VARIANTS:
        raise ValueError(f"basis variant must be one of {[v.value for v in DISCONTINUOUS_VARIANTS]}")
    return FeSpace(kind, int(p), mesh, variant)


__all__ = ["FeSpace", "build_space", "expected_ndofs", "factor_size"]
