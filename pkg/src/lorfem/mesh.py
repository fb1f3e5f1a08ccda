"""Affine tensor-product meshes, Gauss-Lobatto LOR refinement and face enumeration."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quadrature import gauss_lobatto_rule


class RefineMode(str, enum.Enum):
    STANDARD = "standard"
    DG = "dg"


class FaceClass(enum.IntEnum):
    INTERIOR = 0  # fine face inside a macro-element (Gamma interior)
    COARSE = 1  # fine face lying on a coarse face (Gamma boundary-of-macro)


@dataclass(frozen=True)
class FaceSet:
    """Faces of a tensor grid of cells.

    ``minus`` is the cell on the low-coordinate side (lower index), ``plus``
    the cell on the high side; ``-1`` marks a missing neighbour on the
    domain boundary.  The unit normal points from ``minus`` to ``plus``.
    """

    axis: np.ndarray
    minus: np.ndarray
    plus: np.ndarray
    area: np.ndarray
    plane: np.ndarray  # grid-line index along ``axis``

    def __len__(self) -> int:
        return self.axis.size

    @property
    def is_boundary(self) -> np.ndarray:
        return (self.minus < 0) | (self.plus < 0)

    def owner(self) -> np.ndarray:
        """The (single) adjacent cell of a boundary face, or ``minus`` otherwise."""
        return np.where(self.minus >= 0, self.minus, self.plus)


def _grid_faces(counts, volumes_fn, cell_index, area_fn):
    """Enumerate faces of a grid with ``counts`` cells per axis (axis 0 fastest)."""
    d = len(counts)
    axis_l, minus_l, plus_l, plane_l, area_l = [], [], [], [], []
    for a in range(d):
        shape = list(counts)
        shape[a] += 1
        idx = np.indices(tuple(reversed(shape))).reshape(d, -1)[::-1]
        k = idx[a]
        lo = idx.copy()
        lo[a] = k - 1
        hi = idx.copy()
        minus = np.where(k > 0, cell_index(np.clip(lo, 0, None)), -1)
        plus = np.where(k < counts[a], cell_index(np.minimum(hi, np.array(counts)[:, None] - 1)), -1)
        axis_l.append(np.full(k.size, a))
        minus_l.append(minus)
        plus_l.append(plus)
        plane_l.append(k)
        area_l.append(area_fn(a, idx))
    return FaceSet(*(np.concatenate(x) for x in (axis_l, minus_l, plus_l, area_l, plane_l)))


@dataclass(frozen=True, eq=False)
class CartMesh:
    """Affine Cartesian mesh ``x = A @ xi`` over a graded tensor grid ``xi``.

    ``axis_nodes[a]`` are the grid lines along axis ``a`` before the global
    linear map ``transform`` (identity by default).  Elements are numbered
    lexicographically with axis 0 fastest.
    """

    d: int
    counts: tuple
    axis_nodes: tuple
    transform: np.ndarray
    description: dict = field(default_factory=dict)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.counts))

    def element_index(self, multi) -> np.ndarray:
        multi = np.asarray(multi)
        return np.ravel_multi_index(tuple(multi[::-1]), tuple(reversed(self.counts)))

    def element_multi_index(self, e=None) -> np.ndarray:
        """``(d, n)`` array of per-axis element indices."""
        e = np.arange(self.n_elements) if e is None else np.asarray(e)
        return np.array(np.unravel_index(e, tuple(reversed(self.counts))))[::-1]

    @cached_property
    def widths(self) -> np.ndarray:
        """``(n_elements, d)`` reference-grid widths of every element."""
        mi = self.element_multi_index()
        return np.stack([np.diff(self.axis_nodes[a])[mi[a]] for a in range(self.d)], axis=1)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """``(n_elements, d, d)`` constant Jacobians of the maps from ``[-1, 1]^d``."""
        return self.transform[None, :, :] * (self.widths / 2.0)[:, None, :]

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(np.linalg.det(self.jacobians)) * 2.0**self.d

    def element_origin(self, e=None) -> np.ndarray:
        mi = self.element_multi_index(e)
        lo = np.stack([self.axis_nodes[a][mi[a]] for a in range(self.d)], axis=-1)
        return lo @ self.transform.T

    @cached_property
    def faces(self) -> FaceSet:
        def area(a, idx):
            # transverse widths of the (clipped) adjacent element
            e = self.element_index(np.minimum(idx, np.array(self.counts)[:, None] - 1))
            return face_areas(self.jacobians[e], a)

        return _grid_faces(self.counts, None, self.element_index, area)

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"counts": list(self.counts), "nodes": [np.round(n, 15).tolist() for n in self.axis_nodes],
             "transform": np.round(self.transform, 15).tolist()},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def face_areas(jac: np.ndarray, axis: int) -> np.ndarray:
    """Measure of the reference face normal to ``axis`` under constant Jacobians."""
    jac = np.asarray(jac)
    d = jac.shape[-1]
    det = np.abs(np.linalg.det(jac))
    cof = np.linalg.inv(jac).swapaxes(-1, -2)[..., :, axis]
    return det * np.linalg.norm(cof, axis=-1) * 2.0 ** (d - 1)


def _graded_nodes(lo: float, hi: float, n: int, g: float) -> np.ndarray:
    if g <= 0:
        raise ValueError(f"grading factor must be positive, got {g}")
    w = g ** np.arange(n, dtype=float)
    w *= (hi - lo) / w.sum()
    nodes = lo + np.concatenate([[0.0], np.cumsum(w)])
    nodes[-1] = hi
    return nodes


def build_cart_mesh(d: int, counts, box_extents=None, stretch=None, transform=None) -> CartMesh:
    """Build an affine tensor-product mesh.

    Parameters
    ----------
    d : int
        Spatial dimension, 1 to 3.
    counts : sequence of int
        Elements per axis.
    box_extents : sequence, optional
        Per-axis ``(lo, hi)`` pairs or lengths (meaning ``(0, L)``); unit box
        by default.
    stretch : sequence of float, optional
        Per-axis geometric grading ratio of consecutive element widths.
    transform : array_like, optional
        ``d x d`` matrix applied to the whole box (positive determinant).
    """
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    counts = tuple(int(c) for c in np.broadcast_to(counts, (d,)))
    if any(c < 1 for c in counts):
        raise ValueError(f"element counts must be >= 1, got {counts}")
    if box_extents is None:
        box_extents = [(0.0, 1.0)] * d
    ext = []
    for e in box_extents:
        lo, hi = (0.0, float(e)) if np.ndim(e) == 0 else (float(e[0]), float(e[1]))
        if not hi > lo:
            raise ValueError(f"box extents must be positive, got ({lo}, {hi})")
        ext.append((lo, hi))
    if len(ext) != d:
        raise ValueError(f"expected {d} box extents, got {len(ext)}")
    stretch = [1.0] * d if stretch is None else [float(s) for s in np.broadcast_to(stretch, (d,))]
    nodes = tuple(_graded_nodes(lo, hi, n, g) for (lo, hi), n, g in zip(ext, counts, stretch))
    for n in nodes:
        n.setflags(write=False)
    a = np.eye(d) if transform is None else np.array(transform, dtype=float).reshape(d, d)
    if np.linalg.det(a) <= 0:
        raise ValueError("mesh transform must have positive determinant")
    desc = {"dim": d, "counts": list(counts), "extents": [list(x) for x in ext], "grading": stretch}
    if transform is not None:
        desc["transform"] = a.tolist()
    return CartMesh(d, counts, nodes, a, desc)


def mesh_from_config(cfg: dict) -> CartMesh:
    """Mesh from its JSON description (``dim``, ``counts``, ``extents``, ``grading``, ``transform``)."""
    return build_cart_mesh(cfg["dim"], cfg["counts"], cfg.get("extents"), cfg.get("grading"), cfg.get("transform"))


@dataclass(frozen=True, eq=False)
class LorMesh:
    """Refinement of every element of ``parent`` along Gauss-Lobatto points.

    Standard mode splits at the ``p + 1`` points of degree ``p`` (``p^d``
    subcells); DG mode at the ``p + 2`` points of degree ``p + 1``
    (``(p + 1)^d`` subcells).  Subcells are numbered element-major, axis 0
    fastest inside an element.
    """

    parent: CartMesh
    p: int
    mode: RefineMode

    @property
    def d(self) -> int:
        return self.parent.d

    @property
    def m(self) -> int:
        """Subcells per element and axis."""
        return self.p if self.mode is RefineMode.STANDARD else self.p + 1

    @property
    def ref_points(self) -> np.ndarray:
        return gauss_lobatto_rule(self.m).points

    @property
    def n_cells(self) -> int:
        return self.parent.n_elements * self.m**self.d

    @property
    def fine_counts(self) -> tuple:
        return tuple(c * self.m for c in self.parent.counts)

    @cached_property
    def axis_nodes(self) -> tuple:
        """Fine grid lines along each axis (before the global transform)."""
        out = []
        t = (self.ref_points[:-1] + 1.0) / 2.0
        for a in range(self.d):
            nodes = self.parent.axis_nodes[a]
            w = np.diff(nodes)
            fine = (nodes[:-1, None] + w[:, None] * t[None, :]).ravel()
            out.append(np.concatenate([fine, nodes[-1:]]))
        return tuple(out)

    def cell_index(self, fine_multi) -> np.ndarray:
        """Element-major subcell index of fine-grid multi-indices ``(d, n)``."""
        fine_multi = np.asarray(fine_multi)
        elem = fine_multi // self.m
        loc = fine_multi % self.m
        e = self.parent.element_index(elem)
        l_idx = np.ravel_multi_index(tuple(loc[::-1]), (self.m,) * self.d)
        return e * self.m**self.d + l_idx

    def cell_fine_multi(self, cells=None) -> np.ndarray:
        cells = np.arange(self.n_cells) if cells is None else np.asarray(cells)
        e, loc = np.divmod(cells, self.m**self.d)
        emi = self.parent.element_multi_index(e)
        lmi = np.array(np.unravel_index(loc, (self.m,) * self.d))[::-1]
        return emi * self.m + lmi

    @cached_property
    def widths(self) -> np.ndarray:
        fm = self.cell_fine_multi()
        return np.stack([np.diff(self.axis_nodes[a])[fm[a]] for a in range(self.d)], axis=1)

    @cached_property
    def jacobians(self) -> np.ndarray:
        return self.parent.transform[None, :, :] * (self.widths / 2.0)[:, None, :]

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(np.linalg.det(self.jacobians)) * 2.0**self.d

    @cached_property
    def faces(self) -> FaceSet:
        def area(a, idx):
            cell = self.cell_index(np.minimum(idx, np.array(self.fine_counts)[:, None] - 1))
            return face_areas(self.jacobians[cell], a)

        return _grid_faces(self.fine_counts, None, self.cell_index, area)

    @cached_property
    def face_class(self) -> np.ndarray:
        return np.where(self.faces.plane % self.m == 0, FaceClass.COARSE, FaceClass.INTERIOR).astype(int)

    @cached_property
    def parent_face(self) -> np.ndarray:
        """Index into ``parent.faces`` for coarse-class fine faces, ``-1`` otherwise."""
        pf = self.parent.faces
        lookup = {}
        for f in range(len(pf)):
            lookup[(int(pf.axis[f]), int(pf.minus[f]), int(pf.plus[f]))] = f
        ff = self.faces
        out = np.full(len(ff), -1)
        sub = self.m**self.d
        for f in np.flatnonzero(self.face_class == FaceClass.COARSE):
            lo = ff.minus[f] // sub if ff.minus[f] >= 0 else -1
            hi = ff.plus[f] // sub if ff.plus[f] >= 0 else -1
            out[f] = lookup[(int(ff.axis[f]), int(lo), int(hi))]
        return out

    def vertices(self) -> list:
        """Physical fine-grid vertex coordinates on each axis line (pre-transform)."""
        return list(self.axis_nodes)


def lor_refine(mesh: CartMesh, p: int, mode="standard") -> LorMesh:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return LorMesh(mesh, int(p), RefineMode(str(mode).lower()))


def face_perpendicular_lengths(cells, face: int) -> tuple[float, float, float]:
    """Perpendicular lengths ``(h_plus, h_minus, h_avg)`` across one face.

    ``h = mu(cell) / mu(face)``; a boundary face uses its single neighbour
    for both sides.
    """
    faces = cells.faces
    mu = faces.area[face]
    mi, pl = int(faces.minus[face]), int(faces.plus[face])
    h_minus = cells.volumes[mi] / mu if mi >= 0 else None
    h_plus = cells.volumes[pl] / mu if pl >= 0 else None
    if h_minus is None:
        h_minus = h_plus
    if h_plus is None:
        h_plus = h_minus
    return float(h_plus), float(h_minus), 0.5 * float(h_plus + h_minus)


def perpendicular_lengths(cells) -> np.ndarray:
    """Vectorized ``h_avg`` for every face of a mesh or LOR mesh."""
    faces = cells.faces
    vm = np.where(faces.minus >= 0, cells.volumes[np.maximum(faces.minus, 0)], np.nan)
    vp = np.where(faces.plus >= 0, cells.volumes[np.maximum(faces.plus, 0)], np.nan)
    vm = np.where(np.isnan(vm), vp, vm)
    vp = np.where(np.isnan(vp), vm, vp)
    return 0.5 * (vm + vp) / faces.area
