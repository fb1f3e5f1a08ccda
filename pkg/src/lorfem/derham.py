"""Tensor-product DOF layouts and discrete grad/curl/div incidence operators."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .basis import derivative_matrix


class SpaceKind(str, enum.Enum):
    H1 = "H1"
    HCURL = "HCurl"
    HDIV = "HDiv"
    L2 = "L2"
    DG = "DG"

    @classmethod
    def parse(cls, value) -> "SpaceKind":
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ValueError(f"unknown space kind {value!r}")


class IncidenceKind(str, enum.Enum):
    GRAD = "grad"
    CURL = "curl"
    DIV = "div"


def component_types(kind, d: int) -> list[tuple[str, ...]]:
    """Per-component tuple of 1D factor types (``"I"`` or ``"H"``), axis 0 first."""
    kind = SpaceKind.parse(kind)
    if kind in (SpaceKind.H1, SpaceKind.DG):
        return [("I",) * d]
    if kind is SpaceKind.L2:
        return [("H",) * d]
    if kind is SpaceKind.HCURL:
        return [tuple("H" if a == c else "I" for a in range(d)) for c in range(d)]
    return [tuple("I" if a == c else "H" for a in range(d)) for c in range(d)]


def factor_size(t: str, p: int) -> int:
    return p + 1 if t == "I" else p


def kron_axes(mats):
    """Kronecker product of per-axis factors with axis 0 varying fastest."""
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), [sp.csr_matrix(m) for m in reversed(mats)])


def next_kind(kind, d: int) -> SpaceKind:
    """Target space of the incidence operator leaving ``kind``."""
    kind = SpaceKind.parse(kind)
    if kind is SpaceKind.H1:
        return SpaceKind.HCURL if d > 1 else SpaceKind.L2
    if kind is SpaceKind.HCURL:
        return SpaceKind.HDIV if d == 3 else SpaceKind.L2
    if kind is SpaceKind.HDIV:
        return SpaceKind.L2
    raise ValueError(f"{kind.value} has no outgoing incidence operator")


def incidence_kind_for(kind, d: int) -> IncidenceKind:
    kind = SpaceKind.parse(kind)
    if kind is SpaceKind.H1:
        return IncidenceKind.GRAD
    if kind is SpaceKind.HCURL:
        return IncidenceKind.CURL
    if kind is SpaceKind.HDIV:
        return IncidenceKind.DIV
    raise ValueError(f"{kind.value} has no outgoing incidence operator")


@dataclass(frozen=True)
class RefElementLayout:
    """DOF layout of one space on the reference element ``[-1, 1]^d``."""

    kind: SpaceKind
    p: int
    d: int

    @property
    def components(self) -> list[tuple[str, ...]]:
        return component_types(self.kind, self.d)

    def component_shape(self, c: int) -> tuple[int, ...]:
        return tuple(factor_size(t, self.p) for t in self.components[c])

    @property
    def component_offsets(self) -> np.ndarray:
        sizes = [int(np.prod(self.component_shape(c))) for c in range(len(self.components))]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def ndofs(self) -> int:
        return int(self.component_offsets[-1])

    def flat_index(self, comp: int, idx) -> int:
        """Flat index of ``(comp, i, j, k)`` with ``i`` (axis 0) fastest."""
        shape = self.component_shape(comp)
        if len(idx) != self.d or any(not 0 <= i < n for i, n in zip(idx, shape)):
            raise IndexError(f"index {tuple(idx)} out of range for component shape {shape}")
        return int(self.component_offsets[comp] + np.ravel_multi_index(tuple(reversed(idx)), tuple(reversed(shape))))

    def multi_index(self, flat: int) -> tuple[int, tuple[int, ...]]:
        if not 0 <= flat < self.ndofs:
            raise IndexError(f"flat index {flat} out of range")
        offsets = self.component_offsets
        comp = int(np.searchsorted(offsets, flat, side="right") - 1)
        shape = self.component_shape(comp)
        rev = np.unravel_index(flat - offsets[comp], tuple(reversed(shape)))
        return comp, tuple(int(i) for i in reversed(rev))

    def boundary_mask(self) -> np.ndarray:
        """DOFs on the element boundary (an ``"I"`` axis index at an endpoint)."""
        out = []
        for c, types in enumerate(self.components):
            shape = self.component_shape(c)
            idx = np.indices(tuple(reversed(shape))).reshape(self.d, -1)[::-1]
            mask = np.zeros(idx.shape[1], dtype=bool)
            for a, t in enumerate(types):
                if t == "I":
                    mask |= (idx[a] == 0) | (idx[a] == self.p)
            out.append(mask)
        return np.concatenate(out)


def _partial(types: tuple[str, ...], axis: int, p: int):
    """Derivative along ``axis`` of a component with layout ``types``."""
    if types[axis] != "I":
        raise ValueError("derivative requires an interpolatory factor on that axis")
    mats = [derivative_matrix(p) if a == axis else sp.identity(factor_size(t, p)) for a, t in enumerate(types)]
    return kron_axes(mats)


@dataclass(frozen=True)
class IncidenceOp:
    kind: IncidenceKind
    p: int
    d: int
    matrix: sp.csr_matrix

    @property
    def source(self) -> SpaceKind:
        return {IncidenceKind.GRAD: SpaceKind.H1, IncidenceKind.CURL: SpaceKind.HCURL,
                IncidenceKind.DIV: SpaceKind.HDIV}[self.kind]

    @property
    def target(self) -> SpaceKind:
        return next_kind(self.source, self.d)


def build_incidence(kind, p: int, d: int) -> IncidenceOp:
    """Reference-element incidence matrix acting on interpolation/histopolation DOFs.

    In 2D the curl is the scalar rotation ``d_x u_y - d_y u_x`` into L2.
    """
    kind = IncidenceKind(str(kind).lower()) if not isinstance(kind, IncidenceKind) else kind
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if kind is IncidenceKind.GRAD:
        (types,) = component_types(SpaceKind.H1, d)
        mat = sp.vstack([_partial(types, a, p) for a in range(d)])
    elif kind is IncidenceKind.DIV:
        comps = component_types(SpaceKind.HDIV, d)
        mat = sp.hstack([_partial(comps[c], c, p) for c in range(d)])
    else:
        if d == 1:
            raise ValueError("curl is not defined in one dimension")
        src = component_types(SpaceKind.HCURL, d)
        if d == 2:
            mat = sp.hstack([-_partial(src[0], 1, p), _partial(src[1], 0, p)])
        else:
            tgt = RefElementLayout(SpaceKind.HDIV, p, 3)
            rows = []
            for i in range(3):
                j, k = (i + 1) % 3, (i + 2) % 3
                nrow = int(np.prod(tgt.component_shape(i)))
                blocks = [None, None, None]
                blocks[k] = _partial(src[k], j, p)
                blocks[j] = -_partial(src[j], k, p)
                blocks[i] = sp.csr_matrix((nrow, int(np.prod([factor_size(t, p) for t in src[i]]))))
                rows.append(blocks)
            mat = sp.bmat(rows)
    return IncidenceOp(kind, p, d, sp.csr_matrix(mat))


def complex_ranks(p: int, d: int = 3, rtol: float = 1e-10) -> dict:
    """Kernel dimensions and ranks of the reference-element incidence operators by SVD."""
    kinds = [IncidenceKind.GRAD, IncidenceKind.CURL, IncidenceKind.DIV] if d == 3 else (
        [IncidenceKind.GRAD, IncidenceKind.CURL] if d == 2 else [IncidenceKind.GRAD])
    out = {}
    for kind in kinds:
        mat = build_incidence(kind, p, d).matrix.toarray()
        s = np.linalg.svd(mat, compute_uv=False)
        rank = int(np.sum(s > rtol * s.max())) if s.size else 0
        out[f"rank_{kind.value}"] = rank
        out[f"ker_{kind.value}"] = mat.shape[1] - rank
    return out
