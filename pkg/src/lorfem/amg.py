"""Two-level AMG for the DG graph Laplacian built from strongly connected components.

Vertices joined by macro-interface (eta-scaled) edges form components; each
component contributes one coarse point whose value is copied to all its
members, so the interpolation preserves constants on every component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import LorfemError
from .mesh import FaceClass, LorMesh
from .solvers import Preconditioner


@dataclass(frozen=True)
class CfSplit:
    """C/F labels of a graph Laplacian.

    ``component[i]`` is the strongly connected component of vertex ``i``
    (``-1`` for the interior set); ``representative[c]`` is the C-point of
    component ``c`` or ``-1`` when the component is anchored to a Dirichlet
    boundary and has no coarse point.
    """

    is_coarse: np.ndarray
    component: np.ndarray
    representative: np.ndarray
    strong: sp.csr_matrix

    @property
    def n_components(self) -> int:
        return self.representative.size

    @property
    def coarse_points(self) -> np.ndarray:
        return np.flatnonzero(self.is_coarse)

    def component_sizes(self) -> np.ndarray:
        return np.bincount(self.component[self.component >= 0], minlength=self.n_components)


def _offdiag_weights(lap: sp.csr_matrix) -> sp.csr_matrix:
    w = -sp.csr_matrix(lap, copy=True)
    w.setdiag(0.0)
    w.eliminate_zeros()
    w.data[w.data < 0] = 0.0
    w.eliminate_zeros()
    return w


def cf_split(lap, lor: LorMesh | None = None, mode: str = "geometric", theta: float = 0.5) -> CfSplit:
    """Split vertices into C and F points via strongly connected components.

    ``mode="geometric"`` marks edges across coarse faces of ``lor`` as
    strong; ``mode="threshold"`` marks ``w_ij >= theta * max_k w_ik``.
    A vertex is anchored when it carries Dirichlet boundary weight (a
    boundary face in geometric mode, a row sum ``>= theta * max_k w_ik`` in
    threshold mode); components containing an anchored vertex get no C-point.
    """
    a = sp.csr_matrix(lap.matrix if hasattr(lap, "matrix") else lap)
    n = a.shape[0]
    w = _offdiag_weights(a)
    rowsum = np.asarray(a.sum(axis=1)).ravel()
    if mode == "geometric":
        if lor is None:
            raise ValueError("geometric splitting needs the LOR mesh")
        faces = lor.faces
        sel = (~faces.is_boundary) & (lor.face_class == FaceClass.COARSE)
        i, j = faces.minus[sel], faces.plus[sel]
        strong = sp.csr_matrix((np.ones(2 * i.size), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
        anchored_v = np.zeros(n, dtype=bool)
        anchored_v[faces.owner()[faces.is_boundary]] = True
        anchored_v &= rowsum > 1e-12 * np.abs(a.diagonal())
    elif mode == "threshold":
        rowmax = np.asarray(w.max(axis=1).todense()).ravel()
        coo = w.tocoo()
        keep = coo.data >= theta * rowmax[coo.row]
        s = sp.csr_matrix((np.ones(keep.sum()), (coo.row[keep], coo.col[keep])), shape=(n, n))
        strong = ((s + s.T) > 0).astype(float).tocsr()
        anchored_v = rowsum >= theta * np.maximum(rowmax, 1e-300)
    else:
        raise ValueError(f"unknown splitting mode {mode!r}")
    has_strong = np.asarray(strong.sum(axis=1)).ravel() > 0
    _, labels = connected_components(strong, directed=False)
    comp = np.full(n, -1)
    members = np.flatnonzero(has_strong)
    _, comp_ids = np.unique(labels[members], return_inverse=True)
    comp[members] = comp_ids
    ncomp = int(comp_ids.max()) + 1 if members.size else 0
    rep = np.full(ncomp, -1)
    anchored = np.zeros(ncomp, dtype=bool)
    if ncomp:
        np.logical_or.at(anchored, comp[members], anchored_v[members])
        first = np.full(ncomp, n)
        np.minimum.at(first, comp[members], members)
        rep = np.where(anchored, -1, first)
    is_c = np.zeros(n, dtype=bool)
    is_c[rep[rep >= 0]] = True
    return CfSplit(is_c, comp, rep, strong.tocsr())


class TwoLevelAmg(Preconditioner):
    """Symmetric two-level cycle: smooth, Galerkin coarse correction, smooth."""

    kind = "two_level_amg"

    def __init__(self, lap, split: CfSplit, smoother: str = "l1jacobi", sweeps: int = 2):
        a = sp.csr_matrix(lap.matrix if hasattr(lap, "matrix") else lap)
        self.a = a
        n = a.shape[0]
        c_points = split.coarse_points
        if c_points.size == 0:
            raise LorfemError("two-level AMG needs at least one coarse point")
        cindex = np.full(n, -1)
        cindex[c_points] = np.arange(c_points.size)
        rows, cols, vals = [], [], []
        # component members copy their representative
        comp = split.component
        in_comp = comp >= 0
        rep = np.where(in_comp, split.representative[np.maximum(comp, 0)], -1)
        sel = rep >= 0
        rows.append(np.flatnonzero(sel))
        cols.append(cindex[rep[sel]])
        vals.append(np.ones(sel.sum()))
        # interior vertices average their coarse neighbours by edge weight
        w = _offdiag_weights(a).tocoo()
        interior = ~in_comp
        mask = interior[w.row] & split.is_coarse[w.col]
        r, c, v = w.row[mask], w.col[mask], w.data[mask]
        tot = np.bincount(r, weights=v, minlength=n)
        rows.append(r)
        cols.append(cindex[c])
        vals.append(v / tot[r])
        self.P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(n, c_points.size))
        ac = (self.P.T @ a @ self.P).toarray()
        ac = 0.5 * (ac + ac.T)
        try:
            self._coarse = ("chol", sla.cho_factor(ac, lower=True))
        except np.linalg.LinAlgError:
            self._coarse = ("pinv", np.linalg.pinv(ac, hermitian=True))
        diag = a.diagonal()
        if smoother == "l1jacobi":
            absrow = np.asarray(abs(a).sum(axis=1)).ravel() - np.abs(diag)
            self.dinv = 1.0 / (diag + absrow)
        elif smoother == "jacobi":
            self.dinv = 0.5 / diag  # damped so that the smoother is convergent
        else:
            raise ValueError(f"unknown smoother {smoother!r}")
        self.sweeps = sweeps
        self.split = split

    def _coarse_solve(self, rc):
        kind, fac = self._coarse
        return sla.cho_solve(fac, rc) if kind == "chol" else fac @ rc

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        x = np.zeros_like(r)
        for _ in range(self.sweeps):
            x += self.dinv * (r - self.a @ x)
        x += self.P @ self._coarse_solve(self.P.T @ (r - self.a @ x))
        for _ in range(self.sweeps):
            x += self.dinv * (r - self.a @ x)
        return x


def two_level_amg_setup(lap, split: CfSplit, smoother: str = "l1jacobi", sweeps: int = 2) -> TwoLevelAmg:
    return TwoLevelAmg(lap, split, smoother, sweeps)
