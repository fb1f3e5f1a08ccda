"""Symmetric interior penalty DG, its LOR penalty-only counterpart and the graph Laplacian."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import AssembledOp, OpTag
from .basis import QuadMode, high_order_gram, lagrange_derivatives, lagrange_values
from .derham import SpaceKind
from .errors import NotSPDError
from .mesh import FaceClass, LorMesh, face_areas, lor_refine, perpendicular_lengths
from .quadrature import gauss_legendre_rule, gauss_lobatto_rule
from .spaces import FeSpace


def _kron(mats):
    return reduce(np.kron, list(reversed(mats)))


# ---------------------------------------------------------------- penalties


@dataclass(frozen=True)
class DgPenalty:
    """Face penalties for the DG LOR form.

    ``sigma_h`` and ``mu`` are per fine face of ``lor``; ``sigma_p`` per
    coarse face of ``lor.parent``.
    """

    eta: float
    lor: LorMesh
    sigma_h: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray
    sigma_p: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Graph weights ``sigma_h * mu`` per fine face."""
        return self.sigma_h * self.mu


def _macro_h(lor: LorMesh) -> np.ndarray:
    """Perpendicular macro-element size across each fine face."""
    parent = lor.parent
    faces = lor.faces
    coarse_h = perpendicular_lengths(parent)
    out = np.empty(len(faces))
    coarse = lor.face_class == FaceClass.COARSE
    out[coarse] = coarse_h[lor.parent_face[coarse]]
    # interior fine faces: size of the containing macro-element normal to the face
    inner = ~coarse
    sub = lor.m**lor.d
    elem = faces.minus[inner] // sub
    jac = parent.jacobians[elem]
    areas = np.array([face_areas(jac[i:i + 1], int(a))[0] for i, a in enumerate(faces.axis[inner])])
    out[inner] = parent.volumes[elem] / areas
    return out


def dg_penalty_weights(lor: LorMesh, p: int, eta: float) -> DgPenalty:
    """Penalty weights of the LOR DG form.

    For a fine face normal to axis ``k`` with transverse subcell indices
    ``t``, with Gauss-Lobatto weights ``w`` of degree ``p``, subcell widths
    ``dx'`` of the ``p + 2``-point grid and nodal gaps ``dx``:

    interior of a macro-element:  ``alpha * prod_t (w_t / dx'_t) / dx_k``,
    on a coarse face:             ``alpha * eta * p^2 * prod_t (w_t / dx'_t)``,

    with ``alpha = 2 / h`` for the perpendicular macro-element size ``h``.
    Both reduce to the values on the reference element for ``p = 1``.
    """
    if lor.mode.value != "dg" or lor.p != p:
        raise ValueError("penalty weights need a DG-mode refinement of matching degree")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    d = lor.d
    faces = lor.faces
    rule = gauss_lobatto_rule(p)
    w = rule.weights
    dxn = rule.subinterval_lengths
    dxs = gauss_lobatto_rule(p + 1).subinterval_lengths
    # local subcell multi-index of the owner cell of every face
    owner = faces.owner()
    fm = lor.cell_fine_multi(owner) % lor.m  # (d, nf)
    transverse = np.ones(len(faces))
    for a in range(d):
        use = faces.axis != a
        transverse[use] *= w[fm[a, use]] / dxs[fm[a, use]]
    alpha = 2.0 / _macro_h(lor)
    coarse = lor.face_class == FaceClass.COARSE
    sigma = np.empty(len(faces))
    sigma[coarse] = alpha[coarse] * eta * p * p * transverse[coarse]
    # plane index inside the macro element gives the nodal gap it straddles
    k = faces.plane[~coarse] % lor.m
    sigma[~coarse] = alpha[~coarse] * transverse[~coarse] / dxn[k - 1]
    sigma_p = eta * p * p / perpendicular_lengths(lor.parent)
    return DgPenalty(float(eta), lor, sigma, faces.area.copy(), alpha, sigma_p)


# ---------------------------------------------------------------- LOR form / graph Laplacian


def _face_alpha(lor: LorMesh, alpha: np.ndarray) -> np.ndarray:
    """Larger coefficient of the macro-elements adjacent to each fine face."""
    faces = lor.faces
    sub = lor.m**lor.d
    lo = np.where(faces.minus >= 0, alpha[faces.minus // sub], 0.0)
    hi = np.where(faces.plus >= 0, alpha[np.maximum(faces.plus, 0) // sub], 0.0)
    return np.maximum(lo, hi)


def assemble_ip_dg_lor(space: FeSpace, eta: float, dirichlet: bool = True, coefficients=None) -> AssembledOp:
    """Penalty-only LOR DG matrix ``<sigma_h [u], [v]>`` on the DG refinement.

    With ``coefficients`` every face weight is scaled by the larger
    ``alpha`` of its adjacent macro-elements, matching :func:`assemble_ip_dg`.
    """
    if space.kind is not SpaceKind.DG:
        raise ValueError("assemble_ip_dg_lor needs a DG space")
    lor = lor_refine(space.mesh, space.p, "dg")
    pen = dg_penalty_weights(lor, space.p, eta)
    faces = lor.faces
    wgt = pen.weights
    if coefficients is not None:
        wgt = wgt * _face_alpha(lor, np.asarray(coefficients.alpha, dtype=float))
    n = lor.n_cells
    inner = ~faces.is_boundary
    i, j, wi = faces.minus[inner], faces.plus[inner], wgt[inner]
    rows = [i, j, i, j]
    cols = [i, j, j, i]
    vals = [wi, wi, -wi, -wi]
    if dirichlet:
        b = faces.is_boundary
        o = faces.owner()[b]
        rows.append(o)
        cols.append(o)
        vals.append(wgt[b])
    a = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    return AssembledOp(a, space, OpTag.IP_DG_LOR, "exact", None,
                       {"eta": eta, "dirichlet": dirichlet, "penalty": pen, "lor": lor})


def build_graph_laplacian(lor: LorMesh, penalty: DgPenalty, dirichlet: bool = False) -> AssembledOp:
    """Weighted graph Laplacian ``B^T W B`` of the subcell adjacency graph.

    ``B`` is the signed edge-vertex incidence of interior fine faces and
    ``W`` the diagonal of weights ``sigma_h * mu``.  With ``dirichlet`` the
    boundary-face weights are added to the diagonal.
    """
    faces = lor.faces
    inner = np.flatnonzero(~faces.is_boundary)
    ne = inner.size
    b = sp.csr_matrix(
        (np.concatenate([np.ones(ne), -np.ones(ne)]),
         (np.concatenate([np.arange(ne)] * 2), np.concatenate([faces.minus[inner], faces.plus[inner]]))),
        shape=(ne, lor.n_cells),
    )
    lap = b.T @ sp.diags(penalty.weights[inner]) @ b
    if dirichlet:
        bd = faces.is_boundary
        lap = lap + sp.csr_matrix(
            (penalty.weights[bd], (faces.owner()[bd], faces.owner()[bd])), shape=lap.shape)
    return AssembledOp(sp.csr_matrix(lap), None, OpTag.GRAPH_LAPLACIAN, "exact", None,
                       {"eta": penalty.eta, "dirichlet": dirichlet, "lor": lor, "penalty": penalty})


# ---------------------------------------------------------------- high-order IP


def _face_rule(p: int, quad_mode: QuadMode):
    """Face quadrature in one transverse direction: (interp matrix, weights)."""
    rule = gauss_lobatto_rule(p)
    if quad_mode is QuadMode.COLLOCATED:
        return np.eye(p + 1), rule.weights
    q = gauss_legendre_rule(p + 1)
    return lagrange_values(rule.points, q.points), q.weights


def _trace_ops(p: int, d: int, axis: int, side: int, quad_mode: QuadMode):
    """Reference trace and reference-gradient traces at the face quadrature points."""
    nodes = gauss_lobatto_rule(p).points
    end = np.array([1.0 if side else -1.0])
    val_end = lagrange_values(nodes, end)  # (1, p+1)
    der_end = lagrange_derivatives(nodes, end)
    interp, _ = _face_rule(p, quad_mode)
    dnodal = lagrange_derivatives(nodes, nodes)  # (p+1, p+1)
    trace_factors = [val_end if a == axis else interp for a in range(d)]
    trace = _kron(trace_factors)
    grads = []
    for b in range(d):
        fac = []
        for a in range(d):
            if a == axis:
                fac.append(der_end if b == axis else val_end)
            else:
                fac.append(interp @ dnodal if a == b else interp)
        grads.append(_kron(fac))
    return trace, grads


def _face_weights(p: int, d: int, quad_mode: QuadMode) -> np.ndarray:
    _, w = _face_rule(p, quad_mode)
    return _kron([w] * (d - 1)) if d > 1 else np.ones(1)


def _volume_stiffness(p, d, jac, quad_mode):
    inv = np.linalg.inv(jac)
    metric = inv @ inv.T * abs(np.linalg.det(jac))
    n = (p + 1) ** d
    k = np.zeros((n, n))
    for b in range(d):
        for b2 in range(d):
            if metric[b, b2] == 0.0:
                continue
            fac = [high_order_gram(p, "dI" if a == b else "I", "dI" if a == b2 else "I", quad_mode.value)
                   for a in range(d)]
            k += metric[b, b2] * _kron(fac)
    return k


def assemble_ip_dg(space: FeSpace, eta: float, coefficients=None, quad_mode="collocated",
                   dirichlet: bool = True, check: bool = True) -> AssembledOp:
    """Symmetric interior penalty matrix of ``-div grad`` on a DG space.

    Face terms ``-<{du/dn}, [v]> - <[u], {dv/dn}> + <sigma_p [u], [v]>`` use
    ``[u] = u^- - u^+`` with the normal pointing from the lower-indexed
    element to the higher-indexed one, and ``sigma_p = eta p^2 alpha_f / h``
    where ``alpha_f`` is the larger coefficient of the adjacent elements.
    The penalty part alone is returned in ``info["penalty_matrix"]``.
    """
    if space.kind is not SpaceKind.DG:
        raise ValueError("assemble_ip_dg needs a DG space")
    quad_mode = QuadMode(quad_mode)
    mesh, p, d = space.mesh, space.p, space.d
    nloc = (p + 1) ** d
    n = space.ndofs
    alpha = np.ones(mesh.n_elements) if coefficients is None else np.asarray(coefficients.alpha, dtype=float)
    rows, cols, vals = [], [], []
    prow, pcol, pval = [], [], []

    def add(r, c, blk, target_rows, target_cols, target_vals):
        target_rows.append(np.repeat(r, c.size))
        target_cols.append(np.tile(c, r.size))
        target_vals.append(blk.ravel())

    for e in range(mesh.n_elements):
        dofs = space.elem_dofs[e]
        add(dofs, dofs, alpha[e] * _volume_stiffness(p, d, mesh.jacobians[e], quad_mode), rows, cols, vals)

    faces = mesh.faces
    hface = perpendicular_lengths(mesh)
    wq = _face_weights(p, d, quad_mode)
    ref_face = 2.0 ** (d - 1)
    for f in range(len(faces)):
        a = int(faces.axis[f])
        em, ep = int(faces.minus[f]), int(faces.plus[f])
        if (em < 0 or ep < 0) and not dirichlet:
            continue
        sig = eta * p * p * max(alpha[e] for e in (em, ep) if e >= 0) / hface[f]
        wf = wq * faces.area[f] / ref_face
        sides = []  # (element, trace, normal-derivative, sign)
        for elem, side, sign in ((em, 1, 1.0), (ep, 0, -1.0)):
            if elem < 0:
                continue
            jac = mesh.jacobians[elem]
            inv = np.linalg.inv(jac)
            normal = inv.T[:, a] / np.linalg.norm(inv.T[:, a])
            coef = inv @ normal  # reference-gradient coefficients of d/dn
            tr, grads = _trace_ops(p, d, a, side, quad_mode)
            dn = sum(coef[b] * grads[b] for b in range(d))
            sides.append((elem, tr, alpha[elem] * dn, sign))
        interior = len(sides) == 2
        # jump [u] = u^- - u^+; average uses 1/2 on interior faces, full trace on boundary
        jmp = np.hstack([s * tr for (_, tr, _, s) in sides])
        if interior:
            avg = np.hstack([0.5 * dn for (_, _, dn, _) in sides])
        else:
            # one-sided terms with the outward normal: +n on a high side, -n on a low side
            (_, tr, dn, s), = sides
            jmp = tr
            avg = s * dn
        dofs = np.concatenate([space.elem_dofs[el] for (el, _, _, _) in sides])
        wj = wf[:, None] * jmp
        consistency = -(avg.T @ wj) - (wj.T @ avg)
        penalty = sig * (jmp.T @ wj)
        add(dofs, dofs, consistency + penalty, rows, cols, vals)
        add(dofs, dofs, penalty, prow, pcol, pval)

    def build(r, c, v):
        return sp.coo_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(n, n)).tocsr()

    a_mat = build(rows, cols, vals)
    a_mat = (0.5 * (a_mat + a_mat.T)).tocsr()
    pen = build(prow, pcol, pval)
    out = AssembledOp(a_mat, space, OpTag.IP_DG, quad_mode.value, coefficients,
                      {"eta": eta, "dirichlet": dirichlet, "penalty_matrix": pen})
    out.check_symmetric()
    if check and n <= 3000:
        lam = sla.eigvalsh(a_mat.toarray(), subset_by_index=[0, 0])[0]
        scale = abs(a_mat).max()
        if (dirichlet and lam <= 0.0) or (not dirichlet and lam < -1e-10 * scale):
            raise NotSPDError(f"IP-DG matrix is not coercive (lambda_min = {lam:.3e}); increase eta")
    return out
