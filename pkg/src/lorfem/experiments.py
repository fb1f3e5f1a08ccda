"""Desk-scale experiment drivers used by the command-line interface.

Each ``run_*`` function returns plain rows (lists of dicts) so that tests
and the CLI share one implementation.
"""

from __future__ import annotations

import numpy as np

from .amg import cf_split, two_level_amg_setup
from .assembly import (Coefficients, MassOperator, SystemOperator, assemble, assemble_lor, eliminate_dirichlet,
                       mass_diagonal)
from .basis import equivalence_constants
from .derham import SpaceKind
from .dg import assemble_ip_dg, assemble_ip_dg_lor
from .eigen import estimate_condition
from .errors import ConfigError
from .mesh import CartMesh, build_cart_mesh
from .quadrature import gauss_lobatto_rule
from .solvers import IdentityPreconditioner, JacobiPreconditioner, LorCholesky, pcg
from .spaces import build_space

MASS_VARIANTS = ("lor", "lobatto", "legendre", "integrated")


# ---------------------------------------------------------------- 1D constants


def run_constants(p_max: int, p_min: int = 1) -> list[dict]:
    """Equivalence ratios for interp/histop in exact and collocated modes."""
    if not 1 <= p_min <= p_max <= 64:
        raise ConfigError(f"need 1 <= p_min <= p_max <= 64, got {p_min}, {p_max}")
    rows = []
    for p in range(p_min, p_max + 1):
        for kind in ("interp", "histop"):
            for quad in ("exact", "collocated"):
                c, cc = equivalence_constants(p, kind, quad)
                rows.append({"p": p, "kind": kind, "quad_mode": quad, "c": c, "C": cc, "ratio": cc / c})
    return rows


# ---------------------------------------------------------------- element conditioning


def kappa_estimate(kind, d: int, p: int) -> tuple[float, str]:
    """Product of 1D equivalence ratios bounding the element condition number."""
    kind = SpaceKind.parse(kind)
    ci, cci = equivalence_constants(p, "interp", "collocated")
    ch, cch = equivalence_constants(p, "histop", "collocated")
    ki, kh = cci / ci, cch / ch
    powers = {SpaceKind.H1: (d - 1, 1), SpaceKind.HCURL: (d - 2, 2), SpaceKind.HDIV: (0, d),
              SpaceKind.L2: (0, d)}[kind]
    label = "*".join(["kI"] * powers[0] + ["kH"] * powers[1])
    return ki ** powers[0] * kh ** powers[1], label


def element_condition(kind, d: int, p: int, quad_mode="collocated") -> float:
    """cond(A_h^-1 A_p) for ``A = M + K`` on the unit element with Dirichlet elimination.

    The LOR side uses vertex quadrature in every 1D factor.
    """
    mesh = build_cart_mesh(d, [1] * d)
    space = build_space(kind, p, mesh)
    a_p = assemble(space, "mass_plus_stiffness", quad_mode).matrix
    a_h = assemble_lor(space, "mass_plus_stiffness", quad_mode=quad_mode, low_quad="vertex").matrix
    bd = space.boundary_dofs
    return estimate_condition(eliminate_dirichlet(a_p, bd), eliminate_dirichlet(a_h, bd))[2]


def run_element_cond(d: int, p_list, kinds, quad_mode="collocated") -> list[dict]:
    if d not in (2, 3):
        raise ConfigError(f"element-cond needs d in (2, 3), got {d}")
    rows = []
    for kind in kinds:
        kind = SpaceKind.parse(kind)
        if kind is SpaceKind.DG:
            raise ConfigError("element-cond does not cover DG")
        for p in p_list:
            if not 1 <= p <= 16:
                raise ConfigError(f"element-cond supports 1 <= p <= 16, got {p}")
            cond = element_condition(kind, d, p, quad_mode)
            est, label = kappa_estimate(kind, d, p)
            rows.append({"d": d, "kind": kind.value, "p": p, "quad_mode": quad_mode, "cond": cond,
                         "estimate": est, "estimate_formula": label, "bound_ok": bool(cond <= est + 1e-6)})
    return rows


# ---------------------------------------------------------------- mass preconditioning


def mass_iterations(mesh: CartMesh, kind, p: int, variant: str, seed: int = 0, rel_tol: float = 1e-12,
                    quad_mode="exact", max_iter: int = 2000):
    """CG iterations for the high-order mass matrix with a diagonal preconditioner.

    ``variant="lor"`` uses the diagonal of the LOR mass matrix with the
    interpolation-histopolation basis; ``"lobatto"``, ``"legendre"`` and
    ``"integrated"`` use the diagonal of the high-order matrix in the
    corresponding basis for the discontinuous factors.
    """
    if variant not in MASS_VARIANTS:
        raise ConfigError(f"unknown mass variant {variant!r}")
    basis = {"lor": "histopolation", "lobatto": "lobatto", "legendre": "legendre",
             "integrated": "histopolation"}[variant]
    space = build_space(kind, p, mesh, basis)
    op = MassOperator(space, None, quad_mode)
    if variant == "lor":
        diag = mass_diagonal(space, None, None, quad_mode, order="low")
    else:
        diag = op.diagonal()
    rhs = np.random.default_rng(seed).uniform(-1.0, 1.0, space.ndofs)
    _, report = pcg(op, rhs, JacobiPreconditioner(diag), rel_tol, max_iter)
    return report


def run_mass_iters(mesh: CartMesh, p_list, kinds, variants=MASS_VARIANTS, seed: int = 0, rel_tol: float = 1e-12,
                   quad_mode="exact") -> list[dict]:
    rows = []
    for kind in kinds:
        for p in p_list:
            for variant in variants:
                rep = mass_iterations(mesh, kind, p, variant, seed, rel_tol, quad_mode)
                rows.append({"kind": SpaceKind.parse(kind).value, "p": p, "variant": variant,
                             "iterations": rep.iterations, "converged": rep.converged,
                             "cond_estimate": rep.cond_estimate})
    return rows


# ---------------------------------------------------------------- structure-level solution


def _u_k(k: int, x, deriv: int = 0):
    s = np.sin(2 * k * np.pi * x)
    ds = 2 * k * np.pi * np.cos(2 * k * np.pi * x)
    d2s = -((2 * k * np.pi) ** 2) * s
    out = np.zeros_like(s)
    nz = np.abs(s) > 1e-3  # exp(-1/s^2) underflows to 0 well before this
    sn = s[nz]
    e = np.exp(-1.0 / sn**2) * np.sign(sn)
    if deriv == 0:
        out[nz] = e
    elif deriv == 1:
        out[nz] = e * 2.0 / sn**3 * ds[nz]
    else:
        g1 = e * 2.0 / sn**3
        g2 = e * (4.0 / sn**6 - 6.0 / sn**4)
        out[nz] = g2 * ds[nz] ** 2 + g1 * d2s[nz]
    return out


def exact_solution_structure(n: int, x, deriv: int = 0):
    """Structure-level function ``w_n(x) = sum_{j<n} u_{3^j}(x)``.

    ``u_k = exp(-1/s_k^2) sign(s_k)`` with ``s_k = sin(2 k pi x)``; the
    frequency is read as ``k``.  ``deriv`` selects the 0th, 1st or 2nd
    derivative.
    """
    if n < 0:
        raise ValueError(f"structure level must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x)
    out = np.zeros_like(xs)
    for j in range(n):
        out += _u_k(3**j, xs, deriv)
    return float(out[0]) if x.ndim == 0 else out


def structure_rhs(space, level: int) -> np.ndarray:
    """Load vector of ``f = -lap(w_n(x) w_n(y) w_n(z))`` by collocation at the DG nodes."""
    mesh, p, d = space.mesh, space.p, space.d
    pts = gauss_lobatto_rule(p).points
    loc = np.indices((p + 1,) * d).reshape(d, -1)[::-1]  # axis 0 fastest
    f = np.zeros(space.ndofs)
    origin = mesh.element_origin()
    for e in range(mesh.n_elements):
        xyz = origin[e][:, None] + mesh.jacobians[e] @ (pts[loc] + 1.0)
        vals = [exact_solution_structure(level, xyz[a]) for a in range(d)]
        secs = [exact_solution_structure(level, xyz[a], 2) for a in range(d)]
        lap = np.zeros(loc.shape[1])
        for a in range(d):
            term = secs[a].copy()
            for b in range(d):
                if b != a:
                    term *= vals[b]
            lap += term
        f[space.elem_dofs[e]] = -lap
    return MassOperator(space, None, "collocated").apply(f)


# ---------------------------------------------------------------- solve


def _coefficient_values(spec, mesh: CartMesh, default: float) -> np.ndarray:
    ne = mesh.n_elements
    if spec is None:
        return np.full(ne, default)
    if np.isscalar(spec):
        return np.full(ne, float(spec))
    if isinstance(spec, list):
        if len(spec) != ne:
            raise ConfigError(f"coefficient list has {len(spec)} entries, mesh has {ne} elements")
        return np.asarray(spec, dtype=float)
    axis = int(spec["axis"])
    centers = mesh.element_origin() + np.einsum("eij,j->ei", mesh.jacobians, np.ones(mesh.d))
    lo, hi = spec["values"]
    return np.where(centers[:, axis] < float(spec["threshold"]), float(lo), float(hi))


def run_solve(mesh: CartMesh, kind, p: int, coefficients=None, preconditioner="lor_cholesky", eta=None,
              rhs="random", seed: int = 0, rel_tol: float = 1e-12, max_iter: int = 2000, quad_mode="collocated",
              structure_level: int = 2):
    """Assemble, precondition and solve one problem; returns ``(x, SolveReport)``."""
    kind = SpaceKind.parse(kind)
    coefficients = coefficients or {}
    coeffs = Coefficients(_coefficient_values(coefficients.get("alpha"), mesh, 1.0),
                          _coefficient_values(coefficients.get("beta"), mesh, 1.0))
    rng = np.random.default_rng(seed)
    if kind is SpaceKind.DG:
        if eta is None:
            raise ConfigError("DG solves need eta")
        space = build_space(kind, p, mesh)
        a = assemble_ip_dg(space, eta, coeffs, quad_mode).matrix
        lor = assemble_ip_dg_lor(space, eta, coefficients=coeffs)
        if preconditioner == "amg":
            prec = two_level_amg_setup(lor.matrix, cf_split(lor.matrix, lor.info["lor"]))
        elif preconditioner == "lor_cholesky":
            prec = LorCholesky(lor.matrix)
        elif preconditioner == "jacobi":
            prec = JacobiPreconditioner(a)
        else:
            prec = IdentityPreconditioner()
        if rhs == "structure":
            b = structure_rhs(space, structure_level)
        else:
            b = rng.uniform(-1.0, 1.0, space.ndofs) if rhs == "random" else np.zeros(space.ndofs)
        return pcg(a, b, prec, rel_tol, max_iter)
    if kind is SpaceKind.L2:
        raise ConfigError("solve supports H1, HCurl, HDiv and DG")
    space = build_space(kind, p, mesh)
    op = SystemOperator(space, coeffs, quad_mode)
    if preconditioner == "lor_cholesky":
        a_h = assemble_lor(space, "mass_plus_stiffness", coeffs, quad_mode)
        prec = LorCholesky(eliminate_dirichlet(a_h.matrix, space.boundary_dofs))
    elif preconditioner == "jacobi":
        a_h = assemble(space, "mass_plus_stiffness", quad_mode, coeffs)
        prec = JacobiPreconditioner(eliminate_dirichlet(a_h.matrix, space.boundary_dofs))
    elif preconditioner == "identity":
        prec = IdentityPreconditioner()
    else:
        raise ConfigError(f"preconditioner {preconditioner!r} not available for {kind.value}")
    b = rng.uniform(-1.0, 1.0, space.ndofs) if rhs == "random" else np.zeros(space.ndofs)
    b[space.boundary_dofs] = 0.0
    return pcg(op, b, prec, rel_tol, max_iter)


# ---------------------------------------------------------------- DG penalty study


def dg_condition(mesh: CartMesh, p: int, eta: float, quad_mode="collocated") -> float:
    """Dense cond(K_Zh^-1 K_Zp) with Dirichlet faces."""
    space = build_space("DG", p, mesh)
    k_p = assemble_ip_dg(space, eta, quad_mode=quad_mode).matrix
    k_h = assemble_ip_dg_lor(space, eta).matrix
    return estimate_condition(k_p, k_h)[2]


def run_dg_penalty(mesh: CartMesh, p_list, eta_list, seed: int = 0, rel_tol: float = 1e-12, dense_limit: int = 5000,
                   quad_mode="collocated", structure_level: int = 0, max_iter: int = 5000) -> list[dict]:
    """Iterations and dense conditioning of K_Zp for each (p, eta) and preconditioner.

    The right-hand side is uniform random unless ``structure_level > 0``, in
    which case it is the collocated load of the structure-level solution.
    """
    rows = []
    for p in p_list:
        space = build_space("DG", p, mesh)
        for eta in eta_list:
            if eta <= 0:
                raise ConfigError(f"eta must be positive, got {eta}")
            k_p = assemble_ip_dg(space, eta, quad_mode=quad_mode).matrix
            lor = assemble_ip_dg_lor(space, eta)
            k_h = lor.matrix
            cond = estimate_condition(k_p, k_h)[2] if space.ndofs <= dense_limit else None
            b = structure_rhs(space, structure_level) if structure_level > 0 else \
                np.random.default_rng(seed).uniform(-1.0, 1.0, space.ndofs)
            precs = {
                "amg": two_level_amg_setup(k_h, cf_split(k_h, lor.info["lor"])),
                "lor_cholesky": LorCholesky(k_h),
                "jacobi": JacobiPreconditioner(k_p),
            }
            for name, prec in precs.items():
                _, rep = pcg(k_p, b, prec, rel_tol, max_iter)
                rows.append({"p": p, "eta": eta, "precond": name, "iterations": rep.iterations,
                             "converged": rep.converged, "cond": cond})
    return rows


def amg_laplacian_iterations(mesh: CartMesh, p: int, eta: float, seed: int = 0, rel_tol: float = 1e-12):
    """PCG iterations of two-level AMG on the Dirichlet DG graph Laplacian."""
    space = build_space("DG", p, mesh)
    lor = assemble_ip_dg_lor(space, eta)
    prec = two_level_amg_setup(lor.matrix, cf_split(lor.matrix, lor.info["lor"]))
    b = np.random.default_rng(seed).uniform(-1.0, 1.0, space.ndofs)
    return pcg(lor.matrix, b, prec, rel_tol, 2000)[1]


def jacobi_dg_iterations(mesh: CartMesh, p: int, eta: float, seed: int = 0, rel_tol: float = 1e-12):
    space = build_space("DG", p, mesh)
    k_p = assemble_ip_dg(space, eta, check=False).matrix
    b = np.random.default_rng(seed).uniform(-1.0, 1.0, space.ndofs)
    return pcg(k_p, b, JacobiPreconditioner(k_p), rel_tol, 20000)[1]


def lor_solver_iterations(mesh: CartMesh, kind, p: int, seed: int = 0, rel_tol: float = 1e-12):
    """CG on matrix-free ``A_p = M + K`` preconditioned by an exact LOR solve."""
    return run_solve(mesh, kind, p, seed=seed, rel_tol=rel_tol)[1]
