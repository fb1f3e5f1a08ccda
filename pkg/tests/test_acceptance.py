"""Acceptance criteria 1-9.

Each ``check_*`` function returns ``(ok, detail)``; the pytest wrappers print
one ``CRITERION n: PASS|FAIL`` line and assert.  Run as a script to print the
summary without pytest.
"""

import math
import sys
import time

import numpy as np
import pytest

from lorfem.assembly import Coefficients, assemble
from lorfem.basis import derivative_dof_map, equivalence_constants, eval_basis, eval_basis_deriv, make_basis
from lorfem.derham import build_incidence
from lorfem.experiments import (amg_laplacian_iterations, dg_condition, jacobi_dg_iterations, lor_solver_iterations,
                                mass_iterations, run_element_cond)
from lorfem.mesh import build_cart_mesh
from lorfem.quadrature import gauss_legendre_rule, gauss_lobatto_rule, legendre_eval
from lorfem.spaces import build_space

P_TABLE = [2, 4, 6, 8, 10]
REF_2D = {
    "H1": ([1.41, 1.63, 1.82, 1.95, 2.04], [2.67, 3.18, 3.49, 3.68, 3.82]),
    "HCurl": ([1.76, 2.84, 3.51, 3.95, 4.27], [1.78, 2.86, 3.52, 3.96, 4.28]),
}
REF_3D = {
    "H1": ([2.37, 1.99, 2.03, 2.08, 2.13], [5.33, 5.98, 6.48, 6.81, 7.05]),
    "HCurl": ([2.37, 3.10, 3.66, 4.05, 4.34], [3.56, 5.37, 6.54, 7.33, 7.89]),
    "HDiv": ([2.37, 4.82, 6.60, 7.88, 8.84], [2.37, 4.83, 6.61, 7.89, 8.84]),
}

_ROWS = {}


def _element_rows():
    """Element-cond rows: 2D with exact high-order quadrature, 3D collocated (cached)."""
    if not _ROWS:
        _ROWS["2d"] = run_element_cond(2, P_TABLE, list(REF_2D), "exact")
        _ROWS["3d"] = run_element_cond(3, P_TABLE, list(REF_3D), "collocated")
    return _ROWS


def _rel(a, b):
    return abs(a - b) / abs(b)


def check_1():
    rows = _element_rows()
    worst = 0.0
    where = ""
    for key, table in (("2d", REF_2D), ("3d", REF_3D)):
        for kind, (conds, ests) in table.items():
            got = [r for r in rows[key] if r["kind"] == kind]
            for r, c_ref, e_ref in zip(got, conds, ests):
                for val, ref, col in ((r["cond"], c_ref, "cond"), (r["estimate"], e_ref, "estimate")):
                    err = _rel(val, ref)
                    if err > worst:
                        worst, where = err, f"{key} {kind} p={r['p']} {col}: {val:.4f} vs {ref}"
    return worst <= 0.03, f"max rel. deviation {worst:.4f} ({where})"


def check_2():
    worst = 0.0
    for d in (2, 3):
        for r in run_element_cond(d, list(range(1, 11)), ["H1"], "collocated"):
            worst = max(worst, r["cond"])
    bound = math.pi**2 / 4 + 0.01
    return worst <= bound, f"max cond {worst:.4f} <= {bound:.4f}"


def check_3():
    rows = [r for rs in _element_rows().values() for r in rs]
    rows += run_element_cond(2, P_TABLE, ["H1", "HCurl"], "collocated")
    slack = min(r["estimate"] + 1e-6 - r["cond"] for r in rows)
    return slack >= 0.0, f"{len(rows)} rows, min(estimate - cond) = {slack:.3e}"


def check_4():
    worst_comp = 0.0
    for p in range(1, 9):
        g, c, dv = (build_incidence(k, p, 3).matrix for k in ("grad", "curl", "div"))
        worst_comp = max(worst_comp, abs(c @ g).max(), abs(dv @ c).max())
        worst_comp = max(worst_comp, abs(build_incidence("curl", p, 2).matrix @ build_incidence("grad", p, 2).matrix).max())
    rng = np.random.default_rng(0)
    worst_proj = 0.0
    for p in range(1, 9):
        bi, bh = make_basis("interpolation", p), make_basis("histopolation", p)
        t = rng.uniform(-1, 1, 20)
        di, vh = eval_basis_deriv(bi, t), eval_basis(bh, t)
        for _ in range(100):
            u = rng.standard_normal(p + 1)
            worst_proj = max(worst_proj, np.abs(di @ u - vh @ derivative_dof_map(bi.rule, u)).max())
    mesh = build_cart_mesh(3, [2, 1, 2], None, [1.3, 1.0, 0.8], [[1, 0.2, 0], [0, 1.1, 0.1], [0.1, 0, 0.9]])
    coeffs = Coefficients(rng.uniform(0.5, 2, mesh.n_elements), rng.uniform(0.5, 2, mesh.n_elements))
    worst_k = 0.0
    for kind in ("H1", "HCurl", "HDiv"):
        for quad in ("exact", "collocated"):
            space = build_space(kind, 3, mesh)
            k = assemble(space, "stiffness", quad, coeffs).matrix
            m_next = assemble(space.next_space(), "mass", quad, Coefficients(np.ones(mesh.n_elements), coeffs.alpha))
            inc = space.incidence
            ref = inc.T @ m_next.matrix @ inc
            worst_k = max(worst_k, abs(k - ref).max() / abs(ref).max())
    ok = worst_comp <= 1e-13 and worst_proj <= 1e-12 and worst_k <= 1e-12
    return ok, f"composition {worst_comp:.1e}, projection {worst_proj:.1e}, K identity {worst_k:.1e}"


def _dg_conds():
    mesh = build_cart_mesh(3, [2, 2, 2])
    return {(p, eta): dg_condition(mesh, p, eta) for p in (1, 2, 3) for eta in (10.0, 1e2, 1e4)}


def check_5():
    conds = _dg_conds()
    over_eta = max(max(conds[p, e] for e in (10.0, 1e2, 1e4)) / min(conds[p, e] for e in (10.0, 1e2, 1e4))
                   for p in (1, 2, 3))
    over_p = max(max(conds[p, e] for p in (1, 2, 3)) / min(conds[p, e] for p in (1, 2, 3)) for e in (10.0, 1e2, 1e4))
    table = ", ".join(f"p={p}: " + "/".join(f"{conds[p, e]:.3f}" for e in (10.0, 1e2, 1e4)) for p in (1, 2, 3))
    return over_eta <= 1.10 and over_p <= 2.0, f"max ratio over eta {over_eta:.3f} (<= 1.10), over p {over_p:.3f} " \
                                               f"(<= 2.0); cond at eta=10/1e2/1e4 {table}"


def check_6():
    mesh = build_cart_mesh(3, [3, 3, 3])
    ok = True
    parts = []
    for p in (1, 2):
        lo = amg_laplacian_iterations(mesh, p, 10.0).iterations
        mid = amg_laplacian_iterations(mesh, p, 1e4).iterations
        hi = amg_laplacian_iterations(mesh, p, 1e6).iterations
        jac = jacobi_dg_iterations(mesh, p, 1e4).iterations
        ok &= hi - lo <= 5 and jac >= 3 * mid
        parts.append(f"p={p}: AMG its eta=10/1e4/1e6 {lo}/{mid}/{hi}, Jacobi(K_Zp, 1e4) {jac}")
    return ok, "; ".join(parts)


def check_7():
    mesh = build_cart_mesh(3, [2, 2, 2])
    ok = True
    parts = []
    for kind in ("H1", "HCurl", "HDiv", "L2"):
        i2 = mass_iterations(mesh, kind, 2, "lor").iterations
        i8 = mass_iterations(mesh, kind, 8, "lor").iterations
        ok &= i8 <= 2 * i2
        parts.append(f"{kind} {i2}->{i8}")
    affine = build_cart_mesh(3, [2, 2, 2], None, [1.2, 1.0, 0.8], [[1, 0.3, 0], [0, 1, 0.2], [0, 0, 1]])
    legendre = [mass_iterations(affine, "L2", p, "legendre").iterations for p in range(1, 9)]
    ok &= all(i == 1 for i in legendre)
    return ok, "its(p=2)->its(p=8): " + ", ".join(parts) + f"; L2/Legendre its {legendre}"


def check_8():
    mesh = build_cart_mesh(3, [2, 2, 2])
    ok = True
    parts = []
    for kind in ("H1", "HCurl", "HDiv"):
        its = [lor_solver_iterations(mesh, kind, p).iterations for p in range(2, 9)]
        ratio = max(its) / float(np.median(its))
        ok &= ratio <= 1.5
        parts.append(f"{kind} {its} max/median {ratio:.2f}")
    return ok, "; ".join(parts)


def check_9():
    worst_q = 0.0
    for p in range(1, 33):
        rule = gauss_lobatto_rule(p)
        for k in range(2 * p):
            worst_q = max(worst_q, abs(rule.weights @ legendre_eval(k, rule.points)[0] - (2.0 if k == 0 else 0.0)))
    worst_h = 0.0
    for p in range(1, 17):
        b = make_basis("histopolation", p)
        x = b.rule.points
        q = gauss_legendre_rule(p + 1)
        for i in range(p):
            t = 0.5 * (x[i] + x[i + 1]) + 0.5 * (x[i + 1] - x[i]) * q.points
            row = 0.5 * (x[i + 1] - x[i]) * q.weights @ eval_basis(b, t)
            target = np.zeros(p)
            target[i] = x[i + 1] - x[i]
            worst_h = max(worst_h, np.abs(row - target).max())
    growth = 0.0
    for kind in ("interp", "histop"):
        for quad in ("exact", "collocated"):
            c32, cc32 = equivalence_constants(32, kind, quad)
            c64, cc64 = equivalence_constants(64, kind, quad)
            growth = max(growth, (cc64 / c64) / (cc32 / c32) - 1.0)
    ok = worst_q <= 1e-13 and worst_h <= 1e-12 and growth <= 0.10
    return ok, f"Lobatto exactness {worst_q:.1e}, histopolation DOFs {worst_h:.1e}, growth p32->64 {100 * growth:.2f}%"


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9]


def _report(n, check, out=print):
    t0 = time.perf_counter()
    ok, detail = check()
    out(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail} [{time.perf_counter() - t0:.1f}s]")
    return ok, detail


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n, capsys):
    with capsys.disabled():
        ok, detail = _report(n, CHECKS[n - 1], lambda s: print("\n" + s))
    assert ok, detail


if __name__ == "__main__":
    results = [_report(n, check)[0] for n, check in enumerate(CHECKS, start=1)]
    sys.exit(0 if all(results) else 1)
