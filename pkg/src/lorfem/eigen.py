"""Symmetric eigenvalue kernels and condition-number estimation."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotSPDError


def _round_robin(n: int):
    """Yield disjoint index pairs so that every (i, j) appears once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    for _ in range(m - 1):
        pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            yield np.array(pairs).T
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigvalsh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a small dense symmetric matrix by cyclic Jacobi rotations.

    Rotations within a round-robin step act on disjoint index pairs, so they
    commute and are applied together.  Returns eigenvalues in ascending order.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if n == 1:
        return a.diagonal().copy()
    a = 0.5 * (a + a.T)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    schedule = list(_round_robin(n))
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= tol * scale:
            break
        for p, q in schedule:
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            active = np.abs(apq) > 1e-300
            safe = np.where(active, apq, 1.0)
            theta = (aqq - app) / (2.0 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cols_p = a[:, p].copy()
            cols_q = a[:, q]
            a[:, p] = c * cols_p - s * cols_q
            a[:, q] = s * cols_p + c * a[:, q]
            rows_p = a[p, :].copy()
            a[p, :] = c[:, None] * rows_p - s[:, None] * a[q, :]
            a[q, :] = s[:, None] * rows_p + c[:, None] * a[q, :]
    return np.sort(a.diagonal())


def _dense(m) -> np.ndarray:
    if sp.issparse(m):
        return m.toarray()
    return np.asarray(m, dtype=float)


def cholesky_lower(b) -> np.ndarray:
    try:
        return np.linalg.cholesky(_dense(b))
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("Cholesky factorization failed: matrix is not SPD") from exc


def generalized_eigvalsh(a, b, method: str = "lapack") -> np.ndarray:
    """Eigenvalues of the pencil ``(a, b)`` with ``b`` SPD, via Cholesky reduction.

    ``method="jacobi"`` uses :func:`jacobi_eigvalsh` on the reduced matrix and is
    intended for matrices of a few dozen rows.
    """
    a = _dense(a)
    lower = cholesky_lower(b)
    tmp = sla.solve_triangular(lower, a, lower=True)
    reduced = sla.solve_triangular(lower, tmp.T, lower=True).T
    reduced = 0.5 * (reduced + reduced.T)
    if method == "jacobi":
        return jacobi_eigvalsh(reduced)
    return sla.eigvalsh(reduced)


def _as_operator(m, n: int):
    if m is None:
        return spla.aslinearoperator(sp.identity(n, format="csr"))
    if hasattr(m, "as_linear_operator"):
        return m.as_linear_operator(n)
    return spla.aslinearoperator(m)


def lanczos_extremes(a, b=None, steps: int = 200, seed: int = 0):
    """Extreme Ritz values of ``b @ a`` from plain Lanczos (no reorthogonalization).

    ``b`` is applied as an (approximate inverse) preconditioner; it may be a
    :class:`~lorfem.solvers.Preconditioner`, a matrix or ``None``.
    """
    n = a.shape[0]
    op_a = _as_operator(a, n)
    op_b = _as_operator(b, n)
    rng = np.random.default_rng(seed)
    r = rng.uniform(-1.0, 1.0, n)
    z = op_b.matvec(r)
    beta = np.sqrt(r @ z)
    r_prev = np.zeros(n)
    z_prev = np.zeros(n)
    alphas, betas = [], []
    beta_prev = 0.0
    for _ in range(min(steps, n)):
        v = z / beta
        w = r / beta
        av = op_a.matvec(v)
        alpha = v @ av
        alphas.append(alpha)
        r_new = av - alpha * w - beta_prev * r_prev
        z_new = op_b.matvec(r_new)
        beta_new = np.sqrt(max(r_new @ z_new, 0.0))
        r_prev, z_prev = w, v
        beta_prev = beta
        if beta_new <= 1e-14 * abs(alpha):
            break
        betas.append(beta_new)
        r, z, beta = r_new, z_new, beta_new
        beta_prev = beta_new
    k = len(alphas)
    ritz = sla.eigvalsh_tridiagonal(np.array(alphas), np.array(betas[: k - 1]))
    return float(ritz[0]), float(ritz[-1])


def estimate_condition(a, b=None, mode: str = "dense", steps: int = 200):
    """Return ``(lambda_min, lambda_max, cond)`` for the pencil ``(a, b)``.

    In dense mode ``b`` is a second SPD matrix (``None`` means identity) and
    the values are exact up to round-off.  A preconditioner object in place of
    ``b`` is interpreted as an approximate inverse, i.e. the spectrum of
    ``b @ a`` is computed.  Lanczos mode returns Ritz estimates only.
    """
    n = a.shape[0]
    if mode == "lanczos":
        if b is not None and not hasattr(b, "apply") and not isinstance(b, spla.LinearOperator):
            lu = spla.splu(sp.csc_matrix(b))
            b = spla.LinearOperator((n, n), matvec=lu.solve)
        lo, hi = lanczos_extremes(a, b, steps=steps)
        return lo, hi, hi / lo
    if mode != "dense":
        raise ValueError(f"unknown mode {mode!r}")
    if n > 5000:
        raise ValueError(f"dense condition estimate limited to 5000 rows, got {n}")
    if b is None:
        eig = sla.eigvalsh(0.5 * (_dense(a) + _dense(a).T))
    elif hasattr(b, "apply"):
        binv = np.column_stack([b.apply(e) for e in np.eye(n)])
        lower = cholesky_lower(0.5 * (binv + binv.T))
        reduced = lower.T @ _dense(a) @ lower
        eig = sla.eigvalsh(0.5 * (reduced + reduced.T))
    else:
        eig = generalized_eigvalsh(a, b)
    lo, hi = float(eig[0]), float(eig[-1])
    if lo <= 0.0:
        raise NotSPDError(f"pencil is not positive definite (lambda_min = {lo:.3e})")
    return lo, hi, hi / lo
