"""Preconditioned conjugate gradients and basic preconditioners."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotSPDError


def _matvec(a):
    if hasattr(a, "apply"):
        return a.apply
    if isinstance(a, spla.LinearOperator):
        return a.matvec
    return lambda x: a @ x


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    rel_residuals: list
    wall_ms: float
    lambda_min: float | None = None
    lambda_max: float | None = None
    breakdown: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def cond_estimate(self) -> float | None:
        if self.lambda_min is None or self.lambda_min <= 0:
            return None
        return self.lambda_max / self.lambda_min

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("extra")
        out.update(self.extra)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def pcg(a, b, precond=None, rel_tol: float = 1e-12, max_iter: int = 1000, x0=None):
    """Preconditioned CG for a symmetric positive (semi)definite operator.

    Returns ``(x, SolveReport)``.  The report carries extreme Ritz values of
    the preconditioned operator from the Lanczos tridiagonal implied by the
    CG coefficients.  Stops on ``p^T A p <= 0`` and flags a breakdown.
    """
    t0 = time.perf_counter()
    apply_a = _matvec(a)
    apply_b = (lambda r: r) if precond is None else _matvec(precond)
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        x[:] = 0.0
        return x, SolveReport(0, True, [0.0], (time.perf_counter() - t0) * 1e3)
    r = b - apply_a(x) if x0 is not None else b.copy()
    z = apply_b(r)
    p = z.copy()
    rz = r @ z
    hist = [np.linalg.norm(r) / bnorm]
    alphas, betas = [], []
    converged = hist[-1] <= rel_tol
    breakdown = False
    it = 0
    while not converged and it < max_iter:
        ap = apply_a(p)
        pap = p @ ap
        if not pap > 0.0:
            breakdown = True
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        it += 1
        hist.append(np.linalg.norm(r) / bnorm)
        alphas.append(alpha)
        if hist[-1] <= rel_tol:
            converged = True
            break
        z = apply_b(r)
        rz_new = r @ z
        if rz_new <= 0.0:
            breakdown = True
            break
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    lmin = lmax = None
    if alphas:
        k = len(alphas)
        diag = np.empty(k)
        diag[0] = 1.0 / alphas[0]
        for i in range(1, k):
            diag[i] = 1.0 / alphas[i] + betas[i - 1] / alphas[i - 1]
        off = np.array([np.sqrt(betas[i]) / alphas[i] for i in range(k - 1)])
        ritz = sla.eigvalsh_tridiagonal(diag, off) if k > 1 else diag
        lmin, lmax = float(ritz[0]), float(ritz[-1])
    report = SolveReport(it, bool(converged), [float(h) for h in hist], (time.perf_counter() - t0) * 1e3,
                         lmin, lmax, breakdown)
    return x, report


class Preconditioner:
    """Symmetric positive definite approximate inverse applied through :meth:`apply`."""

    kind = "identity"

    def apply(self, r: np.ndarray) -> np.ndarray:
        return np.array(r, dtype=float, copy=True)

    def __call__(self, r):
        return self.apply(r)

    def as_linear_operator(self, n: int) -> spla.LinearOperator:
        return spla.LinearOperator((n, n), matvec=self.apply, dtype=float)

    def check_spd(self, n: int, trials: int = 5, seed: int = 0, rtol: float = 1e-10) -> None:
        """Validate symmetry and positivity on random vectors."""
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            u, v = rng.standard_normal(n), rng.standard_normal(n)
            bu, bv = self.apply(u), self.apply(v)
            scale = np.linalg.norm(bu) * np.linalg.norm(v) + np.linalg.norm(bv) * np.linalg.norm(u)
            if abs(bu @ v - u @ bv) > rtol * scale:
                raise NotSPDError(f"{self.kind} preconditioner is not symmetric")
            if not bu @ u > 0.0:
                raise NotSPDError(f"{self.kind} preconditioner is not positive definite")


class IdentityPreconditioner(Preconditioner):
    kind = "identity"


class JacobiPreconditioner(Preconditioner):
    kind = "jacobi"

    def __init__(self, diag_or_matrix):
        if sp.issparse(diag_or_matrix) or (hasattr(diag_or_matrix, "ndim") and np.ndim(diag_or_matrix) == 2):
            diag = np.asarray(sp.csr_matrix(diag_or_matrix).diagonal())
        else:
            diag = np.asarray(diag_or_matrix, dtype=float)
        if np.any(diag <= 0):
            raise NotSPDError("Jacobi preconditioner needs a positive diagonal")
        self.inv_diag = 1.0 / diag

    def apply(self, r):
        return self.inv_diag * r


class LorCholesky(Preconditioner):
    """Exact sparse solve with the (LOR) matrix.

    Uses SuperLU with a symmetric fill-reducing ordering on ``A + A^T`` and
    diagonal pivoting only, i.e. an ``L D L^T``-type factorization; a
    non-positive pivot means the matrix is not SPD.
    """

    kind = "lor_cholesky"

    def __init__(self, a):
        a = sp.csc_matrix(a.matrix if hasattr(a, "matrix") else a)
        self.n = a.shape[0]
        self.lu = spla.splu(a, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                            options={"SymmetricMode": True})
        piv = self.lu.U.diagonal()
        if np.any(piv <= 0.0) or not np.array_equal(self.lu.perm_r, self.lu.perm_c):
            raise NotSPDError("LOR matrix is not symmetric positive definite (non-positive pivot)")

    def apply(self, r):
        return self.lu.solve(np.asarray(r, dtype=float))


def lor_cholesky_setup(a_h) -> LorCholesky:
    return LorCholesky(a_h)
