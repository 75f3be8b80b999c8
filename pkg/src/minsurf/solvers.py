"""Jacobi-preconditioned conjugate gradients."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError

__all__ = ["CGResult", "pcg"]


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = True


def pcg(A, b, rtol=1e-10, maxiter=None, x0=None, raise_on_failure=True):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    The preconditioner is the inverse diagonal of ``A`` (zero diagonal
    entries are left unscaled). Convergence is declared when
    ``||b - A x|| <= rtol * ||b||``. A two-dimensional ``b`` is treated as
    independent right-hand sides sharing one matrix product per iteration;
    each column stops updating once it has converged.

    Parameters
    ----------
    A : sparse matrix, ndarray or operator
        Anything with ``A @ X`` and ``A.diagonal()``; a diagonal of shape
        (n, m) gives each column its own preconditioner.
    b : ndarray, shape (n,) or (n, m)
    rtol : float
    maxiter : int, optional
        Defaults to ``10 * n``.
    x0 : ndarray, optional
        Initial guess with the shape of ``b``.
    raise_on_failure : bool
        Raise :class:`ConvergenceError` when the tolerance is not met.

    Returns
    -------
    CGResult
        ``residuals[k]`` is the relative residual after ``k`` iterations
        (the worst column for a block right-hand side).
    """
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    B = b[:, None] if single else b
    n, m = B.shape
    maxiter = 10 * n if maxiter is None else int(maxiter)
    diag = np.asarray(A.diagonal(), dtype=float)
    if diag.ndim == 1:
        diag = diag[:, None]
    inv_d = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)

    X = np.zeros((n, m)) if x0 is None else np.array(x0, dtype=float).reshape(n, m)
    bnorm = np.linalg.norm(B, axis=0)
    scale = np.where(bnorm > 0, bnorm, 1.0)
    X[:, bnorm == 0] = 0.0
    R = B - A @ X
    R[:, bnorm == 0] = 0.0
    Z = inv_d * R
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    rel = np.linalg.norm(R, axis=0) / scale
    res = [float(rel.max())]
    it = 0
    while res[-1] > rtol and it < maxiter:
        live = rel > rtol
        AP = A @ P
        pAp = np.einsum("ij,ij->j", P, AP)
        if np.any(pAp[live] <= 0.0):
            break
        alpha = np.where(live, rz / np.where(live, pAp, 1.0), 0.0)
        X += alpha * P
        R -= alpha * AP
        it += 1
        rel = np.linalg.norm(R, axis=0) / scale
        res.append(float(rel.max()))
        Z = inv_d * R
        rz_new = np.einsum("ij,ij->j", R, Z)
        beta = np.where(live, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
        P = Z + beta * P
        rz = rz_new
    converged = res[-1] <= rtol
    if not converged and raise_on_failure:
        raise ConvergenceError(
            f"CG stalled at relative residual {res[-1]:.3e} after {it} iterations", res
        )
    return CGResult(x=X[:, 0] if single else X, iterations=it, residuals=res, converged=converged)
