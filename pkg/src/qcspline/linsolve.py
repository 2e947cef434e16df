"""Preconditioned conjugate gradients for Hermitian positive definite systems."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class PcgBreakdown(ArithmeticError):
    """Non-positive curvature encountered: the operator is not HPD."""


@dataclass
class PcgResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def _as_operator(A):
    if callable(A) and not sp.issparse(A) and not isinstance(A, np.ndarray):
        return A
    return lambda v: A @ v


def jacobi_preconditioner(A):
    d = np.real(np.asarray(A.diagonal()))
    if np.any(d <= 0):
        raise PcgBreakdown('non-positive diagonal entry; matrix is not HPD')
    inv = 1.0 / d
    return lambda r: inv * r


def ilu_preconditioner(A, drop_tol=1e-4, fill_factor=10):
    """Incomplete LU of a sparse HPD matrix (stands in for incomplete Cholesky)."""
    ilu = spla.spilu(sp.csc_matrix(A), drop_tol=drop_tol, fill_factor=fill_factor)
    return ilu.solve


def make_preconditioner(A, kind):
    if kind is None or kind == 'none':
        return None
    if callable(kind):
        return kind
    if kind == 'jacobi':
        return jacobi_preconditioner(A)
    if kind == 'ilu':
        return ilu_preconditioner(A)
    raise ValueError('unknown preconditioner %r' % (kind,))


def pcg(A, b, preconditioner=None, tol=1e-10, max_iters=None, x0=None):
    """Solve ``A x = b`` for Hermitian positive definite ``A``.

    Args:
        A: matrix (dense or sparse) or a callable applying it.
        b (ndarray): right-hand side, real or complex.
        preconditioner: callable approximating ``A^{-1}``, or None.
        tol (float): stop when ``||b - A x|| <= tol * ||b||``.
        max_iters (int): iteration cap, default ``10 * len(b)``.
        x0 (ndarray): initial guess.

    Returns:
        PcgResult. ``converged`` is False when the cap was reached.

    Raises:
        PcgBreakdown: if a search direction has non-positive curvature.
    """
    apply_A = _as_operator(A)
    b = np.asarray(b)
    dtype = np.result_type(b.dtype, np.float64)
    n = b.size
    if max_iters is None:
        max_iters = 10 * n
    M = preconditioner if preconditioner is not None else (lambda r: r)
    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return PcgResult(np.zeros(n, dtype=dtype), 0, 0.0, True)
    r = b - apply_A(x) if x0 is not None else b.astype(dtype)
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        return PcgResult(x, 0, rnorm / bnorm, True)
    s = M(r)
    rho = np.real(np.vdot(r, s))
    d = s.copy()
    it = 0
    while it < max_iters:
        q = apply_A(d)
        curv = np.real(np.vdot(d, q))
        if not curv > 0:
            raise PcgBreakdown('non-positive curvature %.3e at iteration %d'
                               % (curv, it))
        alpha = rho / curv
        x = x + alpha * d
        r = r - alpha * q
        it += 1
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            break
        s = M(r)
        rho_new = np.real(np.vdot(r, s))
        d = s + (rho_new / rho) * d
        rho = rho_new
    # true residual guards against drift of the recursive one
    res = np.linalg.norm(b - apply_A(x)) / bnorm
    return PcgResult(x, it, res, bool(rnorm <= tol * bnorm))
