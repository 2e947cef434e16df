"""Complex SVD utilities: trace norm, numerical rank, singular value
thresholding and the separable (sum of products) form of a coefficient matrix.
"""

from dataclasses import dataclass

import numpy as np

from .splines import collocation

#: Default threshold used when counting singular values.
RANK_TOL = 1e-5


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = U @ diag(S) @ V.conj().T`` restricted to nonzero ``S``."""
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.S) @ self.V.conj().T


@dataclass(frozen=True)
class SeparableTerm:
    sigma: float
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class SeparableForm:
    """``A = sum_r sigma_r * outer(u_r, v_r)`` with unit-norm ``u_r, v_r``.

    Note that ``v_r`` is the complex conjugate of the corresponding right
    singular vector, so evaluating the spline needs no further conjugation.
    """
    terms: tuple
    shape: tuple

    @property
    def rank(self):
        return len(self.terms)

    def to_matrix(self):
        A = np.zeros(self.shape, dtype=complex)
        for t in self.terms:
            A += t.sigma * np.outer(t.u, t.v)
        return A

    def evaluate(self, space_u, space_v, x, y):
        """Evaluate ``sum_r sigma_r g_r(x) h_r(y)`` with univariate splines
        ``g_r = u_r . M(x)`` and ``h_r = v_r . N(y)``.  ``x``, ``y`` are 1D
        arrays of equal length (pointwise evaluation)."""
        Mx = collocation(space_u, np.atleast_1d(x))
        Ny = collocation(space_v, np.atleast_1d(y))
        out = np.zeros(Mx.shape[0], dtype=complex)
        for t in self.terms:
            out += t.sigma * (Mx @ t.u) * (Ny @ t.v)
        return out


def _check_finite(A):
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError('expected a matrix, got shape %s' % (A.shape,))
    if not np.all(np.isfinite(A)):
        raise ValueError('matrix has non-finite entries')
    return A


def svd(A):
    """Thin SVD of a real or complex matrix, dropping numerically zero modes."""
    A = _check_finite(A)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    cutoff = (s[0] if s.size else 0.0) * max(A.shape) * np.finfo(float).eps
    keep = s > cutoff
    return SvdFactors(U[:, keep], s[keep], Vh[keep].conj().T)


def singular_values(A):
    return np.linalg.svd(_check_finite(A), compute_uv=False)


def trace_norm(A):
    """Nuclear norm: sum of singular values."""
    return float(np.sum(singular_values(A)))


def numerical_rank(A, tol=RANK_TOL):
    """Number of singular values above ``tol``.

    The threshold is floored at ``sigma_max * max(shape) * eps`` so that
    rounding noise is never counted for tiny matrices.
    """
    A = _check_finite(A)
    s = singular_values(A)
    if s.size == 0:
        return 0
    floor = s[0] * max(A.shape) * np.finfo(float).eps
    return int(np.sum(s > max(tol, floor)))


def svt(Y, tau):
    """Singular value thresholding, the proximal map of ``tau * ||.||_*``.

    Returns ``U max(S - tau, 0) V^H``, the minimizer of
    ``tau ||Z||_* + 0.5 ||Z - Y||_F^2``.
    """
    if not tau > 0:
        raise ValueError('tau must be positive, got %r' % (tau,))
    Y = _check_finite(Y)
    U, s, Vh = np.linalg.svd(Y, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (U[:, :k] * s[:k]) @ Vh[:k]


def prox_objective(Z, Y, tau):
    """``tau ||Z||_* + 0.5 ||Z - Y||_F^2``."""
    return tau * trace_norm(Z) + 0.5 * np.linalg.norm(np.asarray(Z) - Y) ** 2


def separable_terms(A, tol=0.0):
    """Truncated SVD as a list of rank-one terms with ``sigma_r > tol``.

    By the Eckart-Young theorem the Frobenius error of the truncation equals
    the root-sum-square of the discarded singular values.
    """
    A = _check_finite(A)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    terms = []
    for r in range(s.size):
        if not s[r] > tol:
            break
        terms.append(SeparableTerm(float(s[r]), U[:, r].copy(), Vh[r].copy()))
    return SeparableForm(tuple(terms), A.shape)
