"""Univariate B-spline spaces over open knot vectors.

Scalar evaluation follows the usual ``(span, values)`` convention: only the
``degree + 1`` basis functions that are nonzero at ``t`` are returned, and they
belong to global indices ``span - degree .. span``.  The ``collocation``
helper evaluates many parameters at once and returns a sparse matrix, which is
what the assembly code consumes.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

_KNOT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class SplineSpace:
    """B-spline basis of a given degree over an open knot vector in [0, 1].

    Args:
        degree (int): polynomial degree ``p``.
        knots (array_like): non-decreasing knots; the first and last knots
            must be repeated ``p + 1`` times and equal 0 and 1.
    """

    degree: int
    knots: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = int(self.degree)
        kv = np.asarray(self.knots, dtype=float).copy()
        kv.setflags(write=False)
        object.__setattr__(self, 'degree', p)
        object.__setattr__(self, 'knots', kv)
        if p < 0:
            raise ValueError('degree must be non-negative, got %d' % p)
        if kv.ndim != 1 or kv.size < 2 * (p + 1):
            raise ValueError('knot vector too short for degree %d' % p)
        if np.any(np.diff(kv) < 0):
            raise ValueError('knots must be non-decreasing')
        if np.any(kv[:p + 1] != 0.0) or np.any(kv[-(p + 1):] != 1.0):
            raise ValueError('knot vector must be open on [0, 1]')
        brk, mult = np.unique(kv, return_counts=True)
        if np.any(mult[1:-1] > p):
            raise ValueError('interior knot multiplicity exceeds degree')

    def __eq__(self, other):
        return (isinstance(other, SplineSpace) and self.degree == other.degree
                and self.knots.shape == other.knots.shape
                and np.array_equal(self.knots, other.knots))

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    @property
    def num_basis(self):
        return self.knots.size - self.degree - 1

    @property
    def breakpoints(self):
        """Distinct knot values, i.e. the boundaries of the nonempty spans."""
        return np.unique(self.knots)

    @property
    def num_spans(self):
        return self.breakpoints.size - 1

    def find_span(self, t):
        """Knot span index ``s`` with ``knots[s] <= t < knots[s+1]``.

        ``t = 1`` is attributed to the last nonempty span.  Accepts scalars
        or arrays.
        """
        t = np.asarray(t, dtype=float)
        p, kv = self.degree, self.knots
        n = self.num_basis
        s = np.searchsorted(kv, t, side='right') - 1
        return np.clip(s, p, n - 1)


def open_uniform_space(degree, num_basis):
    """Open uniform knot vector with ``num_basis - degree`` equal spans."""
    degree = int(degree)
    num_basis = int(num_basis)
    if degree < 0:
        raise ValueError('degree must be non-negative')
    if num_basis < degree + 1:
        raise ValueError('need num_basis >= degree + 1 (got %d for degree %d)'
                         % (num_basis, degree))
    nspans = num_basis - degree
    interior = np.arange(1, nspans) / nspans
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return SplineSpace(degree, knots)


def _check_params(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError('parameter values must be finite')
    if np.any(t < -_KNOT_TOL) or np.any(t > 1 + _KNOT_TOL):
        raise ValueError('parameter outside [0, 1]')
    return np.clip(t, 0.0, 1.0)


def _ders_basis(space, t, order):
    """Vectorized derivatives of the nonzero basis functions.

    Returns ``(spans, ders)`` where ``ders`` has shape ``(order+1, len(t), p+1)``.
    Triangular recursion for values and divided differences for derivatives
    (Piegl & Tiller, A2.3).
    """
    p, kv = space.degree, space.knots
    t = np.atleast_1d(t)
    npts = t.size
    spans = space.find_span(t)

    ndu = np.zeros((p + 1, p + 1, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    for j in range(1, p + 1):
        left[j] = t - kv[spans + 1 - j]
        right[j] = kv[spans + j] - t
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((order + 1, npts, p + 1))
    for j in range(p + 1):
        ders[0, :, j] = ndu[j, p]

    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, order + 1):
            d = np.zeros(npts)
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[k, :, r] = d
            s1, s2 = s2, s1

    fac = p
    for k in range(1, order + 1):
        ders[k] *= fac
        fac *= p - k
    return spans, ders


def eval_basis(space, t):
    """Nonzero basis values at a single parameter.

    Returns:
        (span, values): ``values[k]`` is basis function ``span - degree + k``.
    """
    t = float(_check_params(t))
    spans, ders = _ders_basis(space, t, 0)
    return int(spans[0]), ders[0, 0].copy()


def eval_basis_derivatives(space, t, order):
    """Derivatives of the nonzero basis functions at a single parameter.

    Returns ``(span, ders)`` with ``ders`` of shape ``(order + 1, degree + 1)``;
    row ``k`` holds the ``k``-th derivatives (row 0 the values).
    """
    order = int(order)
    if order < 0:
        raise ValueError('derivative order must be non-negative')
    if order > space.degree:
        raise ValueError('derivative order %d exceeds degree %d'
                         % (order, space.degree))
    t = float(_check_params(t))
    spans, ders = _ders_basis(space, t, order)
    return int(spans[0]), ders[:, 0, :].copy()


def collocation(space, t, deriv=0):
    """Sparse matrix of basis (derivative) values, shape ``(len(t), num_basis)``."""
    t = _check_params(np.atleast_1d(t))
    if deriv > space.degree:
        return scipy.sparse.csr_matrix((t.size, space.num_basis))
    spans, ders = _ders_basis(space, t, deriv)
    p = space.degree
    rows = np.repeat(np.arange(t.size), p + 1)
    cols = (spans[:, None] - p + np.arange(p + 1)[None, :]).ravel()
    return scipy.sparse.csr_matrix((ders[deriv].ravel(), (rows, cols)),
                                   shape=(t.size, space.num_basis))


def greville(space):
    """Greville abscissae: averages of ``degree`` consecutive interior knots."""
    p, kv = space.degree, space.knots
    n = space.num_basis
    if p == 0:
        return 0.5 * (kv[:-1] + kv[1:])
    g = np.array([kv[i + 1:i + p + 1].mean() for i in range(n)])
    g[0], g[-1] = 0.0, 1.0
    return g


def interpolate(space, t, values):
    """Coefficients of the spline in `space` taking ``values`` at ``t``.

    ``t`` must have exactly ``num_basis`` entries satisfying the
    Schoenberg-Whitney conditions (Greville abscissae always do).
    """
    A = collocation(space, t).toarray()
    return np.linalg.solve(A, np.asarray(values))


def refine_space(space):
    """The space with the midpoint of every nonempty span inserted once.

    It contains the original space, so refining never changes a function.
    """
    brk = space.breakpoints
    mids = 0.5 * (brk[:-1] + brk[1:])
    return SplineSpace(space.degree, np.sort(np.concatenate([space.knots, mids])))
