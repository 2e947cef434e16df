"""Complex tensor-product spline maps of the unit square.

A map is ``f(x, y) = sum_ij c_ij M_i(x) N_j(y)`` with complex coefficients
``c_ij = x_ij + i y_ij``.  Coefficient matrices are indexed ``C[i, j]`` with
``i`` running along ``space_u``.  Whenever a coefficient matrix is flattened,
``i`` varies fastest (``C.ravel(order='F')``).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .splines import SplineSpace, collocation, greville, refine_space

#: Relative tolerance (w.r.t. the coefficient bounding-box diagonal) below
#: which ``|f_z|`` is treated as degenerate.
DEGENERATE_RTOL = 1e-14


class DegenerateMapError(ValueError):
    """Raised when the Beltrami coefficient is undefined (``f_z = 0``)."""


class BoundaryError(ValueError):
    """Invalid boundary data. ``code`` names the violated invariant."""

    def __init__(self, code, message):
        super().__init__('%s: %s' % (code, message))
        self.code = code


def bbox_diagonal(points):
    points = np.asarray(points).ravel()
    if points.size == 0:
        return 0.0
    w = points.real.max() - points.real.min()
    h = points.imag.max() - points.imag.min()
    return float(np.hypot(w, h))


@dataclass(frozen=True, eq=False)
class TensorMap:
    space_u: SplineSpace
    space_v: SplineSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        C = np.array(self.coeffs, dtype=complex)
        if C.shape != (self.space_u.num_basis, self.space_v.num_basis):
            raise ValueError('coefficient shape %s does not match spaces (%d, %d)'
                             % (C.shape, self.space_u.num_basis,
                                self.space_v.num_basis))
        if not np.all(np.isfinite(C)):
            raise ValueError('map coefficients must be finite')
        C.setflags(write=False)
        object.__setattr__(self, 'coeffs', C)

    @property
    def shape(self):
        return self.coeffs.shape

    @property
    def scale(self):
        return bbox_diagonal(self.coeffs)

    def with_coeffs(self, coeffs):
        return TensorMap(self.space_u, self.space_v, coeffs)


@dataclass(frozen=True, eq=False)
class BoundaryCurves:
    """The four boundary control polygons of a domain.

    ``bottom``/``top`` are curves over ``space_u`` (images of ``y = 0`` and
    ``y = 1``), ``left``/``right`` curves over ``space_v`` (``x = 0``, ``x = 1``).
    All run in the direction of increasing parameter.
    """
    space_u: SplineSpace
    space_v: SplineSpace
    bottom: np.ndarray = field(repr=False)
    top: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)

    def __post_init__(self):
        nu, nv = self.space_u.num_basis, self.space_v.num_basis
        for name, n in (('bottom', nu), ('top', nu), ('left', nv), ('right', nv)):
            arr = np.array(getattr(self, name), dtype=complex).ravel()
            if arr.size != n:
                raise BoundaryError('size-mismatch', '%s has %d control points, '
                                    'expected %d' % (name, arr.size, n))
            if not np.all(np.isfinite(arr)):
                raise BoundaryError('non-finite', '%s has non-finite entries' % name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        diag = self.bbox_diagonal
        for name in ('bottom', 'top', 'left', 'right'):
            pts = getattr(self, name)
            if np.max(np.abs(pts - pts[0])) <= 1e-12 * max(diag, 1e-300):
                raise BoundaryError('degenerate-curve',
                                    '%s collapses to a single point' % name)
        tol = 1e-12 * diag
        corners = (('bottom[0]', self.bottom[0], 'left[0]', self.left[0]),
                   ('bottom[-1]', self.bottom[-1], 'right[0]', self.right[0]),
                   ('top[0]', self.top[0], 'left[-1]', self.left[-1]),
                   ('top[-1]', self.top[-1], 'right[-1]', self.right[-1]))
        for na, a, nb, b in corners:
            if abs(a - b) > tol:
                raise BoundaryError('corner-mismatch', '%s=%s differs from %s=%s'
                                    % (na, a, nb, b))

    @property
    def bbox_diagonal(self):
        return bbox_diagonal(np.concatenate([self.bottom, self.top,
                                             self.left, self.right]))


def identity_map(space_u, space_v):
    """The map ``f(z) = z`` on the given spaces (Greville coefficients)."""
    gu, gv = greville(space_u), greville(space_v)
    return TensorMap(space_u, space_v, gu[:, None] + 1j * gv[None, :])


def affine_map(space_u, space_v, a, b, t=0.0):
    """``f(z) = a z + b conj(z) + t``."""
    gu, gv = greville(space_u), greville(space_v)
    Z = gu[:, None] + 1j * gv[None, :]
    return TensorMap(space_u, space_v, a * Z + b * Z.conj() + t)


def _check_domain(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)):
        raise ValueError('parameters must be finite')
    if (np.any(x < 0) or np.any(x > 1) or np.any(y < 0) or np.any(y > 1)):
        raise ValueError('parameter outside the unit square')
    return x, y


def _pointwise(fmap, x, y, du, dv):
    x, y = _check_domain(x, y)
    xs, ys = np.atleast_1d(x).ravel(), np.atleast_1d(y).ravel()
    Mu = collocation(fmap.space_u, xs, du)
    Nv = collocation(fmap.space_v, ys, dv)
    # sum_ij C_ij Mu[k,i] Nv[k,j]
    vals = np.asarray(((Mu @ fmap.coeffs) * Nv.toarray()).sum(axis=1)).ravel()
    return vals.reshape(np.shape(x)) if np.ndim(x) else complex(vals[0])


def eval(fmap, x, y):
    """Evaluate ``f`` at parameter points (scalars or equal-shape arrays)."""
    return _pointwise(fmap, x, y, 0, 0)


def real_partials(fmap, x, y):
    """``(f_x, f_y)`` as complex numbers."""
    return _pointwise(fmap, x, y, 1, 0), _pointwise(fmap, x, y, 0, 1)


def complex_partials(fmap, x, y):
    """Wirtinger derivatives ``f_z = (f_x - i f_y)/2``, ``f_zbar = (f_x + i f_y)/2``."""
    fx, fy = real_partials(fmap, x, y)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def beltrami(fmap, x, y):
    """Beltrami coefficient from the real partials of both components.

    With ``a = x_u``, ``b = y_v``, ``c = y_u``, ``d = x_v``::

        mu = ((a - b) + i (c + d)) / ((a + b) + i (c - d))
    """
    fx, fy = real_partials(fmap, x, y)
    a, c = np.real(fx), np.imag(fx)
    d, b = np.real(fy), np.imag(fy)
    num = (a - b) + 1j * (c + d)
    den = (a + b) + 1j * (c - d)
    # den = 2 f_z
    tol = 2 * DEGENERATE_RTOL * fmap.scale
    if np.any(np.abs(den) <= tol):
        raise DegenerateMapError('f_z vanishes; Beltrami coefficient undefined')
    return num / den


def jacobian(fmap, x, y):
    """Jacobian determinant ``|f_z|^2 - |f_zbar|^2``."""
    fz, fzb = complex_partials(fmap, x, y)
    return np.abs(fz) ** 2 - np.abs(fzb) ** 2


def grid_partials(fmap, xs, ys):
    """Values and first partials on the tensor grid ``xs x ys``.

    Returns complex arrays ``(f, f_x, f_y)`` of shape ``(len(xs), len(ys))``.
    """
    xs, ys = _check_domain(np.atleast_1d(xs), np.atleast_1d(ys))
    Mu0, Mu1 = collocation(fmap.space_u, xs, 0), collocation(fmap.space_u, xs, 1)
    Nv0, Nv1 = collocation(fmap.space_v, ys, 0), collocation(fmap.space_v, ys, 1)
    C = fmap.coeffs
    f = Mu0 @ (Nv0 @ C.T).T
    fx = Mu1 @ (Nv0 @ C.T).T
    fy = Mu0 @ (Nv1 @ C.T).T
    return np.asarray(f), np.asarray(fx), np.asarray(fy)


def mu_from_partials(fx, fy, scale):
    """``(mu, degenerate_mask)`` from real partials; mu is NaN where degenerate."""
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    bad = np.abs(fz) <= DEGENERATE_RTOL * scale
    with np.errstate(divide='ignore', invalid='ignore'):
        mu = np.where(bad, np.nan, fzb / np.where(bad, 1.0, fz))
    return mu, bad


def gauss_cells(space, points=None):
    """Gauss-Legendre nodes and weights over every nonempty span of ``space``."""
    k = space.degree + 1 if points is None else int(points)
    gx, gw = np.polynomial.legendre.leggauss(k)
    brk = space.breakpoints
    a, b = brk[:-1, None], brk[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * gx[None, :]
    weights = 0.5 * (b - a) * gw[None, :]
    return nodes.ravel(), weights.ravel()


def domain_area(fmap):
    """Signed area of the image, ``int J dx dy`` by Gauss quadrature."""
    xu, wu = gauss_cells(fmap.space_u)
    yv, wv = gauss_cells(fmap.space_v)
    _, fx, fy = grid_partials(fmap, xu, yv)
    J = np.real(fx) * np.imag(fy) - np.imag(fx) * np.real(fy)
    area = float(wu @ J @ wv)
    if area <= 0:
        warnings.warn('map has non-positive signed area %.3g' % area,
                      RuntimeWarning, stacklevel=2)
    return area


def coons(boundary):
    """Discrete Coons patch blending the four boundary polygons.

    Blending parameters are the Greville abscissae of the two spaces, so the
    construction reproduces bilinear (in particular affine) maps exactly.
    """
    xi = greville(boundary.space_u)[:, None]
    eta = greville(boundary.space_v)[None, :]
    B, T = boundary.bottom[:, None], boundary.top[:, None]
    L, R = boundary.left[None, :], boundary.right[None, :]
    c00, cm0 = boundary.bottom[0], boundary.bottom[-1]
    c0n, cmn = boundary.top[0], boundary.top[-1]
    C = ((1 - xi) * L + xi * R + (1 - eta) * B + eta * T
         - ((1 - xi) * (1 - eta) * c00 + xi * (1 - eta) * cm0
            + (1 - xi) * eta * c0n + xi * eta * cmn))
    return snap_boundary(TensorMap(boundary.space_u, boundary.space_v, C), boundary)


def snap_boundary(fmap, boundary):
    """Overwrite the boundary rows/columns with the exact boundary polygons."""
    if fmap.space_u != boundary.space_u or fmap.space_v != boundary.space_v:
        raise ValueError('map and boundary use different spline spaces')
    C = np.array(fmap.coeffs)
    C[:, 0] = boundary.bottom
    C[:, -1] = boundary.top
    C[0, :] = boundary.left
    C[-1, :] = boundary.right
    return fmap.with_coeffs(C)


def boundary_of(fmap):
    """Extract the boundary polygons of a map."""
    C = fmap.coeffs
    return BoundaryCurves(fmap.space_u, fmap.space_v, C[:, 0], C[:, -1],
                          C[0, :], C[-1, :])


def boundary_curve(boundary, side, t):
    """Evaluate one boundary curve at parameters ``t``."""
    space = boundary.space_u if side in ('bottom', 'top') else boundary.space_v
    return collocation(space, t) @ getattr(boundary, side)



def refine_map(fmap, levels=1):
    """Uniform h-refinement: the same map on spaces with halved spans.

    New coefficients come from interpolating the old map at the Greville
    abscissae of the refined spaces, which is exact because the old spaces
    are nested in the new ones.
    """
    for _ in range(int(levels)):
        su, sv = refine_space(fmap.space_u), refine_space(fmap.space_v)
        gu, gv = greville(su), greville(sv)
        vals = collocation(fmap.space_u, gu) @ fmap.coeffs @ collocation(fmap.space_v, gv).T
        Au = collocation(su, gu).toarray()
        Av = collocation(sv, gv).toarray()
        C = np.linalg.solve(Au, np.linalg.solve(Av, np.asarray(vals).T).T)
        fmap = TensorMap(su, sv, C)
    return fmap
