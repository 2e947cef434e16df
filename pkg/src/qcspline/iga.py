"""Isogeometric Galerkin solver for ``-Laplace(u) + u = f`` with Dirichlet data.

The discrete space is the map's own tensor B-spline basis composed with the
inverse of the map.  Everything is integrated on the parameter square: the
physical gradient of a basis function is ``DF^{-T}`` times its parametric
gradient and the area element is ``J = det DF``.  The map is never inverted.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import lowrank
from .assembly import build_quadrature
from .geometry import grid_partials
from .linsolve import make_preconditioner, pcg
from .splines import SplineSpace, collocation, greville, interpolate


class NonInjectiveMapError(ValueError):
    """The map has a non-positive Jacobian at a quadrature node."""


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real tensor spline ``u = sum_ij a_ij B_i(x) B_j(y)`` on the parameter square.

    Evaluating at parameters ``(x, y)`` gives the value at the physical point
    ``f(x, y)``.
    """
    space_u: SplineSpace
    space_v: SplineSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float)
        if a.shape != (self.space_u.num_basis, self.space_v.num_basis):
            raise ValueError('coefficient shape mismatch')
        if not np.all(np.isfinite(a)):
            raise ValueError('field coefficients must be finite')
        a.setflags(write=False)
        object.__setattr__(self, 'coeffs', a)

    def evaluate(self, x, y):
        """Pointwise values at parameter pairs ``(x[k], y[k])``."""
        x, y = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)),
                                   np.atleast_1d(np.asarray(y, float)))
        Bu = collocation(self.space_u, x.ravel())
        Bv = collocation(self.space_v, y.ravel())
        vals = np.sum(np.asarray(Bu @ self.coeffs) * Bv.toarray(), axis=1)
        return vals.reshape(x.shape)

    def on_grid(self, xs, ys):
        """Values on the tensor grid ``xs x ys`` as an array ``[len(xs), len(ys)]``."""
        Bu = collocation(self.space_u, np.atleast_1d(xs))
        Bv = collocation(self.space_v, np.atleast_1d(ys))
        return np.asarray(Bu @ (Bv @ self.coeffs.T).T)


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Dirichlet-reduced system ``A w = rhs`` over the interior basis functions.

    ``lift`` holds the full coefficient matrix of the boundary lift ``g_h``;
    ``interior`` lists the flattened (``i`` fastest) indices of the unknowns.
    ``A_full`` is the bilinear form over the whole basis.
    """
    A: sp.csr_matrix
    rhs: np.ndarray
    lift: np.ndarray
    dof: int
    interior: np.ndarray
    space_u: SplineSpace
    space_v: SplineSpace
    A_full: sp.csr_matrix = field(repr=False)
    load: np.ndarray = field(repr=False)
    factor_ranks: tuple = ()


@dataclass(frozen=True, eq=False)
class _Geometry:
    grid: object
    x: np.ndarray
    y: np.ndarray
    J: np.ndarray
    G11: np.ndarray
    G12: np.ndarray
    G22: np.ndarray


def _geometry(fmap, points_per_span=None):
    """Pulled-back metric factors on the Gauss grid of the map spaces.

    ``G = J DF^{-1} DF^{-T}``, so ``grad u . grad v dA = grad^ u . G grad^ v dxdy``.
    Arrays are shaped ``[nodes_u, nodes_v]``.
    """
    grid = build_quadrature(fmap.space_u, fmap.space_v, points_per_span)
    f, fx, fy = grid_partials(fmap, grid.nodes_u, grid.nodes_v)
    xu, yu = fx.real, fx.imag
    xv, yv = fy.real, fy.imag
    J = xu * yv - xv * yu
    if not np.all(J > 0):
        k = np.unravel_index(np.argmin(J), J.shape)
        raise NonInjectiveMapError(
            'Jacobian %.3e <= 0 at quadrature node (%.4f, %.4f); the map is not '
            'usable for analysis' % (J[k], grid.nodes_u[k[0]], grid.nodes_v[k[1]]))
    # rows of the inverse Jacobian: grad x = (D11, D12), grad y = (D21, D22)
    D11, D12 = yv / J, -xv / J
    D21, D22 = -yu / J, xu / J
    G11 = (D11 ** 2 + D12 ** 2) * J
    G12 = (D11 * D21 + D12 * D22) * J
    G22 = (D21 ** 2 + D22 ** 2) * J
    return _Geometry(grid, f.real, f.imag, J, G11, G12, G22)


def _flat(a):
    return np.asarray(a).ravel(order='F')


def _weighted_form(grid, su, sv, factor, du_a, dv_a, du_b, dv_b):
    Ba = grid.basis(su, sv, du_a, dv_a)
    Bb = grid.basis(su, sv, du_b, dv_b)
    return Ba.T @ sp.diags(grid.weights * _flat(factor)) @ Bb


def _bilinear(geo, su, sv):
    g = geo.grid
    A = (_weighted_form(g, su, sv, geo.G11, 1, 0, 1, 0)
         + _weighted_form(g, su, sv, geo.G22, 0, 1, 0, 1)
         + _weighted_form(g, su, sv, geo.J, 0, 0, 0, 0))
    A12 = _weighted_form(g, su, sv, geo.G12, 1, 0, 0, 1)
    A = A + A12 + A12.T
    return _symmetrize(A)


def _symmetrize(A):
    A = sp.csr_matrix(A)
    return (0.5 * (A + A.T)).tocsr()


def _interior_indices(nu, nv):
    i, j = np.meshgrid(np.arange(1, nu - 1), np.arange(1, nv - 1), indexing='ij')
    return np.sort(_flat(i + nu * j))


def boundary_lift(fmap, g_dirichlet):
    """Coefficients of ``g_h``: interpolation of ``g o f`` at the Greville
    abscissae of each boundary curve.  Interior coefficients are zero."""
    su, sv = fmap.space_u, fmap.space_v
    gu, gv = greville(su), greville(sv)
    L = np.zeros((su.num_basis, sv.num_basis))

    def curve(xs, ys):
        f, _, _ = grid_partials(fmap, xs, ys)
        f = f.ravel()
        return np.asarray(g_dirichlet(f.real, f.imag), dtype=float) * np.ones(f.size)

    L[:, 0] = interpolate(su, gu, curve(gu, [0.0]))
    L[:, -1] = interpolate(su, gu, curve(gu, [1.0]))
    left = interpolate(sv, gv, curve([0.0], gv))
    right = interpolate(sv, gv, curve([1.0], gv))
    # corner values are shared with the bottom and top rows
    L[0, 1:-1], L[-1, 1:-1] = left[1:-1], right[1:-1]
    return L


def _finish(fmap, geo, A_full, f_source, g_dirichlet, factor_ranks=()):
    su, sv = fmap.space_u, fmap.space_v
    g = geo.grid
    fv = np.asarray(f_source(_flat(geo.x), _flat(geo.y)), dtype=float)
    fv = fv * np.ones(g.num_nodes)
    load = g.basis(su, sv).T @ (g.weights * _flat(geo.J) * fv)
    lift = boundary_lift(fmap, g_dirichlet)
    interior = _interior_indices(su.num_basis, sv.num_basis)
    rhs_full = load - A_full @ _flat(lift)
    A = A_full[interior][:, interior].tocsr()
    return GalerkinSystem(A, rhs_full[interior], lift, interior.size, interior,
                          su, sv, A_full, load, tuple(factor_ranks))


def assemble(fmap, f_source, g_dirichlet, points_per_span=None):
    """Galerkin system for ``-Laplace(u) + u = f`` on ``f([0,1]^2)``, ``u = g`` on the boundary.

    Args:
        fmap (TensorMap): domain map, locally injective.
        f_source: vectorized ``f(x, y)`` in physical coordinates.
        g_dirichlet: vectorized ``g(x, y)``, sampled on the boundary only.
        points_per_span (int): Gauss points per knot span (default degree + 1).

    Raises:
        NonInjectiveMapError: if ``J <= 0`` at any quadrature node.
    """
    geo = _geometry(fmap, points_per_span)
    A_full = _bilinear(geo, fmap.space_u, fmap.space_v)
    return _finish(fmap, geo, A_full, f_source, g_dirichlet)


def _gram_1d(grid, space, direction, weights, da, db):
    Ba = grid.basis1d(space, direction, da)
    Bb = grid.basis1d(space, direction, db)
    w = grid.weights_u if direction == 0 else grid.weights_v
    return Ba.T @ sp.diags(w * weights) @ Bb


def assemble_separable(fmap, f_source, g_dirichlet, tol=1e-8, points_per_span=None):
    """Same system as :func:`assemble`, with the matrix built from Kronecker products.

    Each geometry factor sampled on the tensor Gauss grid is a matrix
    ``F[a, b]``; its truncated SVD ``sum_r s_r u_r v_r^T`` (singular values
    above ``tol * s_max``) turns ``int F dB dB`` into
    ``sum_r s_r (1D integral in y) kron (1D integral in x)``.
    """
    geo = _geometry(fmap, points_per_span)
    g = geo.grid
    su, sv = fmap.space_u, fmap.space_v
    # (factor, (du, dv) of the test side, (du, dv) of the trial side)
    parts = [(geo.G11, (1, 0), (1, 0)), (geo.G22, (0, 1), (0, 1)),
             (geo.J, (0, 0), (0, 0)), (geo.G12, (1, 0), (0, 1))]
    n = su.num_basis * sv.num_basis
    A = sp.csr_matrix((n, n))
    ranks = []
    # an off-diagonal metric that is zero up to round-off contributes nothing
    floor = 1e-13 * max(np.linalg.norm(geo.G11, 2), np.linalg.norm(geo.G22, 2))
    for F, (a_u, a_v), (b_u, b_v) in parts:
        smax = np.linalg.norm(F, 2)
        form = lowrank.separable_terms(F, tol * smax) if smax > floor else None
        ranks.append(0 if form is None else form.rank)
        if form is None:
            continue
        block = sp.csr_matrix((n, n))
        for t in form.terms:
            Mu = _gram_1d(g, su, 0, np.real(t.u), a_u, b_u)
            Mv = _gram_1d(g, sv, 1, np.real(t.v), a_v, b_v)
            block = block + t.sigma * sp.kron(Mv, Mu, format='csr')
        A = A + (block + block.T if (a_u, a_v) != (b_u, b_v) else block)
    return _finish(fmap, geo, _symmetrize(A), f_source, g_dirichlet, ranks)


def solve(system, tol=1e-12, max_iters=None, preconditioner='jacobi'):
    """``u_h = w_h + g_h`` with ``w_h`` from PCG on the reduced system."""
    su, sv = system.space_u, system.space_v
    coeffs = _flat(system.lift).copy()
    if system.dof:
        res = pcg(system.A, system.rhs, make_preconditioner(system.A, preconditioner),
                  tol=tol, max_iters=max_iters)
        if not res.converged:
            warnings.warn('Galerkin PCG stopped after %d iterations at relative '
                          'residual %.2e' % (res.iterations, res.residual),
                          RuntimeWarning, stacklevel=2)
        coeffs[system.interior] += res.x
    return ScalarField(su, sv, coeffs.reshape((su.num_basis, sv.num_basis), order='F'))


def l2_error(u_h, fmap, u_exact, points_per_span=None):
    """``||u_h - u_exact||_{L2}`` over the physical domain."""
    k = fmap.space_u.degree + 3 if points_per_span is None else points_per_span
    grid = build_quadrature(fmap.space_u, fmap.space_v, k)
    f, fx, fy = grid_partials(fmap, grid.nodes_u, grid.nodes_v)
    J = fx.real * fy.imag - fy.real * fx.imag
    uh = u_h.on_grid(grid.nodes_u, grid.nodes_v)
    ue = np.asarray(u_exact(f.real, f.imag), dtype=float) * np.ones(J.shape)
    e2 = grid.weights_u @ ((uh - ue) ** 2 * np.abs(J)) @ grid.weights_v
    return float(np.sqrt(e2))


def _rayleigh_iteration(apply, n, tol, max_iters, seed=0):
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    theta = 0.0
    for it in range(1, max_iters + 1):
        w = apply(v)
        theta = float(v @ w)
        r = np.linalg.norm(w - theta * v)
        if r <= tol * abs(theta):
            return theta, True
        v = w / np.linalg.norm(w)
    return theta, False


def condition_estimate(A, tol=1e-4, method='lanczos', max_iters=20000, pcg_tol=1e-12):
    """Spectral condition number ``lambda_max / lambda_min`` of an SPD matrix.

    ``lambda_max`` comes from ``A`` itself and ``lambda_min`` from the inverse
    operator applied by PCG.  ``method='lanczos'`` runs a Krylov eigensolver on
    both operators; ``'power'`` runs plain (inverse) power iteration, which
    stalls on clustered spectra.  Both stop at relative accuracy ``tol``.
    """
    A = A if isinstance(A, np.ndarray) else sp.csr_matrix(A)
    n = A.shape[0]
    if n == 0:
        raise ValueError('empty matrix')
    if n == 1:
        return 1.0
    precond = make_preconditioner(A, 'jacobi')
    inv = lambda v: pcg(A, v, precond, tol=pcg_tol).x
    if method == 'power':
        lmax, ok1 = _rayleigh_iteration(lambda v: A @ v, n, tol, max_iters)
        mu, ok2 = _rayleigh_iteration(inv, n, tol, max_iters, seed=1)
        if not (ok1 and ok2):
            warnings.warn('eigenvalue iteration hit max_iters; estimate is rough',
                          RuntimeWarning, stacklevel=2)
        return float(lmax * mu)
    if method != 'lanczos':
        raise ValueError('unknown method %r' % (method,))
    if n <= 3:
        ev = np.linalg.eigvalsh(A.toarray() if sp.issparse(A) else A)
        return float(ev[-1] / ev[0])
    v0 = np.random.default_rng(0).standard_normal(n)
    op = lambda f: spla.LinearOperator((n, n), matvec=f, dtype=float)
    lmax = spla.eigsh(op(lambda v: A @ v), k=1, which='LA', tol=tol * 1e-2,
                      v0=v0, return_eigenvectors=False)[0]
    mu = spla.eigsh(op(inv), k=1, which='LA', tol=tol * 1e-2, v0=v0,
                    return_eigenvectors=False)[0]
    return float(lmax * mu)


@dataclass(frozen=True)
class Manufactured:
    """Exact solution ``u`` with source ``f = -Laplace(u) + u``."""
    name: str
    expression: str
    u: object
    f: object


def _radius(x, y):
    return np.hypot(x - 0.5, y - 0.5)


def _bump_f(x, y, a=0.02):
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    s = r2 + a
    return 1.0 / s + 4.0 / s ** 2 - 8.0 * r2 / s ** 3


def _ring_u(x, y):
    return np.tanh((0.25 - _radius(x, y)) / 0.03)


def _ring_f(x, y):
    k = 1.0 / 0.03
    r = np.maximum(_radius(x, y), 1e-300)
    t = np.tanh((0.25 - r) * k)
    sech2 = 1.0 - t ** 2
    lap = -2.0 * k ** 2 * sech2 * t - k * sech2 / r
    return t - lap


PRESETS = {
    'quadratic': Manufactured(
        'quadratic', 'x^2+y^2', lambda x, y: x ** 2 + y ** 2,
        lambda x, y: x ** 2 + y ** 2 - 4.0),
    'sine': Manufactured(
        'sine', 'sin(pi*x)*sin(pi*y)',
        lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: (2 * np.pi ** 2 + 1) * np.sin(np.pi * x) * np.sin(np.pi * y)),
    'rational-bump': Manufactured(
        'rational-bump', '1.0/((x-0.5)^2+(y-0.5)^2+0.02)',
        lambda x, y: 1.0 / ((x - 0.5) ** 2 + (y - 0.5) ** 2 + 0.02), _bump_f),
    'tanh-ring': Manufactured(
        'tanh-ring', 'tanh((0.25-sqrt((x-0.5)^2+(y-0.5)^2))/0.03)', _ring_u, _ring_f),
}
