"""Quadrature grids and the quadratic forms used by the parameterization solver.

All 2D arrays over quadrature nodes are flattened with the ``u`` node index
varying fastest, matching the coefficient vectorization ``C.ravel('F')``.
Tensor-product basis matrices are therefore ``kron(B_v, B_u)``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .splines import SplineSpace, collocation

SQRT_HALF = np.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class BeltramiField:
    """Complex tensor spline ``nu`` with coefficients in the open box
    ``|Re|, |Im| < sqrt(2)/2`` (which implies ``sup |nu| < 1``)."""
    space_u: SplineSpace
    space_v: SplineSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        C = np.array(self.coeffs, dtype=complex)
        if C.shape != (self.space_u.num_basis, self.space_v.num_basis):
            raise ValueError('coefficient shape mismatch')
        if not np.all(np.isfinite(C)):
            raise ValueError('Beltrami field coefficients must be finite')
        if np.any(np.abs(C.real) >= SQRT_HALF) or np.any(np.abs(C.imag) >= SQRT_HALF):
            raise ValueError('Beltrami field coefficients leave the box (-sqrt(2)/2, sqrt(2)/2)')
        C.setflags(write=False)
        object.__setattr__(self, 'coeffs', C)

    @classmethod
    def zero(cls, space_u, space_v):
        return cls(space_u, space_v, np.zeros((space_u.num_basis, space_v.num_basis)))

    def at_nodes(self, grid):
        return grid.basis(self.space_u, self.space_v) @ self.coeffs.ravel(order='F')


class QuadratureGrid:
    """Tensor Gauss-Legendre grid over the knot spans of one or more spaces.

    Breakpoints of all given spaces are merged, so every cell lies inside a
    single polynomial piece of each space and integrands are smooth per cell.
    Basis matrices are computed on demand and cached.
    """

    def __init__(self, space_u, space_v, points_per_span=None, refine=()):
        self.space_u = space_u
        self.space_v = space_v
        k = max(space_u.degree, space_v.degree) + 1 if points_per_span is None \
            else int(points_per_span)
        if k < 1:
            raise ValueError('points_per_span must be positive')
        self.points_per_span = k
        bu = [space_u.breakpoints] + [s.breakpoints for s, _ in refine]
        bv = [space_v.breakpoints] + [s.breakpoints for _, s in refine]
        self.breaks_u = _merge_breaks(bu)
        self.breaks_v = _merge_breaks(bv)
        self.nodes_u, self.weights_u = _gauss(self.breaks_u, k)
        self.nodes_v, self.weights_v = _gauss(self.breaks_v, k)
        self.weights = np.kron(self.weights_v, self.weights_u)
        self._cache = {}

    @property
    def shape(self):
        return self.nodes_u.size, self.nodes_v.size

    @property
    def num_nodes(self):
        return self.weights.size

    def params(self):
        """Flattened ``(x, y)`` coordinates of all nodes."""
        X = np.tile(self.nodes_u, self.nodes_v.size)
        Y = np.repeat(self.nodes_v, self.nodes_u.size)
        return X, Y

    def basis1d(self, space, direction, deriv=0):
        nodes = self.nodes_u if direction == 0 else self.nodes_v
        key = ('1d', space, direction, deriv)
        if key not in self._cache:
            self._cache[key] = collocation(space, nodes, deriv).tocsr()
        return self._cache[key]

    def basis(self, space_u, space_v, du=0, dv=0):
        """Sparse ``(num_nodes, nu*nv)`` matrix of tensor basis (derivative) values."""
        key = ('2d', space_u, space_v, du, dv)
        if key not in self._cache:
            Bu = self.basis1d(space_u, 0, du)
            Bv = self.basis1d(space_v, 1, dv)
            self._cache[key] = sp.kron(Bv, Bu, format='csr')
        return self._cache[key]

    def integrate(self, values):
        return float(np.real_if_close(self.weights @ np.asarray(values)))


def _merge_breaks(lists):
    b = np.unique(np.concatenate(lists))
    keep = np.concatenate([[True], np.diff(b) > 1e-13])
    return b[keep]


def _gauss(breaks, k):
    gx, gw = np.polynomial.legendre.leggauss(k)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * gx[None, :]
    weights = 0.5 * (b - a) * gw[None, :]
    return nodes.ravel(), weights.ravel()


def build_quadrature(space_u, space_v, points_per_span=None, refine=()):
    """Gauss grid with ``points_per_span`` nodes per span and direction
    (default ``degree + 1``).  ``refine`` is an iterable of ``(space_u,
    space_v)`` pairs whose breakpoints are merged in."""
    return QuadratureGrid(space_u, space_v, points_per_span, refine)


def wirtinger_basis(grid, space_u, space_v):
    """``((B)_z, (B)_zbar)`` for all tensor basis functions at all nodes."""
    Bx = grid.basis(space_u, space_v, 1, 0)
    By = grid.basis(space_u, space_v, 0, 1)
    return 0.5 * (Bx - 1j * By), 0.5 * (Bx + 1j * By)


@dataclass(frozen=True, eq=False)
class FidelitySystem:
    """Hermitian PSD ``Q`` with ``c^H Q c = sum_k w_k omega_k |f_zbar - nu f_z|^2``.

    ``rows`` is the node-wise functional ``h`` so that ``rows @ c`` gives the
    residual ``f_zbar - nu f_z`` at every node.
    """
    Q: sp.csr_matrix
    rows: sp.csr_matrix
    node_weights: np.ndarray

    def energy(self, c):
        r = self.rows @ c
        return float(np.sum(self.node_weights * np.abs(r) ** 2))


def build_fidelity(grid, nu=None, omega=None, space_u=None, space_v=None):
    """Assemble the weighted Beltrami-residual form.

    Args:
        grid (QuadratureGrid): quadrature grid; its spaces are the map spaces
            unless ``space_u``/``space_v`` are given.
        nu: :class:`BeltramiField`, per-node complex samples, or ``None``
            for ``nu = 0``.
        omega: positive per-node weights, or ``None`` for ``omega = 1``.
    """
    space_u = grid.space_u if space_u is None else space_u
    space_v = grid.space_v if space_v is None else space_v
    n = grid.num_nodes
    if nu is None:
        nu_k = np.zeros(n, dtype=complex)
    elif isinstance(nu, BeltramiField):
        nu_k = nu.at_nodes(grid)
    else:
        nu_k = np.broadcast_to(np.asarray(nu, dtype=complex), (n,))
    if not np.all(np.isfinite(nu_k)):
        raise ValueError('nu samples must be finite')
    if omega is None:
        om = np.ones(n)
    else:
        om = np.broadcast_to(np.asarray(omega, dtype=float), (n,))
        if not np.all(np.isfinite(om)) or np.any(om <= 0):
            raise ValueError('omega must be finite and positive')
    Bz, Bzb = wirtinger_basis(grid, space_u, space_v)
    H = (Bzb - sp.diags(nu_k) @ Bz).tocsr()
    w = grid.weights * om
    Q = (H.conj().T @ sp.diags(w) @ H).tocsr()
    Q = 0.5 * (Q + Q.conj().T)
    return FidelitySystem(Q.tocsr(), H, w)


@dataclass(frozen=True, eq=False)
class BoundarySelector:
    """Boundary coefficient positions (flattened, ``i`` fastest) and targets.

    The traversal is counter-clockwise starting at ``c_00``: the bottom row,
    the right column, the top row backwards and the left column backwards.
    """
    indices: np.ndarray
    target: np.ndarray
    size: int

    def operator(self):
        """0/1 sparse matrix ``S`` with ``S @ c = c[indices]``."""
        k = self.indices.size
        return sp.csr_matrix((np.ones(k), (np.arange(k), self.indices)),
                             shape=(k, self.size))

    def apply(self, C):
        C = np.asarray(C)
        flat = C.ravel(order='F') if C.ndim == 2 else C
        return flat[self.indices]


def boundary_traversal(nu, nv):
    """Flattened indices of the ``2(m+n)`` boundary coefficients."""
    m, n = nu - 1, nv - 1
    ij = ([(i, 0) for i in range(m + 1)]
          + [(m, j) for j in range(1, n + 1)]
          + [(i, n) for i in range(m - 1, -1, -1)]
          + [(0, j) for j in range(n - 1, 0, -1)])
    return np.array([i + nu * j for i, j in ij], dtype=int)


def build_boundary(space_u, space_v, boundary):
    nu, nv = space_u.num_basis, space_v.num_basis
    idx = boundary_traversal(nu, nv)
    y = np.concatenate([boundary.bottom, boundary.right[1:],
                        boundary.top[-2::-1], boundary.left[-2:0:-1]])
    return BoundarySelector(idx, y, nu * nv)


def mass_matrix(grid, space_u, space_v, node_weights=None):
    B = grid.basis(space_u, space_v)
    w = grid.weights if node_weights is None else node_weights
    return (B.T @ sp.diags(w) @ B).tocsr()


def stiffness_matrix(grid, space_u, space_v):
    Bx = grid.basis(space_u, space_v, 1, 0)
    By = grid.basis(space_u, space_v, 0, 1)
    W = sp.diags(grid.weights)
    return (Bx.T @ W @ Bx + By.T @ W @ By).tocsr()


def build_nu_system(space_u, space_v, grid, mu_samples, omega1, omega3, mask=None):
    """Normal equations of ``int |nu|^2 + w1 int |grad nu|^2 + w3 int |nu - mu|^2``.

    Nodes where ``mask`` is False (or ``mu`` is NaN) are dropped from the data
    term only.  Returns ``(H, rhs_re, rhs_im)``; real and imaginary parts of
    the coefficients solve the same real SPD system.
    """
    if omega1 < 0:
        raise ValueError('omega1 must be non-negative')
    if not omega3 > 0:
        raise ValueError('omega3 must be positive')
    mu = np.broadcast_to(np.asarray(mu_samples, dtype=complex), (grid.num_nodes,))
    ok = np.isfinite(mu)
    if mask is not None:
        ok &= np.asarray(mask, dtype=bool)
    mu = np.where(ok, mu, 0.0)
    B = grid.basis(space_u, space_v)
    M = mass_matrix(grid, space_u, space_v)
    if ok.all():
        Md = M
    else:
        Md = mass_matrix(grid, space_u, space_v, grid.weights * ok)
    H = M + omega3 * Md
    if omega1 > 0:
        H = H + omega1 * stiffness_matrix(grid, space_u, space_v)
    H = H.tocsr()
    rhs = omega3 * (B.T @ (grid.weights * ok * mu))
    return H, np.ascontiguousarray(rhs.real), np.ascontiguousarray(rhs.imag)
