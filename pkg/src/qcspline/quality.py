"""Sampled distortion, injectivity and rank diagnostics of a spline map."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import lowrank
from .geometry import domain_area, grid_partials, mu_from_partials

DEFAULT_GRID = 200


@dataclass
class QualityReport:
    sup_mu: float
    min_scaled_jac: float
    max_scaled_jac: float
    cell_area_distortion: np.ndarray = field(repr=False)
    numerical_rank: int
    grid_n: int
    cells: tuple
    degenerate_count: int = 0
    min_jac: float = np.nan
    area: float = np.nan

    @property
    def locally_injective(self):
        return self.min_jac > 0 and self.degenerate_count == 0

    def to_text(self):
        """Key-value document, one ``key = value`` per line."""
        rows = [('sup_mu', self.sup_mu), ('min_scaled_jac', self.min_scaled_jac),
                ('max_scaled_jac', self.max_scaled_jac),
                ('numerical_rank', self.numerical_rank), ('min_jac', self.min_jac),
                ('area', self.area), ('degenerate_count', self.degenerate_count),
                ('locally_injective', str(self.locally_injective).lower()),
                ('grid_n', self.grid_n),
                ('cells', '%dx%d' % self.cells)]
        return ''.join('%s = %s\n' % (k, _num(v)) for k, v in rows)

    def cells_csv(self):
        return grid_csv(self.cell_area_distortion, 'cell_area_distortion')


def _num(v):
    if isinstance(v, (float, np.floating)):
        return '%.10g' % v
    return str(v)


def grid_csv(values, name):
    """Row-major CSV grid with a one-line ``nx,ny,name`` header.

    Rows run along the second (``y``) index so that ``values[i, j]`` is column
    ``i`` of row ``j``.
    """
    values = np.asarray(values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow([values.shape[0], values.shape[1], name])
    for j in range(values.shape[1]):
        w.writerow(['%.10g' % v for v in values[:, j]])
    return buf.getvalue()


def sample_grid(grid_n):
    return np.linspace(0.0, 1.0, int(grid_n))


def _sample(fmap, grid_n):
    t = sample_grid(grid_n)
    _, fx, fy = grid_partials(fmap, t, t)
    mu, bad = mu_from_partials(fx, fy, fmap.scale)
    jac = np.real(fx) * np.imag(fy) - np.imag(fx) * np.real(fy)
    return mu, bad, jac


def sample_sup_mu(fmap, grid_n=DEFAULT_GRID):
    """Max ``|mu|`` on a uniform ``grid_n x grid_n`` grid, skipping degenerate points."""
    mu, bad, _ = _sample(fmap, grid_n)
    if bad.all():
        return np.inf
    return float(np.nanmax(np.abs(mu)))


def scaled_jacobian_extrema(fmap, grid_n=DEFAULT_GRID, area=None):
    _, _, jac = _sample(fmap, grid_n)
    area = domain_area(fmap) if area is None else area
    js = jac / area
    return float(js.min()), float(js.max())


def cell_area_distortion(fmap, M, N, area=None, points=None):
    """Mean scaled Jacobian over each cell of a uniform ``M x N`` subdivision.

    The Jacobian is a piecewise polynomial of degree ``2p - 1`` per direction,
    so Gauss rules with ``p + 1`` points on the merged cell/knot partition
    integrate it exactly.
    """
    M, N = int(M), int(N)
    if M < 1 or N < 1:
        raise ValueError('cell counts must be positive')
    area = domain_area(fmap) if area is None else area
    out = []
    for space, cells in ((fmap.space_u, M), (fmap.space_v, N)):
        k = space.degree + 1 if points is None else points
        brk = np.unique(np.concatenate([space.breakpoints,
                                        np.linspace(0, 1, cells + 1)]))
        gx, gw = np.polynomial.legendre.leggauss(k)
        a, b = brk[:-1, None], brk[1:, None]
        nodes = (0.5 * (a + b) + 0.5 * (b - a) * gx).ravel()
        weights = (0.5 * (b - a) * gw).ravel()
        cell = np.minimum((nodes * cells).astype(int), cells - 1)
        agg = np.zeros((cells, nodes.size))
        agg[cell, np.arange(nodes.size)] = weights
        out.append((nodes, agg))
    (xu, Au), (yv, Av) = out
    _, fx, fy = grid_partials(fmap, xu, yv)
    jac = np.real(fx) * np.imag(fy) - np.imag(fx) * np.real(fy)
    integral = Au @ jac @ Av.T
    return integral / area * (M * N)


def injectivity_check(fmap, grid_n=DEFAULT_GRID):
    """``(is_locally_injective, min_J, degenerate_count)`` from dense sampling."""
    _, bad, jac = _sample(fmap, grid_n)
    min_j = float(jac.min())
    nbad = int(bad.sum())
    return bool(min_j > 0 and nbad == 0), min_j, nbad


def quality_report(fmap, grid_n=DEFAULT_GRID, cells=(20, 20), rank_tol=lowrank.RANK_TOL):
    mu, bad, jac = _sample(fmap, grid_n)
    area = domain_area(fmap)
    js = jac / area
    return QualityReport(
        sup_mu=float(np.nanmax(np.abs(mu))) if not bad.all() else np.inf,
        min_scaled_jac=float(js.min()),
        max_scaled_jac=float(js.max()),
        cell_area_distortion=cell_area_distortion(fmap, cells[0], cells[1], area),
        numerical_rank=lowrank.numerical_rank(fmap.coeffs, rank_tol),
        grid_n=int(grid_n),
        cells=tuple(int(c) for c in cells),
        degenerate_count=int(bad.sum()),
        min_jac=float(jac.min()),
        area=area)
