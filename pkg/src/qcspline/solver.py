"""Low-rank quasi-conformal parameterization.

The map ``f`` and an auxiliary Beltrami field ``nu`` are updated alternately:

* ``f``-step: minimize ``w2 ||C||_* + w3 int omega |f_zbar - nu f_z|^2 +
  lam ||Pr(C) - y||^2`` by ADMM with the split ``c = z``;
* ``nu``-step: minimize ``int |nu|^2 + w1 int |grad nu|^2 + w3 int |nu - mu(f)|^2``
  and project the coefficients into the box that keeps ``|nu| < 1``.

Once the sampled ``||mu(f)||_inf`` is within ``eps0`` of 1 the fidelity term is
reweighted by ``omega = 1 / ((1 - |mu(f)|)^2 + delta)``.
"""

import csv
import io
import logging
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy.sparse as sp

from . import lowrank
from .assembly import (SQRT_HALF, BeltramiField, build_boundary, build_fidelity,
                       build_nu_system, build_quadrature)
from .geometry import (DEGENERATE_RTOL, BoundaryCurves, TensorMap, coons,
                       snap_boundary)
from .linsolve import make_preconditioner, pcg
from .splines import open_uniform_space

log = logging.getLogger(__name__)

BOX_MARGIN = 1e-6


@dataclass
class SolverConfig:
    """Weights, discretization and stopping rules of :func:`parameterize`.

    ``scale_to`` rescales the boundary to that bounding-box diagonal before
    fitting (0 disables it).  ``fold_guard`` weights the fidelity term by the
    running maximum of the distortion weights.  ``rho_adapt`` turns on
    residual balancing of the ADMM penalty.
    """
    omega1: float = 4.0
    omega2: float = 5.5
    omega3: float = 100.0
    lam: float = 1000.0
    rho: float = 1.0
    eps: float = 1e-3
    eps0: float = 0.05
    delta: float = 1e-4
    m: int = 24
    n: int = 24
    m_nu: int = 46
    n_nu: int = 46
    degree: int = 3
    nu_degree: int = 3
    admm_max_iters: int = 500
    admm_c_tol: float = 1e-7
    outer_max_iters: int = 30
    points_per_span: int = 0
    preconditioner: str = 'jacobi'
    pcg_tol: float = 1e-10
    rank_tol: float = lowrank.RANK_TOL
    rank_anchor: str = 'coons'
    scale_to: float = 40.0
    fold_guard: bool = True
    rho_adapt: bool = False

    def __post_init__(self):
        for name in ('omega3', 'lam', 'rho', 'eps', 'eps0', 'delta', 'admm_c_tol',
                     'pcg_tol'):
            if not getattr(self, name) > 0:
                raise ValueError('%s must be positive' % name)
        for name in ('omega1', 'omega2', 'scale_to'):
            if getattr(self, name) < 0:
                raise ValueError('%s must be non-negative' % name)
        if self.rank_anchor not in ('coons', 'zero'):
            raise ValueError("rank_anchor must be 'coons' or 'zero'")
        for name in ('m', 'n', 'm_nu', 'n_nu', 'admm_max_iters', 'outer_max_iters'):
            if int(getattr(self, name)) < 1:
                raise ValueError('%s must be a positive integer' % name)

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return SolverConfig(**d)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def nu_spaces(self):
        return (open_uniform_space(self.nu_degree, self.m_nu + 1),
                open_uniform_space(self.nu_degree, self.n_nu + 1))


@dataclass
class AdmmState:
    c: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    rho: float
    iteration: int = 0


@dataclass
class AdmmInfo:
    iterations: int
    primal_residual: float
    dual_residual: float
    c_change: float
    converged: bool
    pcg_iterations: int


class ConvergenceLog:
    """Per-outer-iteration diagnostics, serializable as CSV."""

    columns = ('iteration', 'weighted', 'sup_mu', 'min_jac', 'rank',
               'fidelity', 'nuclear_norm', 'boundary_dev', 'admm_iters',
               'primal_res', 'dual_res', 'nu_change')

    def __init__(self):
        self.records = []
        self.converged = False
        self.best_iteration = None

    def append(self, **record):
        self.records.append({k: record.get(k) for k in self.columns})

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator='\n')
        w.writerow(self.columns)
        for r in self.records:
            w.writerow([_fmt(r[k]) for k in self.columns])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return '%.10g' % v
    return v


def _c_step_matrix(Q, sel, config, rho=None):
    S = sel.operator()
    rho = config.rho if rho is None else rho
    A = (2 * config.omega3 * Q + 2 * config.lam * (S.T @ S)
         + rho * sp.identity(sel.size, format='csr'))
    return A.tocsr(), S


def admm_solve(Q, sel, config, init_c, shape=None, state=None, anchor=None):
    """ADMM for the nuclear-norm regularized fidelity problem.

    Args:
        Q (FidelitySystem or sparse matrix): Beltrami-residual form.
        sel (BoundarySelector): boundary penalty data.
        config (SolverConfig): weights and stopping parameters.
        init_c (ndarray): initial coefficients, matrix or flattened.
        shape (tuple): coefficient matrix shape when ``init_c`` is flat.
        state (AdmmState): optional warm start for ``z`` and ``eta``.
        anchor (ndarray): the nuclear norm is applied to ``C - anchor``;
            ``None`` means zero.

    Returns:
        (C, info, state) with ``C`` the coefficient matrix taken from the
        thresholded split variable, so it is exactly low rank (relative to
        the anchor); ``||c - z||`` is reported as the primal residual.
    """
    Qm = getattr(Q, 'Q', Q)
    init_c = np.asarray(init_c, dtype=complex)
    if shape is None:
        shape = init_c.shape
    if len(shape) != 2 or shape[0] * shape[1] != sel.size:
        raise ValueError('init_c does not match the boundary selector')
    c = init_c.ravel(order='F').copy()
    A, S = _c_step_matrix(Qm, sel, config)
    precond = make_preconditioner(A, config.preconditioner)
    rho = config.rho
    a = np.zeros(shape, dtype=complex) if anchor is None else np.asarray(anchor)
    if state is None:
        z = c.copy()
        eta = np.zeros_like(c)
    else:
        z, eta = state.z.copy(), state.eta.copy()
    b0 = 2 * config.lam * (S.T @ sel.target)
    tau = config.omega2 / rho
    scale = max(np.abs(sel.target).max(), 1e-300)
    c_tol = config.admm_c_tol * scale
    pcg_total = 0
    primal = dual = change = np.inf
    converged = False
    t = 0
    for t in range(1, config.admm_max_iters + 1):
        res = pcg(A, rho * z - eta + b0, precond, tol=config.pcg_tol, x0=c)
        pcg_total += res.iterations
        c_new = res.x
        Y = (c_new + eta / rho).reshape(shape, order='F') - a
        Z = (lowrank.svt(Y, tau) if tau > 0 else Y) + a
        z_new = Z.ravel(order='F')
        eta = eta + rho * (c_new - z_new)
        change = float(np.abs(c_new - c).max())
        primal = float(np.linalg.norm(c_new - z_new))
        dual = float(rho * np.linalg.norm(z_new - z))
        c, z = c_new, z_new
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(eta))):
            raise FloatingPointError('ADMM state became non-finite at iteration %d' % t)
        if change < c_tol:
            converged = True
            break
        if config.rho_adapt and t % 10 == 0 and t < config.admm_max_iters // 2:
            # residual balancing; eta is the unscaled multiplier so it stays put
            if primal > 10 * dual:
                rho *= 2
            elif dual > 10 * primal:
                rho /= 2
            else:
                continue
            tau = config.omega2 / rho
            A, S = _c_step_matrix(Qm, sel, config, rho)
            precond = make_preconditioner(A, config.preconditioner)
    info = AdmmInfo(t, primal, dual, change, converged, pcg_total)
    return z.reshape(shape, order='F'), info, AdmmState(c, z, eta, rho, t)


def solve_nu(system, space_u, space_v, config, x0=None):
    """Solve the two real SPD systems for ``nu`` and project into the box."""
    H, rhs_re, rhs_im = system
    precond = make_preconditioner(H, config.preconditioner)
    out = []
    for k, rhs in enumerate((rhs_re, rhs_im)):
        guess = None if x0 is None else (x0.real if k == 0 else x0.imag)
        res = pcg(H, rhs, precond, tol=config.pcg_tol, x0=guess)
        if not res.converged:
            warnings.warn('nu-step PCG stopped at residual %.2e' % res.residual,
                          RuntimeWarning, stacklevel=2)
        out.append(res.x)
    bound = SQRT_HALF - BOX_MARGIN
    coef = np.clip(out[0], -bound, bound) + 1j * np.clip(out[1], -bound, bound)
    C = coef.reshape((space_u.num_basis, space_v.num_basis), order='F')
    return BeltramiField(space_u, space_v, C)


def sample_mu_nodes(fmap, grid):
    """``(mu, jac, degenerate)`` of ``fmap`` at the grid nodes (flattened)."""
    C = fmap.coeffs.ravel(order='F')
    fx = grid.basis(fmap.space_u, fmap.space_v, 1, 0) @ C
    fy = grid.basis(fmap.space_u, fmap.space_v, 0, 1) @ C
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    bad = np.abs(fz) <= DEGENERATE_RTOL * fmap.scale
    mu = np.full(fz.shape, np.nan, dtype=complex)
    mu[~bad] = fzb[~bad] / fz[~bad]
    return mu, np.abs(fz) ** 2 - np.abs(fzb) ** 2, bad


def reweighting(mu, delta):
    """``1 / ((1 - |mu|)^2 + delta)``; degenerate nodes get the smallest weight."""
    a = np.abs(mu)
    w = 1.0 / ((1.0 - a) ** 2 + delta)
    bad = ~np.isfinite(w)
    if bad.any():
        w[bad] = w[~bad].min() if (~bad).any() else 1.0
    return w


@dataclass
class _Iterate:
    fmap: TensorMap
    sup_mu: float
    min_jac: float

    @property
    def valid(self):
        return self.min_jac > 0 and self.sup_mu < 1


def _better(a, b):
    if b is None:
        return True
    if a.valid != b.valid:
        return a.valid
    return a.sup_mu < b.sup_mu


def parameterize(boundary, config=None, callback=None):
    """Compute a low-rank quasi-conformal spline map for the given boundary.

    Args:
        boundary (BoundaryCurves): the four boundary curves; the map uses
            their spline spaces.
        config (SolverConfig): solver parameters; defaults if omitted.
        callback: optional ``callback(k, fmap, record)`` per outer iteration.

    Returns:
        (fmap, log): the snapped map and its :class:`ConvergenceLog`.
        ``log.converged`` is False when ``outer_max_iters`` was exhausted, in
        which case the best iterate seen is returned.
    """
    config = SolverConfig() if config is None else config
    user_boundary = boundary
    scale = 1.0
    if config.scale_to > 0:
        scale = config.scale_to / boundary.bbox_diagonal
        boundary = BoundaryCurves(boundary.space_u, boundary.space_v,
                                  scale * boundary.bottom, scale * boundary.top,
                                  scale * boundary.left, scale * boundary.right)
    su, sv = boundary.space_u, boundary.space_v
    nsu, nsv = config.nu_spaces()
    grid = build_quadrature(su, sv, config.points_per_span or None,
                            refine=[(nsu, nsv)])
    sel = build_boundary(su, sv, boundary)
    fmap = coons(boundary)
    anchor = fmap.coeffs if config.rank_anchor == 'coons' else None
    nu = BeltramiField.zero(nsu, nsv)
    log_ = ConvergenceLog()
    mu, jac, bad = sample_mu_nodes(fmap, grid)
    best = None
    state = None
    omega = None
    acc = None
    for k in range(config.outer_max_iters):
        sup_mu = float(np.nanmax(np.abs(mu))) if (~bad).any() else np.inf
        weighted = sup_mu - 1 < config.eps0
        if weighted and omega is None:
            omega = reweighting(mu, config.delta)
        if config.fold_guard and k > 0:
            # running max of the weights, normalised to unit mean
            w = reweighting(np.minimum(np.abs(mu), 1.0), config.delta)
            acc = w if acc is None else np.maximum(acc, w)
            q_omega = acc / (acc @ grid.weights)
        elif weighted:
            q_omega = omega
        else:
            q_omega = None
        Q = build_fidelity(grid, nu.at_nodes(grid), q_omega)
        C, info, state = admm_solve(Q, sel, config, fmap.coeffs, anchor=anchor)
        fmap = TensorMap(su, sv, C)
        mu, jac, bad = sample_mu_nodes(fmap, grid)
        if not weighted:
            # frozen weights for the reweighted phase come from the last plain solve
            omega = reweighting(mu, config.delta)
        system = build_nu_system(nsu, nsv, grid, mu, config.omega1, config.omega3,
                                 mask=~bad)
        nu_new = solve_nu(system, nsu, nsv, config,
                          x0=nu.coeffs.ravel(order='F'))
        change = float(np.abs(nu_new.coeffs - nu.coeffs).max())
        nu = nu_new
        cur = _Iterate(fmap, float(np.nanmax(np.abs(mu))) if (~bad).any() else np.inf,
                       float(jac.min()))
        if _better(cur, best):
            best = cur
            log_.best_iteration = k
        # diagnostics are reported in the caller's units
        cvec = C.ravel(order='F')
        record = dict(iteration=k, weighted=weighted, sup_mu=cur.sup_mu,
                      min_jac=cur.min_jac / scale ** 2,
                      rank=lowrank.numerical_rank(C / scale, config.rank_tol),
                      fidelity=Q.energy(cvec) / scale ** 2,
                      nuclear_norm=lowrank.trace_norm(C) / scale,
                      boundary_dev=float(np.abs(sel.apply(cvec) - sel.target).max()) / scale,
                      admm_iters=info.iterations,
                      primal_res=info.primal_residual / scale,
                      dual_res=info.dual_residual / scale, nu_change=change)
        log_.append(**record)
        log.info('outer %d: %s', k, record)
        if callback is not None:
            callback(k, fmap.with_coeffs(C / scale), record)
        if change < config.eps:
            log_.converged = True
            break
    if not log_.converged:
        warnings.warn('parameterization did not converge in %d outer iterations; '
                      'returning best iterate %s' % (config.outer_max_iters,
                                                    log_.best_iteration),
                      RuntimeWarning, stacklevel=2)
        fmap = best.fmap
    return snap_boundary(fmap.with_coeffs(fmap.coeffs / scale), user_boundary), log_
