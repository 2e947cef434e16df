import numpy as np
import pytest

from qcspline import assembly as asm
from qcspline.geometry import boundary_of, coons, identity_map
from qcspline.lowrank import numerical_rank
from qcspline.solver import (SQRT_HALF, ConvergenceLog, SolverConfig, admm_solve,
                             parameterize, reweighting, solve_nu)
from qcspline.splines import open_uniform_space


@pytest.fixture(scope='module')
def square_setup():
    s = open_uniform_space(3, 9)
    b = boundary_of(identity_map(s, s))
    g = asm.build_quadrature(s, s)
    return s, b, g


def test_config_defaults():
    c = SolverConfig()
    assert (c.rho, c.eps0, c.delta, c.lam, c.omega3) == (1.0, 0.05, 1e-4, 1000.0, 100.0)
    assert (c.omega1, c.omega2, c.m, c.n, c.m_nu, c.n_nu, c.degree) == (4.0, 5.5, 24, 24, 46, 46, 3)


@pytest.mark.parametrize('bad', [dict(omega3=0), dict(lam=-1), dict(rho=0), dict(delta=0),
                                 dict(admm_max_iters=0), dict(rank_anchor='x')])
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        SolverConfig(**bad)


def test_admm_identity_fixed_point(square_setup):
    s, b, g = square_setup
    Q = asm.build_fidelity(g)
    sel = asm.build_boundary(s, s, b)
    init = coons(b).coeffs
    cfg = SolverConfig(omega2=0.0)
    C, info, _ = admm_solve(Q, sel, cfg, init)
    np.testing.assert_allclose(C, identity_map(s, s).coeffs, atol=1e-9)
    assert info.primal_residual <= 1e-6 and info.dual_residual <= 1e-6


def test_admm_nuclear_norm_keeps_identity(square_setup):
    s, b, g = square_setup
    Q = asm.build_fidelity(g)
    sel = asm.build_boundary(s, s, b)
    init = coons(b).coeffs
    C, info, _ = admm_solve(Q, sel, SolverConfig(), init, anchor=init)
    np.testing.assert_allclose(C, init, atol=1e-9)
    assert info.converged


def test_admm_large_rho_leaves_c_unchanged(square_setup, rng):
    s, b, g = square_setup
    Q = asm.build_fidelity(g)
    sel = asm.build_boundary(s, s, b)
    init = identity_map(s, s).coeffs + 0.01 * rng.standard_normal((9, 9))
    cfg = SolverConfig(rho=1e9, admm_max_iters=1)
    C, _, state = admm_solve(Q, sel, cfg, init)
    # c barely moves from the warm start and svt with tau = omega2/rho ~ 0 keeps it
    assert np.abs(state.c - state.z).max() <= 1e-6
    assert np.abs(C - init).max() <= 1e-5


def test_solve_nu_zero(square_setup):
    s, _, g = square_setup
    sys_ = asm.build_nu_system(s, s, g, np.zeros(g.num_nodes), 4.0, 100.0)
    nu = solve_nu(sys_, s, s, SolverConfig())
    assert np.abs(nu.coeffs).max() <= 1e-12


def test_solve_nu_constant_pointwise_minimizer(square_setup):
    # the unconstrained minimizer is omega3/(1+omega3)*mu = 90/101, which lies
    # outside the strict box, so the projected result sits on the bound
    from scipy.sparse.linalg import spsolve
    s, _, g = square_setup
    H, rhs_re, rhs_im = asm.build_nu_system(s, s, g, np.full(g.num_nodes, 0.9), 0.0, 100.0)
    np.testing.assert_allclose(spsolve(H.tocsc(), rhs_re), 90 / 101, atol=1e-9)
    np.testing.assert_allclose(rhs_im, 0.0)
    nu = solve_nu((H, rhs_re, rhs_im), s, s, SolverConfig())
    np.testing.assert_allclose(nu.coeffs, SQRT_HALF - 1e-6, atol=1e-12)


def test_solve_nu_constant_strictly_inside(square_setup):
    s, _, g = square_setup
    sys_ = asm.build_nu_system(s, s, g, np.full(g.num_nodes, 0.5 + 0.3j), 0.0, 100.0)
    nu = solve_nu(sys_, s, s, SolverConfig())
    np.testing.assert_allclose(nu.coeffs, (0.5 + 0.3j) * 100 / 101, atol=1e-9)


def test_solve_nu_clips_to_box(square_setup):
    s, _, g = square_setup
    sys_ = asm.build_nu_system(s, s, g, np.full(g.num_nodes, 1.2 - 1.2j), 0.0, 100.0)
    nu = solve_nu(sys_, s, s, SolverConfig())
    np.testing.assert_allclose(nu.coeffs.real, SQRT_HALF - 1e-6)
    np.testing.assert_allclose(nu.coeffs.imag, -(SQRT_HALF - 1e-6))


def test_reweighting_formula():
    mu = np.array([0.0, 0.5, 0.99, np.nan])
    w = reweighting(mu, 1e-4)
    np.testing.assert_allclose(w[:3], 1 / ((1 - np.abs(mu[:3])) ** 2 + 1e-4))
    assert w[3] == w[:3].min()


def test_parameterize_small_square():
    s = open_uniform_space(3, 9)
    b = boundary_of(identity_map(s, s))
    f, log = parameterize(b, SolverConfig(m_nu=10, n_nu=10))
    np.testing.assert_allclose(f.coeffs, identity_map(s, s).coeffs, atol=1e-6)
    assert numerical_rank(f.coeffs) == 2
    assert log.converged and log[0]['sup_mu'] <= 1e-6


def test_parameterize_reports_best_iterate_when_not_converged():
    from qcspline.domains import generate_domain
    b = generate_domain('blob', m=10, n=10, seed=0)
    with pytest.warns(RuntimeWarning):
        f, log = parameterize(b, SolverConfig(outer_max_iters=1, eps=1e-12,
                                              m_nu=12, n_nu=12))
    assert not log.converged and log.best_iteration == 0
    assert np.array_equal(f.coeffs[:, 0], b.bottom)


def test_convergence_log_csv():
    log = ConvergenceLog()
    log.append(iteration=0, weighted=False, sup_mu=0.5, rank=3)
    text = log.to_csv().splitlines()
    assert text[0].split(',') == list(ConvergenceLog.columns)
    assert text[1].startswith('0,0,0.5,')


def test_callback_receives_records():
    s = open_uniform_space(3, 7)
    b = boundary_of(identity_map(s, s))
    seen = []
    parameterize(b, SolverConfig(m_nu=8, n_nu=8), callback=lambda k, f, r: seen.append((k, r['rank'])))
    assert seen and seen[0] == (0, 2)


def test_adaptive_rho_keeps_fixed_point(square_setup, rng):
    s, b, g = square_setup
    Q = asm.build_fidelity(g)
    sel = asm.build_boundary(s, s, b)
    init = identity_map(s, s).coeffs + 0.05 * rng.standard_normal((9, 9))
    C, info, state = admm_solve(Q, sel, SolverConfig(rho_adapt=True, admm_max_iters=400),
                                init, anchor=coons(b).coeffs)
    np.testing.assert_allclose(C, identity_map(s, s).coeffs, atol=1e-6)
    assert state.rho != 1.0
