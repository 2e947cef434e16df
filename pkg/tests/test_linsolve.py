import numpy as np
import pytest
import scipy.sparse as sp

from qcspline.linsolve import PcgBreakdown, make_preconditioner, pcg


def spd(rng, n, complex_=False):
    X = rng.standard_normal((n, n))
    if complex_:
        X = X + 1j * rng.standard_normal((n, n))
    return X.conj().T @ X + n * np.eye(n)


def test_identity_one_iteration(rng):
    b = rng.standard_normal(30)
    r = pcg(np.eye(30), b)
    assert r.iterations == 1 and r.converged
    np.testing.assert_allclose(r.x, b)


def test_diagonal_converges_in_distinct_eigenvalue_count(rng):
    d = np.repeat([1.0, 2.0, 5.0, 9.0], 10)
    r = pcg(sp.diags(d), rng.standard_normal(40), tol=1e-13)
    assert r.converged and r.iterations <= 4


@pytest.mark.parametrize('kind', ['none', 'jacobi', 'ilu'])
def test_random_spd_matches_dense_solve(rng, kind):
    A = spd(rng, 200)
    b = rng.standard_normal(200)
    P = make_preconditioner(sp.csr_matrix(A), kind)
    r = pcg(A, b, P, tol=1e-12)
    np.testing.assert_allclose(r.x, np.linalg.solve(A, b), atol=1e-8)
    assert r.residual <= 1e-10


def test_complex_hermitian(rng):
    A = spd(rng, 60, complex_=True)
    b = rng.standard_normal(60) + 1j * rng.standard_normal(60)
    r = pcg(A, b, make_preconditioner(sp.csr_matrix(A), 'jacobi'), tol=1e-12)
    np.testing.assert_allclose(r.x, np.linalg.solve(A, b), atol=1e-8)


def test_callable_operator(rng):
    A = spd(rng, 20)
    b = rng.standard_normal(20)
    r = pcg(lambda v: A @ v, b, tol=1e-12)
    np.testing.assert_allclose(r.x, np.linalg.solve(A, b), atol=1e-9)


def test_zero_rhs():
    r = pcg(np.eye(3), np.zeros(3))
    assert r.converged and np.all(r.x == 0)


def test_indefinite_breakdown():
    with pytest.raises(PcgBreakdown):
        pcg(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))


def test_iteration_cap_reported(rng):
    A = spd(rng, 100) + np.diag(np.logspace(0, 6, 100))
    r = pcg(A, rng.standard_normal(100), tol=1e-14, max_iters=3)
    assert not r.converged and r.iterations == 3 and r.residual > 1e-14


def test_jacobi_rejects_non_positive_diagonal():
    with pytest.raises(PcgBreakdown):
        make_preconditioner(sp.diags([1.0, 0.0]), 'jacobi')


def test_unknown_preconditioner():
    with pytest.raises(ValueError):
        make_preconditioner(sp.eye(2), 'multigrid')
