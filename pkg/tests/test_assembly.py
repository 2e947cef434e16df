import numpy as np
import pytest
import scipy.sparse.linalg as spla

from qcspline import assembly as asm
from qcspline.geometry import boundary_of, coons, identity_map, grid_partials
from qcspline.domains import generate_domain
from qcspline.splines import collocation, open_uniform_space

from conftest import random_map


def test_weights_sum_to_one_and_nodes_inside():
    s = open_uniform_space(3, 10)
    g = asm.build_quadrature(s, s)
    assert abs(g.weights.sum() - 1) <= 1e-12
    brk = s.breakpoints
    for nodes in (g.nodes_u, g.nodes_v):
        assert not np.any(np.isin(nodes, brk))
        assert nodes.min() > 0 and nodes.max() < 1


def test_single_span_nodes_are_gauss_nodes():
    s = open_uniform_space(3, 4)
    g = asm.build_quadrature(s, s, 4)
    x, _ = np.polynomial.legendre.leggauss(4)
    np.testing.assert_allclose(g.nodes_u, 0.5 * (x + 1), atol=1e-15)


def test_cubic_integrated_exactly():
    s = open_uniform_space(3, 7)
    g = asm.build_quadrature(s, s)
    X, Y = g.params()
    assert abs(g.integrate(X ** 3) - 0.25) <= 1e-14


def _pieces(space, i):
    """Polynomial pieces of basis function ``i`` on each span (exact fit)."""
    brk = space.breakpoints
    out = []
    for a, b in zip(brk[:-1], brk[1:]):
        t = np.linspace(a, b, space.degree + 3)[1:-1]
        vals = collocation(space, t).toarray()[:, i]
        out.append((a, b, np.polynomial.Polynomial.fit(t, vals, space.degree).convert()))
    return out


def _exact_product_integral(space, i, k):
    total = 0.0
    for (a, b, p), (_, _, q) in zip(_pieces(space, i), _pieces(space, k)):
        P = (p * q).integ()
        total += P(b) - P(a)
    return total


def test_mass_matrix_matches_piecewise_polynomial_oracle():
    s = open_uniform_space(3, 7)
    g = asm.build_quadrature(s, s)
    M = asm.mass_matrix(g, s, s).toarray()
    n = s.num_basis
    M1 = np.array([[_exact_product_integral(s, i, k) for k in range(n)] for i in range(n)])
    np.testing.assert_allclose(M, np.kron(M1, M1), atol=1e-12)


def test_mass_row_sums_are_basis_integrals():
    s = open_uniform_space(3, 9)
    g = asm.build_quadrature(s, s)
    M = asm.mass_matrix(g, s, s)
    B = g.basis(s, s)
    np.testing.assert_allclose(np.asarray(M.sum(axis=1)).ravel(), B.T @ g.weights, atol=1e-14)
    assert abs(M.sum() - 1) <= 1e-12


def test_fidelity_identity_and_conjugate():
    s = open_uniform_space(3, 8)
    g = asm.build_quadrature(s, s)
    Q = asm.build_fidelity(g)
    c = identity_map(s, s).coeffs.ravel(order='F')
    assert abs(np.vdot(c, Q.Q @ c)) <= 1e-12
    assert abs(np.vdot(c.conj(), Q.Q @ c.conj()) - 1.0) <= 1e-12


def test_fidelity_matches_direct_quadrature(rng):
    f = random_map(rng)
    su, sv = f.space_u, f.space_v
    nsu, nsv = open_uniform_space(3, 11), open_uniform_space(3, 10)
    g = asm.build_quadrature(su, sv, refine=[(nsu, nsv)])
    nu = asm.BeltramiField(nsu, nsv, 0.3 * (rng.random((11, 10)) - 0.5)
                           + 0.3j * (rng.random((11, 10)) - 0.5))
    omega = rng.uniform(0.5, 2.0, g.num_nodes)
    fs = asm.build_fidelity(g, nu, omega)
    c = f.coeffs.ravel(order='F')
    _, fx, fy = grid_partials(f, g.nodes_u, g.nodes_v)
    fz = (0.5 * (fx - 1j * fy)).ravel(order='F')
    fzb = (0.5 * (fx + 1j * fy)).ravel(order='F')
    direct = np.sum(g.weights * omega * np.abs(fzb - nu.at_nodes(g) * fz) ** 2)
    assert abs(np.vdot(c, fs.Q @ c).real - direct) <= 1e-10
    assert abs(fs.energy(c) - direct) <= 1e-10


def test_fidelity_hermitian_psd(rng):
    s = open_uniform_space(3, 8)
    g = asm.build_quadrature(s, s)
    nu = 0.4 * np.exp(2j * np.pi * rng.random(g.num_nodes))
    Q = asm.build_fidelity(g, nu).Q
    assert abs(Q - Q.conj().T).max() <= 1e-12
    for _ in range(20):
        c = rng.standard_normal(Q.shape[0]) + 1j * rng.standard_normal(Q.shape[0])
        assert np.vdot(c, Q @ c).real >= -1e-10


def test_fidelity_sparsity_follows_support():
    s = open_uniform_space(3, 12)
    g = asm.build_quadrature(s, s)
    Q = asm.build_fidelity(g).Q.tocoo()
    i1, j1 = Q.row % 12, Q.row // 12
    i2, j2 = Q.col % 12, Q.col // 12
    assert np.all(np.abs(i1 - i2) <= 3) and np.all(np.abs(j1 - j2) <= 3)


def test_fidelity_rejects_bad_weights():
    s = open_uniform_space(3, 6)
    g = asm.build_quadrature(s, s)
    with pytest.raises(ValueError):
        asm.build_fidelity(g, omega=-1.0)
    with pytest.raises(ValueError):
        asm.build_fidelity(g, nu=np.nan)


def test_beltrami_field_box():
    s = open_uniform_space(3, 5)
    with pytest.raises(ValueError):
        asm.BeltramiField(s, s, np.full((5, 5), 0.71 + 0j))
    asm.BeltramiField(s, s, np.full((5, 5), 0.7 - 0.7j))


def test_boundary_selector_count_and_order():
    s = open_uniform_space(3, 4)   # m = n = 3
    idx = asm.boundary_traversal(4, 4)
    assert idx.size == 12 and np.unique(idx).size == 12
    ij = [(k % 4, k // 4) for k in idx]
    assert ij[:4] == [(0, 0), (1, 0), (2, 0), (3, 0)]
    assert ij[4:7] == [(3, 1), (3, 2), (3, 3)]
    assert ij[7:10] == [(2, 3), (1, 3), (0, 3)]
    assert ij[10:] == [(0, 2), (0, 1)]
    f = identity_map(s, s)
    sel = asm.build_boundary(s, s, boundary_of(f))
    np.testing.assert_allclose(sel.target, f.coeffs.ravel(order='F')[idx])


def test_selector_recovers_coons_boundary():
    b = generate_domain('star', lobes=5, amplitude=0.2)
    sel = asm.build_boundary(b.space_u, b.space_v, b)
    assert np.array_equal(sel.apply(coons(b).coeffs), sel.target)
    S = sel.operator()
    assert np.array_equal(S @ coons(b).coeffs.ravel(order='F'), sel.target)


def test_nu_system_zero_data():
    s = open_uniform_space(3, 8)
    g = asm.build_quadrature(s, s)
    H, re, im = asm.build_nu_system(s, s, g, np.zeros(g.num_nodes), 4.0, 100.0)
    assert np.all(re == 0) and np.all(im == 0)
    assert np.all(np.linalg.eigvalsh(H.toarray()) > 0)


def test_nu_system_constant_data():
    s = open_uniform_space(3, 8)
    g = asm.build_quadrature(s, s)
    kappa = 0.3 - 0.2j
    H, re, im = asm.build_nu_system(s, s, g, np.full(g.num_nodes, kappa), 0.0, 100.0)
    x = spla.spsolve(H.tocsc(), re) + 1j * spla.spsolve(H.tocsc(), im)
    np.testing.assert_allclose(x, 100 * kappa / 101, atol=1e-12)


def test_nu_system_matches_dense_least_squares(rng):
    s = open_uniform_space(3, 8)
    g = asm.build_quadrature(s, s)
    mu = rng.standard_normal(g.num_nodes) + 1j * rng.standard_normal(g.num_nodes)
    mask = rng.random(g.num_nodes) > 0.1
    w1, w3 = 3.0, 50.0
    H, re, im = asm.build_nu_system(s, s, g, mu, w1, w3, mask=mask)
    B = g.basis(s, s).toarray()
    Bx = g.basis(s, s, 1, 0).toarray()
    By = g.basis(s, s, 0, 1).toarray()
    sw = np.sqrt(g.weights)[:, None]
    sd = np.sqrt(w3 * g.weights * mask)[:, None]
    A = np.vstack([sw * B, np.sqrt(w1) * sw * Bx, np.sqrt(w1) * sw * By, sd * B])
    z = np.zeros(3 * g.num_nodes)
    for part, rhs in ((mu.real, re), (mu.imag, im)):
        ref = np.linalg.lstsq(A, np.concatenate([z, sd.ravel() * part]), rcond=None)[0]
        np.testing.assert_allclose(spla.spsolve(H.tocsc(), rhs), ref, atol=1e-8)


def test_nu_system_rejects_bad_weights():
    s = open_uniform_space(3, 5)
    g = asm.build_quadrature(s, s)
    with pytest.raises(ValueError):
        asm.build_nu_system(s, s, g, 0.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        asm.build_nu_system(s, s, g, 0.0, 1.0, 0.0)


def test_assembly_deterministic(rng):
    s = open_uniform_space(3, 9)
    nu = 0.3 * rng.random(asm.build_quadrature(s, s).num_nodes)
    Q1 = asm.build_fidelity(asm.build_quadrature(s, s), nu).Q
    Q2 = asm.build_fidelity(asm.build_quadrature(s, s), nu).Q
    assert abs(Q1 - Q2).max() == 0
