import numpy as np
import pytest

from qcspline.splines import SplineSpace, open_uniform_space


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cox_de_boor(knots, p, i, t):
    """Textbook recursive B-spline, right-closed at t = 1 for the last basis."""
    knots = np.asarray(knots, float)
    if p == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        last = np.nonzero(knots < knots[-1])[0][-1]
        return 1.0 if (t == knots[-1] and i == last) else 0.0
    out = 0.0
    d1 = knots[i + p] - knots[i]
    d2 = knots[i + p + 1] - knots[i + 1]
    if d1 > 0:
        out += (t - knots[i]) / d1 * cox_de_boor(knots, p - 1, i, t)
    if d2 > 0:
        out += (knots[i + p + 1] - t) / d2 * cox_de_boor(knots, p - 1, i + 1, t)
    return out


def random_space(rng, degree=None, num_basis=None):
    p = int(rng.integers(1, 5)) if degree is None else degree
    n = int(rng.integers(p + 1, p + 12)) if num_basis is None else num_basis
    interior = np.sort(rng.uniform(0.05, 0.95, n - p - 1))
    return SplineSpace(p, np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)]))


def random_map(rng, m=8, n=7, degree=3, noise=0.15):
    """Small perturbation of the identity on random-ish spaces."""
    from qcspline.geometry import identity_map
    su, sv = open_uniform_space(degree, m), open_uniform_space(degree, n)
    f = identity_map(su, sv)
    C = f.coeffs + noise * (rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape)) / max(m, n)
    return f.with_coeffs(C)
