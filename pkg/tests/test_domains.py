import numpy as np
import pytest

from qcspline.domains import KINDS, generate_domain
from qcspline.geometry import coons, domain_area
from qcspline.quality import injectivity_check


def test_quarter_annulus_area():
    b = generate_domain('quarter_annulus')
    assert domain_area(coons(b)) == pytest.approx(3 * np.pi / 4, abs=1e-3)


def test_square_area_and_corners():
    b = generate_domain('square', m=5, n=7)
    assert domain_area(coons(b)) == pytest.approx(1.0, abs=1e-14)
    assert b.bottom.size == 6 and b.left.size == 8


@pytest.mark.parametrize('kind,params', [('quarter_annulus', {}), ('star', dict(lobes=5, amplitude=0.2)),
                                         ('star', dict(lobes=7, amplitude=0.15)), ('blob', dict(seed=1))])
def test_generation_is_deterministic(kind, params):
    a = generate_domain(kind, **params)
    b = generate_domain(kind, **params)
    for side in ('bottom', 'top', 'left', 'right'):
        assert np.array_equal(getattr(a, side), getattr(b, side))


def test_blob_seeds_differ():
    a, b = generate_domain('blob', seed=0), generate_domain('blob', seed=1)
    assert not np.allclose(a.top, b.top)


def test_star_has_lobes():
    b = generate_domain('star', lobes=5, amplitude=0.2)
    pts = np.concatenate([b.bottom, b.right, b.top[::-1], b.left[::-1]])
    r = np.abs(pts)
    assert r.max() / r.min() > 1.2


def test_coons_of_blob_is_valid_start():
    ok, _, _ = injectivity_check(coons(generate_domain('blob', seed=0)), 50)
    assert ok


def test_unknown_kind():
    with pytest.raises(ValueError, match='unknown domain kind'):
        generate_domain('hexagon')
    assert set(KINDS) == {'square', 'quarter_annulus', 'star', 'blob'}
