"""Synthetic planar domains bounded by four B-spline curves."""

import numpy as np

from .geometry import BoundaryCurves
from .splines import greville, interpolate, open_uniform_space

KINDS = ('square', 'quarter_annulus', 'star', 'blob')

# corner directions: bottom-left, bottom-right, top-right, top-left
_BL, _BR, _TR, _TL = -0.75 * np.pi, -0.25 * np.pi, 0.25 * np.pi, 0.75 * np.pi


def _fit(space, t, curve):
    return interpolate(space, t, curve(t))


def _radial_boundary(radius, space_u, space_v, center=0.0):
    """Split a star-shaped closed curve ``r(theta)`` at the four diagonal
    directions and interpolate each side at the Greville abscissae."""
    def side(th0, th1):
        def curve(t):
            th = th0 + (th1 - th0) * t
            return center + radius(th) * np.exp(1j * th)
        return curve

    gu, gv = greville(space_u), greville(space_v)
    bottom = _fit(space_u, gu, side(_BL, _BR))
    right = _fit(space_v, gv, side(_BR, _TR))
    top = _fit(space_u, gu, side(_TL, _TR))
    left = _fit(space_v, gv, side(_BL + 2 * np.pi, _TL))
    return _assemble(space_u, space_v, bottom, top, left, right)


def _assemble(space_u, space_v, bottom, top, left, right):
    # interpolation reproduces the end points only up to rounding
    left[0], right[0] = bottom[0], bottom[-1]
    left[-1], right[-1] = top[0], top[-1]
    return BoundaryCurves(space_u, space_v, bottom, top, left, right)


def square(space_u, space_v):
    gu, gv = greville(space_u), greville(space_v)
    return BoundaryCurves(space_u, space_v, gu + 0j, gu + 1j, 1j * gv, 1 + 1j * gv)


def quarter_annulus(space_u, space_v, r_in=1.0, r_out=2.0):
    """``{r_in <= |z| <= r_out, 0 <= arg z <= pi/2}``; ``x`` runs radially."""
    gu, gv = greville(space_u), greville(space_v)
    bottom = r_in + (r_out - r_in) * gu + 0j
    top = 1j * bottom
    arc = lambda r: (lambda t: r * np.exp(0.5j * np.pi * t))
    left = _fit(space_v, gv, arc(r_in))
    right = _fit(space_v, gv, arc(r_out))
    return _assemble(space_u, space_v, bottom, top, left, right)


def _cornered(th, corner):
    """Blend of the unit circle and the square ``max(|x|, |y|) = 1``.

    A smooth closed curve split into four sides would meet itself at straight
    angles, where no spline map can have positive Jacobian; the square part
    puts a genuine corner at each split direction.
    """
    sq = 1.0 / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))
    return (1.0 - corner) + corner * sq


def star(space_u, space_v, lobes=5, amplitude=0.2, radius=1.0, phase=0.5 * np.pi,
         corner=0.7):
    """Star-shaped domain with ``lobes`` bumps of relative height ``amplitude``.

    ``r = radius (1 + amplitude cos(lobes (theta - phase))) c(theta)`` where
    ``c`` blends a circle with a square by ``corner``.  The default phase
    points a lobe straight up.
    """
    rad = lambda th: (radius * (1 + amplitude * np.cos(lobes * (th - phase)))
                      * _cornered(th, corner))
    return _radial_boundary(rad, space_u, space_v)


def blob(space_u, space_v, seed=0, radius=1.0, modes=4, max_amplitude=0.12,
         corner=0.7):
    """Random star-shaped domain with a few low Fourier modes."""
    rng = np.random.default_rng(seed)
    ks = np.arange(2, 2 + modes)
    amps = rng.uniform(0.3, 1.0, modes) * max_amplitude / np.sqrt(ks - 1)
    phases = rng.uniform(0, 2 * np.pi, modes)

    def rad(th):
        th = np.asarray(th)
        modes_ = np.sum(amps * np.cos(ks * th[..., None] + phases), axis=-1)
        return radius * (1 + modes_) * _cornered(th, corner)

    return _radial_boundary(rad, space_u, space_v)


def generate_domain(kind, m=24, n=24, degree=3, **params):
    """Boundary curves of a synthetic domain with ``m+1`` x ``n+1`` control points.

    Args:
        kind (str): one of ``square``, ``quarter_annulus``, ``star``, ``blob``.
        m, n (int): highest control point index along each direction.
        degree (int): spline degree of both directions.
        **params: shape parameters (``lobes``, ``amplitude``, ``seed``, ...).
    """
    su = open_uniform_space(degree, m + 1)
    sv = open_uniform_space(degree, n + 1)
    if kind == 'square':
        return square(su, sv)
    if kind == 'quarter_annulus':
        return quarter_annulus(su, sv, **params)
    if kind == 'star':
        return star(su, sv, **params)
    if kind == 'blob':
        return blob(su, sv, **params)
    raise ValueError('unknown domain kind %r (expected one of %s)'
                     % (kind, ', '.join(KINDS)))
