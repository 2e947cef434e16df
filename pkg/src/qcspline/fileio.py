"""Domain and map files, run configuration, CSV/SVG export and atomic writes.

Domain and map files are JSON documents with complex numbers stored as
``[re, im]`` pairs.  Floats are written with ``repr`` precision so that a
parse/emit round trip is exact.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .geometry import (BoundaryCurves, BoundaryError, TensorMap, domain_area,
                       grid_partials, mu_from_partials)
from .quality import cell_area_distortion, sample_grid
from .solver import SolverConfig
from .splines import SplineSpace

DOMAIN_FORMAT = 'qcspline-domain'
MAP_FORMAT = 'qcspline-map'
FORMAT_VERSION = 1


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix='.' + os.path.basename(path) + '.')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- JSON documents ---------------------------------------------------------

def _pairs(z):
    return [[float(c.real), float(c.imag)] for c in np.asarray(z).ravel()]


def _fmt_pairs(z, indent):
    pad = ' ' * indent
    rows = ['%s[%r, %r]' % (pad, float(c.real), float(c.imag)) for c in np.ravel(z)]
    return '[\n' + ',\n'.join(rows) + '\n' + ' ' * (indent - 2) + ']'


def _fmt_floats(a):
    return '[' + ', '.join(repr(float(x)) for x in a) + ']'


def _header(fmt, degrees, su, sv):
    return ('{\n  "format": %s,\n  "version": %d,\n  "degrees": [%d, %d],\n'
            '  "knots_u": %s,\n  "knots_v": %s'
            % (json.dumps(fmt), FORMAT_VERSION, degrees[0], degrees[1],
               _fmt_floats(su.knots), _fmt_floats(sv.knots)))


def emit_domain(boundary):
    """Serialize :class:`BoundaryCurves` as a domain document."""
    su, sv = boundary.space_u, boundary.space_v
    parts = [_header(DOMAIN_FORMAT, (su.degree, sv.degree), su, sv)]
    for side in ('bottom', 'top', 'left', 'right'):
        parts.append('  "%s": %s' % (side, _fmt_pairs(getattr(boundary, side), 4)))
    return ',\n'.join(parts) + '\n}\n'


def emit_map(fmap):
    """Serialize a :class:`TensorMap`; ``coeffs`` lists rows ``C[i, :]``."""
    su, sv = fmap.space_u, fmap.space_v
    rows = ',\n'.join('    ' + json.dumps(_pairs(row)) for row in fmap.coeffs)
    # json.dumps prints floats with repr, so the values round-trip exactly
    return (_header(MAP_FORMAT, (su.degree, sv.degree), su, sv)
            + ',\n  "coeffs": [\n' + rows + '\n  ]\n}\n')


def _load(text, fmt):
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise BoundaryError('malformed', 'not valid JSON: %s' % exc) from None
    if not isinstance(doc, dict):
        raise BoundaryError('malformed', 'top level must be an object')
    if doc.get('format') != fmt:
        raise BoundaryError('malformed', 'format must be %r, got %r'
                            % (fmt, doc.get('format')))
    if doc.get('version') != FORMAT_VERSION:
        raise BoundaryError('unsupported-version', 'version %r is not supported '
                            '(expected %d)' % (doc.get('version'), FORMAT_VERSION))
    return doc


def _require(doc, key):
    if key not in doc:
        raise BoundaryError('malformed', 'missing field %r' % key)
    return doc[key]


def _spaces(doc):
    deg = _require(doc, 'degrees')
    if (not isinstance(deg, list) or len(deg) != 2
            or not all(isinstance(d, int) and not isinstance(d, bool) for d in deg)):
        raise BoundaryError('malformed', '"degrees" must be a pair of integers')
    out = []
    for d, key in zip(deg, ('knots_u', 'knots_v')):
        kv = _require(doc, key)
        try:
            kv = np.asarray(kv, dtype=float)
        except (TypeError, ValueError):
            raise BoundaryError('malformed', '%r must be a list of numbers' % key) from None
        try:
            out.append(SplineSpace(d, kv))
        except ValueError as exc:
            raise BoundaryError('invalid-knots', '%s: %s' % (key, exc)) from None
    return out


def _complex(value, name):
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise BoundaryError('malformed', '%r must hold [re, im] pairs' % name) from None
    if a.ndim < 2 or a.shape[-1] != 2:
        raise BoundaryError('malformed', '%r must hold [re, im] pairs' % name)
    return a[..., 0] + 1j * a[..., 1]


def parse_domain(text):
    """Parse a domain document into validated :class:`BoundaryCurves`.

    Raises:
        BoundaryError: with ``code`` one of ``malformed``,
            ``unsupported-version``, ``invalid-knots``, ``size-mismatch``,
            ``non-finite``, ``degenerate-curve``, ``corner-mismatch``.
    """
    doc = _load(text, DOMAIN_FORMAT)
    su, sv = _spaces(doc)
    sides = {s: _complex(_require(doc, s), s) for s in ('bottom', 'top', 'left', 'right')}
    for s, arr in sides.items():
        if arr.ndim != 1:
            raise BoundaryError('malformed', '%r must be a list of pairs' % s)
    return BoundaryCurves(su, sv, **sides)


def parse_map(text):
    doc = _load(text, MAP_FORMAT)
    su, sv = _spaces(doc)
    C = _complex(_require(doc, 'coeffs'), 'coeffs')
    if C.shape != (su.num_basis, sv.num_basis):
        raise BoundaryError('size-mismatch', 'coefficient array %s does not match '
                            'the spaces (%d, %d)' % (C.shape, su.num_basis, sv.num_basis))
    if not np.all(np.isfinite(C)):
        raise BoundaryError('non-finite', 'map coefficients must be finite')
    return TensorMap(su, sv, C)


# --- run configuration ------------------------------------------------------

@dataclass
class RunConfig:
    """Solver parameters plus output and sampling settings."""
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid_n: int = 200
    cells_m: int = 20
    cells_n: int = 20
    seed: int = 0
    svg_lines: int = 20
    svg_samples: int = 100
    out_dir: str = '.'

    _EXTRA = ('grid_n', 'cells_m', 'cells_n', 'seed', 'svg_lines', 'svg_samples', 'out_dir')

    @classmethod
    def keys(cls):
        return tuple(SolverConfig.field_names()) + cls._EXTRA

    def to_text(self):
        lines = ['%s = %s' % (k, getattr(self.solver, k)) for k in SolverConfig.field_names()]
        lines += ['%s = %s' % (k, getattr(self, k)) for k in self._EXTRA]
        return '\n'.join(lines) + '\n'


def parse_key_values(text):
    """``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValueError('line %d: expected key = value' % lineno)
        k, v = (s.strip() for s in line.split('=', 1))
        if not k:
            raise ValueError('line %d: empty key' % lineno)
        out[k] = v
    return out


def _convert(value, like):
    if isinstance(like, bool):
        if value.lower() in ('1', 'true', 'yes', 'on'):
            return True
        if value.lower() in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError('expected a boolean, got %r' % value)
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def build_run_config(text=None, overrides=None):
    """RunConfig from an optional ``key = value`` document and overrides.

    Overrides win over the file.  Unknown keys and unparsable values raise
    ``ValueError`` naming the key.
    """
    values = parse_key_values(text) if text else {}
    values.update(overrides or {})
    base = RunConfig()
    solver_kw, extra = {}, {}
    known = set(SolverConfig.field_names())
    for k, v in values.items():
        if k in known:
            like = getattr(base.solver, k)
            target = solver_kw
        elif k in RunConfig._EXTRA:
            like = getattr(base, k)
            target = extra
        else:
            raise ValueError('unknown configuration key %r' % k)
        try:
            target[k] = _convert(v, like) if isinstance(v, str) else v
        except ValueError:
            raise ValueError('bad value %r for %r' % (v, k)) from None
    cfg = RunConfig(solver=base.solver.replace(**solver_kw), **extra)
    minimum = dict(grid_n=2, cells_m=1, cells_n=1, svg_lines=2, svg_samples=2)
    for k, lo in minimum.items():
        if getattr(cfg, k) < lo:
            raise ValueError('%s must be at least %d' % (k, lo))
    return cfg


# --- sampled fields ---------------------------------------------------------

def sampled_fields(fmap, grid_n):
    """``|mu|`` (NaN where degenerate) and the scaled Jacobian on a uniform grid."""
    t = sample_grid(grid_n)
    _, fx, fy = grid_partials(fmap, t, t)
    mu, _ = mu_from_partials(fx, fy, fmap.scale)
    jac = fx.real * fy.imag - fx.imag * fy.real
    return np.abs(mu), jac / domain_area(fmap)


# --- SVG --------------------------------------------------------------------

RAMP_LOW = (44, 123, 182)
RAMP_HIGH = (215, 25, 28)
_VIEW = 1000.0


@dataclass
class SvgStyle:
    lines: int = 20
    samples: int = 100
    field: str = 'none'  # 'none', 'mu' or 'logjs'
    cells: tuple = (20, 20)
    stroke: str = '#222222'
    stroke_width: float = 1.0


def _ramp(t):
    t = float(np.clip(t, 0.0, 1.0))
    return '#%02x%02x%02x' % tuple(int(round(a + (b - a) * t))
                                   for a, b in zip(RAMP_LOW, RAMP_HIGH))


def _cell_values(fmap, kind, cells):
    M, N = cells
    if kind == 'logjs':
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.log10(cell_area_distortion(fmap, M, N))
    if kind == 'mu':
        xs = (np.arange(M) + 0.5) / M
        ys = (np.arange(N) + 0.5) / N
        _, fx, fy = grid_partials(fmap, xs, ys)
        mu, _ = mu_from_partials(fx, fy, fmap.scale)
        return np.abs(mu)
    raise ValueError('unknown colormap field %r' % kind)


def export_svg(fmap, quality=None, style=None):
    """Iso-parametric curves of the map as an SVG document.

    ``style.lines`` curves per direction at equally spaced parameters, each
    a polyline with ``style.samples`` points.  With ``style.field`` set,
    every cell of a ``style.cells`` subdivision is filled on a two-color
    ramp whose range is printed as text.  ``quality`` (a QualityReport)
    adds a summary line.
    """
    style = style or SvgStyle()
    if style.lines < 2 or style.samples < 2:
        raise ValueError('need at least 2 lines and 2 samples per line')
    s = np.linspace(0.0, 1.0, style.samples)
    iso = np.linspace(0.0, 1.0, style.lines)
    fu, _, _ = grid_partials(fmap, iso, s)    # u = const curves
    fv, _, _ = grid_partials(fmap, s, iso)    # v = const curves
    pts = np.concatenate([fu.ravel(), fv.ravel()])
    x0, x1 = pts.real.min(), pts.real.max()
    y0, y1 = pts.imag.min(), pts.imag.max()
    span = max(x1 - x0, y1 - y0, 1e-300)
    k = 0.9 * _VIEW / span
    ox = 0.5 * (_VIEW - k * (x1 - x0))
    oy = 0.5 * (_VIEW - k * (y1 - y0))

    def xy(z):
        z = np.ravel(z)
        return ' '.join('%.3f,%.3f' % (ox + k * (a - x0), _VIEW - oy - k * (b - y0))
                        for a, b in zip(z.real, z.imag))

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 %d %d" '
           'width="%d" height="%d">' % (_VIEW, _VIEW + 60, _VIEW, _VIEW + 60)]
    if style.field != 'none':
        vals = _cell_values(fmap, style.field, style.cells)
        finite = vals[np.isfinite(vals)]
        lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
        M, N = style.cells
        out.append('<g id="cells" stroke="none">')
        for i in range(M):
            for j in range(N):
                a, b = i / M, (i + 1) / M
                c, d = j / N, (j + 1) / N
                e = np.linspace(0, 1, 5)
                ring = np.concatenate([
                    grid_partials(fmap, a + (b - a) * e, [c])[0].ravel(),
                    grid_partials(fmap, [b], c + (d - c) * e)[0].ravel(),
                    grid_partials(fmap, b - (b - a) * e, [d])[0].ravel(),
                    grid_partials(fmap, [a], d - (d - c) * e)[0].ravel()])
                v = vals[i, j]
                t = (v - lo) / (hi - lo) if hi > lo and np.isfinite(v) else 0.0
                out.append('<polygon points="%s" fill="%s"/>' % (xy(ring), _ramp(t)))
        out.append('</g>')
        label = '|mu|' if style.field == 'mu' else 'log10 Js'
        out.append('<text x="10" y="%d" font-size="20">%s min %.6g</text>'
                   % (_VIEW + 25, escape(label), lo))
        out.append('<text x="10" y="%d" font-size="20">%s max %.6g</text>'
                   % (_VIEW + 50, escape(label), hi))
    out.append('<g id="isolines" fill="none" stroke="%s" stroke-width="%g">'
               % (style.stroke, style.stroke_width))
    for r in range(style.lines):
        out.append('<polyline points="%s"/>' % xy(fu[r, :]))
    for r in range(style.lines):
        out.append('<polyline points="%s"/>' % xy(fv[:, r]))
    out.append('</g>')
    if quality is not None:
        out.append('<text x="%d" y="%d" font-size="20" text-anchor="end">'
                   'sup|mu| %.4f  min Js %.4f  rank %d</text>'
                   % (_VIEW - 10, _VIEW + 25, quality.sup_mu, quality.min_scaled_jac,
                      quality.numerical_rank))
    out.append('</svg>')
    return '\n'.join(out) + '\n'
