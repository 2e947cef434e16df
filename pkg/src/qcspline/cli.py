"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 solver did not converge (the best
iterate is still written).
"""

import argparse
import csv
import io
import sys
import warnings

import numpy as np

from . import fileio, iga
from .domains import KINDS, generate_domain
from .geometry import BoundaryError, coons, refine_map
from .quality import grid_csv, quality_report
from .solver import parameterize

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class InputError(Exception):
    """Bad command-line input; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _read(path):
    try:
        with open(path, encoding='utf-8') as fh:
            return fh.read()
    except OSError as exc:
        raise InputError('cannot read %s: %s' % (path, exc.strerror)) from None


def _write(path, text):
    if path is None:
        return
    try:
        fileio.write_atomic(path, text)
    except OSError as exc:
        raise InputError('cannot write %s: %s' % (path, exc.strerror)) from None


def _run_config(args):
    text = _read(args.config) if getattr(args, 'config', None) else None
    overrides = {}
    for item in getattr(args, 'set', None) or []:
        if '=' not in item:
            raise InputError('--set expects key=value, got %r' % item)
        k, v = item.split('=', 1)
        overrides[k.strip()] = v.strip()
    try:
        return fileio.build_run_config(text, overrides)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _domain(path):
    return fileio.parse_domain(_read(path))


def _map(path):
    return fileio.parse_map(_read(path))


def _report(fmap, cfg):
    return quality_report(fmap, grid_n=cfg.grid_n, cells=(cfg.cells_m, cfg.cells_n),
                          rank_tol=cfg.solver.rank_tol)


def _emit_report(args, text):
    if args.report:
        _write(args.report, text)
    else:
        sys.stdout.write(text)


# --- subcommands ------------------------------------------------------------

def cmd_gen(args):
    cfg = _run_config(args)
    params = {}
    if args.kind == 'star':
        params = dict(lobes=args.lobes, amplitude=args.amplitude)
    elif args.kind == 'blob':
        params = dict(seed=cfg.seed if args.seed is None else args.seed)
    elif args.kind == 'quarter_annulus':
        params = dict(r_in=args.r_in, r_out=args.r_out)
    s = cfg.solver
    try:
        b = generate_domain(args.kind, m=s.m, n=s.n, degree=s.degree, **params)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _write(args.out, fileio.emit_domain(b))
    return EXIT_OK


def cmd_coons(args):
    cfg = _run_config(args)
    fmap = coons(_domain(args.domain))
    _write(args.out, fileio.emit_map(fmap))
    if args.report:
        _write(args.report, _report(fmap, cfg).to_text())
    return EXIT_OK


def cmd_fit(args):
    cfg = _run_config(args)
    boundary = _domain(args.domain)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        fmap, log = parameterize(boundary, cfg.solver)
    _write(args.out, fileio.emit_map(fmap))
    if args.log:
        _write(args.log, log.to_csv())
    rep = _report(fmap, cfg)
    text = rep.to_text() + 'converged = %s\nouter_iterations = %d\n' % (
        str(log.converged).lower(), len(log))
    _emit_report(args, text)
    if not log.converged:
        sys.stderr.write('fit: no convergence in %d outer iterations; best '
                         'iterate %s written\n' % (len(log), log.best_iteration))
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_quality(args):
    cfg = _run_config(args)
    fmap = _map(args.map)
    rep = _report(fmap, cfg)
    _emit_report(args, rep.to_text())
    if args.cells_csv:
        _write(args.cells_csv, rep.cells_csv())
    return EXIT_OK


def cmd_solve_pde(args):
    cfg = _run_config(args)
    preset = iga.PRESETS[args.preset]
    if args.map:
        fmap = _map(args.map)
    elif args.domain:
        fmap = coons(_domain(args.domain))
    else:
        raise InputError('solve-pde needs --map or --domain')
    rows = []
    field = None
    status = EXIT_OK
    for level in range(args.refine + 1):
        m = refine_map(fmap, level)
        try:
            system = iga.assemble(m, preset.f, preset.u)
        except iga.NonInjectiveMapError as exc:
            raise InputError(str(exc)) from None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always', RuntimeWarning)
            field = iga.solve(system)
        if caught:
            status = EXIT_NONCONVERGED
        err = iga.l2_error(field, m, preset.u)
        cond = iga.condition_estimate(system.A) if args.cond else float('nan')
        rows.append((level, m.space_u.num_basis, m.space_v.num_basis, system.dof, err, cond))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(['level', 'num_basis_u', 'num_basis_v', 'dof', 'l2_error', 'condition'])
    for r in rows:
        w.writerow([r[0], r[1], r[2], r[3], '%.10g' % r[4], '%.10g' % r[5]])
    text = '# exact solution: %s\n' % preset.expression + buf.getvalue()
    _emit_report(args, text)
    if args.field_csv:
        t = np.linspace(0.0, 1.0, cfg.grid_n)
        _write(args.field_csv, grid_csv(field.on_grid(t, t), 'u_h'))
    return status


def cmd_sweep_w2(args):
    cfg = _run_config(args)
    try:
        values = [float(v) for v in args.values.split(',') if v.strip()]
    except ValueError:
        raise InputError('--values must be a comma separated list of numbers') from None
    if not values or any(v < 0 for v in values):
        raise InputError('--values must be non-negative numbers')
    boundary = _domain(args.domain)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(['omega2', 'rank', 'sup_mu', 'min_scaled_jac', 'max_scaled_jac',
                'converged'])
    status = EXIT_OK
    for v in values:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            fmap, log = parameterize(boundary, cfg.solver.replace(omega2=v))
        rep = _report(fmap, cfg)
        w.writerow(['%g' % v, rep.numerical_rank, '%.10g' % rep.sup_mu,
                    '%.10g' % rep.min_scaled_jac, '%.10g' % rep.max_scaled_jac,
                    int(log.converged)])
        if not log.converged:
            status = EXIT_NONCONVERGED
    if args.out:
        _write(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return status


def cmd_export(args):
    cfg = _run_config(args)
    fmap = _map(args.map)
    if not (args.svg or args.mu_csv or args.jac_csv):
        raise InputError('export needs at least one of --svg, --mu-csv, --jac-csv')
    if args.svg:
        style = fileio.SvgStyle(lines=cfg.svg_lines, samples=cfg.svg_samples,
                                field=args.field, cells=(cfg.cells_m, cfg.cells_n))
        rep = _report(fmap, cfg)
        _write(args.svg, fileio.export_svg(fmap, rep, style))
    if args.mu_csv or args.jac_csv:
        mu, js = fileio.sampled_fields(fmap, cfg.grid_n)
        if args.mu_csv:
            _write(args.mu_csv, grid_csv(mu, 'abs_mu'))
        if args.jac_csv:
            _write(args.jac_csv, grid_csv(js, 'scaled_jacobian'))
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _common(p):
    p.add_argument('--config', help='key = value run configuration file')
    p.add_argument('--set', action='append', metavar='KEY=VALUE',
                   help='override a configuration entry (repeatable)')


def build_parser():
    parser = _Parser(prog='qcspline',
                     description='Low-rank quasi-conformal spline parameterization.')
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    p = sub.add_parser('gen', help='write a synthetic domain file')
    p.add_argument('kind', choices=KINDS)
    p.add_argument('--out', required=True)
    p.add_argument('--lobes', type=int, default=5)
    p.add_argument('--amplitude', type=float, default=0.2)
    p.add_argument('--seed', type=int)
    p.add_argument('--r-in', type=float, default=1.0)
    p.add_argument('--r-out', type=float, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser('coons', help='discrete Coons patch of a domain')
    p.add_argument('--domain', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--report')
    _common(p)
    p.set_defaults(func=cmd_coons)

    p = sub.add_parser('fit', help='low-rank quasi-conformal fit')
    p.add_argument('--domain', required=True)
    p.add_argument('--out', required=True, help='map file')
    p.add_argument('--report', help='quality report (default: stdout)')
    p.add_argument('--log', help='per-iteration CSV log')
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('quality', help='distortion and rank report of a map')
    p.add_argument('--map', required=True)
    p.add_argument('--report')
    p.add_argument('--cells-csv')
    _common(p)
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser('solve-pde', help='IGA solve of -Laplace(u)+u=f on a map')
    src = p.add_mutually_exclusive_group()
    src.add_argument('--map')
    src.add_argument('--domain', help='use the Coons patch of this domain')
    p.add_argument('--preset', choices=sorted(iga.PRESETS), default='rational-bump')
    p.add_argument('--refine', type=int, default=0,
                   help='number of uniform refinements to add')
    p.add_argument('--cond', action='store_true', help='estimate condition numbers')
    p.add_argument('--report')
    p.add_argument('--field-csv', help='solution on the finest level, sampled')
    _common(p)
    p.set_defaults(func=cmd_solve_pde)

    p = sub.add_parser('sweep-w2', help='rank versus omega2 table')
    p.add_argument('--domain', required=True)
    p.add_argument('--values', default='1.5,5.5,7.5,10')
    p.add_argument('--out')
    _common(p)
    p.set_defaults(func=cmd_sweep_w2)

    p = sub.add_parser('export', help='SVG and CSV renderings of a map')
    p.add_argument('--map', required=True)
    p.add_argument('--svg')
    p.add_argument('--field', choices=('none', 'mu', 'logjs'), default='none')
    p.add_argument('--mu-csv')
    p.add_argument('--jac-csv')
    _common(p)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, 'refine', 0) < 0:
            raise InputError('--refine must be non-negative')
        return args.func(args)
    except InputError as exc:
        sys.stderr.write('error: %s\n' % exc)
        return EXIT_INPUT
    except BoundaryError as exc:
        sys.stderr.write('error: invalid input [%s]: %s\n' % (exc.code, exc))
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())
