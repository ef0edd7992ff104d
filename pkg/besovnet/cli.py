"""
Besovnet command line

    besovnet wavelet dump        φ/ψ breakpoints, coefficients and masks as JSON
    besovnet target generate     sample a test target (field file, optional coefficient CSV)
    besovnet analyze FIELD       wavelet coefficients of a field as CSV
    besovnet compile FIELD       N-term network JSON plus a report row
    besovnet eval NET            evaluate a network at given points
    besovnet rates               rate sweep or gadget sweep report
    besovnet network info NET    size summary of a network
"""

import argparse
import json
import logging
import math
import sys
from typing import Optional

import numpy as np
import pandas as pd

from besovnet import network_ir
from besovnet.compiler import compile_expansion, compile_report, eval_on_grid, select_epsilon
from besovnet.config import Settings, TargetSettings, configure_logging, load_config
from besovnet.errors import BesovnetError
from besovnet.expansion import (BesovParams, analyze, coeffs_to_csv, evaluate_expansion, load_field,
                                lp_error, n_term_select, save_field)
from besovnet.harness import TargetSpec, emit, gadget_sweep, generate_target, rate_sweep
from besovnet.reports import report_schema
from besovnet.wavelets1d import cdf_system, system_to_dict

logger = logging.getLogger(__name__)


def _int_list(raw: str) -> list[int]:
    return [int(v) for v in raw.split(',') if v.strip()]


def _float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.split(',') if v.strip()]


def _wavelet_flags(parser):
    parser.add_argument('--L', type=int, dest='wavelet.L', help='primal order')
    parser.add_argument('--L-dual', type=int, dest='wavelet.L_dual', help='dual order')


def _target_flags(parser):
    parser.add_argument('--kind', dest='target.kind', choices=['random_series', 'cusp', 'spline_bump'])
    parser.add_argument('--d', type=int, dest='target.d')
    parser.add_argument('--alpha', type=float, dest='target.alpha')
    parser.add_argument('--p', dest='target.p', help="target norm, 'inf' allowed")
    parser.add_argument('--tau', dest='target.tau')
    parser.add_argument('--q', dest='target.q')
    parser.add_argument('--seed', type=int, dest='target.seed')
    parser.add_argument('--J', type=int, dest='target.J', help='grid level (2^J nodes per axis)')
    parser.add_argument('--j0', type=int, dest='target.j0', help='coarse level')
    parser.add_argument('--theta', type=float, dest='target.theta')


def _compile_flags(parser):
    parser.add_argument('--r', type=int, dest='compile.r_class', help='1 = ReLU, 2 = RePU')
    parser.add_argument('--eps', type=float, dest='compile.eps')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='besovnet',
                                     description='Compile Besov-smooth functions into sparse ReLU/RePU networks')
    parser.add_argument('--config', help='flat section.key=value file; overrides flags')
    parser.add_argument('--log-level', help='DEBUG, INFO, WARNING, ...')
    commands = parser.add_subparsers(dest='command', required=True)

    wavelet = commands.add_parser('wavelet', help='wavelet systems')
    wavelet_actions = wavelet.add_subparsers(dest='action', required=True)
    dump = wavelet_actions.add_parser('dump', help='print a CDF system as JSON')
    _wavelet_flags(dump)
    dump.add_argument('--out', help='write to a file instead of stdout')

    target = commands.add_parser('target', help='test targets')
    target_actions = target.add_subparsers(dest='action', required=True)
    generate = target_actions.add_parser('generate', help='sample a target field')
    _wavelet_flags(generate)
    _target_flags(generate)
    generate.add_argument('--out', required=True, help='field file (binary + .json sidecar)')
    generate.add_argument('--coeffs', help='also write the coefficients as CSV')

    an = commands.add_parser('analyze', help='wavelet coefficients of a field')
    an.add_argument('field')
    _wavelet_flags(an)
    an.add_argument('--j0', type=int, dest='target.j0')
    an.add_argument('--out', required=True, help='coefficient CSV')

    comp = commands.add_parser('compile', help='compile the N-term expansion of a field')
    comp.add_argument('field')
    _wavelet_flags(comp)
    _target_flags(comp)
    _compile_flags(comp)
    comp.add_argument('--N', type=int, required=True)
    comp.add_argument('--out', required=True, help='network JSON')
    comp.add_argument('--report', help='append-free CSV with one report row')

    ev = commands.add_parser('eval', help='evaluate a network')
    ev.add_argument('network')
    ev.add_argument('--x', action='append', default=[], help='comma-separated point; repeatable')
    ev.add_argument('--points', help='CSV of points, one per row, no header')

    rates = commands.add_parser('rates', help='rate sweep over N or gadget sweep')
    _wavelet_flags(rates)
    _target_flags(rates)
    _compile_flags(rates)
    rates.add_argument('--Ns', type=_int_list, dest='sweep.Ns')
    rates.add_argument('--drop', type=int, dest='sweep.drop')
    rates.add_argument('--gadget', dest='sweep.gadget', choices=['mult2', 'square', 'multd-repu'])
    rates.add_argument('--gadget-eps', type=_float_list, dest='sweep.gadget_eps')
    rates.add_argument('--out', dest='sweep.output')
    rates.add_argument('--format', dest='sweep.format', choices=['csv', 'json'])
    rates.add_argument('--schema', action='store_true', help='print the JSON schema of rate reports')

    network = commands.add_parser('network', help='network files')
    network_actions = network.add_subparsers(dest='action', required=True)
    info = network_actions.add_parser('info', help='print a network summary')
    info.add_argument('network')
    return parser


def _overrides(args) -> dict:
    return {key: value for key, value in vars(args).items() if '.' in key}


def besov_params(target: TargetSettings, d: Optional[int] = None) -> BesovParams:
    d = target.d if d is None else d
    if target.tau is None:
        return BesovParams.critical(target.alpha, target.p, d)
    return BesovParams(target.alpha, target.tau, target.q if target.q is not None else target.tau, target.p, d)


def target_spec(settings: Settings) -> TargetSpec:
    t = settings.target
    return TargetSpec(kind=t.kind, d=t.d, params=besov_params(t), seed=t.seed, box=tuple(t.box), J=t.J,
                      j0=t.j0, wavelet=(settings.wavelet.L, settings.wavelet.L_dual), theta=t.theta,
                      center=tuple(t.center) if t.center else None, radius=t.radius, beta=t.beta,
                      bumps=t.bumps)


def _system(settings: Settings):
    return cdf_system(settings.wavelet.L, settings.wavelet.L_dual)


def cmd_wavelet_dump(args, settings: Settings) -> int:
    text = json.dumps(system_to_dict(_system(settings)), indent=2)
    if args.out:
        with open(args.out, 'w') as f:
            f.write(text + '\n')
        print(args.out)
    else:
        print(text)
    return 0


def cmd_target_generate(args, settings: Settings) -> int:
    field, coeffs, seminorms = generate_target(target_spec(settings))
    save_field(field, args.out)
    print(args.out)
    if args.coeffs:
        coeffs_to_csv(coeffs, args.coeffs)
        print(args.coeffs)
    print(json.dumps(seminorms))
    return 0


def cmd_analyze(args, settings: Settings) -> int:
    field = load_field(args.field)
    coeffs = analyze(field, _system(settings), settings.target.j0)
    coeffs_to_csv(coeffs, args.out)
    print(f"{args.out}: {len(coeffs)} detail and {len(coeffs.coarse_entries)} coarse coefficients")
    return 0


def cmd_compile(args, settings: Settings) -> int:
    field = load_field(args.field)
    wavelets = _system(settings)
    params = besov_params(settings.target, field.d)
    coeffs = analyze(field, wavelets, settings.target.j0)
    selected = n_term_select(coeffs, args.N, params.p)
    eps = settings.compile.eps or select_epsilon(len(selected), params)
    net = compile_expansion(selected, params, settings.compile.r_class, wavelets, eps,
                            settings.compile.surrogate_width)
    approx = eval_on_grid(net, field)
    budget_error = lp_error(evaluate_expansion(selected, wavelets, field.resolution), approx, params.p)
    record = compile_report(net, selected, params, eps, lp_error(field, approx, params.p), budget_error,
                            full=coeffs)
    network_ir.save(net, args.out)
    if args.report:
        pd.DataFrame([record.csv_row()]).to_csv(args.report, index=False, float_format='%.17g')
    print(record.model_dump_json())
    return 0


def cmd_eval(args, settings: Settings) -> int:
    net = network_ir.load(args.network)
    rows = [[float(v) for v in raw.split(',')] for raw in args.x]
    if args.points:
        rows += pd.read_csv(args.points, header=None).to_numpy(dtype=float).tolist()
    if not rows:
        logger.error("No points given; use --x or --points")
        return 2
    values = network_ir.eval(net, np.array(rows))
    for row in values:
        print(','.join(repr(float(v)) for v in row))
    return 0


def cmd_rates(args, settings: Settings) -> int:
    if args.schema:
        print(json.dumps(report_schema(), indent=2))
        return 0
    sweep = settings.sweep
    if sweep.gadget:
        report = gadget_sweep(sweep.gadget, sweep.gadget_eps, sweep.gadget_K, sweep.gadget_dims,
                              sweep.gadget_grid, settings.target.seed)
    else:
        report = rate_sweep(target_spec(settings), sweep.Ns, settings.compile.r_class, drop=sweep.drop,
                            surrogate_width=settings.compile.surrogate_width)
    path = emit(report, sweep.output, sweep.format)
    slope = report.log_slope if sweep.gadget else report.fitted_slope
    print(f"{path}: {len(report.rows)} rows, slope {slope if slope is not None else math.nan:.4g}")
    return 0


def cmd_network_info(args, settings: Settings) -> int:
    print(json.dumps(network_ir.summary(network_ir.load(args.network)), indent=2))
    return 0


COMMANDS = {
    ('wavelet', 'dump'): cmd_wavelet_dump,
    ('target', 'generate'): cmd_target_generate,
    ('analyze', None): cmd_analyze,
    ('compile', None): cmd_compile,
    ('eval', None): cmd_eval,
    ('rates', None): cmd_rates,
    ('network', 'info'): cmd_network_info,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_config(_overrides(args), flat_file=args.config)
    except BesovnetError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    configure_logging(settings.logging, args.log_level)
    handler = COMMANDS[(args.command, getattr(args, 'action', None))]
    try:
        return handler(args, settings)
    except BesovnetError as e:
        logger.error("%s", e)
        return 2
    except OSError as e:
        logger.error("%s", e)
        return 1


if __name__ == '__main__':
    sys.exit(main())
