"""
Command-line surface: one subcommand per library operation, CSV on stdout.

Exit codes: 0 success, 1 usage error, 2 validation or parse error,
3 property-verification failure (``verify`` only).
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

from lib import config, database
from lib.bound_zoo import architecture_comparison
from lib.bundle import ARCHITECTURES, architecture_spec, gen_weights, load_bundle, parse_scale_mode, save_bundle
from lib.complexity import (
    complexity_inputs,
    complexity_overflows,
    frobenius_complexity,
    generalization_bound,
    generalization_bound_log10,
    log10_sensitive_complexity,
    margin_summary,
    rademacher_bound,
    rademacher_bound_log10,
    risk_sample,
    sensitive_complexity,
)
from lib.errors import BundleIOError, ConvBoundError, DomainError, ParseError
from lib.lowering import POINTWISE_LAYOUTS, gamma_pointwise
from lib.network import conv_weight, effective_matrix, forward, network_norms, outputs_per_filter
from lib.types import BoundParams, LayerKind, NormMode
from lib.verify import run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_VERIFY_FAILED = 3


class UsageError(Exception):
    """Bad command line"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ===== OUTPUT =====

def _cell(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    if value is None:
        return ''
    return str(value)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], out: TextIO):
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def _emit(header: Sequence[str], rows: Iterable[Sequence], out_path: Optional[str], stdout: TextIO):
    if out_path is None:
        write_csv(header, rows, stdout)
        return
    try:
        with open(out_path, 'w', encoding='utf-8', newline='') as f:
            write_csv(header, rows, f)
    except OSError as e:
        raise BundleIOError(f"cannot write {out_path}: {e}") from e


# ===== INPUT =====

def _read_matrix(path: str) -> np.ndarray:
    """Rows of comma-separated numbers"""
    try:
        with open(path, encoding='utf-8', newline='') as f:
            lines = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    except OSError as e:
        raise BundleIOError(f"cannot read {path}: {e}") from e
    if not lines:
        raise ParseError("no data rows", path)
    rows = []
    for i, row in enumerate(lines, start=1):
        try:
            rows.append([float(cell) for cell in row])
        except ValueError as e:
            raise ParseError(str(e), f"{path}: row {i}") from e
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"expected {len(rows[0])} values, got {len(rows[-1])}", f"{path}: row {i}")
    return np.array(rows)


def _read_labels(path: str) -> List[int]:
    try:
        with open(path, encoding='utf-8') as f:
            lines = [line.strip() for line in f if line.strip()]
    except OSError as e:
        raise BundleIOError(f"cannot read {path}: {e}") from e
    labels = []
    for i, line in enumerate(lines, start=1):
        try:
            labels.append(int(line))
        except ValueError as e:
            raise ParseError(f"expected an integer label, got '{line}'", f"{path}: line {i}") from e
    return labels


def _read_risk(path: str) -> float:
    try:
        text = Path(path).read_text(encoding='utf-8').strip()
    except OSError as e:
        raise BundleIOError(f"cannot read {path}: {e}") from e
    try:
        return float(text.split()[0])
    except (ValueError, IndexError) as e:
        raise ParseError("expected a single number", path) from e


# ===== COMMANDS =====

def _cmd_lower(args, stdout):
    bundle = load_bundle(args.bundle)
    if not 1 <= args.layer <= bundle.spec.L:
        raise DomainError(f"--layer must lie in [1, {bundle.spec.L}], got {args.layer}")
    layer = bundle.spec.layers[args.layer - 1]
    W = bundle.weights[args.layer - 1]
    if layer.kind is LayerKind.POINTWISE_CONV:
        C = gamma_pointwise(conv_weight(layer, W), outputs_per_filter(layer), args.layout)
    else:
        C = effective_matrix(layer, W)
    header = [f"c{j}" for j in range(1, C.shape[1] + 1)]
    _emit(header, C.tolist(), args.out, stdout)
    return EXIT_OK


NORM_HEADER = ['layer', 'kind', 'mode', 'a', 's', 'n21', 'gamma_fnorm',
               'd_in', 'd_out', 'channels', 'filter_dim', 'outputs']


def _norm_rows(norms):
    for i, n in enumerate(norms, start=1):
        yield [i, n.kind.value, n.mode.value, n.a, n.s, n.n21, n.gamma_fnorm,
               n.d_in, n.d_out, n.channels, n.filter_dim, n.outputs]


def _cmd_norms(args, stdout):
    bundle = load_bundle(args.bundle)
    norms = network_norms(bundle.spec, bundle.weights, NormMode(args.mode), args.tight_depthwise)
    _emit(NORM_HEADER, _norm_rows(norms), args.out, stdout)
    return EXIT_OK


def _cmd_verify(args, stdout):
    bundle = load_bundle(args.bundle)
    seed = config.default_seed() if args.seed is None else args.seed
    results = run_suite(args.trials, seed, bundle)
    rows = [[r.name, r.trials, r.violations, r.max_error, r.tolerance, r.passed] for r in results]
    _emit(['property', 'trials', 'violations', 'max_error', 'tolerance', 'passed'], rows, args.out, stdout)
    if args.record:
        database.save_verify_run(results, str(args.bundle), args.trials, seed)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def _complexity(args):
    bundle = load_bundle(args.bundle)
    norms = network_norms(bundle.spec, bundle.weights, NormMode(args.mode))
    return complexity_inputs(norms)


def _cmd_complexity(args, stdout):
    inputs = _complexity(args)
    rows = [
        ['sensitive_complexity', sensitive_complexity(inputs)],
        ['log10_sensitive_complexity', log10_sensitive_complexity(inputs)],
        ['frobenius_complexity', frobenius_complexity(inputs)],
        ['complexity_overflow', complexity_overflows(inputs)],
    ]
    if args.eta is not None:
        if not args.eta > 0:
            raise DomainError(f"--eta must be > 0, got {args.eta}")
        rows.append(['complexity_over_eta', rows[0][1] / args.eta])
    _emit(['quantity', 'value'], rows, args.out, stdout)
    return EXIT_OK


def _cmd_bound(args, stdout):
    inputs = _complexity(args)
    params = BoundParams(args.eta, args.delta, args.n, args.x_fnorm)
    risk = _read_risk(args.risk_file) if args.risk_file else 0.0
    R = sensitive_complexity(inputs)
    log_R = log10_sensitive_complexity(inputs)
    rows = [
        ['empirical_risk', risk],
        ['sensitive_complexity', R],
        ['log10_sensitive_complexity', log_R],
        ['rademacher_bound', rademacher_bound(params, R)],
        ['log10_rademacher_bound', rademacher_bound_log10(params, log_R)],
        ['generalization_bound', generalization_bound(risk, params, R)],
        ['log10_generalization_bound', generalization_bound_log10(risk, params, log_R)],
    ]
    _emit(['quantity', 'value'], rows, args.out, stdout)
    return EXIT_OK


def _cmd_compare(args, stdout):
    bundle = load_bundle(args.bundle)
    report = architecture_comparison(
        bundle.spec, bundle.weights, NormMode(args.mode),
        ignore_n=args.ignore_n, n=args.n, tight_depthwise=args.tight_depthwise,
    )
    rows = [[b.family.value, b.value, b.log10_value, b.overflow] for b in report.bounds]
    _emit(['family', 'value', 'log10_value', 'overflow'], rows, args.out, stdout)
    if args.record:
        report_id = database.save_report(report, str(args.bundle))
        logger.info("Recorded report %s", report_id)
    return EXIT_OK


def _cmd_margins(args, stdout):
    bundle = load_bundle(args.bundle)
    data = _read_matrix(args.data)
    labels = _read_labels(args.labels)
    if data.shape[1] != bundle.spec.input_dim:
        raise ParseError(f"rows have {data.shape[1]} values, the network takes {bundle.spec.input_dim}", args.data)
    logits = forward(bundle.spec, bundle.weights, data.T)
    summary = margin_summary(risk_sample(logits, labels), args.eta)
    rows = [
        ['n', summary.n],
        ['min', summary.minimum],
        ['q1', summary.q1],
        ['median', summary.median],
        ['q3', summary.q3],
        ['max', summary.maximum],
        ['mean', summary.mean],
        ['empirical_ramp_risk', summary.ramp_risk],
        ['empirical_zero_one_risk', summary.zero_one_risk],
    ]
    _emit(['statistic', 'value'], rows, args.out, stdout)
    return EXIT_OK


def _cmd_gen(args, stdout):
    seed = config.default_seed() if args.seed is None else args.seed
    bundle = gen_weights(architecture_spec(args.arch), seed, parse_scale_mode(args.scale))
    path = save_bundle(bundle, args.out, inline=True if args.inline else None)
    print(path, file=stdout)
    return EXIT_OK


def _cmd_history(args, stdout):
    rows = []
    for report in database.list_reports(args.limit):
        ranking = ' < '.join(b['family'] for b in report['bounds'])
        rows.append([report['id'], report['bundle'], report['mode'], bool(report['ignore_n']),
                     report['n'], ranking, report['created_at']])
    _emit(['id', 'bundle', 'mode', 'ignore_n', 'n', 'ranking', 'created_at'], rows, None, stdout)
    return EXIT_OK


# ===== PARSER =====

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='convbound', description='Lower convolutions, bound their norms, compare generalization bounds')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for info, -vv for debug logging')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    def with_bundle(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument('bundle', help='bundle manifest (JSON)')
        p.add_argument('--out', help='write CSV here instead of stdout')
        return p

    def with_mode(p: argparse.ArgumentParser, default: str):
        p.add_argument('--mode', choices=[m.value for m in NormMode], default=default)

    p = with_bundle('lower', 'effective matrix of one layer as CSV')
    p.add_argument('--layer', type=_positive_int, required=True, help='1-based layer index')
    p.add_argument('--layout', choices=POINTWISE_LAYOUTS, default='channel_blocked',
                   help='row layout for pointwise layers')
    p.set_defaults(handler=_cmd_lower)

    p = with_bundle('norms', 'per-layer norm table')
    with_mode(p, NormMode.EXACT.value)
    p.add_argument('--tight-depthwise', action='store_true')
    p.set_defaults(handler=_cmd_norms)

    p = with_bundle('verify', 'run the randomized oracle suite')
    p.add_argument('--trials', type=_positive_int, default=200)
    p.add_argument('--seed', type=int)
    p.add_argument('--record', action='store_true', help='store the run in the report database')
    p.set_defaults(handler=_cmd_verify)

    p = with_bundle('complexity', 'sensitive complexity of the network')
    p.add_argument('--eta', type=float)
    with_mode(p, NormMode.EXACT.value)
    p.set_defaults(handler=_cmd_complexity)

    p = with_bundle('bound', 'margin-based generalization bound')
    p.add_argument('--eta', type=float, required=True)
    p.add_argument('--delta', type=float, required=True)
    p.add_argument('--n', type=_positive_int, required=True)
    p.add_argument('--x-fnorm', type=float, required=True)
    p.add_argument('--risk-file', help='file holding the empirical ramp risk')
    with_mode(p, NormMode.EXACT.value)
    p.set_defaults(handler=_cmd_bound)

    p = with_bundle('compare', 'six-family bound comparison')
    with_mode(p, NormMode.BOUNDED.value)
    p.add_argument('--ignore-n', action='store_true')
    p.add_argument('--n', type=_positive_int, default=1)
    p.add_argument('--tight-depthwise', action='store_true')
    p.add_argument('--record', action='store_true', help='store the report in the report database')
    p.set_defaults(handler=_cmd_compare)

    p = with_bundle('margins', 'margin distribution and empirical risks')
    p.add_argument('--data', required=True, help='CSV, one example per row')
    p.add_argument('--labels', required=True, help='one 1-based class per line')
    p.add_argument('--eta', type=float, required=True)
    p.set_defaults(handler=_cmd_margins)

    p = sub.add_parser('gen', help='write a bundle with seeded random weights')
    p.add_argument('--arch', choices=sorted(ARCHITECTURES), required=True)
    p.add_argument('--seed', type=int)
    p.add_argument('--scale', default='unit_frobenius', help='unit_frobenius, gaussian or gaussian:<sigma>')
    p.add_argument('--out', required=True)
    p.add_argument('--inline', action='store_true', help='inline payloads regardless of size')
    p.set_defaults(handler=_cmd_gen)

    p = sub.add_parser('history', help='stored comparison reports')
    p.add_argument('--limit', type=_positive_int, default=20)
    p.set_defaults(handler=_cmd_history)

    return parser


def _configure_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')


def run_cli(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None,
            stderr: Optional[TextIO] = None) -> int:
    """Parse ``argv``, run the subcommand and return its exit code"""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version exit through argparse
        return e.code if isinstance(e.code, int) else EXIT_OK

    _configure_logging(args.verbose)
    try:
        return args.handler(args, stdout)
    except ConvBoundError as e:
        print(f"error: {e}", file=stderr)
        return EXIT_INVALID
