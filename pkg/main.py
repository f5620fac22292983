import argparse
import sys
from pathlib import Path

import core.runners.setup as base
from core.errors import (
    CatalogKeyError, ConfigError, DomainError, LabError, NonFiniteEvaluationError, ReportIOError, UnknownCheckError
)
from core.labs.dvoretzky import DvoretzkyLab
from core.labs.inequalities.suite import CheckContext, InequalitySuite
from core.labs.mc_engine import MonteCarloEngine, estimate_stats
from core.labs.rearrangement import RearrangementLab
from core.labs.workflow import file_stem, run_experiment
from core.models.experiment import ErrorReport, ExperimentConfig, FunctionSummary, RunReport
from core.models.functions import TiltParams
from core.settings import get_settings
from core.tools import reporting
from core.tools.catalog import list_catalog, parse_key

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_UNKNOWN_CHECK = 3
EXIT_CATALOG_KEY = 4
EXIT_IO = 5
EXIT_NON_FINITE = 6


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'Expected comma-separated numbers, got "{text}"') from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--n', type=int, default=None, help='Override the dimension of the catalog key')
    common.add_argument('--samples', type=int, default=200_000, help='Monte Carlo sample count N')
    common.add_argument('--seed', type=int, default=1, help='Master seed')
    common.add_argument('--out', type=Path, default=None, help='Output directory')
    common.add_argument('--threads', type=int, default=None, help='Worker threads')

    parser = argparse.ArgumentParser(prog='conclab', description='Monte Carlo checks of Gaussian concentration')
    commands = parser.add_subparsers(dest='command', required=True)

    for name, helptext in (('estimate', 'Summary statistics and concentration constants'),
                           ('tails', 'Tail profile with Wilson intervals and plot data'),
                           ('rearrange', 'Gaussian rearrangement and its properties')):
        command = commands.add_parser(name, parents=[common], help=helptext)
        command.add_argument('key')

    check = commands.add_parser('check', parents=[common], help='Run inequality checks')
    check.add_argument('key')
    check.add_argument('--suite', default='all', help='Comma-separated check names, or "all"')

    dvoretzky = commands.add_parser('dvoretzky', parents=[common], help='Random almost-spherical sections')
    dvoretzky.add_argument('key')
    dvoretzky.add_argument('--eps', type=_float_list, default=[0.08, 0.12, 0.2, 0.3], help='Comma-separated ε grid')
    dvoretzky.add_argument('--trials', type=int, default=60)
    dvoretzky.add_argument('--no-polish', action='store_true', help='Skip the local refinement of extremes')

    commands.add_parser('catalog', help='List the registered functions')

    run = commands.add_parser('run', help='Run an experiment from a TOML config')
    run.add_argument('config', type=Path)
    run.add_argument('--threads', type=int, default=None)

    return parser


def _output_dir(args: argparse.Namespace) -> Path:
    return args.out if args.out is not None else get_settings().output_dir


def _estimate(args: argparse.Namespace) -> int:
    spec = parse_key(args.key, args.n)
    engine = MonteCarloEngine(threads=args.threads)
    ctx = CheckContext(spec, engine, args.samples, args.seed)
    try:
        constants = ctx.constants
    except DomainError as e:
        base.log.warning(f'⚠️ {e}')
        constants = None

    summary = FunctionSummary(function_key=spec.key, stats=estimate_stats(ctx.emp), constants=constants)
    path = reporting.write_json(summary, _output_dir(args) / f'{file_stem(spec.key)}_estimate.json')
    print(summary.model_dump_json(indent=2))
    base.log.info(f'💾 Saved {path}')
    return EXIT_PASSED


def _tails(args: argparse.Namespace) -> int:
    spec = parse_key(args.key, args.n)
    ctx = CheckContext(spec, MonteCarloEngine(threads=args.threads), args.samples, args.seed)
    profile = ctx.lipschitz_profile if spec.lipschitz else ctx.sd_profile

    out = _output_dir(args)
    reporting.write_json(profile, out / f'{file_stem(spec.key)}_tails.json')
    path = reporting.emit_plot_data(profile, out / f'{file_stem(spec.key)}_tails.csv')
    base.log.info(f'💾 Saved {path}')
    return EXIT_PASSED


def _rearrange(args: argparse.Namespace) -> int:
    spec = parse_key(args.key, args.n)
    engine = MonteCarloEngine(threads=args.threads)
    emp = engine.sample_values(spec, args.samples, args.seed)

    lab = RearrangementLab(threads=args.threads)
    curve = lab.rearrange(emp)
    grad_sq = engine.estimate_grad_sq(spec, args.samples, args.seed)
    report = lab.check_properties(curve, spec, emp, grad_sq)

    out = _output_dir(args)
    reporting.emit_plot_data(curve, out / f'{file_stem(spec.key)}_rearrangement_curve.csv')
    reporting.write_json(report, out / f'{file_stem(spec.key)}_rearrangement.json')
    print(report.model_dump_json(indent=2))
    return EXIT_PASSED if report.passed else EXIT_FAILED


def _check(args: argparse.Namespace) -> int:
    config = ExperimentConfig.validated({
        'keys': [args.key],
        'n': args.n,
        'samples': args.samples,
        'seed': args.seed,
        'checks': [name.strip() for name in args.suite.split(',') if name.strip()],
        'output_dir': _output_dir(args)
    })
    return _finish(run_experiment(config, threads=args.threads))


def _dvoretzky(args: argparse.Namespace) -> int:
    spec = parse_key(args.key, args.n)
    lab = DvoretzkyLab(trials=args.trials, polish=not args.no_polish, threads=args.threads)
    match spec.params:
        case TiltParams(base=inner, t=t):
            report = lab.tilted_instability_experiment(inner, args.seed, t, args.eps, args.samples)
        case _:
            report = lab.instability_experiment(spec, args.seed, args.eps, args.samples)

    out = _output_dir(args)
    reporting.write_json(report, out / f'{file_stem(spec.key)}_dvoretzky.json')
    reporting.write_success_table(report.estimates, out / f'{file_stem(spec.key)}_dvoretzky_success.csv')
    print(report.model_dump_json(indent=2))
    return EXIT_PASSED if report.passed else EXIT_FAILED


def _finish(report: RunReport) -> int:
    for verdict in report.verdicts:
        print(verdict.summary())
    if not report.passed:
        base.log.warning(f'❌ {len(report.failed())} verdict(s) failed')
        return EXIT_FAILED
    base.log.info('✅ All requested verdicts passed')
    return EXIT_PASSED


def _fail(error: LabError, code: int, function_key: str | None = None) -> int:
    """Prints the error as JSON on stdout so that every exit leaves a machine-readable trace."""
    report = ErrorReport(error=type(error).__name__, message=str(error), exit_code=code, function_key=function_key)
    print(report.model_dump_json(indent=2))
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        match args.command:
            case 'estimate':
                return _estimate(args)
            case 'tails':
                return _tails(args)
            case 'rearrange':
                return _rearrange(args)
            case 'check':
                return _check(args)
            case 'dvoretzky':
                return _dvoretzky(args)
            case 'catalog':
                print(list_catalog())
                return EXIT_PASSED
            case 'run':
                return _finish(run_experiment(ExperimentConfig.from_toml(args.config), threads=args.threads))
    except (ConfigError, DomainError) as e:
        base.log.error(f'Invalid configuration: {e}')
        return _fail(e, EXIT_CONFIG)
    except UnknownCheckError as e:
        base.log.error(str(e))
        return _fail(e, EXIT_UNKNOWN_CHECK)
    except CatalogKeyError as e:
        base.log.error(str(e))
        return _fail(e, EXIT_CATALOG_KEY)
    except ReportIOError as e:
        base.log.error(f'Output failed: {e}')
        return _fail(e, EXIT_IO)
    except NonFiniteEvaluationError as e:
        base.log.error(f'Numeric failure: {e}')
        return _fail(e, EXIT_NON_FINITE, function_key=e.function_key)
    raise AssertionError(f'Unhandled command {args.command}')


if __name__ == '__main__':
    sys.exit(main())
