import sys
import argparse
import logging
from typing import Optional

from prettytable import PrettyTable

from fractional_control.config import ExperimentConfig, load_config
from fractional_control.errors import ConfigError
from fractional_control.experiment import (HypothesisReport, build_problem, check_hypotheses,
                                           run_beta_sweep, simulate)
from fractional_control.mittag_leffler import MlParams, ml
from fractional_control.reporter import ReportGenerator, format_number

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_HYPOTHESIS = 3
EXIT_ALL_FAILED = 4


def print_hypotheses(report: HypothesisReport):
    """Print one row per checked hypothesis"""
    print("\nHypothesis Report:")
    table = PrettyTable()
    table.field_names = ["Hypothesis", "Status", "Measured", "Detail"]
    table.align = "l"
    for check in report.checks:
        table.add_row([check.name, "pass" if check.passed else "FAIL", check.measured, check.detail])
    print(table)


def print_sweep(records):
    print("\nBeta Sweep:")
    table = PrettyTable()
    table.field_names = ["beta", "terminal error", "control energy", "iterations", "converged", "Lemma 2"]
    table.align = "r"
    for r in records:
        table.add_row([f"{r.beta:.1e}", f"{r.terminal_error:.6e}", f"{r.control_energy:.6e}",
                       r.iterations, "yes" if r.converged else "no", "ok" if r.lemma2_ok else "violated"])
    print(table)


def _output_path(args, cfg: ExperimentConfig) -> str:
    path = args.out or cfg.output
    if not path:
        raise ConfigError("no output file given, use --out or set 'output'", field="output")
    return path


def _hypotheses_hold(cfg: ExperimentConfig, scenario, force: bool) -> bool:
    report = check_hypotheses(cfg, scenario)
    if report.passed:
        return True
    print_hypotheses(report)
    if force:
        logging.getLogger(__name__).warning("hypotheses failed, continuing because of --force")
        return True
    print("Error: hypothesis check failed, rerun with --force to solve anyway")
    return False


def cmd_ml_eval(args) -> int:
    value = ml(MlParams(alpha=args.alpha, beta=args.beta, series_tol=args.tol), args.x)
    table = PrettyTable()
    table.field_names = ["alpha", "beta", "x", "E_alpha,beta(x)"]
    table.add_row([args.alpha, args.beta, args.x, format_number(value)])
    print(table)
    return EXIT_OK


def cmd_check_hypotheses(args) -> int:
    cfg = load_config(args.config)
    report = check_hypotheses(cfg)
    print_hypotheses(report)
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = _output_path(args, cfg)
    scenario = build_problem(cfg)
    if not _hypotheses_hold(cfg, scenario, args.force):
        return EXIT_HYPOTHESIS
    report = simulate(cfg, args.beta, scenario)
    written = ReportGenerator().generate_trajectory_report(report, out)
    print(f"Trajectory written: {written} ({'converged' if report.converged else 'not converged'}, "
          f"{report.iterations} iterations, residual {report.residual:.3e})")
    return EXIT_OK if report.converged else EXIT_ALL_FAILED


def cmd_sweep_beta(args) -> int:
    cfg = load_config(args.config)
    out = _output_path(args, cfg)
    scenario = build_problem(cfg)
    if not _hypotheses_hold(cfg, scenario, args.force):
        return EXIT_HYPOTHESIS
    records = run_beta_sweep(cfg, args.jobs, scenario)
    written = ReportGenerator().generate_sweep_report(records, out)
    print_sweep(records)
    print(f"\nSweep report generated: {written}")
    if not any(r.converged for r in records):
        print("Error: no solve converged")
        return EXIT_ALL_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Fractional nonlocal control workbench: Mittag-Leffler evaluation, '
                    'hypothesis checks and the approximate controllability beta sweep')
    parser.add_argument('-v', '--verbose', action='store_true', help='Log solver progress')
    commands = parser.add_subparsers(dest='command', required=True)

    ml_eval = commands.add_parser('ml-eval', help='Evaluate E_alpha,beta(x) for x <= 0')
    ml_eval.add_argument('--alpha', type=float, required=True)
    ml_eval.add_argument('--beta', type=float, default=1.0)
    ml_eval.add_argument('--x', type=float, required=True)
    ml_eval.add_argument('--tol', type=float, default=1e-12, help='Absolute series tolerance')
    ml_eval.set_defaults(handler=cmd_ml_eval)

    hypotheses = commands.add_parser('check-hypotheses', help='Report empirical evidence for every hypothesis')
    hypotheses.add_argument('config', help='Experiment config file')
    hypotheses.set_defaults(handler=cmd_check_hypotheses)

    sim = commands.add_parser('simulate', help='Solve for one beta and write the trajectory CSV')
    sim.add_argument('config', help='Experiment config file')
    sim.add_argument('--beta', type=float, required=True)
    sim.add_argument('--out', '-o', help='Output CSV file (default: config output)')
    sim.add_argument('--force', action='store_true', help='Solve even if a hypothesis fails')
    sim.set_defaults(handler=cmd_simulate)

    sweep = commands.add_parser('sweep-beta', help='Solve for every configured beta and write the sweep CSV')
    sweep.add_argument('config', help='Experiment config file')
    sweep.add_argument('--out', '-o', help='Output CSV file (default: config output)')
    sweep.add_argument('--jobs', '-j', type=int, default=1, help='Concurrent solves (default: 1)')
    sweep.add_argument('--force', action='store_true', help='Solve even if a hypothesis fails')
    sweep.set_defaults(handler=cmd_sweep_beta)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.handler(args)
    except ValueError as e:
        # configuration, domain and shape errors
        print(f"Error: {e}")
        return EXIT_VALIDATION
    except Exception as e:
        print(f"Error: {e}")
        return EXIT_UNEXPECTED


if __name__ == '__main__':
    sys.exit(main())
