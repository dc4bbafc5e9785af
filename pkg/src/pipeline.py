"""
command-line entry point: python -m src.pipeline <command> <case> [options]

commands:
    validate   parse and check a case
    solve      base-case dispatch
    scopf      security-constrained dispatch against listed contingencies
    oracle     brute-force reference dispatch (small cases)
    audit-kvl  angle consistency of the solved flows

exit codes: 0 success, 1 internal error, 2 infeasible or not securable,
3 input error, 4 iteration limit reached without convergence.
"""

import argparse
import logging
import os
import sys
import time
from typing import Dict, List, Optional

from src.case.contingency import capacity_map, islanding_contingencies
from src.case.parser import load_case
from src.config import OracleDefaults, RuntimeSettings, SolverConfig, SolverDefaults
from src.oracle.brute_force import brute_force_opf
from src.oracle.kvl_audit import audit_scenarios, kvl_audit
from src.orchestrator import solve_base, solve_scopf
from src.report.report_writer import (
    kvl_document, oracle_document, solution_document, write_json, write_trace,
)
from src.utils.exceptions import (
    CaseException, CaseValidationException, ConfigException, InfeasibleCaseException,
    OracleTooLargeException,
)
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("pipeline")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3
EXIT_MAX_ITER = 4

DEFAULT_REPORT_DIR = "reports"


class CliArgumentParser(argparse.ArgumentParser):
    """argument parser reporting usage errors as ConfigException instead of exiting."""

    def error(self, message: str):
        raise ConfigException(f"{self.prog}: {message}")


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("case", help="case file (native json, or .m matrix layout)")
    parser.add_argument("--rho", type=float, default=SolverDefaults.RHO, help="admm penalty (pu)")
    parser.add_argument("--eps-abs", type=float, default=SolverDefaults.EPS_ABS)
    parser.add_argument("--eps-rel", type=float, default=SolverDefaults.EPS_REL)
    parser.add_argument("--max-iter", type=int, default=SolverDefaults.MAX_ITER)
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel workers (default: OPF_WORKERS or the number of cores)")
    parser.add_argument("--trace", default=None, help="write the residual trace csv here")
    output = parser.add_mutually_exclusive_group()
    output.add_argument("--solution", dest="solution", default=None, help="report file path")
    output.add_argument("--report", dest="solution", default=None, help="alias of --solution")
    parser.add_argument("--contingencies", default=None, help="'all' or a comma separated list of ids")
    parser.add_argument("--screen", choices=SolverDefaults.SCREEN_MODES, default="exact")
    parser.add_argument("--grid-steps", type=int, default=OracleDefaults.GRID_STEPS)
    parser.add_argument("--log-dir", default=None, help="log directory (default: OPF_LOG_DIR or logs/)")
    parser.add_argument("--quiet", action="store_true", help="only warnings and errors on the console")


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(prog="python -m src.pipeline", description="distributed dc scopf solver")
    commands = parser.add_subparsers(dest="command", parser_class=CliArgumentParser)
    commands.required = True
    for name, text in (
        ("validate", "parse and check a case"),
        ("solve", "base-case dispatch"),
        ("scopf", "security-constrained dispatch"),
        ("oracle", "brute-force reference dispatch"),
        ("audit-kvl", "angle consistency of the solved flows"),
    ):
        _add_common_options(commands.add_parser(name, help=text))
    return parser


def _solver_config(args: argparse.Namespace, settings: RuntimeSettings) -> SolverConfig:
    return SolverConfig(
        rho=args.rho,
        eps_abs=args.eps_abs,
        eps_rel=args.eps_rel,
        max_iter=args.max_iter,
        workers=args.workers if args.workers is not None else settings.workers,
    ).validate()


def _contingency_ids(args: argparse.Namespace) -> Optional[List[str]]:
    """None for 'all' (or no option), else the listed ids."""
    if args.contingencies is None or args.contingencies.strip().lower() == "all":
        return None
    ids = [c.strip() for c in args.contingencies.split(",") if c.strip()]
    if not ids:
        raise ConfigException("--contingencies needs 'all' or at least one id")
    return ids


def _report_path(args: argparse.Namespace, suffix: str) -> str:
    if args.solution:
        return args.solution
    stem = os.path.splitext(os.path.basename(args.case))[0]
    return os.path.join(DEFAULT_REPORT_DIR, f"{stem}.{suffix}.json")


# commands

def run_validate(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    try:
        case = load_case(args.case)
    except CaseValidationException as e:
        for violation in e.violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_INPUT
    islanding = islanding_contingencies(case)
    print(f"valid: {case.summary()}")
    for contingency_id in islanding:
        print(f"islanding contingency: {contingency_id}")
    return EXIT_OK


def run_solve(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    case = load_case(args.case)
    config = _solver_config(args, settings)
    start = time.perf_counter()
    solution = solve_base(case, config)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    write_json(solution_document(case, solution, timing_ms={"base": elapsed_ms}), _report_path(args, "solution"))
    if args.trace:
        write_trace(solution, args.trace)

    status = "converged" if solution.converged else "not converged"
    print(f"solve: cost {solution.objective:.4f} $/h, {solution.iterations} iterations, "
          f"{elapsed_ms:.1f} ms ({status})")
    return EXIT_OK if solution.converged else EXIT_MAX_ITER


def run_scopf(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    case = load_case(args.case)
    config = _solver_config(args, settings)
    start = time.perf_counter()
    report = solve_scopf(case, config, _contingency_ids(args), mode=args.screen)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    write_json(solution_document(case, report.final, report=report), _report_path(args, "scopf"))
    if args.trace:
        write_trace(report.final, args.trace)

    status = "secure" if report.secure else ("not converged" if not report.converged else "not secure")
    print(f"scopf: cost {report.total_cost:.4f} $/h (base {report.base_cost:.4f}), "
          f"{len(report.screening)} contingencies screened, {len(report.active_scenarios)} active, "
          f"{report.final.iterations} iterations, {elapsed_ms:.1f} ms ({status})")
    if not report.converged:
        return EXIT_MAX_ITER
    return EXIT_OK if report.secure else EXIT_INFEASIBLE


def run_oracle(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    case = load_case(args.case)
    ids = _contingency_ids(args) or []
    start = time.perf_counter()
    solution = brute_force_opf(case, capacity_map(case, ids), grid_steps=args.grid_steps)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    write_json(oracle_document(case, solution), _report_path(args, "oracle"))
    if not solution.feasible:
        print(f"oracle: no feasible dispatch ({elapsed_ms:.1f} ms)")
        return EXIT_INFEASIBLE
    dispatch = ", ".join(f"{g}={v * case.base_mva:.3f} MW" for g, v in sorted(solution.dispatch.items()))
    print(f"oracle: cost {solution.cost:.4f} $/h, {dispatch}, {elapsed_ms:.1f} ms")
    return EXIT_OK


def run_audit_kvl(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    case = load_case(args.case)
    config = _solver_config(args, settings)
    ids = _contingency_ids(args)

    if args.contingencies is None:
        solution = solve_base(case, config)
        audit = kvl_audit(case, solution.flows_by_scenario()["base"])
        document: Dict = kvl_document(audit)
    else:
        report = solve_scopf(case, config, ids, mode=args.screen)
        solution = report.final
        audits = audit_scenarios(case, solution.flows_by_scenario())
        document = kvl_document(audits["base"])
        document["scenarios"] = {scenario: kvl_document(a) for scenario, a in audits.items()}
        audit = audits["base"]

    write_json(document, _report_path(args, "kvl"))
    print(f"audit-kvl: reference bus {audit.reference_bus}, max mismatch {audit.max_mismatch:.3e} rad")
    return EXIT_OK if solution.converged else EXIT_MAX_ITER


COMMANDS = {
    "validate": run_validate,
    "solve": run_solve,
    "scopf": run_scopf,
    "oracle": run_oracle,
    "audit-kvl": run_audit_kvl,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    run one command and return its exit code.
    """
    try:
        args = build_parser().parse_args(argv)
        settings = RuntimeSettings.from_env()
    except ConfigException as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    LoggerFactory.setup_loggers(
        log_dir=args.log_dir or settings.log_dir,
        console_level=logging.WARNING if args.quiet else logging.INFO,
    )
    logger.info(f"starting '{args.command}' on {args.case}")

    try:
        return COMMANDS[args.command](args, settings)
    except InfeasibleCaseException as e:
        logger.error(str(e))
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CaseException, ConfigException, OracleTooLargeException) as e:
        logger.error(f"input error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        logger.exception(f"internal error: {e}")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
