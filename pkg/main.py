"""
Command Line Interface for the plate/fluid splitting simulator
"""
import argparse
import logging
import sys
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from src.config import RUN_DATABASE_URL
from src.exceptions import ConfigValidationError, SimulationError, StepError
from src.sim_config import load_config
from src.utils import setup_logging, cleanup_old_logs

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TOUCHED_BOTTOM = 2
EXIT_VERIFY_FAILED = 3


def build_parser():
    parser = argparse.ArgumentParser(description='Lie splitting for a 3D fluid coupled to a nonlinear clamped plate')
    parser.add_argument('command', choices=['run', 'verify', 'converge', 'eigs'], help='What to do with the config')
    parser.add_argument('config', help='Path to the JSON configuration')
    parser.add_argument('--levels', type=int, default=3, help='Refinement levels for converge (default: 3)')
    parser.add_argument('--workers', type=int, default=1, help='Levels run concurrently by converge (default: 1)')
    parser.add_argument('--out', help='Output directory (overrides output.dir and OUTPUT_DIR)')
    parser.add_argument('--debug-dump-system', action='store_true',
                        help='Write every step matrix and right-hand side in Matrix-Market format')
    parser.add_argument('--cleanup-logs', action='store_true', help='Clean up old log files before starting')
    parser.add_argument('--log-days', type=int, default=30, help='Days to keep log files (default: 30)')
    return parser


def command_run(config, out_dir: Path) -> int:
    from src.ledger_recorder import LedgerRecorder
    from src.splitting_driver import run

    manager = None
    database_url = config.output.database_url or RUN_DATABASE_URL
    if database_url:
        from src.database import DatabaseManager, previous_runs
        manager = DatabaseManager(database_url)
        manager.create_tables()
        earlier = previous_runs(manager, config.config_hash())
        if earlier:
            last = earlier[0]
            print(f"Registry: latest earlier run of this config is id={last['id']}, "
                  f"outcome={last['outcome']}, N={last['N']}")

    recorder = LedgerRecorder(str(out_dir), config.name)
    dump_dir = recorder.run_dir / 'systems' if config.debug.dump_system else None
    try:
        result = run(config, dump_dir=dump_dir)
    except StepError as e:
        recorder.save_error_summary(str(e), e.step, config.run.seed, e.ledger)
        print(f"Run aborted at step {e.step}: {e}")
        return EXIT_ERROR

    written = recorder.save_run(result, config.output.formats)
    if manager is not None:
        from src.database import record_run
        record_run(manager, result)

    summary = result.summary()
    print(f"Outcome: {result.outcome}")
    print(f"N = {result.plan.N} (N_min = {result.plan.N_min}), dt = {result.plan.dt:.6g}")
    print(f"min FSP slack: {summary['max_slacks']['min_fsp_slack']:.3e}")
    print(f"max SSP residual: {summary['max_slacks']['max_ssp_residual']:.3e}")
    for kind, path in written.items():
        print(f"  {kind}: {path}")
    if result.outcome == 'touched_bottom':
        print(f"Plate touched the bottom at step {result.halt_step}")
        return EXIT_TOUCHED_BOTTOM
    return EXIT_OK


def command_verify(config, out_dir: Path) -> int:
    import json
    from src.ledger_recorder import json_safe
    from src.verification import verify

    report = verify(config)
    print("-" * 50)
    for suite in report.suites:
        print(f"{'PASS' if suite.passed else 'FAIL':4}  {suite.name:22} {suite.seconds:8.2f}s")
    print("-" * 50)
    print(f"Verification {'PASSED' if report.passed else 'FAILED'}")

    run_dir = out_dir / config.name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / 'verification.json').write_text(json.dumps(json_safe(report.to_dict()), indent=2), encoding='utf-8')
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def command_converge(config, out_dir: Path, levels: int, workers: int) -> int:
    from src.convergence import converge

    report = converge(config, levels=levels, out_dir=out_dir / config.name, workers=workers)
    print(report.table.to_string(index=False))
    print(f"N_min = {report.N_min}; monotone decrease: {'yes' if report.passed else 'NO'}")
    if report.csv_path:
        print(f"Table written to {report.csv_path}")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def command_eigs(config) -> int:
    from src.splitting_driver import build_plan, build_problem, initial_data, n_min_breakdown

    problem = build_problem(config)
    plan, _ = build_plan(config, problem, initial_data(config, problem), sample_assumptions=False)
    xi = problem.basis.xi[:config.run.k]
    c = plan.constants
    breakdown = n_min_breakdown(plan.T, plan.alpha, plan.a, c.C_B, c.C_R, c.F0_norm, xi, c.C_Gamma)

    print(f"{'i':>4}  {'xi_i':>22}")
    for i, value in enumerate(xi, start=1):
        print(f"{i:>4}  {value:22.15e}")
    print("-" * 50)
    print(f"T = {plan.T}, alpha = {plan.alpha}, a = {plan.a}")
    print(f"C_B = {c.C_B:.10g} (C_Gamma = {c.C_Gamma}), C_R = {c.C_R:.10g} (empirical), ||F(0)|| = {c.F0_norm:.10g}")
    print(f"xi_k = {breakdown['xi_k']:.15e}")
    print(f"sum xi_i^(a/2) = {breakdown['sum_xi_a']:.15e}")
    print(f"stiffness term 2 xi_k C_B = {breakdown['stiffness_term']:.10g}")
    print(f"Lipschitz term = {breakdown['lipschitz_term']:.10g}")
    print(f"base^(1/(2-alpha)) with exponent {breakdown['exponent']:.6g}; T * base^exp = {breakdown['raw']:.10g}")
    print(f"N_min = {breakdown['N_min']}")
    print(f"sensitivity (C_Gamma = 2 / C_Gamma = 1) = {c.sensitivity:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigValidationError as e:
        print("Configuration errors:")
        for error in e.errors:
            print(f"  - {error}")
        return EXIT_ERROR

    if args.debug_dump_system:
        config = replace(config, debug=replace(config.debug, dump_system=True))
    out_dir = Path(args.out or config.output.dir)

    if args.cleanup_logs:
        cleanup_old_logs(args.log_days)
    log_filename = setup_logging(config.name)
    logging.info(f"{args.command} {config.name} (config {config.config_hash()[:12]}) logging to {log_filename}")

    started = datetime.now()
    try:
        if args.command == 'run':
            code = command_run(config, out_dir)
        elif args.command == 'verify':
            code = command_verify(config, out_dir)
        elif args.command == 'converge':
            code = command_converge(config, out_dir, args.levels, args.workers)
        else:
            code = command_eigs(config)
    except KeyboardInterrupt:
        print("\nStopped by user")
        return EXIT_ERROR
    except SimulationError as e:
        print(f"Error: {e}")
        logging.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
    logging.info(f"{args.command} finished with exit code {code} in {(datetime.now() - started).total_seconds():.1f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
