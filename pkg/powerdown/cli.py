import argparse
import logging
import os
import sys
from typing import List, Optional, Tuple

from powerdown import __VERSION__
from powerdown.adversary import AdversaryParams, adversary_play, bound_formulas, gen_tight_s
from powerdown.analysis import competitive_report
from powerdown.config import ConfigError, load_config
from powerdown.core import (
    ArgumentError,
    EnergyModel,
    Instance,
    InstanceError,
    energy_of_trace,
    format_rational,
    parse_rational,
)
from powerdown.dto import InstanceFile, ReportFile, TraceFile, TranscriptFile, ValidationError
from powerdown.engine import DeadlineMiss, ProtocolViolation, simulate
from powerdown.logging_config import setup_logging
from powerdown.oracle import OracleError
from powerdown.policies import POLICIES, make_policy
from powerdown.runner import compare, save_rows_csv, verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class LabArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_instance(path: str, psi_sigma: Optional[str] = None) -> Instance:
    """
    Reads an instance file; ``psi_sigma`` replaces the file's idle power.

    Raises:
        OSError: If the file cannot be read.
        ValidationError: If the JSON does not match the instance format.
        InstanceError: If the jobs are malformed.
    """
    with open(path, "r", encoding="utf-8") as f:
        record = InstanceFile.from_json(f.read())
    instance = record.to_instance()
    if psi_sigma is not None:
        instance = Instance(EnergyModel(parse_rational(psi_sigma)), instance.jobs)
    return instance


def _write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
        f.write("\n")


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _a_params(args, config) -> dict:
    return {
        "u": args.u if args.u is not None else config.U,
        "idle_mode": args.idle_mode or config.IDLE_MODE,
        "idle_factor": args.idle_factor,
    }


def _policy_params(args, config) -> dict:
    params = _a_params(args, config)
    params["lam"] = args.lam if args.lam is not None else config.LAMBDA
    return params


def cmd_simulate(args, config) -> int:
    """Runs one policy on one instance and writes the trace."""
    instance = load_instance(args.instance, args.psi_sigma)
    policy = make_policy(args.policy, **_policy_params(args, config))
    try:
        trace = simulate(instance, policy)
    except DeadlineMiss as e:
        logger.error(f"❌ Deadline miss: {e}")
        return EXIT_FAILURE
    except ProtocolViolation as e:
        logger.error(f"❌ Policy error: {e}")
        return EXIT_FAILURE
    energy = energy_of_trace(trace, instance.model)
    out = args.out or os.path.join(config.OUTPUT_DIR, f"{_stem(args.instance)}.{args.policy}.trace.json")
    _write(out, TraceFile.from_trace(trace, energy, policy.name).to_json(indent=2))
    print(f"energy {format_rational(energy)} ({float(energy):.6f})")
    logger.info(f"✅ Trace written to {out}")
    if args.report or args.report_csv:
        report = competitive_report(instance, make_policy(args.policy, **_policy_params(args, config)))
        record = ReportFile.from_report(report, policy.name, _stem(args.instance))
        if args.report:
            _write(args.report, record.to_json(indent=2))
            logger.info(f"✅ Report written to {args.report}")
        if args.report_csv:
            row = record.csv_row()
            save_rows_csv(args.report_csv, [row], list(row.keys()))
            logger.info(f"✅ Report row written to {args.report_csv}")
    return EXIT_OK


def _compare_inputs(args) -> List[Tuple[str, Instance]]:
    inputs = [(_stem(path), load_instance(path, args.psi_sigma)) for path in args.instances]
    for r in args.tight or ():
        if r < 2 or r % 2:
            raise ArgumentError(f"--tight needs an even number of pairs, got {r}")
        inputs.append((f"tight-r{r}", gen_tight_s(rounds=r // 2)))
    if not inputs:
        raise ArgumentError("compare needs at least one instance file or --tight R")
    return inputs


def cmd_compare(args, config) -> int:
    """Runs several policies over several instances and writes a CSV."""
    inputs = _compare_inputs(args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICIES:
            raise ArgumentError(f"Unknown policy {p!r}; choose from {', '.join(POLICIES)}")
    params = {p: _policy_params(args, config) for p in policies}
    workers = args.workers or config.WORKERS
    rows, max_ratio = compare(inputs, policies, policy_params=params, workers=workers)
    out = args.csv or os.path.join(config.OUTPUT_DIR, "compare.csv")
    save_rows_csv(out, rows, ["instance", "policy", "alg_energy", "opt_energy", "ratio", "max_ratio", "status"])
    for row in rows:
        ratio = f"{row['ratio']:.6f}" if row["ratio"] != "" else "-"
        print(f"{row['instance']:<24} {row['policy']:<6} ratio {ratio} {row['status']}")
    for policy, ratio in sorted(max_ratio.items()):
        logger.info(f"📈 max ratio {policy}: {ratio:.6f}")
    logger.info(f"✅ Rows written to {out}")
    if any(row["status"].startswith("deadline miss") for row in rows):
        return EXIT_FAILURE
    return EXIT_OK


def cmd_adversary(args, config) -> int:
    """Plays the adaptive lower-bound game against one policy."""
    params = AdversaryParams(
        beta=args.beta or config.BETA,
        alpha=args.alpha or config.ALPHA,
        eps=args.eps or config.EPS,
    )
    if args.show_bounds:
        bounds = bound_formulas(params.beta, params.alpha)
        print(f"C_A={float(bounds.C_A):.6f} C_B={float(bounds.C_B):.6f} lower bound={float(bounds.lower_bound):.6f}")
        print(
            f"f1={float(bounds.f1):.6f} f2={float(bounds.f2):.6f} f3={float(bounds.f3):.6f} "
            f"g1={float(bounds.g1):.6f} g2={float(bounds.g2):.6f} g3={float(bounds.g3):.6f}"
        )
    model = EnergyModel(parse_rational(args.psi_sigma or config.PSI_SIGMA))
    policy = make_policy(args.policy, **_policy_params(args, config))
    transcript = adversary_play(policy, params, model)
    out = args.out or os.path.join(config.OUTPUT_DIR, f"adversary.{args.policy}.json")
    _write(out, TranscriptFile.from_transcript(transcript, policy.name).to_json(indent=2))
    if transcript.deadline_miss:
        logger.error(f"❌ {policy.name} missed a deadline: {transcript.deadline_miss}")
        return EXIT_FAILURE
    ratio = transcript.ratio
    print(f"case {transcript.case} ratio {float(ratio):.6f}" if ratio is not None else f"case {transcript.case}")
    logger.info(f"✅ Transcript written to {out}")
    return EXIT_OK


def cmd_verify(args, config) -> int:
    """Checks the property suite over seeded random instances."""
    n = args.n if args.n is not None else config.VERIFY_COUNT
    seed = args.seed if args.seed is not None else config.SEED
    if n == 0:
        logger.warning("⚠️  Nothing to verify (n = 0)")
        return EXIT_OK
    if n < 0:
        raise ArgumentError(f"n must not be negative, got {n}")
    a_params = {k: v for k, v in _a_params(args, config).items() if v is not None}
    summary = verify(
        seed,
        n,
        max_jobs=args.jobs or config.VERIFY_JOBS,
        horizon=args.horizon or config.VERIFY_HORIZON,
        grid_step=config.GRID_STEP,
        workers=args.workers or config.WORKERS,
        a_params=a_params,
        max_grid_steps=config.MAX_GRID_STEPS,
    )
    max_ratio = f"{float(summary.max_ratio):.6f}" if summary.max_ratio is not None else "-"
    print(f"checked {summary.checked} failures {len(summary.failures)} max ratio {max_ratio}")
    if summary.ok:
        logger.info(f"✅ All properties hold on {summary.checked} instances (seeds {seed}..{seed + n - 1})")
        return EXIT_OK
    out = args.out or os.path.join(config.OUTPUT_DIR, "reproducers")
    for failure in summary.failures:
        path = os.path.join(out, f"{failure.label}.json")
        name = f"{failure.label}: " + "; ".join(failure.failures)
        _write(path, InstanceFile.from_instance(failure.instance, name).to_json(indent=2))
    logger.error(f"❌ {len(summary.failures)} instances fail; reproducers written to {out}")
    return EXIT_FAILURE


def _add_policy_flags(cmd):
    cmd.add_argument("--u", default=None, help="Margin of Algorithm A (rational, default from config)")
    cmd.add_argument("--idle-mode", choices=["cumulative", "per_episode", "per_phase"], default=None,
                     help="How Algorithm A spends its idle budget")
    cmd.add_argument("--idle-factor", default=None,
                     help="Idle budget of Algorithm A in units of 1/psi_sigma (default 2)")
    cmd.add_argument("--lambda", dest="lam", default=None, help="Anchor factor of Algorithm S")


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog="powerdown", description="Two-machine power-down scheduling lab.")
    parser.add_argument("-v", "--version", action="version", version=f"%(prog)s {__VERSION__}")
    parser.add_argument("--verbose", action="store_true", help="Log policy decisions and oracle choices.")
    parser.add_argument("--config", default=None, help="Config file (default: ./config.py when present)")
    sub = parser.add_subparsers(dest="command", help="Available commands", required=True)

    sim_cmd = sub.add_parser("simulate", help="Run one policy on an instance file and write its trace.")
    sim_cmd.add_argument("instance", help="Instance JSON file")
    sim_cmd.add_argument("--policy", choices=sorted(POLICIES), default="a")
    sim_cmd.add_argument("--psi-sigma", default=None, help="Override the instance's idle power")
    sim_cmd.add_argument("--out", default=None, help="Trace JSON path")
    sim_cmd.add_argument("--report", default=None, help="Also write the phase report JSON here")
    sim_cmd.add_argument("--report-csv", default=None, help="Also write the report summary as a one-row CSV")
    _add_policy_flags(sim_cmd)

    cmp_cmd = sub.add_parser("compare", help="Run policies over instances and write a CSV.")
    cmp_cmd.add_argument("instances", nargs="*", help="Instance JSON files")
    cmp_cmd.add_argument("--policies", default="a,s", help="Comma-separated policy names")
    cmp_cmd.add_argument("--tight", type=int, action="append", metavar="R",
                         help="Add the tight family for S with R pairs (even)")
    cmp_cmd.add_argument("--psi-sigma", default=None, help="Override the instances' idle power")
    cmp_cmd.add_argument("--csv", default=None, help="CSV output path")
    cmp_cmd.add_argument("--workers", type=int, default=None)
    _add_policy_flags(cmp_cmd)

    adv_cmd = sub.add_parser("adversary", help="Play the adaptive lower-bound game against a policy.")
    adv_cmd.add_argument("--policy", choices=sorted(POLICIES), default="a")
    adv_cmd.add_argument("--beta", default=None)
    adv_cmd.add_argument("--alpha", default=None)
    adv_cmd.add_argument("--eps", default=None)
    adv_cmd.add_argument("--psi-sigma", default=None)
    adv_cmd.add_argument("--show-bounds", action="store_true", help="Print the closed-form case ratios")
    adv_cmd.add_argument("--out", default=None, help="Transcript JSON path")
    _add_policy_flags(adv_cmd)

    ver_cmd = sub.add_parser("verify", help="Check the competitive properties on random instances.")
    ver_cmd.add_argument("--seed", type=int, default=None, help="First seed (env POWERDOWN_SEED)")
    ver_cmd.add_argument("--n", type=int, default=None, help="Number of instances")
    ver_cmd.add_argument("--jobs", type=int, default=None, help="Maximum jobs per instance")
    ver_cmd.add_argument("--horizon", type=int, default=None, help="Horizon in grid units")
    ver_cmd.add_argument("--workers", type=int, default=None)
    ver_cmd.add_argument("--out", default=None, help="Directory for reproducer instance files")
    ver_cmd.add_argument("--u", default=None, help="Margin of Algorithm A")
    ver_cmd.add_argument("--idle-mode", choices=["cumulative", "per_episode", "per_phase"], default=None)
    ver_cmd.add_argument("--idle-factor", default=None, help="Idle budget factor (1 injects a known bug)")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "adversary": cmd_adversary,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parses ``argv`` and runs the chosen command.

    Returns:
        0 on success, 1 for usage, input or argument errors, 2 when a deadline
        is missed or a checked property fails.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except ProtocolViolation as e:
        logger.error(f"❌ Policy error: {e}")
        return EXIT_FAILURE
    except (OSError, ConfigError, ValidationError, InstanceError, ArgumentError, OracleError) as e:
        logger.error(f"❌ Error: {e}")
        return EXIT_USAGE


def cli():
    """
    The main entry point for the powerdown command-line interface.
    """
    sys.exit(main())


if __name__ == "__main__":
    cli()
