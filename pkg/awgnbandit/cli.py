"""Command line entry point: ``python -m awgnbandit {run,sweep,bounds,verify}``.

Exit codes: 0 ok, 1 configuration or I/O error, 2 power-audit failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import metrics
from .__version__ import __version__
from .harness import McSummary, run_monte_carlo
from .infotheory import (
    DEFAULT_LOWER_C1,
    DEFAULT_LOWER_C2,
    BoundReport,
    lower_bound_report,
    ucb0_bound,
    ue_ucb_bound,
    ue_ucb_pp_bound,
)
from .policies import InfeasibleHorizonError, build_schedule
from .settings import ExperimentConfig, apply_overrides, build_instance, default_config, load_config
from .verify import FAULTS, SUITES, run_suites

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_AUDIT = 2
EXIT_VERIFY = 3

TRACE_COLUMNS = ["algorithm", "snr", "b", "k", "t_horizon", "replication", "round", "cumulative_regret"]

# ANSI color codes
RESET = "\x1b[0m"
BOLD = "\x1b[1m"
RED = "\x1b[31m"
GREEN = "\x1b[32m"
YELLOW = "\x1b[33m"
CYAN = "\x1b[36m"


def _color_text(text: str, color: str, enabled: bool) -> str:
    if not enabled:
        return text
    return f"{color}{text}{RESET}"


def configure_logger(debug: bool) -> None:
    level = logging.DEBUG if debug else logging.INFO
    logging.basicConfig(level=level, format="%(message)s")


def bound_reports(
    num_arms: int, horizon: int, bound: float, snr: float, c1: float = DEFAULT_LOWER_C1, c2: float = DEFAULT_LOWER_C2
) -> Dict[str, BoundReport]:
    return {
        "ucb0": ucb0_bound(num_arms, horizon, bound, snr),
        "ue_ucb": ue_ucb_bound(num_arms, horizon, bound, snr),
        "ue_ucb_pp": ue_ucb_pp_bound(num_arms, horizon, bound, snr),
        "lower": lower_bound_report(num_arms, horizon, bound, snr, c1, c2),
    }


def config_bound_reports(cfg: ExperimentConfig) -> Dict[str, BoundReport]:
    return bound_reports(
        cfg.num_arms, cfg.horizon, cfg.reward_bound, cfg.effective_snr(), cfg.lower_bound_c1, cfg.lower_bound_c2
    )


def trace_frame(summary: McSummary, cfg: ExperimentConfig) -> pd.DataFrame:
    """Long-format regret traces, one row per (replication, retained round)."""
    rounds = np.asarray(summary.rounds, dtype=np.int64)
    n_rounds = len(rounds)
    regrets = np.array([trace.cumulative for trace in summary.traces], dtype=float)
    replications = np.array([trace.stream for trace in summary.traces], dtype=np.int64)
    total = n_rounds * len(replications)
    frame = pd.DataFrame(
        {
            "algorithm": [summary.algorithm] * total,
            "snr": np.full(total, summary.schedule.snr),
            "b": np.full(total, cfg.reward_bound),
            "k": np.full(total, cfg.num_arms, dtype=np.int64),
            "t_horizon": np.full(total, cfg.horizon, dtype=np.int64),
            "replication": np.repeat(replications, n_rounds),
            "round": np.tile(rounds, len(replications)),
            "cumulative_regret": regrets.reshape(-1),
        }
    )
    return frame[TRACE_COLUMNS]


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _summary_payload(summary: McSummary, cfg: ExperimentConfig) -> dict:
    schedule = summary.schedule
    return {
        "config": cfg.model_dump(mode="json"),
        "mean_final_regret": summary.mean_final,
        "stderr_final_regret": summary.stderr_final,
        "quantiles": summary.quantiles,
        "power_audit": {
            "empirical_moment": summary.audit.empirical_moment,
            "budget": summary.audit.budget,
            "pass": summary.audit.passed,
            "tolerance": summary.audit.tolerance,
            "transmissions": summary.audit.count,
            "episode_failures": summary.episode_audit_failures,
        },
        "bound_values": {name: report.value for name, report in config_bound_reports(cfg).items()},
        "schedule": {
            "algorithm": schedule.algorithm.value,
            "snr": schedule.snr,
            "sub_phases": schedule.sub_phases,
            "block_length": schedule.block_length,
            "exploration_rounds": schedule.exploration_rounds,
            "eta": schedule.eta,
        },
        "instance_digest": summary.traces[0].instance_digest,
    }


def _simulate(cfg: ExperimentConfig) -> McSummary:
    instance = build_instance(cfg)
    return run_monte_carlo(
        instance,
        cfg.algorithm,
        cfg.channel(),
        cfg.horizon,
        cfg.replications,
        cfg.seed,
        snr_cap=cfg.snr_cap,
        audit_tolerance=cfg.audit_tolerance,
        parallel=cfg.parallel,
        retain_every=1 if cfg.retain_full_transcript else None,
    )


def _precheck(cfg: ExperimentConfig) -> None:
    instance = build_instance(cfg)
    build_schedule(cfg.algorithm, instance.num_arms, cfg.horizon, instance.second_moment_bound, cfg.channel(), cfg.snr_cap)


def cmd_run(cfg: ExperimentConfig) -> int:
    _precheck(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = _simulate(cfg)
    _write_csv(trace_frame(summary, cfg), out_dir / "trace.csv")
    _write_json(_summary_payload(summary, cfg), out_dir / "summary.json")
    metrics.write_metrics(out_dir / "metrics.prom")
    logger.info(f"Wrote trace.csv, summary.json and metrics.prom to {out_dir}")
    if not summary.audit.passed:
        logger.error(
            f"Power audit failed: empirical moment {summary.audit.empirical_moment:.6g} "
            f"> {summary.audit.budget:g} * (1 + {summary.audit.tolerance:g})"
        )
        return EXIT_AUDIT
    return EXIT_OK


def sweep_points(cfg: ExperimentConfig) -> List[Dict[str, float]]:
    """Cartesian product of the non-empty sweep axes, as override dicts."""
    axes = [
        ("snr", cfg.sweep_snr),
        ("reward_bound", cfg.sweep_b),
        ("horizon", cfg.sweep_horizon),
    ]
    active = [(name, values) for name, values in axes if values]
    if not active:
        return []
    names = [name for name, _ in active]
    return [dict(zip(names, combo)) for combo in itertools.product(*(values for _, values in active))]


def cmd_sweep(cfg: ExperimentConfig) -> int:
    points = sweep_points(cfg)
    if not points:
        logger.error("sweep needs at least one non-empty axis (sweep_snr, sweep_b, sweep_horizon)")
        return EXIT_CONFIG
    configs = [apply_overrides(cfg, **point) for point in points]
    for point_cfg in configs:
        _precheck(point_cfg)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    groups = []
    audit_failed = False
    for point, point_cfg in zip(points, configs):
        logger.info(f"Sweep point {point}")
        summary = _simulate(point_cfg)
        frames.append(trace_frame(summary, point_cfg))
        payload = _summary_payload(summary, point_cfg)
        del payload["config"]
        payload["axes"] = point
        groups.append(payload)
        audit_failed = audit_failed or not summary.audit.passed

    _write_csv(pd.concat(frames, ignore_index=True), out_dir / "sweep.csv")
    _write_json({"config": cfg.model_dump(mode="json"), "groups": groups}, out_dir / "sweep_summary.json")
    metrics.write_metrics(out_dir / "metrics.prom")
    logger.info(f"Wrote {len(groups)} sweep groups to {out_dir}")
    if audit_failed:
        logger.error("Power audit failed for at least one sweep point")
        return EXIT_AUDIT
    return EXIT_OK


def format_bound_report(label: str, report: BoundReport, color: bool = False) -> List[str]:
    terms = ", ".join(f"{term.name}={term.value:.6g}" for term in report.terms)
    lines = [
        f"{_color_text(f'{label:<10}', BOLD, color)} {report.value:>14.6g} {report.unit}  ({terms})"
    ]
    for warning in report.warnings:
        lines.append("  " + _color_text(f"warning: {warning}", YELLOW, color))
    return lines


def cmd_bounds(
    num_arms: int,
    horizon: int,
    bound: float,
    snr: float,
    c1: float = DEFAULT_LOWER_C1,
    c2: float = DEFAULT_LOWER_C2,
    color: bool = False,
) -> int:
    print(_color_text(f"K={num_arms} T={horizon} B={bound:g} SNR={snr:g} c1={c1:g} c2={c2:g}", CYAN, color))
    labels = {"ucb0": "ucb0", "ue_ucb": "ue-ucb", "ue_ucb_pp": "ue-ucb++", "lower": "lower"}
    for key, report in bound_reports(num_arms, horizon, bound, snr, c1, c2).items():
        for line in format_bound_report(labels[key], report, color):
            print(line)
    return EXIT_OK


def cmd_verify(suites: Optional[Sequence[str]] = None, inject_fault: Optional[str] = None, color: bool = False) -> int:
    results = run_suites(suites, inject_fault)
    failed = [res for res in results if not res.passed]
    for res in results:
        status = _color_text("PASS", GREEN, color) if res.passed else _color_text("FAIL", RED, color)
        detail = f"  {res.detail}" if res.detail else ""
        print(f"{status} [{res.suite}] {res.name}: margin {res.margin:.6g}{detail}")
    if failed:
        names = "; ".join(f"[{res.suite}] {res.name}" for res in failed)
        logger.error(f"verify failed: {names}")
        return EXIT_VERIFY
    return EXIT_OK


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="Flat JSON experiment config (see config.schema.json)")
    parser.add_argument("--seed", type=int, default=None, help="Base seed")
    parser.add_argument("--reps", type=int, default=None, help="Monte Carlo replications")
    parser.add_argument("--out", metavar="DIR", default=None, help="Output directory")
    parser.add_argument("--retain-full-transcript", action="store_true", help="Keep every round in the CSV trace")
    parser.add_argument("--audit-tol", type=float, default=None, help="Relative power-audit tolerance (default 0.1)")
    parser.add_argument("--parallel", type=int, default=None, help="Worker processes for replications")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awgnbandit", description="Bandit learning with rewards sent over an AWGN channel"
    )
    parser.add_argument("--version", action="version", version=f"awgnbandit {__version__}")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    color_group = parser.add_mutually_exclusive_group()
    color_group.add_argument("--color", dest="color", action="store_true", help="Enable colored output")
    color_group.add_argument("--no-color", dest="color", action="store_false", help="Disable colored output")
    parser.set_defaults(color=None)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="Monte Carlo run of one configuration")
    _add_experiment_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="Cartesian sweep over SNR, B and T axes")
    _add_experiment_flags(sweep_p)

    bounds_p = sub.add_parser("bounds", help="Evaluate the regret upper and lower bounds")
    bounds_p.add_argument("--config", metavar="PATH", help="Take K, T, B, SNR from a config file")
    bounds_p.add_argument("--k", type=int, default=None, help="Number of arms")
    bounds_p.add_argument("--t", type=int, default=None, help="Horizon")
    bounds_p.add_argument("--b", type=float, default=None, help="Second-moment bound B")
    bounds_p.add_argument("--snr", type=float, default=None, help="Signal-to-noise ratio P/sigma^2")
    bounds_p.add_argument("--c1", type=float, default=None, help="Lower-bound constant c1 (default 1/20)")
    bounds_p.add_argument("--c2", type=float, default=None, help="Lower-bound horizon constant c2 (default 1)")

    verify_p = sub.add_parser("verify", help="Run the numerical verification suites")
    verify_p.add_argument(
        "--suite", action="append", choices=SUITES, default=None, help="Suite to run (repeatable; default all)"
    )
    verify_p.add_argument("--inject-fault", choices=FAULTS, default=None, help=argparse.SUPPRESS)
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config) if args.config else default_config()


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    return apply_overrides(
        _load(args),
        seed=args.seed,
        replications=args.reps,
        out_dir=args.out,
        retain_full_transcript=True if args.retain_full_transcript else None,
        audit_tolerance=args.audit_tol,
        parallel=args.parallel,
    )


def _bounds_args(args: argparse.Namespace) -> dict:
    cfg = _load(args)

    def pick(flag, fallback):
        return fallback if flag is None else flag

    return {
        "num_arms": pick(args.k, cfg.num_arms),
        "horizon": pick(args.t, cfg.horizon),
        "bound": pick(args.b, cfg.reward_bound),
        "snr": pick(args.snr, cfg.effective_snr()),
        "c1": pick(args.c1, cfg.lower_bound_c1),
        "c2": pick(args.c2, cfg.lower_bound_c2),
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logger(args.debug)
    color = sys.stdout.isatty() if args.color is None else bool(args.color)

    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.inject_fault, color)
        if args.command == "bounds":
            return cmd_bounds(**_bounds_args(args), color=color)
        cfg = _experiment_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_sweep(cfg)
    except InfeasibleHorizonError as e:
        logger.error(f"Configuration error: {e} (minimum feasible horizon {e.min_horizon})")
        return EXIT_CONFIG
    except (ValueError, OSError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG


__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_AUDIT",
    "EXIT_VERIFY",
    "TRACE_COLUMNS",
    "configure_logger",
    "bound_reports",
    "trace_frame",
    "sweep_points",
    "cmd_run",
    "cmd_sweep",
    "cmd_bounds",
    "cmd_verify",
    "build_parser",
    "main",
]
