"""
Command line entry point.

    python -m src.cli train        --config configs/default.yaml [--resume]
    python -m src.cli eval-pose    --config ... --weights runs/<run>/policy.dsamw [--check]
    python -m src.cli eval-payload --config ... --weights ... [--payloads 0.05 0.14]
    python -m src.cli eval-push    --config ... --weights ...
    python -m src.cli eval-path    --config ... --weights ... [--path line]
    python -m src.cli ablate       --config ... [--variants full no_joint_positions] [--check]
    python -m src.cli export       runs/<run>/episodes/pose_episodes.npz

Exit codes: 0 success, 2 config error, 3 weight-file error, 1 anything else
(including a failed --check).
"""
import argparse
import hashlib
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from src.errors import ConfigError, WeightFileError
from src.evaluation.ablation import final_metric, run_ablation_suite
from src.evaluation.acceptance import directional_checks, pose_acceptance, print_checks, write_checks
from src.evaluation.benchmarks import BENCHMARKS, run_payload_sweep
from src.evaluation.episodes import EpisodeArchive, ScriptedPoseController, load_episode_logs, save_episode_logs
from src.evaluation.export import export_report, plot_export, recompute_report
from src.evaluation.metrics import hardware_reference
from src.models.config import RunConfig
from src.models.results import MetricsReport
from src.policy.weights_io import load_weights
from src.storage.config_files import apply_overrides, load_config
from src.storage.run_store import RunPaths, RunStore
from src.training.trainer import train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_WEIGHTS = 3

EVAL_TASKS = ("pose", "payload", "push", "path")


# =============================================================================
# Arguments
# =============================================================================

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="Run config YAML (defaults when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")
    parser.add_argument("--out", type=str, default="runs", help="Runs root directory")
    parser.add_argument("--deterministic", action="store_true",
                        help="Single worker, single torch thread, deterministic kernels")
    parser.add_argument("--log-level", type=str, default="INFO", help="DEBUG, INFO, WARNING, ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsam", description="Train and evaluate DSAM whole-body policies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train a policy with PPO")
    _common(p)
    p.add_argument("--resume", action="store_true", help="Continue from the newest checkpoint of the run")

    for task in EVAL_TASKS:
        p = sub.add_parser(f"eval-{task}", help=f"Run the {task} benchmark")
        _common(p)
        source = p.add_mutually_exclusive_group(required=True)
        source.add_argument("--weights", type=str, help="Policy weight file (.dsamw)")
        source.add_argument("--scripted", action="store_true",
                            help="Scripted base controller instead of a policy (harness check)")
        p.add_argument("--no-html", action="store_true", help="Skip the plotly HTML figures")
        if task == "payload":
            p.add_argument("--payloads", type=float, nargs="+", default=None,
                           help="Payload masses [kg]; defaults to evaluation.payload_sweep")
        if task == "path":
            p.add_argument("--path", choices=("figure8", "line"), default=None, help="Override the path kind")
        if task == "pose":
            p.add_argument("--check", action="store_true",
                           help="Apply the desk-scale acceptance limits; exit 1 when one fails")

    p = sub.add_parser("ablate", help="Train every ablation variant and collect the curves")
    _common(p)
    p.add_argument("--variants", type=str, nargs="+", default=None, help="Subset of variant names")
    p.add_argument("--check", action="store_true",
                   help="Check the directional ablation claims; exit 1 when one fails")

    p = sub.add_parser("export", help="Recompute reports and plot bundles from saved episode logs")
    p.add_argument("episodes", type=str, nargs="+", help="<task>_episodes.npz files")
    p.add_argument("--out", type=str, default=None, help="Output directory (default: the run directory)")
    p.add_argument("--no-html", action="store_true", help="Skip the plotly HTML figures")
    p.add_argument("--log-level", type=str, default="INFO")
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = apply_overrides(config, {
            "seed": args.seed,
            "evaluation": {task: {"seed": args.seed} for task in EVAL_TASKS},
        }, source="--seed")
    if getattr(args, "path", None):
        config = apply_overrides(config, {"evaluation": {"path": {"path": {"kind": args.path}}}}, source="--path")
    return config


# =============================================================================
# Output
# =============================================================================

def _fmt(value: float, spec: str) -> str:
    return "n/a" if value is None or (isinstance(value, float) and math.isnan(value)) else format(value, spec)


def print_report(report: MetricsReport) -> None:
    icon = "✅" if report.crashed_count == 0 else "⚠️"
    print("=" * 80)
    print(f"{icon} {report.task.upper()} benchmark  (payload {report.payload_mass:g} kg, seed {report.seed})")
    print("=" * 80)
    print(f"   Success:            {report.success_count}/{report.goal_count}"
          f"  (crashed {report.crashed_count})")
    print(f"   Position error:     {_fmt(report.position_error_mean, '.4f')} ± "
          f"{_fmt(report.position_error_std, '.4f')} m")
    print(f"   Orientation error:  {_fmt(report.orientation_error_mean_deg, '.2f')} ± "
          f"{_fmt(report.orientation_error_std_deg, '.2f')} deg")
    if report.task in ("path", "push"):
        print(f"   RMSE:               {_fmt(report.position_rmse, '.4f')} m / "
              f"{_fmt(report.orientation_rmse_deg, '.2f')} deg")
    if report.task == "push":
        print(f"   Box displacement:   {_fmt(report.box_displacement, '.3f')} m")
    print(f"   Joint oscillation:  {_fmt(report.joint_oscillation, '.5f')} rad/step")
    print(f"   Inference latency:  {_fmt(report.inference_latency_ms, '.4f')} ms")
    print("\n📋 Hardware reference (context only):")
    for row in hardware_reference(report.task):
        values = ", ".join(f"{k}={v}" for k, v in row.items() if k not in ("task", "condition"))
        print(f"   {row['condition']:>10}: {values}")


def _write_outputs(paths: RunPaths, store: RunStore, report: MetricsReport, archive: EpisodeArchive,
                   label: str, html: bool) -> None:
    report_dir = paths.reports if label == report.task else paths.reports / label
    written = export_report(report, report_dir)
    save_episode_logs(archive, paths.episodes / f"{label}_episodes.npz")
    plot_export(archive, paths.plots / label, html=html)
    store.record_report(paths.run_id, report.task, written["summary"])
    print(f"\n📁 Report: {written['summary']}")


def _report_checks(checks, path: Path) -> int:
    print("\n🔎 Acceptance checks:")
    print_checks(checks)
    print(f"📁 Checks: {write_checks(checks, path)}")
    return EXIT_OK if bool(checks["passed"].all()) else EXIT_FAILURE


# =============================================================================
# Commands
# =============================================================================

def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    store = RunStore(args.out)
    paths = store.create_run(config, kind="train")
    store.mark_status(paths.run_id, "running")
    try:
        result = train(config, paths, deterministic=args.deterministic, resume=args.resume)
    except Exception:
        store.mark_status(paths.run_id, "failed")
        raise
    store.mark_status(paths.run_id, "completed")
    print(f"✅ Trained {paths.run_id}: {result.iterations} iterations, {result.env_steps:,} env steps")
    print(f"   Policy:       {result.weights_path}")
    print(f"   Training log: {result.log_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, task: str) -> int:
    config = resolve_config(args)
    if args.deterministic:
        config = apply_overrides(config, {"evaluation": {t: {"parallel": False} for t in EVAL_TASKS}},
                                 source="--deterministic")
    if args.scripted:
        source, fingerprint = ScriptedPoseController(), "scripted"
    else:
        source = load_weights(args.weights)
        fingerprint = hashlib.sha256(Path(args.weights).read_bytes()).hexdigest()

    store = RunStore(args.out)
    paths = store.create_run(config, kind=f"eval-{task}", extra_fingerprint=fingerprint)
    store.mark_status(paths.run_id, "running")
    html = not args.no_html

    if task == "payload":
        for report, archive in run_payload_sweep(source, config, payloads=args.payloads):
            _write_outputs(paths, store, report, archive, f"payload_{report.payload_mass:g}kg", html)
            print_report(report)
    else:
        report, archive = BENCHMARKS[task](source, config)
        _write_outputs(paths, store, report, archive, task, html)
        print_report(report)
    store.mark_status(paths.run_id, "completed")
    if getattr(args, "check", False):
        return _report_checks(pose_acceptance(report), paths.root / "acceptance.csv")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    store = RunStore(args.out)
    result = run_ablation_suite(config, store, deterministic=args.deterministic, variants=args.variants)
    print(f"🧬 Ablation suite {result.suite.run_id}")
    if not result.curves.empty:
        final = final_metric(result.curves, "r_ori").to_frame("final r_ori")
        final["final joint_oscillation"] = final_metric(result.curves, "joint_oscillation")
        print(final.to_string(float_format=lambda v: f"{v:.4f}"))
    for failure in result.failures:
        print(f"   ❌ {failure.variant}: {failure.error_type}: {failure.message}")
    print(f"\n📁 Curves: {result.curves_path}")
    if args.check:
        return _report_checks(directional_checks(result.curves), result.suite.root / "ablation_checks.csv")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    for name in args.episodes:
        source = Path(name)
        archive = load_episode_logs(source)
        run_root = Path(args.out) if args.out else source.parent.parent
        label = source.name[: -len("_episodes.npz")] if source.name.endswith("_episodes.npz") else source.stem
        report = recompute_report(archive)
        report_dir = run_root / "reports" if label == archive.task else run_root / "reports" / label
        written = export_report(report, report_dir)
        plot_export(archive, run_root / "plots" / label, html=not args.no_html)
        print(f"📁 {source.name} -> {written['summary']}")
        print_report(report)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "ablate":
            return cmd_ablate(args)
        if args.command == "export":
            return cmd_export(args)
        return cmd_eval(args, args.command[len("eval-"):])
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        for error in exc.errors:
            logger.error("  %s: %s", ".".join(str(p) for p in error.get("loc", ())), error.get("msg"))
        return EXIT_CONFIG
    except WeightFileError as exc:
        logger.error("weight file error: %s", exc)
        return EXIT_WEIGHTS
    except Exception as exc:
        logger.exception("%s failed: %s", args.command, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
