"""Command-line entry point for convexflow."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from rich.console import Console
from rich.table import Table
from rich.text import Text

from convexflow.config import Settings, load_flow_config, load_settings, with_overrides
from convexflow.errors import ConvexFlowError
from convexflow.flow import Trajectory
from convexflow.logging_setup import setup_logging
from convexflow.mixed_volumes import all_radii, isoperimetric_ratio, quermassintegrals
from convexflow.models import DEFAULT_RESOLUTION, FlowConfig, RunSummary
from convexflow.shapes import CATALOG, make_shape
from convexflow.sphere_grid import build_grid
from convexflow.storage import RunLedger
from convexflow.sweep import execute_run, parse_param, run_sweep
from convexflow.verify import build_checks_table, run_checks

console = Console()
logger = logging.getLogger("convexflow")

EXIT_OK = 0
EXIT_MONITORS = 1
EXIT_ERROR = 2


def build_run_table(traj: Trajectory, summary: RunSummary) -> Table:
    """Summary of one finished run."""
    cfg = traj.config
    table = Table(title=f"convexflow run: {cfg.shape}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")

    first, last = traj.records[0], traj.records[-1]
    table.add_row("Flow", f"n={cfg.n} k={cfg.k} {traj.speed.label}")
    table.add_row("Constraint", traj.constraint.label)
    table.add_row("Grid", repr(traj.grid))
    table.add_row("Stop reason", summary.stop_reason)
    table.add_row("Steps / t", f"{summary.steps} / {summary.t_final:.6g}")
    table.add_row("r_hat", f"{summary.r_hat:.10g}")
    table.add_row(f"I_{cfg.n + 1 - cfg.k}", f"{first.iso:.8f} -> {last.iso:.8f}")
    table.add_row("d_ball", f"{first.d_ball:.3e} -> {last.d_ball:.3e}")
    table.add_row("phi range", f"[{summary.phi_min:.6g}, {summary.phi_max:.6g}]")
    if summary.constraint_residual is not None:
        table.add_row("|G(r_hat, r_hat) - G0|", f"{summary.constraint_residual:.3e}")
    monitors = Text("pass", style="green") if summary.monitors_passed else Text(
        f"{len(summary.monitor_failures)} failure(s)", style="bold red")
    table.add_row("Monitors", monitors)
    table.add_row("Wall time", f"{summary.wall_time:.1f}s")
    return table


def build_shapes_table(n: int, resolution: int) -> Table:
    """Catalog shapes with their quermassintegrals, radii and isoperimetric ratios."""
    grid = build_grid(n, resolution)
    table = Table(title=f"Shape catalog, n={n} ({grid!r})")
    table.add_column("Name", style="cyan")
    table.add_column("Spec", style="blue")
    for j in range(n + 2):
        table.add_column(f"V{j}", justify="right")
    for j in range(1, n + 2):
        table.add_column(f"r{j}", justify="right")
    for ell in range(1, n + 1):
        table.add_column(f"I{ell}", justify="right")

    for name, text in CATALOG[n].items():
        V = quermassintegrals(make_shape(text, grid), grid)
        table.add_row(
            name,
            text,
            *(f"{v:.6f}" for v in V.values),
            *(f"{r:.6f}" for r in all_radii(V)),
            *(f"{isoperimetric_ratio(V, ell):.6f}" for ell in range(1, n + 1)),
        )
    return table


def build_sweep_table(summaries: list[RunSummary]) -> Table:
    table = Table(title=f"convexflow sweep: {len(summaries)} runs")
    table.add_column("Run", style="cyan")
    table.add_column("Stop", width=10)
    table.add_column("Steps", justify="right")
    table.add_column("t", justify="right")
    table.add_column("r_hat", justify="right")
    table.add_column("Monitors", justify="center")
    for s in summaries:
        ok = "[green]pass[/green]" if s.monitors_passed else f"[red]{len(s.monitor_failures)}[/red]"
        table.add_row(s.label, s.stop_reason, str(s.steps), f"{s.t_final:.4g}", f"{s.r_hat:.8g}", ok)
    return table


# ── verbs ────────────────────────────────────────────────────


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return overrides


def _load_config(args: argparse.Namespace) -> FlowConfig:
    config = load_flow_config(args.flow_config)
    overrides = _overrides(args)
    return with_overrides(config, overrides) if overrides else config


def command_run(args: argparse.Namespace, settings: Settings) -> int:
    config = _load_config(args)
    if settings.quiet:
        traj, summary = execute_run(config, settings.output, label=Path(args.flow_config).stem)
    else:
        with console.status(f"[bold cyan]Evolving {config.shape}..."):
            traj, summary = execute_run(config, settings.output, label=Path(args.flow_config).stem)
    RunLedger(Path(config.out_dir) / settings.output.ledger_file).record(summary)

    if not settings.quiet:
        console.print(build_run_table(traj, summary))
        for failure in summary.monitor_failures[:10]:
            console.print(f"[red]Monitor:[/red] {failure}")
    return EXIT_OK if summary.monitors_passed else EXIT_MONITORS


def command_shapes(args: argparse.Namespace, settings: Settings) -> int:
    dims = (args.n,) if args.n is not None else (1, 2)
    for n in dims:
        resolution = args.resolution or DEFAULT_RESOLUTION[n]
        console.print(build_shapes_table(n, resolution))
    return EXIT_OK


def command_verify(args: argparse.Namespace, settings: Settings) -> int:
    verify_settings = settings.verify
    if args.seed is not None:
        verify_settings.seed = args.seed
    results = run_checks(verify_settings, console=None if settings.quiet else console)
    if not settings.quiet:
        console.print(build_checks_table(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("Failed checks: %s", ", ".join(failed))
    return EXIT_MONITORS if failed else EXIT_OK


def _ledger_summaries(ledger: RunLedger, finished: list[RunSummary]) -> list[RunSummary]:
    """Latest ledger entry for each finished sweep member; the in-memory summary if the ledger lacks it."""
    recorded = RunLedger(ledger.path)
    recorded.load()
    labels = {s.label for s in finished}
    latest = {s.label: s for s in recorded.runs if s.label in labels}
    return [latest.get(s.label, s) for s in finished]


def command_sweep(args: argparse.Namespace, settings: Settings) -> int:
    config = _load_config(args)
    params = [parse_param(p) for p in args.param]
    ledger = RunLedger(Path(config.out_dir) / settings.output.ledger_file)
    result = run_sweep(config, params, output=settings.output, ledger=ledger, workers=args.workers)
    summaries = _ledger_summaries(ledger, result.summaries)

    if not settings.quiet:
        console.print(build_sweep_table(summaries))
        for error in result.errors:
            console.print(f"[red]Error:[/red] {error}")
    ok = not result.errors and all(s.monitors_passed for s in summaries)
    return EXIT_OK if ok else EXIT_MONITORS


COMMANDS = {
    "run": command_run,
    "shapes": command_shapes,
    "verify": command_verify,
    "sweep": command_sweep,
}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=str, default=None,
        help="Path to TOML settings file (default: convexflow.toml)",
    )
    common.add_argument("--out", type=str, default=None, help="Output directory (overrides out_dir)")
    common.add_argument("--seed", type=int, default=None, help="Random seed for sampled directions and shapes")
    common.add_argument("--quiet", action="store_true", default=None, help="Suppress console tables")
    common.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging")

    parser = argparse.ArgumentParser(
        prog="convexflow",
        description="Constrained curvature flows of convex curves and surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="Evolve one configured body")
    p_run.add_argument("flow_config", help="key = value flow configuration")
    p_shapes = sub.add_parser("shapes", parents=[common], help="List the shape catalog with its mixed volumes")
    p_shapes.add_argument("--n", type=int, choices=(1, 2), default=None)
    p_shapes.add_argument("--resolution", type=int, default=None)
    sub.add_parser("verify", parents=[common], help="Run the property and oracle checks on small grids")
    p_sweep = sub.add_parser("sweep", parents=[common], help="Run the product of parameter values")
    p_sweep.add_argument("flow_config", help="key = value flow configuration")
    p_sweep.add_argument(
        "--param", action="append", default=[], required=True,
        help="key=v1,v2,... (repeatable)",
    )
    p_sweep.add_argument("--workers", type=int, default=None, help="Worker processes (default: CPU count)")

    args = parser.parse_args(argv)
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    return args


def run_cli(argv: list[str] | None = None) -> int:
    args = parse_args(argv)

    config_path = args.config
    if config_path is None:
        default = Path("convexflow.toml")
        if default.exists():
            config_path = str(default)
    settings = load_settings(config_path)
    if args.quiet is True:
        settings.quiet = True

    setup_logging(settings.log, quiet=settings.quiet, verbose=args.verbose)

    try:
        return COMMANDS[args.command](args, settings)
    except ConvexFlowError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        console.print(f"[bold red]{type(exc).__name__}:[/bold red] {exc}")
        return EXIT_ERROR


def main(argv: list[str] | None = None) -> None:
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
