"""Run orchestration: single runs with their artifacts, and parameter sweeps.

Sweep members are independent processes with disjoint output directories;
only the parent writes the ledger.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from convexflow.config import OutputSettings, with_overrides
from convexflow.errors import ConvexFlowError, InvalidConfig
from convexflow.export import export_snapshot, export_timeseries, snapshot_suffix
from convexflow.flow import Trajectory, run
from convexflow.models import FlowConfig, RunSummary
from convexflow.storage import RunLedger, summarize

logger = logging.getLogger(__name__)


def execute_run(
    config: FlowConfig,
    output: OutputSettings | None = None,
    *,
    label: str = "",
) -> tuple[Trajectory, RunSummary]:
    """Run one flow and write its time series and final snapshot under ``config.out_dir``."""
    output = output or OutputSettings()
    traj = run(config)
    out_dir = Path(config.out_dir)
    export_timeseries(traj, out_dir / output.timeseries_file)
    if output.write_snapshot and traj.final is not None:
        export_snapshot(traj.final, out_dir / f"{output.snapshot_stem}{snapshot_suffix(config.n)}")
    return traj, summarize(traj, label)


def parse_param(text: str) -> tuple[str, list[str]]:
    """``key=v1,v2,...`` -> (key, [v1, v2, ...])."""
    key, sep, values = text.partition("=")
    key = key.strip()
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not sep or not key or not items:
        raise InvalidConfig(f"expected key=v1,v2,..., got {text!r}", key=key or None)
    return key, items


def expand(config: FlowConfig, params: list[tuple[str, list[str]]]) -> list[tuple[str, FlowConfig]]:
    """Cartesian product of parameter values, each with its own output directory."""
    keys = [key for key, _ in params]
    members = []
    for combo in itertools.product(*(values for _, values in params)):
        overrides = dict(zip(keys, combo))
        label = "_".join(f"{k}-{v}" for k, v in overrides.items()) or "base"
        safe = "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in label)
        overrides["out_dir"] = str(Path(config.out_dir) / safe)
        members.append((label, with_overrides(config, overrides)))
    return members


@dataclass
class SweepResult:
    summaries: list[RunSummary] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return bool(self.summaries) and all(s.converged for s in self.summaries)


def _sweep_member(label: str, config: FlowConfig, output: OutputSettings) -> RunSummary:
    _, summary = execute_run(config, output, label=label)
    return summary


def run_sweep(
    config: FlowConfig,
    params: list[tuple[str, list[str]]],
    *,
    output: OutputSettings | None = None,
    ledger: RunLedger | None = None,
    workers: int | None = None,
) -> SweepResult:
    """Run every parameter combination in a process pool; failures are collected, not raised."""
    output = output or OutputSettings()
    members = expand(config, params)
    result = SweepResult()
    logger.info("Sweep of %d runs over %s", len(members), ", ".join(k for k, _ in params))

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_sweep_member, label, cfg, output): label for label, cfg in members}
        for future in as_completed(futures):
            label = futures[future]
            try:
                summary = future.result()
            except ConvexFlowError as exc:
                result.errors.append(f"{label}: {exc}")
                logger.warning("Sweep member %s failed: %s", label, exc)
                continue
            result.summaries.append(summary)
            if ledger is not None:
                ledger.record(summary)

    result.summaries.sort(key=lambda s: s.label)
    return result
