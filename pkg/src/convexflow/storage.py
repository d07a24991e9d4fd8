"""Run ledger: JSON-lines append-only storage of finished runs."""

from __future__ import annotations

import json
import logging
import time
from pathlib import Path
from typing import TYPE_CHECKING

from pydantic import ValidationError

from convexflow.models import RunSummary

if TYPE_CHECKING:
    from convexflow.flow import Trajectory

logger = logging.getLogger(__name__)


def summarize(traj: Trajectory, label: str = "") -> RunSummary:
    phi_min, phi_max = traj.phi_bounds
    final = traj.final
    return RunSummary(
        timestamp=time.time(),
        label=label or traj.config.shape,
        config=traj.config,
        stop_reason=traj.stop_reason,
        converged=traj.converged,
        steps=traj.step_count,
        t_final=final.t if final is not None else 0.0,
        r_hat=traj.r_hat,
        constraint_residual=traj.constraint_residual,
        phi_min=phi_min,
        phi_max=phi_max,
        monitor_failures=traj.monitor_failures[:50],
        wall_time=traj.wall_time,
    )


class RunLedger:
    """Append-only JSON-lines ledger of run summaries."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._runs: list[RunSummary] = []

    @property
    def runs(self) -> list[RunSummary]:
        return self._runs

    @property
    def run_count(self) -> int:
        return len(self._runs)

    @property
    def converged_count(self) -> int:
        return sum(1 for r in self._runs if r.converged)

    def load(self) -> None:
        """Load existing summaries; malformed lines are skipped."""
        if not self.path.exists():
            return
        try:
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        self._runs.append(RunSummary.model_validate_json(line))
                    except ValidationError:
                        logger.warning("Skipping malformed run record")
        except OSError:
            logger.warning("Could not read run ledger: %s", self.path)

        logger.info("Loaded %d runs (%d converged)", self.run_count, self.converged_count)

    def record(self, summary: RunSummary) -> RunSummary:
        """Append a summary to the ledger and write it to disk."""
        self._runs.append(summary)
        self._append_to_file(summary)
        return summary

    def _append_to_file(self, summary: RunSummary) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(summary.model_dump(mode="json")) + "\n")
        except OSError:
            logger.warning("Failed to write run to ledger", exc_info=True)
