"""Tests for the run ledger."""

import json

import pytest

from convexflow.flow import run
from convexflow.models import FlowConfig, RunSummary
from convexflow.storage import RunLedger, summarize


def _make_summary(label: str = "ball", converged: bool = True, **kwargs) -> RunSummary:
    defaults = {
        "timestamp": 1000.0,
        "label": label,
        "config": FlowConfig(shape="ball:1", resolution=64),
        "stop_reason": "converged" if converged else "t_max",
        "converged": converged,
        "steps": 0,
        "t_final": 0.0,
        "r_hat": 1.0,
        "constraint_residual": 0.0,
        "phi_min": 1.0,
        "phi_max": 1.0,
        "wall_time": 0.01,
    }
    defaults.update(kwargs)
    return RunSummary(**defaults)


class TestSummarize:
    def test_from_trajectory(self):
        traj = run(FlowConfig(resolution=64, max_steps=3))
        summary = summarize(traj, label="short")
        assert summary.label == "short"
        assert summary.stop_reason == "max_steps"
        assert summary.steps == 3
        assert summary.t_final == pytest.approx(traj.final.t)
        assert summary.phi_min <= summary.phi_max
        assert summary.monitors_passed

    def test_label_defaults_to_shape(self):
        summary = summarize(run(FlowConfig(shape="ball:1", resolution=64)))
        assert summary.label == "ball:1"
        assert summary.converged
        assert summary.r_hat == pytest.approx(1.0)

    def test_monitor_failures(self):
        summary = _make_summary(monitor_failures=["V_2 decreased at t = 1"])
        assert not summary.monitors_passed


class TestRunLedger:
    def test_record(self, tmp_path):
        ledger = RunLedger(tmp_path / "runs.jsonl")
        ledger.record(_make_summary("a"))
        ledger.record(_make_summary("b", converged=False))
        assert ledger.run_count == 2
        assert ledger.converged_count == 1

    def test_persistence_to_disk(self, tmp_path):
        path = tmp_path / "nested" / "runs.jsonl"
        RunLedger(path).record(_make_summary("a"))

        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        data = json.loads(lines[0])
        assert data["label"] == "a"
        assert data["config"]["shape"] == "ball:1"

    def test_load_from_disk(self, tmp_path):
        path = tmp_path / "runs.jsonl"
        first = RunLedger(path)
        first.record(_make_summary("a"))
        first.record(_make_summary("b", converged=False))

        second = RunLedger(path)
        second.load()
        assert second.run_count == 2
        assert second.runs[0].config == FlowConfig(shape="ball:1", resolution=64)
        assert second.runs[1].stop_reason == "t_max"

    def test_malformed_lines_skipped(self, tmp_path):
        path = tmp_path / "runs.jsonl"
        RunLedger(path).record(_make_summary("a"))
        with open(path, "a") as f:
            f.write('{"label": "broken"}\n\n')

        ledger = RunLedger(path)
        ledger.load()
        assert ledger.run_count == 1

    def test_load_missing_file(self, tmp_path):
        ledger = RunLedger(tmp_path / "missing.jsonl")
        ledger.load()
        assert ledger.run_count == 0
