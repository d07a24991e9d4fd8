"""Trajectory and geometry export: CSV time series, SVG curves, v/f meshes.

All files are written atomically (temp file in the same directory, then rename).
"""

from __future__ import annotations

import logging
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from convexflow.errors import ExportError
from convexflow.geometry import embed_boundary
from convexflow.mixed_volumes import best_fit_ball
from convexflow.models import DiagRecord

if TYPE_CHECKING:
    from convexflow.flow import FlowState, Trajectory

logger = logging.getLogger(__name__)

_AXES = ("x", "y", "z")


def _atomic_write_text(path: str | Path, text: str) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
    except OSError as exc:
        raise ExportError(target, exc.strerror or str(exc)) from exc
    try:
        with open(fd, "w", encoding="utf-8") as f:
            f.write(text)
        Path(tmp_path).replace(target)
    except OSError as exc:
        Path(tmp_path).unlink(missing_ok=True)
        raise ExportError(target, exc.strerror or str(exc)) from exc
    return target


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ── time series ──────────────────────────────────────────────


def timeseries_header(n: int) -> list[str]:
    return (
        ["t"]
        + [f"V{j}" for j in range(n + 2)]
        + [f"r{j}" for j in range(1, n + 2)]
        + ["I_iso", "phi", "Ek_min", "Ek_max", "rho_minus", "rho_plus"]
        + [f"steiner_{a}" for a in _AXES[: n + 1]]
        + ["d_ball", "tso_W", "ekflat"]
    )


def _row(rec: DiagRecord) -> list[float]:
    return (
        [rec.t, *rec.volumes, *rec.radii, rec.iso, rec.phi, rec.ek_min, rec.ek_max,
         rec.rho_minus, rec.rho_plus, *rec.steiner, rec.d_ball, rec.tso_w, rec.ek_flatness]
    )


def export_timeseries(traj: Trajectory, path: str | Path) -> Path:
    """One CSV row per snapshot, 17 significant digits."""
    if not traj.records:
        raise ExportError(path, "trajectory has no records")
    lines = [",".join(timeseries_header(traj.n))]
    lines.extend(",".join(_fmt(x) for x in _row(rec)) for rec in traj.records)
    target = _atomic_write_text(path, "\n".join(lines) + "\n")
    logger.info("Wrote %d snapshot rows to %s", len(traj.records), target)
    return target


def load_timeseries(path: str | Path) -> tuple[list[str], np.ndarray]:
    """(header, rows) of a time-series CSV."""
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ExportError(path, str(exc)) from exc
    return header, data


# ── snapshots ────────────────────────────────────────────────


def _svg(state: FlowState) -> str:
    points = embed_boundary(state.s, state.grid)
    r_hat, centre = best_fit_ball(state.s, state.grid)
    # SVG y axis points down
    xs, ys = points[:, 0], -points[:, 1]
    lo_x, hi_x = min(xs.min(), centre[0] - r_hat), max(xs.max(), centre[0] + r_hat)
    lo_y, hi_y = min(ys.min(), -centre[1] - r_hat), max(ys.max(), -centre[1] + r_hat)
    margin = 0.05 * max(hi_x - lo_x, hi_y - lo_y)
    view = (lo_x - margin, lo_y - margin, hi_x - lo_x + 2 * margin, hi_y - lo_y + 2 * margin)
    closed = list(zip(xs, ys)) + [(xs[0], ys[0])]
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in closed)
    stroke = _fmt(0.005 * view[2])
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{" ".join(_fmt(v) for v in view)}">\n'
        f'  <title>t = {_fmt(state.t)}</title>\n'
        f'  <circle cx="{_fmt(centre[0])}" cy="{_fmt(-centre[1])}" r="{_fmt(r_hat)}" '
        f'fill="none" stroke="#999999" stroke-dasharray="4 2" stroke-width="{stroke}"/>\n'
        f'  <polyline points="{coords}" fill="none" stroke="#1f4e79" stroke-width="{stroke}"/>\n'
        "</svg>\n"
    )


def _pole_vertex(ring: np.ndarray, radii: np.ndarray, theta: float, sign: float) -> np.ndarray:
    """Pole vertex synthesized from the nearest latitude ring.

    s is not sampled at the poles, so the vertex is the ring mean lifted by
    the mean principal radius: r (1 - cos(angle to pole)) along e_3. This is
    exact for translated balls. Otherwise the error is O(theta^2) times the
    spread of the radii near the pole, and only the mesh export uses it.
    """
    drop = 1.0 - np.cos(theta if sign > 0 else np.pi - theta)
    return ring.mean(axis=0) + sign * radii.mean() * drop * np.array([0.0, 0.0, 1.0])


def mesh_arrays(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """Vertices (grid nodes then north and south poles) and 0-based outward triangles."""
    grid = state.grid
    L, M = grid.shape
    points = embed_boundary(state.s, grid)
    north = _pole_vertex(points[0], state.radii.radii[0], grid.theta[0], 1.0)
    south = _pole_vertex(points[-1], state.radii.radii[-1], grid.theta[-1], -1.0)
    vertices = np.concatenate([points.reshape(-1, 3), north[None], south[None]])

    idx = np.arange(L * M).reshape(L, M)
    right = np.roll(idx, -1, axis=1)
    a, b = idx[:-1], right[:-1]
    c, d = idx[1:], right[1:]
    upper = np.stack([a, c, b], axis=-1).reshape(-1, 3)
    lower = np.stack([b, c, d], axis=-1).reshape(-1, 3)
    n_idx, s_idx = L * M, L * M + 1
    north_fan = np.stack([np.full(M, n_idx), idx[0], right[0]], axis=-1)
    south_fan = np.stack([np.full(M, s_idx), right[-1], idx[-1]], axis=-1)
    faces = np.concatenate([upper, lower, north_fan, south_fan])
    return vertices, faces


def _mesh(state: FlowState) -> str:
    vertices, faces = mesh_arrays(state)
    lines = [f"# convexflow mesh t = {_fmt(state.t)}"]
    lines.extend(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in vertices)
    lines.extend(f"f {i + 1} {j + 1} {k + 1}" for i, j, k in faces)
    return "\n".join(lines) + "\n"


def export_snapshot(state: FlowState, path: str | Path) -> Path:
    """SVG curve with its best-fit circle (n=1) or a v/f triangle mesh (n=2)."""
    text = _svg(state) if state.grid.n == 1 else _mesh(state)
    target = _atomic_write_text(path, text)
    logger.info("Wrote snapshot at t=%.6g to %s", state.t, target)
    return target


def snapshot_suffix(n: int) -> str:
    return ".svg" if n == 1 else ".mesh"
