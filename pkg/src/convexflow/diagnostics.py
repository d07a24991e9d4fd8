"""Runtime monitors: snapshot records and trajectory-level reports.

Every function here is read-only over states and records.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from convexflow.errors import MonitorViolation
from convexflow.geometry import embed_boundary
from convexflow.mixed_volumes import (
    MixedVolumes,
    all_radii,
    ball_residual,
    diskant_lower_bound,
    inradius_outradius,
    isoperimetric_ratio,
    j_radius,
    mixed_ratio,
    steiner_point,
)
from convexflow.models import DiagRecord
from convexflow.speeds import SpeedSpec, curvature_function, speed_field
from convexflow.sphere_grid import SphereGrid

if TYPE_CHECKING:
    from convexflow.flow import FlowState, GlobalTerm, Trajectory

logger = logging.getLogger(__name__)

RANDOM_DIRECTIONS = 8
CONTAIN_FACTOR = 5.0
BISECTION_MAX_ITER = 60


# ── reflection half-widths ───────────────────────────────────


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Fixed sample of unit directions: the 2(n+1) axis directions plus seeded random ones."""

    directions: np.ndarray  # (m, n+1)

    @classmethod
    def sample(cls, n: int, seed: int = 0, extra: int = RANDOM_DIRECTIONS) -> DirectionSet:
        dim = n + 1
        axes = np.concatenate([np.eye(dim), -np.eye(dim)])
        rng = np.random.default_rng(seed)
        random = rng.standard_normal((extra, dim))
        random /= np.linalg.norm(random, axis=1, keepdims=True)
        return cls(np.concatenate([axes, random]))

    def __len__(self) -> int:
        return len(self.directions)


def interpolation_error(s: np.ndarray, grid: SphereGrid) -> float:
    """max |second difference| / 8, the linear-interpolation error of the samples."""
    s = grid.check_field(s)
    if grid.n == 1:
        second = np.roll(s, 1) - 2.0 * s + np.roll(s, -1)
        return float(np.max(np.abs(second))) / 8.0
    along_phi = np.roll(s, 1, axis=1) - 2.0 * s + np.roll(s, -1, axis=1)
    along_theta = s[2:] - 2.0 * s[1:-1] + s[:-2]
    return max(float(np.max(np.abs(along_phi))), float(np.max(np.abs(along_theta)))) / 8.0


def containment_tolerance(s: np.ndarray, grid: SphereGrid) -> float:
    scale = float(np.max(np.abs(s)))
    return max(CONTAIN_FACTOR * interpolation_error(s, grid), 1e-12 * scale)


def _reflection_contained(
    points: np.ndarray, s_flat: np.ndarray, normals: np.ndarray, z: np.ndarray, lam: float, tol: float
) -> bool:
    heights = points @ z
    cap = points[heights > lam]
    if cap.size == 0:
        return True
    reflected = cap - 2.0 * (cap @ z - lam)[:, None] * z[None, :]
    return bool(np.all(reflected @ normals.T <= s_flat[None, :] + tol))


def reflection_halfwidth(
    s: np.ndarray,
    grid: SphereGrid,
    z: np.ndarray,
    *,
    tol_contain: float | None = None,
    points: np.ndarray | None = None,
) -> float:
    """lambda_plus(z): smallest offset whose cap reflects into the body, by bisection."""
    s = grid.check_field(s)
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    if tol_contain is None:
        tol_contain = containment_tolerance(s, grid)
    if points is None:
        points = embed_boundary(s, grid).reshape(-1, grid.n + 1)
    normals = grid.nodes.reshape(-1, grid.n + 1)
    s_flat = s.reshape(-1)

    heights = points @ z
    lo, hi = float(heights.min()), float(heights.max())
    if _reflection_contained(points, s_flat, normals, z, lo, tol_contain):
        return lo
    for _ in range(BISECTION_MAX_ITER):
        if hi - lo <= 0.25 * tol_contain:
            break
        mid = 0.5 * (lo + hi)
        if _reflection_contained(points, s_flat, normals, z, mid, tol_contain):
            hi = mid
        else:
            lo = mid
    return hi


def reflection_profile(
    s: np.ndarray, grid: SphereGrid, directions: DirectionSet
) -> tuple[np.ndarray, np.ndarray, float]:
    """(lambda_plus, lambda_minus, tol_contain) over the direction set; lambda_minus(z) = -lambda_plus(-z)."""
    tol = containment_tolerance(s, grid)
    points = embed_boundary(s, grid).reshape(-1, grid.n + 1)
    plus = np.array([reflection_halfwidth(s, grid, z, tol_contain=tol, points=points)
                     for z in directions.directions])
    minus = np.array([-reflection_halfwidth(s, grid, -z, tol_contain=tol, points=points)
                      for z in directions.directions])
    return plus, minus, tol


# ── snapshot monitors ────────────────────────────────────────


@dataclass(frozen=True)
class ConvergenceResiduals:
    d_ball: float
    r_hat: float
    ek_flatness: float


def convergence_residuals(state: FlowState, k: int) -> ConvergenceResiduals:
    """Hausdorff distance to the best-fit ball, its radius, and max |E_k - V_{n-k}/V_n|."""
    d_ball, r_hat = ball_residual(state.s, state.grid)
    ek = curvature_function(state.radii, k)
    flatness = float(np.max(np.abs(ek - mixed_ratio(state.volumes, k))))
    return ConvergenceResiduals(d_ball=d_ball, r_hat=r_hat, ek_flatness=flatness)


def ek_l1_deviation(state: FlowState, k: int) -> float:
    """int_M |E_k - mean E_k| d(mu)."""
    ek = curvature_function(state.radii, k)
    return state.surface_integral(np.abs(ek - mixed_ratio(state.volumes, k)))


def stability_pair(V: MixedVolumes, s: np.ndarray, grid: SphereGrid) -> tuple[float, float]:
    """(V_1^2 - V_0 V_2, d_H to the ball of radius r_1 about the Steiner point)."""
    stability = V[1] ** 2 - V[0] * V[2]
    ball = j_radius(V, 1) + grid.nodes @ steiner_point(s, grid)
    return stability, float(np.max(np.abs(s - ball)))


def rescaled_residual(V: MixedVolumes, s: np.ndarray, grid: SphereGrid) -> float:
    """d_H of the body scaled by 1/r_{n+1} to the unit ball about its Steiner point."""
    scale = j_radius(V, V.n + 1)
    centre = steiner_point(s, grid) / scale
    return float(np.max(np.abs(s / scale - 1.0 - grid.nodes @ centre)))


@dataclass(frozen=True)
class TsoReading:
    w_max: float
    denominator_min: float


def tso_quantity(
    state: FlowState, speed: SpeedSpec, center: np.ndarray, rho: float
) -> TsoReading:
    """max of speed / (u - c) with u = s - center.z and c = rho / 4."""
    c = rho / 4.0
    denominator = state.s - state.grid.nodes @ center - c
    d_min = float(denominator.min())
    if d_min <= 0:
        raise MonitorViolation(f"Tso denominator u - c = {d_min:.3e} is not positive at t = {state.t:.6g}")
    w = speed_field(state.radii, speed) / denominator
    return TsoReading(w_max=float(w.max()), denominator_min=d_min)


def tso_monitor(state: FlowState, speed: SpeedSpec) -> float:
    """W_max about the current inball centre with c = rho_minus / 4."""
    inout = inradius_outradius(state.s, state.grid)
    return tso_quantity(state, speed, inout.inball_center, inout.rho_minus).w_max


def tso_bound_candidates(alpha: float, c: float, elapsed: float | None) -> float:
    """max{(2(1+a)/a)^a c^-(a+1), (2/(1+a))^(a/(1+a)) c^-1 s^(-a/(1+a))}, s = time since the anchor."""
    uniform = (2.0 * (1.0 + alpha) / alpha) ** alpha * c ** (-(alpha + 1.0))
    if elapsed is None or elapsed <= 0:
        return uniform
    decaying = (2.0 / (1.0 + alpha)) ** (alpha / (1.0 + alpha)) / c * elapsed ** (-alpha / (1.0 + alpha))
    return max(uniform, decaying)


def persistence_window(alpha: float, rho: float) -> float:
    """tau = (1+alpha)^-1 (1 - 2^(-alpha-1)) rho^(alpha+1): the half inball persists this long."""
    return (1.0 - 2.0 ** (-alpha - 1.0)) * rho ** (alpha + 1.0) / (1.0 + alpha)


def _anchor(records: list[DiagRecord], t: float, alpha: float) -> DiagRecord | None:
    for rec in reversed(records):
        if rec.t < t and t - rec.t < persistence_window(alpha, rec.rho_minus):
            return rec
    return None


def build_record(
    state: FlowState,
    traj: Trajectory,
    term: GlobalTerm,
    step: int,
    directions: DirectionSet,
) -> DiagRecord:
    """All snapshot diagnostics of ``state``."""
    grid, V, n = state.grid, state.volumes, state.n
    k = traj.speed.k
    ek = curvature_function(state.radii, k)
    inout = inradius_outradius(state.s, grid)
    residuals = convergence_residuals(state, k)
    stability, d_steiner = stability_pair(V, state.s, grid)
    lam_plus, lam_minus, tol = reflection_profile(state.s, grid, directions)
    tso = tso_quantity(state, traj.speed, inout.inball_center, inout.rho_minus)

    tso_anchor = tso_bound = inball_margin = None
    alpha = traj.speed.alpha
    if alpha is not None:
        anchor = _anchor(traj.records, state.t, alpha)
        if anchor is not None:
            center = np.asarray(anchor.inball_center)
            inball_margin = float(np.min(state.s - grid.nodes @ center)) - anchor.rho_minus / 2.0
            if inball_margin > 0:
                tso_anchor = tso_quantity(state, traj.speed, center, anchor.rho_minus).w_max
            tso_bound = tso_bound_candidates(alpha, anchor.rho_minus / 4.0, state.t - anchor.t)

    constraint_residual = None
    if state.c0 is not None:
        constraint_residual = abs(traj.constraint.value(*state.constraint_radii(k)) - state.c0)

    return DiagRecord(
        t=state.t,
        step=step,
        volumes=list(V.values),
        radii=list(all_radii(V)),
        iso=isoperimetric_ratio(V, n + 1 - k),
        iso_1=isoperimetric_ratio(V, 1),
        phi=term.phi,
        ek_min=float(ek.min()),
        ek_max=float(ek.max()),
        r_min=state.radii.min_radius,
        r_max=state.radii.max_radius,
        rho_minus=inout.rho_minus,
        rho_plus=inout.rho_plus,
        steiner=steiner_point(state.s, grid).tolist(),
        inball_center=inout.inball_center.tolist(),
        d_ball=residuals.d_ball,
        r_hat=residuals.r_hat,
        ek_flatness=residuals.ek_flatness,
        ek_l1=ek_l1_deviation(state, k),
        tso_w=tso.w_max,
        tso_w_anchor=tso_anchor,
        tso_bound=tso_bound,
        inball_margin=inball_margin,
        stability=stability,
        d_steiner_ball=d_steiner,
        rescaled_residual=rescaled_residual(V, state.s, grid),
        chebyshev_sum=term.chebyshev_sum,
        constraint_residual=constraint_residual,
        lambda_plus=lam_plus.tolist(),
        lambda_minus=lam_minus.tolist(),
        tol_contain=tol,
    )


# ── trajectory reports ───────────────────────────────────────


@dataclass
class MonotonicityReport:
    """Per-step deltas of V_{n+1}, V_{n+1-k} and I_{n+1-k} against their expected signs."""

    times: np.ndarray
    deltas: dict[str, np.ndarray] = field(default_factory=dict)
    excess: dict[str, np.ndarray] = field(default_factory=dict)  # > 0 means violated
    final_iso: float = float("nan")

    @property
    def worst(self) -> dict[str, tuple[float, float]]:
        """quantity -> (largest excess, time of the interval start)."""
        out = {}
        for name, values in self.excess.items():
            if values.size:
                i = int(np.argmax(values))
                out[name] = (float(values[i]), float(self.times[i]))
        return out

    @property
    def violations(self) -> list[str]:
        return [f"{name} at t = {t:.6g} (excess {e:.3e})" for name, (e, t) in self.worst.items() if e > 0]

    @property
    def passed(self) -> bool:
        return not self.violations


def monotonicity_report(traj: Trajectory, *, tol: float | None = None) -> MonotonicityReport:
    """Check V_{n+1} non-decreasing, V_{n+1-k} and I_{n+1-k} non-increasing per step.

    ``tol`` replaces the per-step Euler budget with a fixed absolute tolerance.
    """
    n, k = traj.n, traj.k
    logs = traj.steps
    if len(logs) < 2:
        raise ValueError("monotonicity needs at least two states")
    volumes = np.array([log.volumes for log in logs])
    iso = np.array([log.iso for log in logs])
    budget = np.array([log.tol_step for log in logs[:-1]]) if tol is None else np.full(len(logs) - 1, tol)

    report = MonotonicityReport(times=np.array([log.t for log in logs[:-1]]), final_iso=float(iso[-1]))
    d_vol = np.diff(volumes[:, n + 1])
    d_quer = np.diff(volumes[:, n + 1 - k])
    d_iso = np.diff(iso)
    report.deltas = {f"V_{n + 1}": d_vol, f"V_{n + 1 - k}": d_quer, f"I_{n + 1 - k}": d_iso}
    report.excess[f"V_{n + 1}"] = -d_vol - budget
    if not traj.constraint.is_external:
        report.excess[f"V_{n + 1 - k}"] = d_quer - budget
    report.excess[f"I_{n + 1 - k}"] = d_iso - budget
    return report


@dataclass
class ReflectionReport:
    max_increase_plus: float  # largest rise of lambda_plus between records
    max_decrease_minus: float  # largest fall of lambda_minus between records
    final_gap: float  # max |lambda_plus - lambda_minus| at the last record
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_increase_plus <= self.tolerance and self.max_decrease_minus <= self.tolerance


def reflection_report(traj: Trajectory) -> ReflectionReport:
    """lambda_plus non-increasing and lambda_minus non-decreasing across records."""
    plus = np.array([r.lambda_plus for r in traj.records])
    minus = np.array([r.lambda_minus for r in traj.records])
    tol = max(r.tol_contain for r in traj.records)
    increase = float(np.max(np.diff(plus, axis=0), initial=0.0))
    decrease = float(np.max(-np.diff(minus, axis=0), initial=0.0))
    gap = float(np.max(np.abs(plus[-1] - minus[-1])))
    return ReflectionReport(increase, decrease, gap, tol)


def trajectory_failures(traj: Trajectory) -> list[str]:
    """Monitors evaluated over the whole record list (reflection monotonicity)."""
    if len(traj.records) < 2:
        return []
    report = reflection_report(traj)
    if report.passed:
        return []
    return [
        f"reflection half-widths not monotone (lambda_plus rise {report.max_increase_plus:.3e}, "
        f"lambda_minus fall {report.max_decrease_minus:.3e}, tolerance {report.tolerance:.3e})"
    ]


@dataclass
class RadiusBoundsReport:
    sigma0: float
    diskant_margin: float  # min over records of rho_minus - Diskant bound
    diameter_margin: float  # min over records of sigma0^(n(n+1-k)/k) - r_1/r_{n+1}
    ordering_margin: float  # min over records of min(r_{n+1} - rho_minus, r_1 - r_{n+1})

    @property
    def passed(self) -> bool:
        return min(self.diskant_margin, self.diameter_margin, self.ordering_margin) >= -1e-9


def radius_bounds_report(traj: Trajectory) -> RadiusBoundsReport:
    """Diskant inradius bound, diameter control by the initial ratio, and rho_- <= r_{n+1} <= r_1."""
    n, k = traj.n, traj.k
    records = traj.records
    iso0 = records[0].iso
    sigma0 = iso0 ** (1.0 / ((n + 1) * (n + 1 - k)))
    diam_cap = sigma0 ** (n * (n + 1 - k) / k)
    diskant = ratio = order = float("inf")
    for rec in records:
        V = MixedVolumes(n=n, values=tuple(rec.volumes))
        diskant = min(diskant, rec.rho_minus - diskant_lower_bound(V))
        ratio = min(ratio, diam_cap - rec.radii[0] / rec.radii[n])
        order = min(order, rec.radii[n] - rec.rho_minus, rec.radii[0] - rec.radii[n])
    return RadiusBoundsReport(sigma0=sigma0, diskant_margin=diskant, diameter_margin=ratio, ordering_margin=order)


def inball_persistence(traj: Trajectory) -> list[float]:
    """inball margins min_z(s - p0.z) - rho0/2 for records inside an earlier record's window."""
    return [r.inball_margin for r in traj.records if r.inball_margin is not None]


@dataclass
class SpeedBoundsReport:
    peak_time_fraction: float  # where sup_t max E_k is attained, as a fraction of the run
    late_min_ratio: float  # min over the last three quarters of min E_k / r_hat^-k


def speed_bounds_report(traj: Trajectory) -> SpeedBoundsReport:
    times = traj.times
    ek_max = np.array([r.ek_max for r in traj.records])
    ek_min = np.array([r.ek_min for r in traj.records])
    span = times[-1] - times[0]
    peak = float((times[int(np.argmax(ek_max))] - times[0]) / span) if span > 0 else 0.0
    late = times >= times[0] + 0.25 * span
    limit = traj.r_hat ** (-traj.k)
    return SpeedBoundsReport(peak_time_fraction=peak, late_min_ratio=float(ek_min[late].min() / limit))
