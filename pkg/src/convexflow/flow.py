"""Time integration of the support-function PDE ds/dt = phi(t) - speed.

Each step is forward Euler followed by an optional constraint projection: a
scalar shift s + delta (an outward parallel body) that restores
G(r_{n+1-k}, r_{n+1}) to its initial value.  The global term phi uses the same
quadrature as the monitors, so spheres are stationary to rounding.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from convexflow.diagnostics import DirectionSet, build_record, trajectory_failures
from convexflow.errors import (
    ConstraintViolation,
    ConvexityError,
    MonitorViolation,
    NonConvexInput,
    ProjectionFailure,
)
from convexflow.geometry import (
    RadiiField,
    convexity_threshold,
    elementary_symmetric,
    principal_radii,
    tau_field,
)
from convexflow.mixed_volumes import (
    MixedVolumes,
    ball_residual,
    isoperimetric_ratio,
    j_radius,
    volumes_from_radii,
)
from convexflow.models import DiagRecord, FlowConfig
from convexflow.shapes import make_shape
from convexflow.speeds import (
    ConstraintSpec,
    SpeedSpec,
    curvature_function,
    diffusion_coefficient,
    parse_constraint,
    speed_field,
)
from convexflow.sphere_grid import SphereGrid, build_grid, integrate, sphere_area

logger = logging.getLogger(__name__)

SANDWICH_RTOL = 1e-10
PROJECTION_SKIP_RTOL = 1e-15


@dataclass(frozen=True, eq=False)
class FlowState:
    """Support function at one time with derived fields consistent with ``s``."""

    t: float
    s: np.ndarray
    grid: SphereGrid
    tau: np.ndarray
    radii: RadiiField
    volumes: MixedVolumes
    c0: float | None = None
    phi: float | None = None

    @classmethod
    def from_support(
        cls,
        s: np.ndarray,
        grid: SphereGrid,
        *,
        t: float = 0.0,
        c0: float | None = None,
        eps_convex: float | None = None,
    ) -> FlowState:
        """Build a state; raises LossOfConvexity when tau is not positive definite."""
        s = grid.check_field(s)
        if eps_convex is None:
            eps_convex = convexity_threshold(s, grid)
        tau = tau_field(s, grid)
        radii = principal_radii(tau, eps_convex)
        volumes = volumes_from_radii(s, radii, grid)
        return cls(t=t, s=s, grid=grid, tau=tau, radii=radii, volumes=volumes, c0=c0)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def area_density(self) -> np.ndarray:
        """sigma_n(r): d(mu) = area_density * d(sigma)."""
        return elementary_symmetric(self.radii.radii, self.n)

    def surface_integral(self, f: np.ndarray) -> float:
        """int_M f d(mu) as a sphere integral."""
        return integrate(f * self.area_density, self.grid)

    def constraint_radii(self, k: int) -> tuple[float, float]:
        """(a, b) = (r_{n+1-k}, r_{n+1})."""
        return j_radius(self.volumes, self.n + 1 - k), j_radius(self.volumes, self.n + 1)


# ── global term ──────────────────────────────────────────────


@dataclass(frozen=True)
class GlobalTerm:
    phi: float
    lower: float  # (1/V_n) int speed d(mu)
    upper: float  # (1/V_{n-k}) int E_k speed d(mu)
    chebyshev_sum: float  # |M| int E_k speed - int E_k int speed


def evaluate_global_term(
    state: FlowState,
    constraint: ConstraintSpec,
    speed: SpeedSpec,
    *,
    speed_values: np.ndarray | None = None,
) -> GlobalTerm:
    n, k = state.n, speed.k
    V = state.volumes
    if speed_values is None:
        speed_values = speed_field(state.radii, speed)
    ek = curvature_function(state.radii, k)
    int_speed = state.surface_integral(speed_values)
    int_ek_speed = state.surface_integral(ek * speed_values)
    lower = int_speed / V[n]
    upper = int_ek_speed / V[n - k]
    cheb = V[n] * int_ek_speed - V[n - k] * int_speed

    if constraint.is_external:
        phi = float(constraint.external_phi(state.t, lower))
        if phi < lower * (1.0 - SANDWICH_RTOL):
            raise ConstraintViolation(
                f"external phi = {phi:.6g} below the volume bound {lower:.6g} at t = {state.t:.6g}"
            )
        return GlobalTerm(phi=phi, lower=lower, upper=upper, chebyshev_sum=cheb)

    a, b = state.constraint_radii(k)
    ga, gb = constraint.derivatives(a, b)
    omega = V.omega
    weight_a = ga * omega ** (-1.0 / (n + 1 - k)) * V[n + 1 - k] ** ((k - n) / (n + 1 - k))
    weight_b = gb * omega ** (-1.0 / (n + 1)) * V[n + 1] ** (-n / (n + 1))
    phi = (weight_a * int_ek_speed + weight_b * int_speed) / (weight_a * V[n - k] + weight_b * V[n])

    slack = SANDWICH_RTOL * max(abs(lower), abs(upper))
    if not lower - slack <= phi <= upper + slack:
        raise MonitorViolation(
            f"global term {phi:.12g} outside [{lower:.12g}, {upper:.12g}] at t = {state.t:.6g}"
        )
    return GlobalTerm(phi=phi, lower=lower, upper=upper, chebyshev_sum=cheb)


def global_term(state: FlowState, constraint: ConstraintSpec, speed: SpeedSpec) -> float:
    """phi(t) keeping G(r_{n+1-k}, r_{n+1}) fixed, or the checked external value."""
    return evaluate_global_term(state, constraint, speed).phi


# ── time stepping ────────────────────────────────────────────


def stable_dt(state: FlowState, speed: SpeedSpec, cfl: float = 0.2) -> float:
    """cfl * min over nodes of h^2 / D for the linearised diffusion D."""
    diffusion = diffusion_coefficient(state.radii, speed)
    return float(cfl * np.min(state.grid.spacing**2 / diffusion))


def constraint_value(state: FlowState, constraint: ConstraintSpec, k: int) -> float:
    return constraint.value(*state.constraint_radii(k))


def _project(
    s: np.ndarray,
    radii: RadiiField,
    grid: SphereGrid,
    constraint: ConstraintSpec,
    k: int,
    c0: float,
    bound: float,
) -> float:
    """Scalar delta with G(r_{n+1-k}(s+delta), r_{n+1}(s+delta)) = c0."""
    n = grid.n

    def residual(delta: float) -> float:
        V = volumes_from_radii(s + delta, radii.shifted(delta), grid)
        return constraint.value(j_radius(V, n + 1 - k), j_radius(V, n + 1)) - c0

    r0 = residual(0.0)
    if abs(r0) <= PROJECTION_SKIP_RTOL * abs(c0):
        return 0.0
    lo, hi = residual(-bound), residual(bound)
    if lo * hi > 0:
        raise ProjectionFailure(
            f"constraint residual {r0:.3e} not bracketed by |delta| <= {bound:.3e}"
        )
    scale = max(float(np.max(np.abs(s))), 1.0)
    return brentq(residual, -bound, bound, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=200)


def step(
    state: FlowState,
    dt: float,
    speed: SpeedSpec,
    constraint: ConstraintSpec,
    *,
    projection: bool = True,
    term: GlobalTerm | None = None,
) -> FlowState:
    """One forward Euler step s <- s + dt (phi - speed), then the constraint projection."""
    grid = state.grid
    speed_values = speed_field(state.radii, speed)
    if term is None:
        term = evaluate_global_term(state, constraint, speed, speed_values=speed_values)
    s_new = state.s + dt * (term.phi - speed_values)

    eps_convex = convexity_threshold(s_new, grid)
    if projection and not constraint.is_external and state.c0 is not None:
        radii = principal_radii(tau_field(s_new, grid), eps_convex)
        bound = 2.0 * dt * float(np.max(np.abs(speed_values)))
        delta = _project(s_new, radii, grid, constraint, speed.k, state.c0, bound)
        if delta != 0.0:
            s_new = s_new + delta

    new_state = FlowState.from_support(s_new, grid, t=state.t + dt, c0=state.c0, eps_convex=eps_convex)
    return new_state


# ── runs ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class StepLog:
    """Per-state scalars used by the monotonicity checks; ``dt`` is the step taken from it."""

    t: float
    dt: float
    volumes: tuple[float, ...]
    iso: float
    phi: float
    max_speed: float

    @property
    def tol_step(self) -> float:
        """Euler truncation budget 10 dt^2 (max speed)^2 omega_n."""
        return 10.0 * self.dt**2 * self.max_speed**2 * sphere_area(len(self.volumes) - 2)


@dataclass
class Trajectory:
    config: FlowConfig
    grid: SphereGrid
    speed: SpeedSpec
    constraint: ConstraintSpec
    initial: FlowState
    final: FlowState | None = None
    records: list[DiagRecord] = field(default_factory=list)
    steps: list[StepLog] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    r_hat: float = float("nan")
    constraint_residual: float | None = None
    monitor_failures: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def k(self) -> int:
        return self.speed.k

    @property
    def step_count(self) -> int:
        return max(len(self.steps) - 1, 0)

    @property
    def phi_bounds(self) -> tuple[float, float]:
        """Observed (min, max) of the global term."""
        phis = [log.phi for log in self.steps]
        if not phis:
            return float("nan"), float("nan")
        return min(phis), max(phis)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def speed_spec_for(config: FlowConfig) -> SpeedSpec:
    if config.is_homogeneous:
        return SpeedSpec.homogeneous(config.k, config.alpha)
    return SpeedSpec.nonhomogeneous(config.k, config.mu)


def check_step(previous: StepLog, current: StepLog, k: int, *, external: bool = False) -> list[str]:
    """Discrete monotonicity of V_{n+1}, V_{n+1-k} and I_{n+1-k} over one step."""
    n = len(current.volumes) - 2
    tol = previous.tol_step
    failures = []
    if current.volumes[n + 1] - previous.volumes[n + 1] < -tol:
        failures.append(f"V_{n + 1} decreased at t = {current.t:.6g}")
    if not external and current.volumes[n + 1 - k] - previous.volumes[n + 1 - k] > tol:
        failures.append(f"V_{n + 1 - k} increased at t = {current.t:.6g}")
    if current.iso - previous.iso > tol:
        failures.append(f"I_{n + 1 - k} increased at t = {current.t:.6g}")
    return failures


def run(
    config: FlowConfig,
    *,
    initial: np.ndarray | None = None,
    constraint: ConstraintSpec | None = None,
    record: bool = True,
) -> Trajectory:
    """Evolve until the body is a ball to ``tol_conv``, or t_max, max_steps or a monitor trip.

    ``initial`` overrides the configured shape and ``constraint`` the configured
    constraint (e.g. a programmatic external phi).  With ``record=False`` only
    the final snapshot is recorded.
    """
    started = time.monotonic()
    grid = build_grid(config.n, config.resolution)
    speed = speed_spec_for(config)
    if constraint is None:
        constraint = parse_constraint(config.constraint)
    s0 = make_shape(config.shape, grid) if initial is None else grid.check_field(initial)

    try:
        state = FlowState.from_support(s0, grid)
    except ConvexityError as exc:
        raise NonConvexInput(f"initial body is not strictly convex: {exc}",
                             min_radius=exc.min_radius) from exc
    c0 = None if constraint.is_external else constraint_value(state, constraint, config.k)
    state = replace(state, c0=c0)

    traj = Trajectory(config=config, grid=grid, speed=speed, constraint=constraint, initial=state)
    directions = DirectionSet.sample(config.n, config.seed)
    iso_index = config.n + 1 - config.k
    logger.info(
        "Run start: n=%d k=%d speed=%s constraint=%s %r shape=%s",
        config.n, config.k, speed.label, constraint.label, grid, config.shape,
    )

    step_count = 0
    recorded = False
    while True:
        speed_values = speed_field(state.radii, speed)
        term = evaluate_global_term(state, constraint, speed, speed_values=speed_values)
        state = replace(state, phi=term.phi)
        residual, r_hat = ball_residual(state.s, grid)
        log = StepLog(
            t=state.t,
            dt=0.0,
            volumes=state.volumes.values,
            iso=isoperimetric_ratio(state.volumes, iso_index),
            phi=term.phi,
            max_speed=float(np.max(speed_values)),
        )
        if traj.steps:
            for failure in check_step(traj.steps[-1], log, config.k, external=constraint.is_external):
                logger.warning("Monitor: %s", failure)
                traj.monitor_failures.append(failure)
        traj.steps.append(log)

        recorded = record and step_count % config.snapshot_every == 0
        if recorded:
            rec = build_record(state, traj, term, step_count, directions)
            traj.records.append(rec)
            logger.debug("t=%.6g step=%d I=%.12g d_ball=%.3e", state.t, step_count, rec.iso, rec.d_ball)

        if residual < config.tol_conv * r_hat:
            traj.converged = True
            traj.stop_reason = "converged"
        elif state.t >= config.t_max:
            traj.stop_reason = "t_max"
        elif step_count >= config.max_steps:
            traj.stop_reason = "max_steps"
        elif traj.monitor_failures and config.strict_monitors:
            traj.stop_reason = "monitor"
        if traj.stop_reason:
            break

        dt = min(stable_dt(state, speed, config.cfl), config.t_max - state.t)
        traj.steps[-1] = replace(log, dt=dt)
        state = step(state, dt, speed, constraint, projection=config.projection, term=term)
        step_count += 1

    if not recorded:
        traj.records.append(build_record(state, traj, term, step_count, directions))
    for failure in trajectory_failures(traj):
        logger.warning("Monitor: %s", failure)
        traj.monitor_failures.append(failure)

    traj.final = state
    traj.r_hat = r_hat
    if c0 is not None:
        traj.constraint_residual = abs(constraint.value(r_hat, r_hat) - c0)
    traj.wall_time = time.monotonic() - started
    logger.info(
        "Run stop: %s after %d steps at t=%.6g, r_hat=%.10g, wall %.1fs",
        traj.stop_reason, step_count, state.t, r_hat, traj.wall_time,
    )
    return traj
