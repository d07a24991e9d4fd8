"""Property and oracle checks on small grids.

Run through the CLI:
    convexflow verify [--config convexflow.toml]

Each check returns a CheckResult; a check that raises a ConvexFlowError is
reported as failed with the error text, never propagated.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np
from rich.console import Console
from rich.table import Table
from scipy.special import ellipe

from convexflow.config import VerifySettings
from convexflow.diagnostics import monotonicity_report
from convexflow.errors import ConvexFlowError
from convexflow.flow import FlowState, constraint_value, run, stable_dt, step
from convexflow.geometry import embed_boundary, tau_field
from convexflow.mixed_volumes import (
    af_audit,
    j_radius,
    quadrature_tolerance,
    quermassintegrals,
    steiner_point,
)
from convexflow.models import DEFAULT_RESOLUTION, FlowConfig
from convexflow.shapes import catalog, make_shape, random_smooth_shape
from convexflow.speeds import MU_CATALOG, ConstraintSpec, SpeedSpec, admissibility_probe
from convexflow.sphere_grid import SphereGrid, build_grid

logger = logging.getLogger(__name__)

ELLIPSE_PERIMETER = 8.0 * ellipe(0.75)  # ellipse(2, 1): 9.6884482...
POLYGON_POINTS = 10_000


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def polygon_measures(s: np.ndarray, grid: SphereGrid) -> tuple[float, float]:
    """(area, perimeter) of the polygon through the embedded boundary points (n=1)."""
    points = embed_boundary(s, grid)
    x, y = points[:, 0], points[:, 1]
    area = 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    perimeter = float(np.sum(np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)))
    return area, perimeter


def _grid_for(n: int, settings: VerifySettings) -> SphereGrid:
    return build_grid(n, settings.resolution_1 if n == 1 else settings.resolution_2)


# ── checks ───────────────────────────────────────────────────


def check_ball_fixed_point(settings: VerifySettings) -> CheckResult:
    """s = 1.3 stays put for 100 steps for every (n, k) and alpha in {0.5, 1, 2}."""
    worst = 0.0
    for n, k in ((1, 1), (2, 1), (2, 2)):
        grid = _grid_for(n, settings)
        constraint = ConstraintSpec.volume()
        for alpha in (0.5, 1.0, 2.0):
            speed = SpeedSpec.homogeneous(k, alpha)
            state = FlowState.from_support(np.full(grid.shape, 1.3), grid)
            state = replace(state, c0=constraint_value(state, constraint, k))
            for _ in range(100):
                state = step(state, stable_dt(state, speed), speed, constraint)
            worst = max(worst, float(np.max(np.abs(state.s - 1.3))))
    return CheckResult("ball fixed point", worst < 1e-12, f"max |s - 1.3| = {worst:.2e}")


def check_translation(settings: VerifySettings) -> CheckResult:
    """tau is unchanged by a translation and the Steiner point moves with it."""
    worst_tau = worst_steiner = 0.0
    for n in (1, 2):
        grid = _grid_for(n, settings)
        shift = np.array([0.3, -0.2, 0.1][: n + 1])
        s = make_shape(catalog(n)["ellipse" if n == 1 else "ellipsoid"], grid)
        moved = s + grid.first_harmonic(shift)
        worst_tau = max(worst_tau, float(np.max(np.abs(tau_field(moved, grid) - tau_field(s, grid)))))
        delta = steiner_point(moved, grid) - steiner_point(s, grid)
        worst_steiner = max(worst_steiner, float(np.max(np.abs(delta - shift))))
    passed = worst_tau < 1e-10 and worst_steiner < 1e-10
    return CheckResult("translation invariance", passed,
                       f"tau {worst_tau:.2e}, Steiner point {worst_steiner:.2e}")


def check_ellipse_oracle(settings: VerifySettings) -> CheckResult:
    """V_1, V_2 and r_1 of ellipse(2, 1) against the elliptic-integral perimeter."""
    grid = build_grid(1, DEFAULT_RESOLUTION[1])
    V = quermassintegrals(make_shape("ellipsoid:2,1", grid), grid)
    err_v1 = abs(V[1] - ELLIPSE_PERIMETER) / ELLIPSE_PERIMETER
    err_v2 = abs(V[2] - 4.0 * math.pi) / (4.0 * math.pi)
    err_r1 = abs(j_radius(V, 1) - ELLIPSE_PERIMETER / (2.0 * math.pi))
    # V_2 carries the O(h^2) stencil error; V_1 = int s is spectrally accurate
    passed = err_v1 < 1e-10 and err_v2 < 1e-3 and err_r1 < 1e-9
    return CheckResult("ellipse oracle", passed,
                       f"V1 rel {err_v1:.1e}, V2 rel {err_v2:.1e}, r1 abs {err_r1:.1e}")


def check_catalog_af(settings: VerifySettings) -> CheckResult:
    """Every catalog shape is strictly convex and satisfies the AF family within quadrature error."""
    failures = []
    worst = math.inf
    for n in (1, 2):
        grid = build_grid(n, DEFAULT_RESOLUTION[n])
        coarse = grid.coarsened()
        for name, spec in catalog(n).items():
            V = quermassintegrals(make_shape(spec, grid), grid)
            tolerance = quadrature_tolerance(V, quermassintegrals(make_shape(spec, coarse), coarse))
            report = af_audit(V, tolerance)
            worst = min(worst, report.worst)
            if not report.passed:
                failures.append(f"n={n} {name}: {', '.join(report.violations)}")
    detail = "; ".join(failures) if failures else f"worst relative residual {worst:.2e}"
    return CheckResult("catalog AF audit", not failures, detail)


def check_polygon_oracle(settings: VerifySettings, count: int = 5) -> CheckResult:
    """Polygon area/perimeter through 10^4 boundary points match V_2/2 and V_1."""
    grid = build_grid(1, POLYGON_POINTS)
    rng = np.random.default_rng(settings.seed)
    worst = 0.0
    for _ in range(count):
        s = make_shape(random_smooth_shape(rng, 1), grid)
        V = quermassintegrals(s, grid)
        area, perimeter = polygon_measures(s, grid)
        worst = max(worst, abs(area - V[2] / 2.0) / area, abs(perimeter - V[1]) / perimeter)
    return CheckResult("polygon oracle", worst < 1e-6, f"worst relative error {worst:.2e} over {count} shapes")


def check_admissibility(settings: VerifySettings) -> CheckResult:
    """z + z^3 passes the structural conditions, the bounded 1 - exp(-z) fails them."""
    good = admissibility_probe(MU_CATALOG["z+z^3"])
    bad = admissibility_probe(MU_CATALOG["1-exp(-z)"])
    passed = good.passed and not bad.passed
    return CheckResult("admissibility probe", passed,
                       f"z+z^3 {'ok' if good.passed else good.failures}; "
                       f"1-exp(-z) fails {', '.join(bad.failures) or 'nothing'}")


def _short_run(n: int, settings: VerifySettings, t_max: float) -> CheckResult:
    k = n
    config = FlowConfig(
        n=n, k=k, resolution=settings.resolution_1 if n == 1 else settings.resolution_2,
        t_max=t_max, tol_conv=1e-6, seed=settings.seed,
    )
    traj = run(config)
    report = monotonicity_report(traj)
    residual = traj.records[-1].constraint_residual or 0.0
    passed = report.passed and not traj.monitor_failures and residual < 1e-10 * traj.initial.c0
    detail = (f"{traj.step_count} steps to t={traj.final.t:.3g}, I {traj.steps[0].iso:.6f} -> "
              f"{report.final_iso:.6f}, G drift {residual:.1e}")
    if report.violations:
        detail += "; " + "; ".join(report.violations)
    return CheckResult(f"monotonicity n={n}", passed, detail)


def check_flow_circle(settings: VerifySettings) -> CheckResult:
    """Volume-preserving curve shortening of ellipse(2, 1): V_2 fixed, V_1 and I_1 decrease."""
    return _short_run(1, settings, settings.t_max)


def check_flow_surface(settings: VerifySettings) -> CheckResult:
    """Volume-preserving Gauss-curvature flow of the n=2 default ellipsoid for a short time."""
    return _short_run(2, settings, settings.t_max / 20.0)


CHECKS: tuple[Callable[[VerifySettings], CheckResult], ...] = (
    check_ball_fixed_point,
    check_translation,
    check_ellipse_oracle,
    check_catalog_af,
    check_polygon_oracle,
    check_admissibility,
    check_flow_circle,
    check_flow_surface,
)


def run_checks(settings: VerifySettings | None = None, *, console: Console | None = None) -> list[CheckResult]:
    settings = settings or VerifySettings()
    results = []
    for check in CHECKS:
        name = check.__name__.removeprefix("check_").replace("_", " ")
        started = time.monotonic()
        if console is not None:
            with console.status(f"[bold cyan]Checking {name}..."):
                result = _guarded(check, settings)
        else:
            result = _guarded(check, settings)
        result.seconds = time.monotonic() - started
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, "Check %s: %s (%s)", result.name, "pass" if result.passed else "FAIL", result.detail)
        results.append(result)
    return results


def _guarded(check: Callable[[VerifySettings], CheckResult], settings: VerifySettings) -> CheckResult:
    try:
        return check(settings)
    except ConvexFlowError as exc:
        return CheckResult(check.__name__.removeprefix("check_").replace("_", " "), False,
                           f"{type(exc).__name__}: {exc}")


def build_checks_table(results: list[CheckResult]) -> Table:
    table = Table(title="convexflow verify", show_lines=False)
    table.add_column("Check", style="cyan")
    table.add_column("Result", justify="center", width=6)
    table.add_column("Detail")
    table.add_column("Time", justify="right", width=8)
    for r in results:
        mark = "[bold green]pass[/bold green]" if r.passed else "[bold red]FAIL[/bold red]"
        table.add_row(r.name, mark, r.detail, f"{r.seconds:.1f}s")
    return table
