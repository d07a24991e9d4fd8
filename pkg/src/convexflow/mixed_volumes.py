"""Quermassintegrals, radii, isoperimetric ratios and the Alexandrov-Fenchel audit.

Under the Gauss map d(mu) = sigma_n(r) d(sigma), and E_j(kappa) sigma_n(r) =
sigma_{n-j}(r) / C(n, j), so every quermassintegral is a sphere integral of a
symmetric function of the principal radii:

    V_m     = int E_m(r) d(sigma)              m = 0..n
    V_{n+1} = int s sigma_n(r) d(sigma)        ((n+1) times the enclosed volume)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from convexflow.errors import GridMismatch
from convexflow.geometry import (
    RadiiField,
    elementary_symmetric,
    embed_boundary,
    normalized_symmetric,
    principal_radii,
    tau_field,
)
from convexflow.sphere_grid import SphereGrid, integrate, sphere_area

logger = logging.getLogger(__name__)

STENCIL_ORDER = 2
CHEBYSHEV_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class MixedVolumes:
    """The vector (V_0, ..., V_{n+1}) of one body."""

    n: int
    values: tuple[float, ...]

    def __getitem__(self, j: int) -> float:
        return self.values[j]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def omega(self) -> float:
        return sphere_area(self.n)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


def volumes_from_radii(s: np.ndarray, radii: RadiiField, grid: SphereGrid) -> MixedVolumes:
    n = grid.n
    values = [integrate(normalized_symmetric(radii.radii, m), grid) for m in range(n + 1)]
    values.append(integrate(s * elementary_symmetric(radii.radii, n), grid))
    return MixedVolumes(n=n, values=tuple(values))


def quermassintegrals(
    s: np.ndarray, grid: SphereGrid, radii: RadiiField | None = None
) -> MixedVolumes:
    """V_0 .. V_{n+1} of the body with support function s.

    Raises LossOfConvexity when tau is not positive definite.
    """
    s = grid.check_field(s)
    if radii is None:
        radii = principal_radii(tau_field(s, grid))
    return volumes_from_radii(s, radii, grid)


def j_radius(V: MixedVolumes, j: int) -> float:
    """r_j = (V_j / omega_n)^(1/j), the radius of the ball sharing V_j."""
    if not 1 <= j <= V.n + 1:
        raise ValueError(f"j must lie in 1..{V.n + 1}, got {j}")
    return (V[j] / V.omega) ** (1.0 / j)


def all_radii(V: MixedVolumes) -> tuple[float, ...]:
    return tuple(j_radius(V, j) for j in range(1, V.n + 2))


def isoperimetric_ratio(V: MixedVolumes, ell: int) -> float:
    """I_l = V_l^(n+1) / (V_{n+1}^l V_0^(n+1-l)); >= 1 with equality for balls."""
    n = V.n
    if not 1 <= ell <= n:
        raise ValueError(f"ell must lie in 1..{n}, got {ell}")
    # log form keeps the high powers well scaled
    log_ratio = (n + 1) * np.log(V[ell]) - ell * np.log(V[n + 1]) - (n + 1 - ell) * np.log(V[0])
    return float(np.exp(log_ratio))


def mixed_ratio(V: MixedVolumes, k: int) -> float:
    """V_{n-k} / V_n, the mean of E_k over the boundary."""
    return V[V.n - k] / V[V.n]


def diskant_lower_bound(V: MixedVolumes) -> float:
    """r_{n+1} (sigma - (sigma^{n+1} - 1)^{1/(n+1)}) with sigma = r_n / r_{n+1}."""
    n = V.n
    sigma = j_radius(V, n) / j_radius(V, n + 1)
    excess = max(sigma ** (n + 1) - 1.0, 0.0)
    return j_radius(V, n + 1) * (sigma - excess ** (1.0 / (n + 1)))


# ── Alexandrov-Fenchel audit ─────────────────────────────────


@dataclass
class AFReport:
    """Residuals of the Alexandrov-Fenchel family; negative beyond tolerance is a violation."""

    tolerance: float
    neighbour: dict[int, float] = field(default_factory=dict)  # R1(j)
    ball: dict[tuple[int, int], float] = field(default_factory=dict)  # R2(i, j)
    relative: dict[str, float] = field(default_factory=dict)
    stability: float = 0.0  # V_1^2 - V_0 V_2

    @property
    def violations(self) -> list[str]:
        return [name for name, rel in self.relative.items() if rel < -self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def worst(self) -> float:
        return min(self.relative.values()) if self.relative else 0.0


def af_audit(V: MixedVolumes, tolerance: float = 1e-10) -> AFReport:
    """Evaluate the neighbour and ball-comparison AF inequalities.

    ``tolerance`` is relative: each residual is divided by its leading term.
    """
    n = V.n
    omega = V.omega
    report = AFReport(tolerance=tolerance)
    for j in range(1, n + 1):
        lead = V[n + 1 - j] ** 2
        residual = lead - V[n - j] * V[n + 2 - j]
        report.neighbour[j] = residual
        report.relative[f"R1({j})"] = residual / lead
    for j in range(1, n + 1):
        for i in range(j):
            lead = V[n + 1 - j] ** (n + 1 - i)
            residual = lead - omega ** (j - i) * V[n + 1 - i] ** (n + 1 - j)
            report.ball[(i, j)] = residual
            report.relative[f"R2({i},{j})"] = residual / lead
    report.stability = V[1] ** 2 - V[0] * V[2]
    report.relative["S"] = report.stability / V[1] ** 2
    for name in report.violations:
        logger.warning("Alexandrov-Fenchel residual %s = %.3e below -%.1e",
                       name, report.relative[name], tolerance)
    return report


def quadrature_tolerance(
    fine: MixedVolumes, coarse: MixedVolumes, *, factor: float = 10.0, floor: float = 1e-12
) -> float:
    """10x the Richardson estimate of the relative quadrature error of ``fine``."""
    rel = [abs(f - c) / abs(f) for f, c in zip(fine.values, coarse.values)]
    richardson = max(rel) / (2**STENCIL_ORDER - 1)
    return max(factor * richardson, floor)


# ── centres and radii ────────────────────────────────────────


def steiner_point(s: np.ndarray, grid: SphereGrid) -> np.ndarray:
    """p = (n+1)/omega_n * int s(z) z d(sigma)."""
    s = grid.check_field(s)
    return (grid.n + 1) / grid.area * integrate(s[..., None] * grid.nodes, grid)


def best_fit_ball(s: np.ndarray, grid: SphereGrid) -> tuple[float, np.ndarray]:
    """(r_hat, p_hat): mean of the Steiner-centred support function and the Steiner point."""
    p = steiner_point(s, grid)
    r_hat = integrate(s - grid.nodes @ p, grid) / grid.area
    return r_hat, p


def ball_residual(s: np.ndarray, grid: SphereGrid) -> tuple[float, float]:
    """(max |s - (r_hat + p_hat.z)|, r_hat): Hausdorff distance to the best-fit ball."""
    r_hat, p = best_fit_ball(s, grid)
    return float(np.max(np.abs(s - r_hat - grid.nodes @ p))), r_hat


@dataclass(frozen=True)
class InOutRadii:
    rho_minus: float
    rho_plus: float
    inball_center: np.ndarray


def chebyshev_center(s: np.ndarray, grid: SphereGrid) -> tuple[float, np.ndarray]:
    """Largest ball inside {x : x.z <= s(z) for all grid z}: (radius, centre).

    Among the optimal centres the one closest to the Steiner point in the
    l1 norm is returned, so symmetric bodies get their centre of symmetry.
    """
    dim = grid.n + 1
    normals = grid.nodes.reshape(-1, dim)
    b = s.reshape(-1)
    steiner = steiner_point(s, grid)
    c = np.zeros(dim + 1)
    c[-1] = -1.0
    a_ub = np.hstack([normals, np.ones((normals.shape[0], 1))])
    res = linprog(c, A_ub=a_ub, b_ub=b, bounds=[(None, None)] * (dim + 1), method="highs")
    if not res.success:
        logger.warning("Chebyshev centre LP failed (%s); falling back to Steiner point", res.message)
        return float(np.min(b - normals @ steiner)), steiner
    center = _closest_optimal_center(normals, b, float(res.x[-1]), steiner, res.x[:dim])
    # report the grid min at the LP centre so rho_minus is consistent with s
    return float(np.min(b - normals @ center)), center


def _closest_optimal_center(
    normals: np.ndarray, b: np.ndarray, rho: float, target: np.ndarray, first: np.ndarray
) -> np.ndarray:
    """min |p - target|_1 over the centres of radius-rho balls, variables (p, t) with t >= |p - target|."""
    dim = normals.shape[1]
    rho -= CHEBYSHEV_TIE_RTOL * max(float(np.max(np.abs(b))), 1.0)
    eye = np.eye(dim)
    a_ub = np.vstack([
        np.hstack([normals, np.zeros((normals.shape[0], dim))]),
        np.hstack([eye, -eye]),
        np.hstack([-eye, -eye]),
    ])
    b_ub = np.concatenate([b - rho, target, -target])
    c = np.concatenate([np.zeros(dim), np.ones(dim)])
    bounds = [(None, None)] * dim + [(0, None)] * dim
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        logger.debug("Chebyshev tie-break LP failed (%s); keeping the first optimum", res.message)
        return first
    return res.x[:dim]


def inradius_outradius(s: np.ndarray, grid: SphereGrid) -> InOutRadii:
    """rho_minus (exact on the grid) and an upper estimate rho_plus of the circumradius."""
    s = grid.check_field(s)
    rho_minus, center = chebyshev_center(s, grid)
    points = embed_boundary(s, grid).reshape(-1, grid.n + 1)
    candidates = (steiner_point(s, grid), center)
    rho_plus = min(float(np.max(np.linalg.norm(points - p, axis=-1))) for p in candidates)
    return InOutRadii(rho_minus=rho_minus, rho_plus=rho_plus, inball_center=center)


@dataclass(frozen=True)
class RadiiSummary:
    radii: tuple[float, ...]  # r_1 .. r_{n+1}
    rho_minus: float
    rho_plus: float
    steiner: np.ndarray
    inball_center: np.ndarray


def radii_summary(s: np.ndarray, grid: SphereGrid, V: MixedVolumes | None = None) -> RadiiSummary:
    if V is None:
        V = quermassintegrals(s, grid)
    inout = inradius_outradius(s, grid)
    return RadiiSummary(
        radii=all_radii(V),
        rho_minus=inout.rho_minus,
        rho_plus=inout.rho_plus,
        steiner=steiner_point(s, grid),
        inball_center=inout.inball_center,
    )


def hausdorff_distance(s1: np.ndarray, s2: np.ndarray) -> float:
    """sup_z |s1(z) - s2(z)|, the Hausdorff distance of the two bodies."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if s1.shape != s2.shape:
        raise GridMismatch(f"support functions sampled on different grids: {s1.shape} vs {s2.shape}")
    return float(np.max(np.abs(s1 - s2)))
