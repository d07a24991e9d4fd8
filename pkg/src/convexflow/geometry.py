"""Convex-body geometry from a sampled support function.

tau_ij = grad_i grad_j s + g_ij s has the principal radii of curvature as
eigenvalues; curvatures are their exact reciprocals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from convexflow.errors import LossOfConvexity, NonConvexInput
from convexflow.sphere_grid import SphereGrid, covariant_hessian, integrate, spectral_gradient

logger = logging.getLogger(__name__)

CONVEXITY_RELATIVE_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class RadiiField:
    """Sorted principal radii per node, shape ``grid.shape + (n,)``."""

    radii: np.ndarray

    @property
    def min_radius(self) -> float:
        return float(self.radii.min())

    @property
    def max_radius(self) -> float:
        return float(self.radii.max())

    @property
    def curvatures(self) -> np.ndarray:
        """kappa_i = 1 / r_i, sorted decreasing."""
        return 1.0 / self.radii

    def shifted(self, delta: float) -> RadiiField:
        """Radii of s + delta (tau shifts by delta times the metric)."""
        return RadiiField(self.radii + delta)


def tau_field(s: np.ndarray, grid: SphereGrid) -> np.ndarray:
    """tau = covariant Hessian of s plus s times the round metric."""
    s = grid.check_field(s)
    _, hess = covariant_hessian(s, grid)
    tau = hess.copy()
    idx = np.arange(grid.n)
    tau[..., idx, idx] += s[..., None]
    return tau


def convexity_threshold(s: np.ndarray, grid: SphereGrid) -> float:
    """Default eps_convex: 1e-8 times the mean of s (half the mean width)."""
    return CONVEXITY_RELATIVE_EPS * abs(integrate(s, grid)) / grid.area


def principal_radii(tau: np.ndarray, eps_convex: float = 0.0) -> RadiiField:
    """Eigenvalues of tau per node, ascending; raises when any is <= eps_convex."""
    if tau.shape[-1] == 1:
        radii = tau[..., 0, :].copy()
    else:
        radii = np.linalg.eigvalsh(tau)
    r_min = float(radii.min())
    if not np.isfinite(r_min) or r_min <= eps_convex:
        raise LossOfConvexity(
            f"minimum principal radius {r_min:.3e} <= eps_convex {eps_convex:.3e}",
            min_radius=r_min,
        )
    return RadiiField(radii)


def elementary_symmetric(values: np.ndarray, m: int) -> np.ndarray:
    """sigma_m over the last axis (sigma_0 = 1)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if not 0 <= m <= n:
        raise ValueError(f"m must lie in 0..{n}, got {m}")
    # e[j] holds sigma_j of the values processed so far
    e = [np.ones(values.shape[:-1])] + [np.zeros(values.shape[:-1]) for _ in range(m)]
    for i in range(n):
        x = values[..., i]
        for j in range(m, 0, -1):
            e[j] = e[j] + x * e[j - 1]
    return e[m]


def normalized_symmetric(values: np.ndarray | tuple[float, ...], m: int) -> np.ndarray | float:
    """E_m = sigma_m / C(n, m); E_0 = 1."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    result = elementary_symmetric(values, m) / math.comb(n, m)
    if np.ndim(result) == 0:
        return float(result)
    return result


def embed_boundary(s: np.ndarray, grid: SphereGrid) -> np.ndarray:
    """Boundary points X(z) = s(z) z + grad s(z), shape ``grid.shape + (n+1,)``."""
    s = grid.check_field(s)
    if grid.n == 1:
        grad = spectral_gradient(s, grid)
    else:
        grad, _ = covariant_hessian(s, grid)
    tangential = np.einsum("...i,...ij->...j", grad, grid.frame)
    return s[..., None] * grid.nodes + tangential


def validate_strict_convexity(
    s: np.ndarray,
    grid: SphereGrid,
    eps_convex: float | None = None,
    *,
    initial: bool = True,
) -> tuple[float, float]:
    """Check tau is positive definite everywhere; return (min r, max r).

    Raises NonConvexInput for an initial body, LossOfConvexity otherwise.
    """
    if eps_convex is None:
        eps_convex = convexity_threshold(s, grid)
    tau = tau_field(s, grid)
    try:
        radii = principal_radii(tau, eps_convex)
    except LossOfConvexity as exc:
        if initial:
            raise NonConvexInput(f"initial body is not strictly convex: {exc}",
                                 min_radius=exc.min_radius) from exc
        raise
    return radii.min_radius, radii.max_radius
