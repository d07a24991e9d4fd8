"""Discretisation of the unit sphere S^n (n = 1, 2).

n = 1: N uniformly spaced angles, trapezoidal quadrature.
n = 2: L Gauss-Legendre colatitudes (no node at the poles) x 2L uniform
longitudes.  Fields are plain ndarrays shaped like ``grid.shape``; vector and
tensor fields carry trailing axes in the orthonormal frame
(e_theta, e_phi / sin theta).

Derivative stencils are three-point and trigonometrically fitted: their
weights reproduce the derivatives of 1, cos and sin of the stencil variable
exactly, so the covariant Hessian annihilates first spherical harmonics up to
rounding while remaining second-order accurate for general data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import roots_legendre

from convexflow.errors import GridMismatch, InvalidConfig

logger = logging.getLogger(__name__)

MIN_RESOLUTION = {1: 16, 2: 12}


def sphere_area(n: int) -> float:
    """omega_n, the area of the unit sphere S^n."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def _fitted_weights(h_minus: np.ndarray, h_plus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Three-point first/second derivative weights exact on span{1, cos, sin}.

    Returns arrays of shape (m, 3) for the stencil points (x - h_minus, x, x + h_plus).
    """
    h_minus = np.atleast_1d(np.asarray(h_minus, dtype=float))
    h_plus = np.atleast_1d(np.asarray(h_plus, dtype=float))
    offsets = np.stack([-h_minus, np.zeros_like(h_minus), h_plus], axis=-1)
    basis = np.stack([np.ones_like(offsets), np.cos(offsets), np.sin(offsets)], axis=-2)
    first = np.broadcast_to([0.0, 0.0, 1.0], h_minus.shape + (3,))
    second = np.broadcast_to([0.0, -1.0, 0.0], h_minus.shape + (3,))
    w1 = np.linalg.solve(basis, first[..., None])[..., 0]
    w2 = np.linalg.solve(basis, second[..., None])[..., 0]
    return w1, w2


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Immutable quadrature grid on S^n with per-node metric data."""

    n: int
    resolution: int
    theta: np.ndarray  # n=1: angles (N,); n=2: colatitudes (L,)
    phi: np.ndarray  # n=2: longitudes (2L,); n=1: empty
    nodes: np.ndarray  # shape + (n+1,)
    weights: np.ndarray  # shape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def area(self) -> float:
        return sphere_area(self.n)

    # ── stencil data ─────────────────────────────────────────

    @cached_property
    def _theta_weights(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n == 1:
            h = 2.0 * math.pi / self.resolution
            return _fitted_weights(np.array([h]), np.array([h]))
        th = self.theta
        h_minus = np.empty_like(th)
        h_plus = np.empty_like(th)
        h_minus[1:] = np.diff(th)
        h_plus[:-1] = np.diff(th)
        # across-pole neighbours sit at -theta_0 and 2*pi - theta_{L-1}
        h_minus[0] = 2.0 * th[0]
        h_plus[-1] = 2.0 * (math.pi - th[-1])
        return _fitted_weights(h_minus, h_plus)

    @cached_property
    def _phi_weights(self) -> tuple[np.ndarray, np.ndarray]:
        h = 2.0 * math.pi / (2 * self.resolution)
        w1, w2 = _fitted_weights(np.array([h]), np.array([h]))
        return w1[0], w2[0]

    @cached_property
    def sin_theta(self) -> np.ndarray:
        return np.sin(self.theta)

    @cached_property
    def cot_theta(self) -> np.ndarray:
        return np.cos(self.theta) / np.sin(self.theta)

    @cached_property
    def frame(self) -> np.ndarray:
        """Orthonormal tangent frame per node, shape ``shape + (n, n+1)``."""
        if self.n == 1:
            t = self.theta
            return np.stack([-np.sin(t), np.cos(t)], axis=-1)[:, None, :]
        th = self.theta[:, None]
        ph = self.phi[None, :]
        e_theta = np.stack(
            np.broadcast_arrays(np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)),
            axis=-1,
        )
        e_phi = np.stack(
            np.broadcast_arrays(-np.sin(ph) + 0.0 * th, np.cos(ph) + 0.0 * th, np.zeros_like(th * ph)),
            axis=-1,
        )
        return np.stack([e_theta, e_phi], axis=-2)

    @cached_property
    def spacing(self) -> np.ndarray:
        """Local grid spacing h per node (n=2: min of the theta gap and sin(theta) dphi)."""
        if self.n == 1:
            return np.full(self.shape, 2.0 * math.pi / self.resolution)
        th = self.theta
        gaps = np.diff(np.concatenate([[-th[0]], th, [2.0 * math.pi - th[-1]]]))
        d_theta = np.minimum(gaps[:-1], gaps[1:])
        d_phi = math.pi / self.resolution
        return np.minimum(d_theta[:, None], self.sin_theta[:, None] * d_phi) * np.ones(self.shape)

    # ── helpers ──────────────────────────────────────────────

    def check_field(self, f: np.ndarray, *, trailing: int = 0) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[: f.ndim - trailing] != self.shape:
            raise GridMismatch(f"field of shape {f.shape} does not match grid {self.shape}")
        return f

    def first_harmonic(self, p: np.ndarray | list[float]) -> np.ndarray:
        """The linear function z -> p.z sampled on the grid."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n + 1,):
            raise InvalidConfig(f"expected a vector in R^{self.n + 1}, got shape {p.shape}")
        return self.nodes @ p

    def coarsened(self) -> SphereGrid:
        """Half-resolution companion grid, used for quadrature error estimates."""
        return _make_grid(self.n, max(self.resolution // 2, 4))

    def __repr__(self) -> str:
        return f"SphereGrid(n={self.n}, resolution={self.resolution}, shape={self.shape})"


def _make_grid(n: int, resolution: int) -> SphereGrid:
    if n == 1:
        theta = 2.0 * math.pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        weights = np.full(resolution, 2.0 * math.pi / resolution)
        return SphereGrid(n=1, resolution=resolution, theta=theta, phi=np.empty(0),
                          nodes=nodes, weights=weights)

    x, w = roots_legendre(resolution)
    theta = np.arccos(x[::-1])
    lat_weights = w[::-1]
    phi = 2.0 * math.pi * np.arange(2 * resolution) / (2 * resolution)
    st = np.sin(theta)[:, None]
    nodes = np.stack(
        np.broadcast_arrays(st * np.cos(phi)[None, :], st * np.sin(phi)[None, :], np.cos(theta)[:, None]),
        axis=-1,
    )
    nodes = nodes / np.linalg.norm(nodes, axis=-1, keepdims=True)
    weights = lat_weights[:, None] * np.full(2 * resolution, math.pi / resolution)[None, :]
    return SphereGrid(n=2, resolution=resolution, theta=theta, phi=phi, nodes=nodes, weights=weights)


def build_grid(n: int, resolution: int) -> SphereGrid:
    """Build the quadrature grid: N angles (n=1) or L latitudes x 2L longitudes (n=2)."""
    if n not in MIN_RESOLUTION:
        raise InvalidConfig(f"only n = 1 or n = 2 is supported, got {n}", key="n")
    if resolution < MIN_RESOLUTION[n]:
        raise InvalidConfig(
            f"resolution {resolution} below minimum {MIN_RESOLUTION[n]} for n={n}",
            key="resolution",
        )
    grid = _make_grid(n, int(resolution))
    logger.debug("Built %r", grid)
    return grid


# ── differential operators ───────────────────────────────────


def _theta_neighbours(f: np.ndarray, grid: SphereGrid) -> tuple[np.ndarray, np.ndarray]:
    if grid.n == 1:
        return np.roll(f, 1, axis=0), np.roll(f, -1, axis=0)
    half = grid.resolution
    prev = np.concatenate([np.roll(f[:1], half, axis=1), f[:-1]], axis=0)
    nxt = np.concatenate([f[1:], np.roll(f[-1:], half, axis=1)], axis=0)
    return prev, nxt


def _apply_theta(f: np.ndarray, grid: SphereGrid, w: np.ndarray) -> np.ndarray:
    prev, nxt = _theta_neighbours(f, grid)
    if grid.n == 1:
        return w[0, 0] * prev + w[0, 1] * f + w[0, 2] * nxt
    return w[:, 0, None] * prev + w[:, 1, None] * f + w[:, 2, None] * nxt


def _apply_phi(f: np.ndarray, w: np.ndarray) -> np.ndarray:
    return w[0] * np.roll(f, 1, axis=1) + w[1] * f + w[2] * np.roll(f, -1, axis=1)


def covariant_hessian(s: np.ndarray, grid: SphereGrid) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and covariant Hessian of the round metric, in the orthonormal frame.

    Returns ``(grad, hess)`` with shapes ``shape + (n,)`` and ``shape + (n, n)``.
    """
    s = grid.check_field(s)
    if not np.all(np.isfinite(s)):
        raise ValueError("support samples contain non-finite values")

    w1, w2 = grid._theta_weights
    s_t = _apply_theta(s, grid, w1)
    s_tt = _apply_theta(s, grid, w2)

    if grid.n == 1:
        return s_t[:, None], s_tt[:, None, None]

    p1, p2 = grid._phi_weights
    s_p = _apply_phi(s, p1)
    s_pp = _apply_phi(s, p2)
    s_tp = _apply_theta(s_p, grid, w1)

    sin_t = grid.sin_theta[:, None]
    cot_t = grid.cot_theta[:, None]
    h11 = s_tt
    h12 = (s_tp - cot_t * s_p) / sin_t
    h22 = s_pp / sin_t**2 + cot_t * s_t

    grad = np.stack([s_t, s_p / sin_t], axis=-1)
    hess = np.empty(grid.shape + (2, 2))
    hess[..., 0, 0] = h11
    hess[..., 0, 1] = h12
    hess[..., 1, 0] = h12
    hess[..., 1, 1] = h22
    return grad, hess


def spectral_gradient(s: np.ndarray, grid: SphereGrid) -> np.ndarray:
    """FFT derivative ds/dtheta for n=1 (spectrally accurate for smooth periodic data)."""
    if grid.n != 1:
        raise InvalidConfig("spectral gradient is only available on the circle")
    s = grid.check_field(s)
    N = grid.resolution
    coeffs = np.fft.rfft(s)
    k = np.fft.rfftfreq(N, d=1.0 / N)
    if N % 2 == 0:
        k[-1] = 0.0
    return np.fft.irfft(1j * k * coeffs, n=N)[:, None]


def integrate(f: np.ndarray, grid: SphereGrid) -> float | np.ndarray:
    """Quadrature sum of f w over the grid; trailing axes of f are kept."""
    f = np.asarray(f, dtype=float)
    lead = grid.weights.ndim
    if f.shape[:lead] != grid.shape:
        raise GridMismatch(f"field of shape {f.shape} does not match grid {grid.shape}")
    w = grid.weights.reshape(grid.shape + (1,) * (f.ndim - lead))
    total = np.sum(f * w, axis=tuple(range(lead)))
    if np.ndim(total) == 0:
        return float(total)
    return total
