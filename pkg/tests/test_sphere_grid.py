"""Tests for the sphere grid, its stencils and quadrature."""

import math

import numpy as np
import pytest

from convexflow.errors import GridMismatch, InvalidConfig
from convexflow.geometry import tau_field
from convexflow.sphere_grid import (
    build_grid,
    covariant_hessian,
    integrate,
    spectral_gradient,
    sphere_area,
)


class TestBuildGrid:
    """Grid construction and resolution limits."""

    def test_circle_grid(self):
        grid = build_grid(1, 64)
        assert grid.shape == (64,)
        assert grid.size == 64
        assert np.allclose(np.linalg.norm(grid.nodes, axis=-1), 1.0)
        assert grid.weights.sum() == pytest.approx(2 * math.pi)

    def test_sphere_grid(self):
        grid = build_grid(2, 12)
        assert grid.shape == (12, 24)
        assert grid.nodes.shape == (12, 24, 3)
        assert np.allclose(np.linalg.norm(grid.nodes, axis=-1), 1.0)
        assert grid.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)

    def test_no_node_at_the_poles(self):
        grid = build_grid(2, 12)
        assert 0.0 < grid.theta.min() and grid.theta.max() < math.pi

    def test_below_minimum_resolution(self):
        with pytest.raises(InvalidConfig, match="below minimum"):
            build_grid(1, 8)
        with pytest.raises(InvalidConfig):
            build_grid(2, 6)

    def test_unsupported_dimension(self):
        with pytest.raises(InvalidConfig, match="n = 1 or n = 2"):
            build_grid(3, 16)

    def test_sphere_area(self):
        assert sphere_area(1) == pytest.approx(2 * math.pi)
        assert sphere_area(2) == pytest.approx(4 * math.pi)

    def test_coarsened_halves_resolution(self):
        grid = build_grid(2, 24)
        assert grid.coarsened().resolution == 12
        assert grid.coarsened().n == 2


class TestQuadrature:
    """Quadrature sums over the grid."""

    def test_second_moment_on_sphere(self):
        grid = build_grid(2, 12)
        z3 = grid.nodes[..., 2]
        assert integrate(z3**2, grid) == pytest.approx(4 * math.pi / 3, rel=1e-12)

    def test_trailing_axes_kept(self):
        grid = build_grid(1, 32)
        total = integrate(grid.nodes**2, grid)
        assert total.shape == (2,)
        assert total == pytest.approx([math.pi, math.pi])

    def test_mismatched_field(self):
        grid = build_grid(1, 32)
        with pytest.raises(GridMismatch):
            integrate(np.ones(31), grid)
        with pytest.raises(GridMismatch):
            grid.check_field(np.ones((4, 8)))


class TestStencils:
    """Fitted three-point stencils."""

    @pytest.mark.parametrize("n,resolution", [(1, 64), (2, 12)])
    def test_first_harmonics_annihilated(self, n, resolution):
        grid = build_grid(n, resolution)
        p = np.array([0.3, -0.7, 0.5][: n + 1])
        tau = tau_field(grid.first_harmonic(p), grid)
        assert np.max(np.abs(tau)) < 1e-10

    def test_constant_gives_identity(self):
        grid = build_grid(2, 12)
        tau = tau_field(np.full(grid.shape, 1.3), grid)
        assert np.allclose(tau[..., 0, 0], 1.3, atol=1e-10)
        assert np.allclose(tau[..., 1, 1], 1.3, atol=1e-10)
        assert np.allclose(tau[..., 0, 1], 0.0, atol=1e-10)

    def test_second_order_convergence(self):
        errors = []
        for resolution in (64, 128):
            grid = build_grid(1, resolution)
            s = np.cos(2 * grid.theta)
            _, hess = covariant_hessian(s, grid)
            errors.append(np.max(np.abs(hess[:, 0, 0] + 4 * s)))
        assert 3.5 < errors[0] / errors[1] < 4.5

    def test_index_shift_commutes(self):
        grid = build_grid(1, 64)
        s = 1.0 + 0.2 * np.cos(2 * grid.theta) + 0.1 * np.sin(3 * grid.theta)
        grad, hess = covariant_hessian(s, grid)
        grad_rot, hess_rot = covariant_hessian(np.roll(s, 7), grid)
        assert np.allclose(hess_rot, np.roll(hess, 7, axis=0), rtol=0, atol=1e-12)
        assert np.allclose(grad_rot, np.roll(grad, 7, axis=0), rtol=0, atol=1e-12)

    def test_non_finite_input_rejected(self):
        grid = build_grid(1, 32)
        s = np.ones(32)
        s[3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            covariant_hessian(s, grid)

    def test_spectral_gradient(self):
        grid = build_grid(1, 64)
        grad = spectral_gradient(np.sin(3 * grid.theta), grid)
        assert np.allclose(grad[:, 0], 3 * np.cos(3 * grid.theta), atol=1e-12)

    def test_spectral_gradient_circle_only(self):
        grid = build_grid(2, 12)
        with pytest.raises(InvalidConfig):
            spectral_gradient(np.ones(grid.shape), grid)

    def test_first_harmonic_dimension(self):
        grid = build_grid(1, 32)
        with pytest.raises(InvalidConfig):
            grid.first_harmonic([1.0, 2.0, 3.0])
