"""Tests for support-function geometry."""

import numpy as np
import pytest

from convexflow.errors import LossOfConvexity, NonConvexInput
from convexflow.geometry import (
    RadiiField,
    convexity_threshold,
    elementary_symmetric,
    embed_boundary,
    normalized_symmetric,
    principal_radii,
    tau_field,
    validate_strict_convexity,
)
from convexflow.shapes import make_shape
from convexflow.sphere_grid import build_grid


def _ellipse(resolution: int = 256):
    grid = build_grid(1, resolution)
    return make_shape("ellipsoid:2,1", grid), grid


class TestSymmetricFunctions:
    def test_elementary_symmetric(self):
        values = np.array([1.0, 2.0, 3.0])
        assert elementary_symmetric(values, 0) == pytest.approx(1.0)
        assert elementary_symmetric(values, 1) == pytest.approx(6.0)
        assert elementary_symmetric(values, 2) == pytest.approx(11.0)
        assert elementary_symmetric(values, 3) == pytest.approx(6.0)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            elementary_symmetric(np.array([1.0, 2.0]), 3)

    def test_normalized(self):
        assert normalized_symmetric((1.0, 2.0), 1) == pytest.approx(1.5)
        assert normalized_symmetric((2.0, 3.0), 2) == pytest.approx(6.0)
        assert normalized_symmetric((2.0, 3.0), 0) == pytest.approx(1.0)

    def test_vectorised_over_nodes(self):
        values = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert normalized_symmetric(values, 2) == pytest.approx([2.0, 12.0])


class TestPrincipalRadii:
    """Eigenvalues of tau."""

    def test_ball(self):
        grid = build_grid(2, 12)
        radii = principal_radii(tau_field(np.full(grid.shape, 1.3), grid))
        assert radii.radii.shape == (12, 24, 2)
        assert np.allclose(radii.radii, 1.3, atol=1e-10)
        assert np.allclose(radii.curvatures, 1 / 1.3, atol=1e-10)

    def test_ellipse_extreme_radii(self):
        s, grid = _ellipse()
        radii = principal_radii(tau_field(s, grid))
        # r = a^2 b^2 / s^3: 0.5 at the ends of the long axis, 4 at the flat sides
        assert radii.min_radius == pytest.approx(0.5, rel=1e-3)
        assert radii.max_radius == pytest.approx(4.0, rel=1e-3)

    def test_translated_ball(self):
        grid = build_grid(2, 12)
        s = 1.1 + grid.first_harmonic([0.3, -0.2, 0.4])
        radii = principal_radii(tau_field(s, grid))
        assert np.allclose(radii.radii, 1.1, atol=1e-10)

    @pytest.mark.parametrize("n,shape", [(1, "ellipsoid:2,1"), (2, "ellipsoid:1.5,1.2,1.0")])
    def test_scaling(self, n, shape):
        grid = build_grid(n, 64 if n == 1 else 16)
        s = make_shape(shape, grid)
        tau = tau_field(s, grid)
        assert np.allclose(tau_field(2.5 * s, grid), 2.5 * tau, rtol=1e-10, atol=1e-10)
        radii = principal_radii(tau)
        scaled = principal_radii(tau_field(2.5 * s, grid))
        assert np.allclose(scaled.radii, 2.5 * radii.radii, rtol=1e-10)
        assert np.allclose(normalized_symmetric(scaled.curvatures, n),
                           2.5 ** (-n) * normalized_symmetric(radii.curvatures, n), rtol=1e-10)

    def test_eigenvalue_product_is_determinant(self):
        grid = build_grid(2, 16)
        tau = tau_field(make_shape("ellipsoid:1.5,1.2,1.0", grid), grid)
        radii = principal_radii(tau)
        assert np.allclose(np.prod(radii.radii, axis=-1), np.linalg.det(tau), rtol=1e-12)

    def test_negative_eigenvalue(self):
        grid = build_grid(1, 64)
        s = 1.0 + 0.9 * np.cos(2 * grid.theta)
        with pytest.raises(LossOfConvexity) as exc_info:
            principal_radii(tau_field(s, grid))
        assert exc_info.value.min_radius < 0

    def test_threshold_applies(self):
        grid = build_grid(1, 32)
        tau = tau_field(np.full(grid.shape, 1e-3), grid)
        with pytest.raises(LossOfConvexity):
            principal_radii(tau, eps_convex=1e-2)

    def test_shifted(self):
        radii = RadiiField(np.array([[1.0], [2.0]]))
        assert radii.shifted(0.5).radii == pytest.approx(np.array([[1.5], [2.5]]))


class TestEmbedding:
    """Boundary points X = s z + grad s."""

    def test_translated_ball_circle(self):
        grid = build_grid(1, 64)
        p = np.array([0.3, -0.2])
        points = embed_boundary(1.5 + grid.first_harmonic(p), grid)
        assert np.allclose(points, p + 1.5 * grid.nodes, atol=1e-10)

    def test_translated_ball_sphere(self):
        grid = build_grid(2, 12)
        p = np.array([0.1, 0.2, -0.3])
        points = embed_boundary(0.8 + grid.first_harmonic(p), grid)
        assert np.allclose(points, p + 0.8 * grid.nodes, atol=1e-10)

    def test_ellipse_axis_points(self):
        s, grid = _ellipse()
        points = embed_boundary(s, grid)
        assert points[0] == pytest.approx([2.0, 0.0], abs=1e-12)
        assert points[64] == pytest.approx([0.0, 1.0], abs=1e-12)


class TestValidation:
    def test_default_threshold(self):
        grid = build_grid(1, 32)
        assert convexity_threshold(np.full(grid.shape, 1.3), grid) == pytest.approx(1.3e-8)

    def test_valid_body(self):
        s, grid = _ellipse()
        r_min, r_max = validate_strict_convexity(s, grid)
        assert 0 < r_min < r_max

    def test_initial_failure(self):
        grid = build_grid(1, 64)
        s = 1.0 + 0.9 * np.cos(2 * grid.theta)
        with pytest.raises(NonConvexInput):
            validate_strict_convexity(s, grid)

    def test_mid_run_failure(self):
        grid = build_grid(1, 64)
        s = 1.0 + 0.9 * np.cos(2 * grid.theta)
        with pytest.raises(LossOfConvexity) as exc_info:
            validate_strict_convexity(s, grid, initial=False)
        assert not isinstance(exc_info.value, NonConvexInput)
