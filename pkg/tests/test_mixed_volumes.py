"""Tests for quermassintegrals, radii and the Alexandrov-Fenchel audit."""

import math

import numpy as np
import pytest
from scipy.special import ellipe

from convexflow.errors import GridMismatch
from convexflow.mixed_volumes import (
    MixedVolumes,
    af_audit,
    all_radii,
    ball_residual,
    best_fit_ball,
    chebyshev_center,
    diskant_lower_bound,
    hausdorff_distance,
    inradius_outradius,
    isoperimetric_ratio,
    j_radius,
    mixed_ratio,
    quadrature_tolerance,
    quermassintegrals,
    radii_summary,
    steiner_point,
)
from convexflow.shapes import make_shape
from convexflow.sphere_grid import build_grid

ELLIPSE_PERIMETER = 8 * ellipe(0.75)


def _ellipse_volumes() -> MixedVolumes:
    grid = build_grid(1, 256)
    return quermassintegrals(make_shape("ellipsoid:2,1", grid), grid)


class TestBallVolumes:
    """Quermassintegrals of balls are omega_n r^j."""

    @pytest.mark.parametrize("n,resolution", [(1, 64), (2, 12)])
    def test_ball(self, n, resolution):
        grid = build_grid(n, resolution)
        r = 1.3
        V = quermassintegrals(np.full(grid.shape, r), grid)
        omega = grid.area
        assert len(V) == n + 2
        for j in range(n + 2):
            assert V[j] == pytest.approx(omega * r**j, rel=1e-10)
        assert all_radii(V) == pytest.approx([r] * (n + 1), rel=1e-10)
        for ell in range(1, n + 1):
            assert isoperimetric_ratio(V, ell) == pytest.approx(1.0, abs=1e-10)

    def test_mixed_ratio_is_mean_curvature_power(self):
        grid = build_grid(2, 12)
        V = quermassintegrals(np.full(grid.shape, 2.0), grid)
        assert mixed_ratio(V, 1) == pytest.approx(0.5, rel=1e-10)
        assert mixed_ratio(V, 2) == pytest.approx(0.25, rel=1e-10)

    def test_translation_leaves_volumes(self):
        grid = build_grid(1, 64)
        V = quermassintegrals(np.full(grid.shape, 1.0), grid)
        moved = quermassintegrals(1.0 + grid.first_harmonic([0.4, -0.3]), grid)
        assert moved.as_array() == pytest.approx(V.as_array(), rel=1e-12)

    @pytest.mark.parametrize("n,resolution", [(1, 64), (2, 12)])
    def test_minkowski_sum_of_balls(self, n, resolution):
        grid = build_grid(n, resolution)
        first = 0.7 + grid.first_harmonic([0.2, 0.1, -0.3][: n + 1])
        second = 0.5 + grid.first_harmonic([-0.3, 0.4, 0.1][: n + 1])
        V = quermassintegrals(first + second, grid)
        for j in range(n + 2):
            assert V[j] == pytest.approx(grid.area * 1.2**j, rel=1e-10)


class TestScaling:
    """s -> lambda s scales V_j by lambda^j and leaves the ratios alone."""

    @pytest.mark.parametrize("n,shape", [(1, "ellipsoid:2,1"), (2, "ellipsoid:1.5,1.2,1.0")])
    def test_scaling(self, n, shape):
        grid = build_grid(n, 64 if n == 1 else 16)
        s = make_shape(shape, grid)
        V = quermassintegrals(s, grid)
        scaled = quermassintegrals(3.0 * s, grid)
        for j in range(n + 2):
            assert scaled[j] == pytest.approx(3.0**j * V[j], rel=1e-10)
        assert all_radii(scaled) == pytest.approx([3.0 * r for r in all_radii(V)], rel=1e-10)
        for ell in range(1, n + 1):
            assert isoperimetric_ratio(scaled, ell) == pytest.approx(isoperimetric_ratio(V, ell), rel=1e-10)


class TestMixedRatioContinuity:
    """V_{n-k} / V_n moves by at most a multiple of the Hausdorff distance."""

    @pytest.mark.parametrize(
        "n,k,shape,nearby",
        [
            (1, 1, "ellipsoid:2,1", "ellipsoid:2.02,1.01"),
            (2, 1, "ellipsoid:1.5,1.2,1.0", "ellipsoid:1.52,1.2,1.01"),
            (2, 2, "ellipsoid:1.5,1.2,1.0", "ellipsoid:1.52,1.2,1.01"),
        ],
    )
    def test_lipschitz_in_hausdorff(self, n, k, shape, nearby):
        grid = build_grid(n, 64 if n == 1 else 16)
        s1, s2 = make_shape(shape, grid), make_shape(nearby, grid)
        change = abs(mixed_ratio(quermassintegrals(s1, grid), k) - mixed_ratio(quermassintegrals(s2, grid), k))
        distance = hausdorff_distance(s1, s2)
        assert 0 < change <= distance


class TestEllipseOracle:
    """ellipse(2, 1): perimeter 8 E(3/4), V_2 = 2 * area = 4 pi."""

    def test_perimeter(self):
        V = _ellipse_volumes()
        assert V[1] == pytest.approx(ELLIPSE_PERIMETER, rel=1e-10)
        assert V[1] == pytest.approx(9.6884482, rel=1e-7)

    def test_area(self):
        V = _ellipse_volumes()
        assert V[2] == pytest.approx(4 * math.pi, rel=1e-3)

    def test_radii(self):
        V = _ellipse_volumes()
        assert j_radius(V, 1) == pytest.approx(1.5418958, abs=1e-6)
        assert j_radius(V, 2) == pytest.approx(math.sqrt(2), rel=1e-3)

    def test_isoperimetric_ratio_above_one(self):
        V = _ellipse_volumes()
        assert isoperimetric_ratio(V, 1) == pytest.approx(ELLIPSE_PERIMETER**2 / (8 * math.pi**2), rel=1e-3)
        assert isoperimetric_ratio(V, 1) > 1.0

    def test_invalid_indices(self):
        V = _ellipse_volumes()
        with pytest.raises(ValueError):
            j_radius(V, 0)
        with pytest.raises(ValueError):
            isoperimetric_ratio(V, 2)

    def test_ellipsoid_volume(self):
        grid = build_grid(2, 24)
        V = quermassintegrals(make_shape("ellipsoid:1.5,1.2,1.0", grid), grid)
        # V_3 is three times the enclosed volume
        assert V[3] == pytest.approx(4 * math.pi * 1.5 * 1.2 * 1.0, rel=1e-2)


class TestAFAudit:
    """Alexandrov-Fenchel residuals."""

    def test_ball_passes(self):
        grid = build_grid(2, 12)
        report = af_audit(quermassintegrals(np.full(grid.shape, 0.7), grid))
        assert report.passed
        assert abs(report.worst) < 1e-10
        assert set(report.relative) == {"R1(1)", "R1(2)", "R2(0,1)", "R2(0,2)", "R2(1,2)", "S"}

    def test_ellipse_strictly_positive(self):
        report = af_audit(_ellipse_volumes())
        assert report.passed
        assert report.neighbour[1] > 0
        assert report.stability == pytest.approx(ELLIPSE_PERIMETER**2 - 8 * math.pi**2, rel=1e-3)

    def test_violation_reported(self):
        V = MixedVolumes(n=1, values=(2 * math.pi, 1.0, 100.0))
        report = af_audit(V)
        assert not report.passed
        assert "R1(1)" in report.violations
        assert report.worst < 0

    def test_quadrature_tolerance_floor(self):
        V = _ellipse_volumes()
        assert quadrature_tolerance(V, V) == pytest.approx(1e-12)

    def test_quadrature_tolerance_scales(self):
        fine = MixedVolumes(n=1, values=(1.0, 1.0, 1.0))
        coarse = MixedVolumes(n=1, values=(1.0, 1.003, 1.0))
        assert quadrature_tolerance(fine, coarse) == pytest.approx(10 * 0.003 / 3)


class TestCentres:
    """Steiner point, best-fit ball and inscribed ball."""

    def test_steiner_point_equivariant(self):
        grid = build_grid(1, 256)
        s = make_shape("ellipsoid:2,1@0.3,-0.2", grid)
        assert steiner_point(s, grid) == pytest.approx([0.3, -0.2], abs=1e-10)

    def test_steiner_point_sphere(self):
        grid = build_grid(2, 12)
        s = make_shape("ellipsoid:1.5,1.2,1.0@0.1,0.2,-0.1", grid)
        assert steiner_point(s, grid) == pytest.approx([0.1, 0.2, -0.1], abs=1e-10)

    def test_best_fit_ball_of_translated_ball(self):
        grid = build_grid(2, 12)
        s = 1.4 + grid.first_harmonic([0.2, 0.0, -0.5])
        r_hat, p = best_fit_ball(s, grid)
        assert r_hat == pytest.approx(1.4, rel=1e-12)
        assert p == pytest.approx([0.2, 0.0, -0.5], abs=1e-12)
        residual, _ = ball_residual(s, grid)
        assert residual < 1e-12

    def test_chebyshev_center_of_ball(self):
        grid = build_grid(1, 64)
        s = 1.3 + grid.first_harmonic([0.2, 0.1])
        rho, center = chebyshev_center(s, grid)
        assert rho == pytest.approx(1.3, abs=1e-7)
        assert center == pytest.approx([0.2, 0.1], abs=1e-6)

    @pytest.mark.parametrize("shape,expected", [("ellipsoid:2,1", [0.0, 0.0]), ("ellipsoid:2,1@0.3,-0.2", [0.3, -0.2])])
    def test_chebyshev_center_prefers_symmetry_centre(self, shape, expected):
        # the inscribed ball can slide along the long axis on a discrete grid
        grid = build_grid(1, 256)
        rho, center = chebyshev_center(make_shape(shape, grid), grid)
        assert rho == pytest.approx(1.0, abs=1e-6)
        assert center == pytest.approx(expected, abs=1e-6)

    def test_ellipse_inradius_outradius(self):
        grid = build_grid(1, 256)
        inout = inradius_outradius(make_shape("ellipsoid:2,1", grid), grid)
        assert inout.rho_minus == pytest.approx(1.0, abs=1e-6)
        assert inout.rho_plus == pytest.approx(2.0, abs=1e-6)

    def test_radii_ordering(self):
        grid = build_grid(1, 256)
        summary = radii_summary(make_shape("ellipsoid:2,1", grid), grid)
        r1, r2 = summary.radii
        assert summary.rho_minus <= r2 <= r1 <= summary.rho_plus

    def test_diskant_bound(self):
        V = _ellipse_volumes()
        bound = diskant_lower_bound(V)
        assert 0.9 < bound < 1.0
        grid = build_grid(1, 64)
        ball = quermassintegrals(np.full(grid.shape, 1.3), grid)
        assert diskant_lower_bound(ball) == pytest.approx(1.3, rel=1e-4)


class TestHausdorff:
    def test_distance(self):
        assert hausdorff_distance(np.array([1.0, 2.0]), np.array([1.5, 1.0])) == pytest.approx(1.0)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            hausdorff_distance(np.ones(4), np.ones(5))
