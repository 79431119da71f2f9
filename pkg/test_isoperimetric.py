"""
Tests for the alpha functional and the isoperimetric inequality on patches.
"""

import math

import numpy as np
import pytest

from app.services import constants
from app.services.catalog import catalog
from app.services.geometry import Patch
from app.services.isoperimetric import (
    alpha_bounds, alpha_of_density, alpha_sweep, isoperimetric_constant, power_density,
    slice_integral, slice_spread, sqrt_density, verify_isoperimetric,
)
from app.services.sobolev import BumpFunction, ChartFunction
from app.services.specfun import unit_ball_volume
from app.utils.errors import DomainError, PositivityError


def constant_field(value=1.0):
    return ChartFunction(fn=lambda u: np.full(u.shape[0], value), partials=lambda u: np.zeros(u.shape))


class TestDensities:

    @pytest.mark.parametrize("n", [2, 3])
    def test_sqrt_density_has_flat_slices(self, n):
        density = sqrt_density(n)
        assert slice_spread(density, z_grid=64) <= 1e-10
        report = alpha_of_density(density, grid=128)
        assert report.alpha == pytest.approx(1.0 / unit_ball_volume(n), rel=1e-10)

    def test_power_density_normalizer(self):
        density = power_density(1, 2, 2)
        assert density.normalizer == pytest.approx(3.0 / math.pi ** 2, rel=1e-14)
        assert density.normalization_error <= 1e-8

    @pytest.mark.parametrize("j", [1, 10])
    def test_codimension_two_attains_upper_bound(self, j):
        density = power_density(j, 2, 2)
        report = alpha_of_density(density, grid=256)
        closed = math.pi * density.normalizer / (j + 1)
        assert report.alpha == pytest.approx(closed, rel=1e-8)
        assert report.alpha == pytest.approx(density.upper_bound, rel=1e-8)

    def test_slice_vanishes_at_the_rim(self):
        assert slice_integral(power_density(2, 2, 3), 1.0) == 0.0

    def test_slice_offset_range(self):
        with pytest.raises(DomainError):
            slice_integral(sqrt_density(2), 1.5)

    def test_power_density_arguments(self):
        with pytest.raises(DomainError):
            power_density(0, 2, 1)


class TestAlphaBounds:

    def test_codimension_one(self):
        report = alpha_bounds(2, 1)
        assert report.lower_bound == pytest.approx(1.0 / math.pi, rel=1e-14)
        assert report.active_branch == 2

    def test_codimension_two_branches_coincide(self):
        assert alpha_bounds(3, 2).branches_equal

    def test_large_codimension_uses_volume_ratio(self):
        report = alpha_bounds(3, 5)
        expected = 5 * unit_ball_volume(5) / (8 * unit_ball_volume(8))
        assert report.active_branch == 1
        assert report.lower_bound == pytest.approx(expected, rel=1e-12)

    def test_sweep_decreases_towards_lower_bound(self):
        reports = alpha_sweep(2, 3, [1, 10, 100])
        alphas = [r.alpha for r in reports]
        lower = alpha_bounds(2, 3).lower_bound
        assert alphas[0] > alphas[1] > alphas[2] >= lower * (1 - 1e-12)
        assert all(r.alpha <= r.upper_bound * (1 + 1e-10) for r in reports)

    def test_constant_from_lower_bound_is_brendle(self):
        for n, m in [(2, 1), (3, 5)]:
            c = isoperimetric_constant(alpha_bounds(n, m).lower_bound, n)
            assert c == pytest.approx(constants.brendle_c(n, m), rel=1e-12)


class TestVerifyIsoperimetric:

    def test_unit_sphere_ratio_half(self, sphere_patch):
        report = verify_isoperimetric(sphere_patch, constant_field())
        assert report.boundary_term == 0.0
        assert report.gradient_term == pytest.approx(8.0 * math.pi, rel=1e-10)
        assert report.ratio == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_flat_disk_is_extremal(self, m):
        patch = Patch(catalog("disk", m=m), [16, 32])
        report = verify_isoperimetric(patch, constant_field())
        assert report.ratio == pytest.approx(1.0, abs=1e-8)
        assert report.passed

    def test_homogeneous_in_the_field(self, square_patch):
        f = ChartFunction(fn=lambda u: 1.0 + u[:, 0] ** 2, partials=lambda u: np.stack(
            [2.0 * u[:, 0], np.zeros(u.shape[0])], axis=1))
        base = verify_isoperimetric(square_patch, f)
        scaled = verify_isoperimetric(square_patch, f.scaled(3.0))
        assert scaled.ratio == pytest.approx(base.ratio, rel=1e-12)
        assert scaled.lhs == pytest.approx(3.0 * base.lhs, rel=1e-12)

    def test_catenoid_bump_with_offset(self, catenoid_patch):
        bump = BumpFunction(center=np.array([1.0, 0.0, 0.0]), radius=0.8, offset=1.0)
        report = verify_isoperimetric(catenoid_patch, bump)
        assert report.boundary_term > 0
        assert report.passed

    def test_sign_changing_field(self, square_patch):
        with pytest.raises(PositivityError):
            verify_isoperimetric(square_patch, ChartFunction(fn=lambda u: u[:, 0] - 0.5))
