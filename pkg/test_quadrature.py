"""
Tests for 1-D, radial, patch and boundary quadrature.
"""

import math

import numpy as np
import pytest

from app.core.config import settings
from app.services.catalog import catalog
from app.services.geometry import Patch
from app.services.isoperimetric import sqrt_density
from app.services.quadrature import integrate_1d, integrate_boundary, integrate_patch, integrate_radial
from app.utils.errors import DomainError, NoBoundaryError, NonConvergenceError


def ones(nodes):
    return np.ones(nodes.u.shape[0])


class TestIntegrate1D:

    def test_rational_half_line(self):
        result = integrate_1d(lambda r: 1.0 / (1.0 + r * r), 0.0, math.inf)
        assert result.value == pytest.approx(math.pi / 2, rel=1e-10)
        assert result.evaluations > 0

    def test_exponential_half_line(self):
        assert integrate_1d(lambda r: math.exp(-r), 0.0, math.inf).value == pytest.approx(1.0, rel=1e-10)

    def test_empty_interval(self):
        result = integrate_1d(lambda r: 1.0, 2.0, 2.0)
        assert result.value == 0.0 and result.evaluations == 0

    def test_reversed_interval(self):
        with pytest.raises(DomainError):
            integrate_1d(lambda r: 1.0, 1.0, 0.0)

    def test_subdivision_budget_exhausted(self, monkeypatch):
        monkeypatch.setattr(settings, "quad_limit", 1)
        with pytest.raises(NonConvergenceError):
            integrate_1d(lambda x: math.sin(50.0 * x) * math.exp(-0.1 * x), 0.0, 10.0)


class TestIntegrateRadial:

    def test_unit_ball_volume(self):
        result = integrate_radial(lambda s: 1.0, 3, radius=1.0)
        assert result.value == pytest.approx(4.0 * math.pi / 3.0, rel=1e-10)

    def test_gaussian(self):
        result = integrate_radial(lambda s: math.exp(-s), 2)
        assert result.value == pytest.approx(math.pi, rel=1e-10)

    def test_sine_map_needs_finite_radius(self):
        with pytest.raises(DomainError):
            integrate_radial(lambda s: 1.0, 2, sine_map=True)

    def test_edge_singular_density_is_normalized(self):
        assert sqrt_density(2).normalization_error <= 1e-8
        assert sqrt_density(3).normalization_error <= 1e-8


class TestIntegratePatch:

    def test_unit_square_area(self, square_patch):
        assert integrate_patch(square_patch, ones).value == pytest.approx(1.0, abs=1e-12)

    def test_sphere_area(self, sphere_patch):
        result = integrate_patch(sphere_patch, ones)
        assert result.value == pytest.approx(4.0 * math.pi, rel=1e-10)
        assert result.abs_error_estimate <= 1e-8

    def test_catenoid_area(self, catenoid_patch):
        expected = 2.0 * math.pi * (1.0 + math.sinh(1.0) * math.cosh(1.0))
        assert integrate_patch(catenoid_patch, ones).value == pytest.approx(expected, rel=1e-10)

    def test_polynomial_on_square(self, square_patch):
        # int x^2 y^3 over the unit square
        result = integrate_patch(square_patch, lambda nodes: nodes.x[:, 0] ** 2 * nodes.x[:, 1] ** 3)
        assert result.value == pytest.approx(1.0 / 12.0, rel=1e-12)

    def test_grid_must_match_panel_order(self):
        with pytest.raises(DomainError):
            Patch(catalog("flat", n=2), [10, 16])


class TestIntegrateBoundary:

    def test_disk_circumference(self, disk_patch):
        assert integrate_boundary(disk_patch, ones).value == pytest.approx(2.0 * math.pi, rel=1e-12)

    def test_catenoid_boundary_circles(self):
        patch = Patch(catalog("catenoid", boundary="faces"), [16, 32])
        expected = 4.0 * math.pi * math.cosh(1.0)
        assert integrate_boundary(patch, ones).value == pytest.approx(expected, rel=1e-12)

    def test_vanishing_faces_are_refused_unless_asked(self, catenoid_patch):
        with pytest.raises(NoBoundaryError):
            integrate_boundary(catenoid_patch, ones)
        value = integrate_boundary(catenoid_patch, ones, respect_vanishing=False).value
        assert value == pytest.approx(4.0 * math.pi * math.cosh(1.0), rel=1e-12)

    def test_closed_sphere_has_no_boundary(self, sphere_patch):
        with pytest.raises(NoBoundaryError):
            integrate_boundary(sphere_patch, ones)
