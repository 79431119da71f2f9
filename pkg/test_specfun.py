"""
Tests for the special functions and the closed-form radial integral.
"""

import math

import pytest

from app.services.quadrature import integrate_1d
from app.services.specfun import (
    log_gamma, log_unit_ball_volume, radial_integral_closed, unit_ball_volume, unit_sphere_area,
)
from app.utils.errors import DomainError


def test_log_gamma_half():
    assert log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
def test_log_gamma_rejects_non_positive(x):
    with pytest.raises(DomainError):
        log_gamma(x)


def test_log_gamma_large_argument_stays_finite():
    assert math.isfinite(log_gamma(1e6))


@pytest.mark.parametrize("d, expected", [
    (1, 2.0),
    (2, math.pi),
    (3, 4.0 * math.pi / 3.0),
    (4, math.pi ** 2 / 2.0),
])
def test_unit_ball_volume(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("d", [0, -1, 2.5])
def test_ball_volume_needs_a_positive_integer_dimension(d):
    with pytest.raises(DomainError):
        log_unit_ball_volume(d)


def test_sphere_area():
    assert unit_sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-13)


def test_radial_integral_quarter_circle():
    # int_0^inf dr / (1 + r^2) = pi/2
    assert radial_integral_closed(1.0, 2.0, 0.0, 1.0) == pytest.approx(math.pi / 2, rel=1e-13)


def test_radial_integral_matches_quadrature():
    lam, alpha, beta, gamma = 2.0, 3.0, 0.5, 1.7
    numeric = integrate_1d(lambda r: (lam + r ** alpha) ** (-gamma) * r ** beta, 0.0, math.inf).value
    assert radial_integral_closed(lam, alpha, beta, gamma) == pytest.approx(numeric, rel=1e-9)


@pytest.mark.parametrize("lam, alpha, beta, gamma", [
    (1.0, 2.0, 0.0, 0.5),   # gamma at the divergence threshold
    (-1.0, 2.0, 0.0, 1.0),
    (1.0, 0.5, 0.0, 3.0),
    (1.0, 2.0, -1.5, 1.0),
])
def test_radial_integral_outside_convergence_region(lam, alpha, beta, gamma):
    with pytest.raises(DomainError):
        radial_integral_closed(lam, alpha, beta, gamma)
