"""
Tests for the verification suites at reduced sizes.
"""

import pytest

from app.core.config import settings
from app.services.suites import sobolev_params, verification_service
from app.utils.errors import UsageError


def failed(report):
    return [c.name for c in report.checks if not c.passed]


def test_unknown_suite():
    with pytest.raises(UsageError):
        verification_service.run("everything")


def test_invalid_parameters_become_usage_errors():
    with pytest.raises(UsageError):
        sobolev_params(3, 1, 3.0)


def test_none_options_fall_back_to_defaults():
    report = verification_service.run("quadrature-check", seed=None)
    assert report.passed, failed(report)


def test_geometry_suite():
    report = verification_service.run("geometry", points=500, seed=3)
    assert report.passed, failed(report)
    assert any("sphere(n=3)" in c.name for c in report.checks)


def test_sobolev_quotient_suite():
    report = verification_service.run("sobolev-quotient", surface="catenoid", p=1.5, seeds=2, seed=4)
    assert report.passed, failed(report)
    assert len(report.artifacts["quotients"]) == 2


def test_isoperimetric_suite():
    report = verification_service.isoperimetric(seeds=2, seed=8, surfaces=("disk", "catenoid", "sphere"))
    assert report.passed, failed(report)


def test_alpha_sweep_suite():
    report = verification_service.run("alpha-sweep", n=2, m=3, js=[1, 10, 100, 1000])
    assert report.passed, failed(report)
    assert [row["j"] for row in report.artifacts["sweep"]] == [1, 10, 100, 1000]


def test_asymptotics_suite():
    report = verification_service.asymptotics_report()
    assert all(c.passed for c in report.checks), [c.name for c in report.checks if not c.passed]
    assert len(report.rows) == 12


def test_parallel_checks_keep_their_order(monkeypatch):
    serial = [c.name for c in verification_service.identities().checks]
    monkeypatch.setattr(settings, "workers", 4)
    assert [c.name for c in verification_service.identities().checks] == serial
