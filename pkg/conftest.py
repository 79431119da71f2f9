"""
Shared fixtures: small patches on catalog surfaces.
"""

import pytest

from app.services.catalog import catalog
from app.services.geometry import Patch


@pytest.fixture(scope="session")
def square_patch():
    return Patch(catalog("flat", n=2), [16, 16])


@pytest.fixture(scope="session")
def sphere_patch():
    return Patch(catalog("sphere", n=2), [16, 32])


@pytest.fixture(scope="session")
def catenoid_patch():
    return Patch(catalog("catenoid"), [16, 32])


@pytest.fixture(scope="session")
def disk_patch():
    return Patch(catalog("disk"), [16, 32])
