"""
Tests for chart geometry and the surface catalog.
"""

import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from app.services.catalog import catalog, default_grid
from app.services.geometry import (
    Chart, Patch, evaluate_nodes, export_csv, induced_metric, mean_curvature, normal_projector,
    second_fundamental_form, surface_gradient, tangent_projector,
)
from app.utils.errors import DomainError, ImmersionError, UnknownSurfaceError


def interior_sample(chart, count=200, seed=0, inset=0.1):
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in chart.bounds])
    hi = np.array([b[1] for b in chart.bounds])
    return rng.uniform(lo + inset * (hi - lo), hi - inset * (hi - lo), size=(count, chart.n))


@pytest.mark.parametrize("name", ["catenoid", "helicoid", "enneper", "holomorphic_graph_z2"])
def test_minimal_surfaces_have_zero_mean_curvature(name):
    chart = catalog(name)
    H = mean_curvature(chart, interior_sample(chart))
    assert np.max(np.linalg.norm(H, axis=1)) < 1e-10


@pytest.mark.parametrize("s", [-0.8, 0.0, 0.5])
def test_catenoid_metric_is_conformal(s):
    g = induced_metric(catalog("catenoid"), np.array([s, 1.3]))
    np.testing.assert_allclose(g, math.cosh(s) ** 2 * np.eye(2), atol=1e-13)


def test_sphere_metric_at_the_equator():
    g = induced_metric(catalog("sphere", n=2), np.array([math.pi / 2, 0.7]))
    np.testing.assert_allclose(g, np.eye(2), atol=1e-13)


def test_holomorphic_graph_second_form_at_origin():
    II = second_fundamental_form(catalog("holomorphic_graph_z2"), np.zeros(2))
    np.testing.assert_allclose(II[0, 0], [0.0, 0.0, 2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(II[0, 1], [0.0, 0.0, 0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(II[1, 1], [0.0, 0.0, -2.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_unit_sphere_mean_curvature(n):
    chart = catalog("sphere", n=n)
    u = interior_sample(chart)
    H = mean_curvature(chart, u)
    np.testing.assert_allclose(np.linalg.norm(H, axis=1), n, rtol=1e-10)
    # H points inward
    x = chart.map(u)
    np.testing.assert_allclose(H, -n * x, atol=1e-9)


def test_single_node_is_squeezed():
    chart = catalog("catenoid")
    assert chart.map(np.array([0.0, 0.0])).shape == (3,)
    assert mean_curvature(chart, np.array([0.2, 1.0])).shape == (3,)


def test_projectors_sum_to_identity():
    chart = catalog("holomorphic_graph_z2")
    u = interior_sample(chart)
    total = tangent_projector(chart, u) + normal_projector(chart, u)
    np.testing.assert_allclose(total, np.broadcast_to(np.eye(4), total.shape), atol=1e-12)


def test_second_fundamental_form_is_normal():
    chart = catalog("enneper")
    nodes = evaluate_nodes(chart, interior_sample(chart))
    tangential = np.einsum("kdn,kijd->kijn", nodes.tangent_basis, nodes.second_fundamental_form)
    assert np.max(np.abs(tangential)) < 1e-10


def test_finite_differences_match_analytic_derivatives():
    chart = catalog("catenoid")
    u = interior_sample(chart)
    fd = evaluate_nodes(replace(chart, jacobian_fn=None, hessian_fn=None), u)
    exact = evaluate_nodes(chart, u)
    np.testing.assert_allclose(fd.jacobian, exact.jacobian, atol=1e-8)
    np.testing.assert_allclose(fd.mean_curvature, exact.mean_curvature, atol=1e-5)


def test_catenoid_gradient_of_height():
    chart = catalog("catenoid")
    u = interior_sample(chart)
    grad = surface_gradient(chart, lambda v: v[:, 0], u)
    np.testing.assert_allclose(np.linalg.norm(grad, axis=1), 1.0 / np.cosh(u[:, 0]), rtol=1e-7)


def test_gradient_of_constant_vanishes():
    chart = catalog("helicoid")
    grad = surface_gradient(chart, lambda v: np.full(v.shape[0], 3.0), interior_sample(chart))
    assert np.all(grad == 0.0)


def test_gradient_with_supplied_partials_is_tangent():
    chart = catalog("enneper")
    u = interior_sample(chart)
    grad = surface_gradient(chart, None, u, partials=np.ones_like(u))
    nodes = evaluate_nodes(chart, u, curvature=False)
    np.testing.assert_allclose(nodes.project_tangent(grad), grad, atol=1e-12)


def test_degenerate_chart_is_not_an_immersion():
    def map_fn(u):
        s = u[:, 0] + u[:, 1]
        return np.stack([s, s, np.zeros_like(s)], axis=1)

    def jacobian_fn(u):
        row = np.broadcast_to(np.array([1.0, 1.0, 0.0]), (u.shape[0], 3))
        return np.stack([row, row], axis=1)

    chart = Chart(name="degenerate", n=2, ambient_dim=3, bounds=((0.0, 1.0), (0.0, 1.0)),
                  periodic=(False, False), map_fn=map_fn, jacobian_fn=jacobian_fn)
    with pytest.raises(ImmersionError):
        evaluate_nodes(chart, np.array([[0.3, 0.4]]), curvature=False)


def test_parameter_width_is_checked():
    with pytest.raises(DomainError):
        catalog("catenoid").map(np.zeros((4, 3)))


def test_unknown_surface():
    with pytest.raises(UnknownSurfaceError):
        catalog("klein_bottle")


def test_bad_surface_parameters():
    with pytest.raises(DomainError):
        catalog("catenoid", radius=2.0)


class TestPatch:

    def test_default_grids_build(self):
        for name in ("flat", "disk", "catenoid"):
            chart = catalog(name)
            assert Patch(chart, default_grid(chart)).size == int(np.prod(default_grid(chart)))

    def test_refined_doubles_each_axis(self, catenoid_patch):
        assert catenoid_patch.refined.grid == (32, 64)

    def test_disk_boundary_distance(self, disk_patch):
        assert disk_patch.distance_to_boundary(np.zeros(2)) == pytest.approx(1.0, rel=1e-12)

    def test_sphere_is_boundaryless(self, sphere_patch):
        assert sphere_patch.distance_to_boundary(np.zeros(3)) == math.inf

    def test_flat_ball_in_higher_codimension(self):
        chart = catalog("flat_ball", n=3, m=2, radius=2.0)
        assert chart.ambient_dim == 5 and chart.codim == 2
        patch = Patch(chart, [8, 8, 8])
        assert np.all(patch.nodes.x[:, 3:] == 0.0)
        assert np.max(np.linalg.norm(patch.nodes.mean_curvature, axis=1)) < 1e-10


def test_export_csv(tmp_path, disk_patch):
    path = tmp_path / "disk.csv"
    count = export_csv(disk_patch, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert count == disk_patch.size == len(rows) - 1
    assert rows[0] == ["u0", "u1", "x0", "x1", "weight", "sqrt_det_g", "H0", "H1", "abs_H"]
    assert float(rows[1][8]) < 1e-12


def test_export_csv_writes_the_mean_curvature_vector(tmp_path, sphere_patch):
    path = tmp_path / "sphere.csv"
    export_csv(sphere_patch, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][7:] == ["H0", "H1", "H2", "abs_H"]
    for row in rows[1:6]:
        x = np.array([float(v) for v in row[2:5]])
        H = np.array([float(v) for v in row[7:10]])
        np.testing.assert_allclose(H, -2.0 * x, atol=1e-8)
        assert float(row[10]) == pytest.approx(2.0, abs=1e-8)
