import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.utils.errors import DomainError, ImmersionError

logger = logging.getLogger(__name__)

MapFn = Callable[[np.ndarray], np.ndarray]

METRIC_DET_FLOOR = 1e-14
FD_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BoundarySpec:
    """How a chart's parameter box meets the boundary of the surface.

    kind is "closed" (no boundary), "faces" (the listed box faces are the
    boundary) or "vanishing" (test functions are required to vanish near the
    listed faces, so boundary terms are omitted).
    """
    kind: str
    faces: Tuple[Tuple[int, str], ...] = ()
    
    def __post_init__(self):
        if self.kind not in ("closed", "faces", "vanishing"):
            raise DomainError("Unknown boundary kind", {"kind": self.kind})
        for axis, side in self.faces:
            if side not in ("lo", "hi"):
                raise DomainError("Boundary face side must be 'lo' or 'hi'", {"side": side})


@dataclass(frozen=True)
class Chart:
    """A parametrized n-dimensional surface in R^D.

    map_fn takes (N, n) parameters to (N, D) points. jacobian_fn returns
    (N, n, D) with row i equal to d_i F; hessian_fn returns (N, n, n, D).
    Missing derivatives are taken by central finite differences.
    """
    name: str
    n: int
    ambient_dim: int
    bounds: Tuple[Tuple[float, float], ...]
    periodic: Tuple[bool, ...]
    map_fn: MapFn
    jacobian_fn: Optional[MapFn] = None
    hessian_fn: Optional[MapFn] = None
    boundary: BoundarySpec = field(default_factory=lambda: BoundarySpec("vanishing"))
    minimal: bool = True
    
    def __post_init__(self):
        if self.ambient_dim < self.n:
            raise DomainError("Ambient dimension below surface dimension",
                              {"n": self.n, "D": self.ambient_dim})
        if len(self.bounds) != self.n or len(self.periodic) != self.n:
            raise DomainError("Bounds and periodicity must have one entry per axis",
                              {"name": self.name, "n": self.n})
    
    @property
    def codim(self) -> int:
        return self.ambient_dim - self.n
    
    def as_nodes(self, u) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(u, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.n:
            raise DomainError("Parameter array has the wrong width",
                              {"expected": self.n, "got": int(arr.shape[1])})
        return arr, single
    
    def map(self, u) -> np.ndarray:
        arr, single = self.as_nodes(u)
        x = self.map_fn(arr)
        return x[0] if single else x
    
    def jacobian(self, u) -> np.ndarray:
        arr, single = self.as_nodes(u)
        J = self.jacobian_fn(arr) if self.jacobian_fn else self.fd_jacobian(arr)
        return J[0] if single else J
    
    def hessian(self, u) -> np.ndarray:
        arr, single = self.as_nodes(u)
        H = self.hessian_fn(arr) if self.hessian_fn else self.fd_hessian(arr)
        return H[0] if single else H
    
    def fd_jacobian(self, u: np.ndarray) -> np.ndarray:
        """Central differences with step eps^(1/3) (1 + |u_i|)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.empty((u.shape[0], self.n, self.ambient_dim))
        for i in range(self.n):
            h = FD_EPS ** (1.0 / 3.0) * (1.0 + np.abs(u[:, i]))
            up, um = u.copy(), u.copy()
            up[:, i] += h
            um[:, i] -= h
            out[:, i, :] = (self.map_fn(up) - self.map_fn(um)) / (2.0 * h)[:, None]
        return out
    
    def fd_hessian(self, u: np.ndarray) -> np.ndarray:
        """Second central differences with step eps^(1/4) (1 + |u_i|)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        N = u.shape[0]
        out = np.empty((N, self.n, self.n, self.ambient_dim))
        h = FD_EPS ** 0.25 * (1.0 + np.abs(u))
        center = self.map_fn(u)
        for i in range(self.n):
            up, um = u.copy(), u.copy()
            up[:, i] += h[:, i]
            um[:, i] -= h[:, i]
            out[:, i, i, :] = (self.map_fn(up) - 2.0 * center + self.map_fn(um)) / (h[:, i] ** 2)[:, None]
            for j in range(i + 1, self.n):
                shifted = []
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    v = u.copy()
                    v[:, i] += si * h[:, i]
                    v[:, j] += sj * h[:, j]
                    shifted.append(self.map_fn(v))
                mixed = (shifted[0] - shifted[1] - shifted[2] + shifted[3]) / (4.0 * h[:, i] * h[:, j])[:, None]
                out[:, i, j, :] = mixed
                out[:, j, i, :] = mixed
        return out


@dataclass(frozen=True)
class NodeSet:
    """Differential data of a chart at a batch of parameter nodes.

    Arrays are indexed by node first. tangent_basis is (N, D, n) orthonormal,
    normal_frame is (N, D, m), mean_curvature is (N, D).
    """
    u: np.ndarray
    x: np.ndarray
    jacobian: np.ndarray
    metric: np.ndarray
    metric_inverse: np.ndarray
    sqrt_det: np.ndarray
    tangent_basis: np.ndarray
    normal_frame: np.ndarray
    second_fundamental_form: Optional[np.ndarray] = None
    mean_curvature: Optional[np.ndarray] = None
    
    @property
    def size(self) -> int:
        return int(self.u.shape[0])
    
    def project_tangent(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of (N, D) ambient vectors onto the tangent spaces."""
        coeffs = np.einsum("kdn,kd->kn", self.tangent_basis, v)
        return np.einsum("kdn,kn->kd", self.tangent_basis, coeffs)
    
    def subset(self, mask: np.ndarray) -> "NodeSet":
        pick = lambda a: None if a is None else a[mask]
        return NodeSet(
            u=self.u[mask], x=self.x[mask], jacobian=self.jacobian[mask],
            metric=self.metric[mask], metric_inverse=self.metric_inverse[mask],
            sqrt_det=self.sqrt_det[mask], tangent_basis=self.tangent_basis[mask],
            normal_frame=self.normal_frame[mask],
            second_fundamental_form=pick(self.second_fundamental_form),
            mean_curvature=pick(self.mean_curvature),
        )


def _metric(J: np.ndarray) -> np.ndarray:
    return np.einsum("kid,kjd->kij", J, J)


def _checked_det(chart: Chart, u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """det g, rejecting nodes whose Gram determinant is below the floor relative to prod g_ii."""
    det = np.linalg.det(g)
    scale = np.prod(np.diagonal(g, axis1=1, axis2=2), axis=1)
    bad = ~(det > METRIC_DET_FLOOR * scale) | ~(scale > 0)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ImmersionError(
            f"Chart {chart.name} is not an immersion at a node",
            {"u": u[k].tolist(), "det_g": float(det[k])},
        )
    return det


def _orthonormal_tangent(J: np.ndarray) -> np.ndarray:
    # QR of the (D, n) column matrix of d_i F gives an orthonormal basis of its span
    q, _ = np.linalg.qr(np.transpose(J, (0, 2, 1)))
    return q


def _normal_frame(Q: np.ndarray, m: int) -> np.ndarray:
    """Gram-Schmidt on ambient axes e_1, ..., e_D, keeping the first m outside the tangent span."""
    N, D, n = Q.shape
    frame = np.zeros((N, D, m))
    if m == 0:
        return frame
    count = np.zeros(N, dtype=int)
    eye = np.eye(D)
    for axis in range(D):
        v = np.broadcast_to(eye[axis], (N, D)).copy()
        for _ in range(2):
            v -= np.einsum("kdn,kn->kd", Q, np.einsum("kdn,kd->kn", Q, v))
            v -= np.einsum("kdm,km->kd", frame, np.einsum("kdm,kd->km", frame, v))
        norm = np.linalg.norm(v, axis=1)
        accept = (count < m) & (norm > 1e-3)
        if np.any(accept):
            idx = np.nonzero(accept)[0]
            frame[idx, :, count[idx]] = v[idx] / norm[idx, None]
            count[idx] += 1
    if np.any(count < m):
        raise ImmersionError("Could not complete a normal frame", {"missing": int(np.sum(count < m))})
    return frame


def evaluate_nodes(chart: Chart, u, curvature: bool = True) -> NodeSet:
    """Compute the induced geometry of chart at the given nodes."""
    u, _ = chart.as_nodes(u)
    x = chart.map_fn(u)
    J = chart.jacobian(u)
    g = _metric(J)
    det = _checked_det(chart, u, g)
    ginv = np.linalg.inv(g)
    Q = _orthonormal_tangent(J)
    frame = _normal_frame(Q, chart.codim)
    
    II = H = None
    if curvature:
        hess = chart.hessian(u)
        # II_ij = normal part of d_i d_j F
        tangential = np.einsum("kdn,kijn->kijd", Q, np.einsum("kdn,kijd->kijn", Q, hess))
        II = hess - tangential
        H = np.einsum("kij,kijd->kd", ginv, II)
    
    return NodeSet(u=u, x=x, jacobian=J, metric=g, metric_inverse=ginv,
                   sqrt_det=np.sqrt(det), tangent_basis=Q, normal_frame=frame,
                   second_fundamental_form=II, mean_curvature=H)


def _squeeze(arr: np.ndarray, single: bool) -> np.ndarray:
    return arr[0] if single else arr


def induced_metric(chart: Chart, u) -> np.ndarray:
    """g_ij = <d_i F, d_j F>."""
    arr, single = chart.as_nodes(u)
    nodes = evaluate_nodes(chart, arr, curvature=False)
    return _squeeze(nodes.metric, single)


def tangent_projector(chart: Chart, u) -> np.ndarray:
    arr, single = chart.as_nodes(u)
    Q = evaluate_nodes(chart, arr, curvature=False).tangent_basis
    return _squeeze(np.einsum("kan,kbn->kab", Q, Q), single)


def normal_frame(chart: Chart, u) -> np.ndarray:
    arr, single = chart.as_nodes(u)
    return _squeeze(evaluate_nodes(chart, arr, curvature=False).normal_frame, single)


def normal_projector(chart: Chart, u) -> np.ndarray:
    arr, single = chart.as_nodes(u)
    frame = evaluate_nodes(chart, arr, curvature=False).normal_frame
    return _squeeze(np.einsum("kam,kbm->kab", frame, frame), single)


def second_fundamental_form(chart: Chart, u) -> np.ndarray:
    """II with shape (n, n, D) per node; each entry is a normal vector."""
    arr, single = chart.as_nodes(u)
    return _squeeze(evaluate_nodes(chart, arr).second_fundamental_form, single)


def mean_curvature(chart: Chart, u) -> np.ndarray:
    """H = g^ij II_ij (trace, not averaged)."""
    arr, single = chart.as_nodes(u)
    return _squeeze(evaluate_nodes(chart, arr).mean_curvature, single)


def fd_partials(f: Callable[[np.ndarray], np.ndarray], u: np.ndarray) -> np.ndarray:
    """Central-difference partial derivatives of a scalar field on parameter space."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    for i in range(u.shape[1]):
        h = FD_EPS ** (1.0 / 3.0) * (1.0 + np.abs(u[:, i]))
        up, um = u.copy(), u.copy()
        up[:, i] += h
        um[:, i] -= h
        out[:, i] = (f(up) - f(um)) / (2.0 * h)
    return out


def gradient_from_partials(nodes: NodeSet, partials: np.ndarray) -> np.ndarray:
    """Ambient surface gradient sum_ij g^ij d_j f d_i F."""
    return np.einsum("kij,kj,kid->kd", nodes.metric_inverse, partials, nodes.jacobian)


def surface_gradient(chart: Chart, f: Callable[[np.ndarray], np.ndarray], u,
                     partials: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of a scalar field f(u) along the surface, as an ambient vector."""
    arr, single = chart.as_nodes(u)
    nodes = evaluate_nodes(chart, arr, curvature=False)
    if partials is None:
        partials = fd_partials(f, arr)
    return _squeeze(gradient_from_partials(nodes, np.atleast_2d(partials)), single)


def _axis_rule(lo: float, hi: float, count: int, periodic: bool, order: int) -> Tuple[np.ndarray, np.ndarray]:
    if count < 1:
        raise DomainError("Grid counts must be positive", {"count": count})
    if periodic:
        h = (hi - lo) / count
        return lo + h * np.arange(count), np.full(count, h)
    if count % order:
        raise DomainError("Non-periodic grid counts must be a multiple of the panel order",
                          {"count": count, "order": order})
    panels = count // order
    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return nodes, weights


def tensor_grid(axes: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return u, w


class Patch:
    """A chart sampled on a tensor quadrature grid with cached geometry.

    Periodic axes use the trapezoid rule, the others composite Gauss-Legendre
    panels, so no node ever sits on a degenerate pole or edge.
    """
    
    def __init__(self, chart: Chart, grid: Sequence[int], order: Optional[int] = None):
        self.chart = chart
        self.grid = tuple(int(c) for c in grid)
        self.order = order or settings.patch_order
        if len(self.grid) != chart.n:
            raise DomainError("Grid needs one count per chart axis",
                              {"n": chart.n, "grid": list(self.grid)})
        
        self.axes = [
            _axis_rule(lo, hi, count, per, self.order)
            for (lo, hi), count, per in zip(chart.bounds, self.grid, chart.periodic)
        ]
        u, w = tensor_grid(self.axes)
        self.weights = w
        self.nodes = evaluate_nodes(chart, u)
        logger.debug(f"Built patch on {chart.name} with grid {self.grid} ({self.size} nodes)")
    
    @property
    def size(self) -> int:
        return self.nodes.size
    
    @property
    def n(self) -> int:
        return self.chart.n
    
    @property
    def m(self) -> int:
        return self.chart.codim
    
    @property
    def area_weights(self) -> np.ndarray:
        """Quadrature weights times sqrt(det g)."""
        return self.weights * self.nodes.sqrt_det
    
    @cached_property
    def refined(self) -> "Patch":
        """The same chart with every grid count doubled."""
        return Patch(self.chart, [2 * c for c in self.grid], self.order)
    
    def boundary_faces(self) -> List["BoundaryFace"]:
        return [BoundaryFace(self, axis, side) for axis, side in self.chart.boundary.faces]
    
    @cached_property
    def boundary_points(self) -> np.ndarray:
        """Ambient points on every declared boundary face, stacked."""
        faces = self.boundary_faces()
        if not faces:
            return np.zeros((0, self.chart.ambient_dim))
        return np.concatenate([face.x for face in faces], axis=0)
    
    def distance_to_boundary(self, point: np.ndarray) -> float:
        pts = self.boundary_points
        if pts.shape[0] == 0:
            return float("inf")
        return float(np.min(np.linalg.norm(pts - point[None, :], axis=1)))


class BoundaryFace:
    """One face of a patch's parameter box, sampled with the patch's axis rules."""
    
    def __init__(self, patch: Patch, axis: int, side: str):
        chart = patch.chart
        self.axis, self.side = axis, side
        lo, hi = chart.bounds[axis]
        fixed = lo if side == "lo" else hi
        others = [i for i in range(chart.n) if i != axis]
        
        if others:
            u_rest, w = tensor_grid([patch.axes[i] for i in others])
        else:
            u_rest, w = np.zeros((1, 0)), np.ones(1)
        u = np.empty((u_rest.shape[0], chart.n))
        u[:, axis] = fixed
        u[:, others] = u_rest
        
        x = chart.map_fn(u)
        J = chart.jacobian(u)
        sub = J[:, others, :]
        det = np.linalg.det(np.einsum("kid,kjd->kij", sub, sub)) if others else np.ones(u.shape[0])
        self.u = u
        self.x = x
        self.weights = w
        self.line_element = np.sqrt(np.clip(det, 0.0, None))
    
    @property
    def size(self) -> int:
        return int(self.u.shape[0])


def export_csv(patch: Patch, path: Union[str, Path]) -> int:
    """Write one row per node with parameters, point, sqrt(det g), the H vector and |H|."""
    nodes = patch.nodes
    header = (
        [f"u{i}" for i in range(patch.n)]
        + [f"x{d}" for d in range(patch.chart.ambient_dim)]
        + ["weight", "sqrt_det_g"]
        + [f"H{d}" for d in range(patch.chart.ambient_dim)]
        + ["abs_H"]
    )
    H = nodes.mean_curvature
    abs_h = np.linalg.norm(H, axis=1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(patch.size):
            writer.writerow(
                [f"{v:.17g}" for v in nodes.u[k]]
                + [f"{v:.17g}" for v in nodes.x[k]]
                + [f"{patch.weights[k]:.17g}", f"{nodes.sqrt_det[k]:.17g}"]
                + [f"{v:.17g}" for v in H[k]]
                + [f"{abs_h[k]:.17g}"]
            )
    logger.info(f"Exported {patch.size} nodes of {patch.chart.name} to {path}")
    return patch.size
