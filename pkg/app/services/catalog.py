import math
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.services.geometry import BoundarySpec, Chart
from app.utils.errors import DomainError, UnknownSurfaceError

logger = logging.getLogger(__name__)

# A factor maps an axis coordinate array to (value, first derivative, second derivative)
Factor = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


def one(s):
    return np.ones_like(s), np.zeros_like(s), np.zeros_like(s)


def cos(s):
    return np.cos(s), -np.sin(s), -np.cos(s)


def sin(s):
    return np.sin(s), np.cos(s), -np.sin(s)


def cosh(s):
    return np.cosh(s), np.sinh(s), np.cosh(s)


def linear(scale: float = 1.0, offset: float = 0.0) -> Factor:
    def factor(s):
        return scale * s + offset, np.full_like(s, scale), np.zeros_like(s)
    return factor


def graded_radius(radius: float, grading: float) -> Factor:
    """r(xi) = R sinh(k xi) / sinh(k), which clusters nodes near the centre."""
    if grading <= 0:
        return linear(radius)
    norm = radius / math.sinh(grading)
    
    def factor(s):
        return (
            norm * np.sinh(grading * s),
            norm * grading * np.cosh(grading * s),
            norm * grading ** 2 * np.sinh(grading * s),
        )
    return factor


class ProductMap:
    """F_k(u) = prod_i h_ki(u_i) with analytic first and second derivatives.

    rows[k] lists one factor per axis, or is None for an identically zero coordinate.
    """
    
    def __init__(self, rows: Sequence[Optional[Sequence[Factor]]], n: int):
        self.rows = list(rows)
        self.n = n
    
    def _tables(self, u: np.ndarray):
        N, D = u.shape[0], len(self.rows)
        val = np.zeros((D, self.n, N))
        d1 = np.zeros((D, self.n, N))
        d2 = np.zeros((D, self.n, N))
        for k, row in enumerate(self.rows):
            if row is None:
                continue
            for i, factor in enumerate(row):
                val[k, i], d1[k, i], d2[k, i] = factor(u[:, i])
        return val, d1, d2
    
    @staticmethod
    def _prod_except(val: np.ndarray, skip: Sequence[int]) -> np.ndarray:
        keep = [i for i in range(val.shape[1]) if i not in skip]
        if not keep:
            return np.ones((val.shape[0], val.shape[2]))
        return np.prod(val[:, keep, :], axis=1)
    
    def map(self, u: np.ndarray) -> np.ndarray:
        val, _, _ = self._tables(u)
        return np.prod(val, axis=1).T
    
    def jacobian(self, u: np.ndarray) -> np.ndarray:
        val, d1, _ = self._tables(u)
        out = np.empty((u.shape[0], self.n, len(self.rows)))
        for a in range(self.n):
            out[:, a, :] = (d1[:, a, :] * self._prod_except(val, [a])).T
        return out
    
    def hessian(self, u: np.ndarray) -> np.ndarray:
        val, d1, d2 = self._tables(u)
        out = np.empty((u.shape[0], self.n, self.n, len(self.rows)))
        for a in range(self.n):
            out[:, a, a, :] = (d2[:, a, :] * self._prod_except(val, [a])).T
            for b in range(a + 1, self.n):
                mixed = (d1[:, a, :] * d1[:, b, :] * self._prod_except(val, [a, b])).T
                out[:, a, b, :] = mixed
                out[:, b, a, :] = mixed
        return out


def _sphere_rows(k: int, first_axis: int, n: int, lead: Optional[Factor] = None) -> List[List[Factor]]:
    """Hyperspherical coordinates of S^k placed on axes first_axis .. first_axis+k-1.

    Coordinate j is sin(phi_0)...sin(phi_{j-1}) cos(phi_j), the last one ends with sin.
    """
    rows = []
    for j in range(k + 1):
        row: List[Factor] = [one] * n
        if lead is not None:
            row[0] = lead
        for i in range(k):
            if i < j:
                row[first_axis + i] = sin
            elif i == j:
                row[first_axis + i] = cos
        rows.append(row)
    return rows


def _from_product(name: str, pm: ProductMap, n: int, bounds, periodic,
                  boundary: BoundarySpec, minimal: bool = True) -> Chart:
    return Chart(
        name=name, n=n, ambient_dim=len(pm.rows), bounds=tuple(bounds),
        periodic=tuple(periodic), map_fn=pm.map, jacobian_fn=pm.jacobian,
        hessian_fn=pm.hessian, boundary=boundary, minimal=minimal,
    )


def _all_faces(n: int, periodic: Sequence[bool]) -> Tuple[Tuple[int, str], ...]:
    return tuple((i, side) for i in range(n) if not periodic[i] for side in ("lo", "hi"))


def _boundary(kind: Optional[str], default: str, faces) -> BoundarySpec:
    kind = kind or default
    return BoundarySpec(kind, () if kind == "closed" else tuple(faces))


def flat(n: int = 2, m: int = 0, box: Optional[Sequence[Tuple[float, float]]] = None,
         boundary: Optional[str] = None) -> Chart:
    """The coordinate n-plane in R^(n+m) over a parameter box."""
    box = tuple(tuple(map(float, b)) for b in (box or [(0.0, 1.0)] * n))
    D = n + m
    
    def map_fn(u):
        x = np.zeros((u.shape[0], D))
        x[:, :n] = u
        return x
    
    def jacobian_fn(u):
        J = np.zeros((u.shape[0], n, D))
        J[:, np.arange(n), np.arange(n)] = 1.0
        return J
    
    periodic = (False,) * n
    return Chart(
        name="flat", n=n, ambient_dim=D, bounds=box, periodic=periodic,
        map_fn=map_fn, jacobian_fn=jacobian_fn,
        hessian_fn=lambda u: np.zeros((u.shape[0], n, n, D)),
        boundary=_boundary(boundary, "vanishing", _all_faces(n, periodic)),
    )


def flat_ball(n: int = 3, m: int = 0, radius: float = 1.0, grading: float = 0.0,
              boundary: Optional[str] = None, name: str = "flat_ball") -> Chart:
    """The ball of given radius in the coordinate n-plane, in polar coordinates."""
    if n < 2:
        raise DomainError("flat_ball needs n >= 2", {"n": n})
    rows: List[Optional[List[Factor]]] = _sphere_rows(n - 1, 1, n, lead=graded_radius(radius, grading))
    rows += [None] * m
    bounds = [(0.0, 1.0)] + [(0.0, math.pi)] * (n - 2) + [(0.0, 2.0 * math.pi)]
    periodic = [False] * (n - 1) + [True]
    return _from_product(name, ProductMap(rows, n), n, bounds, periodic,
                         _boundary(boundary, "faces", ((0, "hi"),)))


def disk(m: int = 0, radius: float = 1.0, boundary: Optional[str] = None) -> Chart:
    return flat_ball(2, m, radius, 0.0, boundary, name="disk")


def sphere(n: int = 2, radius: float = 1.0, boundary: Optional[str] = None) -> Chart:
    """Round sphere S^n in R^(n+1); not minimal, |H| = n / radius."""
    if n < 2:
        raise DomainError("sphere needs n >= 2", {"n": n})
    rows = _sphere_rows(n, 0, n)
    for row in rows:
        row[0] = _scaled(row[0], radius)
    bounds = [(0.0, math.pi)] * (n - 1) + [(0.0, 2.0 * math.pi)]
    periodic = [False] * (n - 1) + [True]
    return _from_product("sphere", ProductMap(rows, n), n, bounds, periodic,
                         _boundary(boundary, "closed", ()), minimal=False)


def _scaled(factor: Factor, c: float) -> Factor:
    def scaled(s):
        v, d1, d2 = factor(s)
        return c * v, c * d1, c * d2
    return scaled


def catenoid(height: float = 1.0, boundary: Optional[str] = None) -> Chart:
    """(cosh s cos t, cosh s sin t, s) for |s| <= height."""
    rows = [[cosh, cos], [cosh, sin], [linear(), one]]
    return _from_product("catenoid", ProductMap(rows, 2), 2,
                         [(-height, height), (0.0, 2.0 * math.pi)], [False, True],
                         _boundary(boundary, "vanishing", ((0, "lo"), (0, "hi"))))


def helicoid(radius: float = 1.0, twist: float = math.pi / 2, boundary: Optional[str] = None) -> Chart:
    """(s cos t, s sin t, t) for |s| <= radius, |t| <= twist."""
    rows = [[linear(), cos], [linear(), sin], [one, linear()]]
    periodic = [False, False]
    return _from_product("helicoid", ProductMap(rows, 2), 2,
                         [(-radius, radius), (-twist, twist)], periodic,
                         _boundary(boundary, "vanishing", _all_faces(2, periodic)))


def enneper(extent: float = 1.0, boundary: Optional[str] = None) -> Chart:
    """(u - u^3/3 + u v^2, v - v^3/3 + v u^2, u^2 - v^2) on a square."""
    
    def map_fn(w):
        u, v = w[:, 0], w[:, 1]
        return np.stack([u - u ** 3 / 3 + u * v ** 2, v - v ** 3 / 3 + v * u ** 2, u ** 2 - v ** 2], axis=1)
    
    def jacobian_fn(w):
        u, v = w[:, 0], w[:, 1]
        du = np.stack([1 - u ** 2 + v ** 2, 2 * u * v, 2 * u], axis=1)
        dv = np.stack([2 * u * v, 1 - v ** 2 + u ** 2, -2 * v], axis=1)
        return np.stack([du, dv], axis=1)
    
    def hessian_fn(w):
        u, v = w[:, 0], w[:, 1]
        two = np.full_like(u, 2.0)
        uu = np.stack([-2 * u, 2 * v, two], axis=1)
        uv = np.stack([2 * v, 2 * u, np.zeros_like(u)], axis=1)
        vv = np.stack([2 * u, -2 * v, -two], axis=1)
        return np.stack([np.stack([uu, uv], axis=1), np.stack([uv, vv], axis=1)], axis=1)
    
    periodic = (False, False)
    return Chart(
        name="enneper", n=2, ambient_dim=3, bounds=((-extent, extent),) * 2,
        periodic=periodic, map_fn=map_fn, jacobian_fn=jacobian_fn, hessian_fn=hessian_fn,
        boundary=_boundary(boundary, "vanishing", _all_faces(2, periodic)),
    )


def holomorphic_graph_z2(extent: float = 1.0, boundary: Optional[str] = None) -> Chart:
    """Graph of z -> z^2 in C^2 = R^4: (x, y, x^2 - y^2, 2xy)."""
    
    def map_fn(w):
        x, y = w[:, 0], w[:, 1]
        return np.stack([x, y, x ** 2 - y ** 2, 2 * x * y], axis=1)
    
    def jacobian_fn(w):
        x, y = w[:, 0], w[:, 1]
        o, z = np.ones_like(x), np.zeros_like(x)
        dx = np.stack([o, z, 2 * x, 2 * y], axis=1)
        dy = np.stack([z, o, -2 * y, 2 * x], axis=1)
        return np.stack([dx, dy], axis=1)
    
    def hessian_fn(w):
        N = w.shape[0]
        H = np.zeros((N, 2, 2, 4))
        H[:, 0, 0, 2] = 2.0
        H[:, 1, 1, 2] = -2.0
        H[:, 0, 1, 3] = 2.0
        H[:, 1, 0, 3] = 2.0
        return H
    
    periodic = (False, False)
    return Chart(
        name="holomorphic_graph_z2", n=2, ambient_dim=4, bounds=((-extent, extent),) * 2,
        periodic=periodic, map_fn=map_fn, jacobian_fn=jacobian_fn, hessian_fn=hessian_fn,
        boundary=_boundary(boundary, "vanishing", _all_faces(2, periodic)),
    )


SURFACES: Dict[str, Callable[..., Chart]] = {
    "flat": flat,
    "flat_ball": flat_ball,
    "disk": disk,
    "catenoid": catenoid,
    "helicoid": helicoid,
    "enneper": enneper,
    "holomorphic_graph_z2": holomorphic_graph_z2,
    "sphere": sphere,
}

# Grids used when a caller names a surface without a resolution
DEFAULT_GRIDS: Dict[str, Callable[[Chart], List[int]]] = {
    "flat": lambda c: [32] * c.n,
    "flat_ball": lambda c: [128] + [8] * (c.n - 2) + [16],
    "disk": lambda c: [32, 64],
    "catenoid": lambda c: [64, 128],
    "helicoid": lambda c: [48, 64],
    "enneper": lambda c: [48, 48],
    "holomorphic_graph_z2": lambda c: [48, 48],
    "sphere": lambda c: [32] * (c.n - 1) + [64],
}


def catalog(name: str, **params) -> Chart:
    """Look up a named surface and build its chart."""
    builder = SURFACES.get(name)
    if builder is None:
        raise UnknownSurfaceError(f"Unknown surface: {name}", {"known": sorted(SURFACES)})
    try:
        chart = builder(**params)
    except TypeError as e:
        raise DomainError(f"Bad parameters for surface {name}", {"reason": str(e)})
    logger.debug(f"Built chart {name} (n={chart.n}, D={chart.ambient_dim})")
    return chart


def default_grid(chart: Chart) -> List[int]:
    return DEFAULT_GRIDS.get(chart.name, lambda c: [32] * c.n)(chart)
