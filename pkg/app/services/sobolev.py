import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.schemas.params import SobolevParams
from app.schemas.reports import BoundName, QuotientReport, SearchReport
from app.services import constants
from app.services.geometry import NodeSet, Patch, fd_partials, gradient_from_partials
from app.services.quadrature import integrate_patch, patch_sum
from app.utils.errors import (
    DegenerateFunctionError, DomainError, EmptyFamilyError, NonMinimalPatchError,
)
from app.utils.search import golden_section_max

logger = logging.getLogger(__name__)

DEGENERATE_ENERGY = 1e-14


def smooth_cutoff(d: np.ndarray, r_inner: float, r_outer: float) -> Tuple[np.ndarray, np.ndarray]:
    """C^2 cutoff equal to 1 for d <= r_inner and 0 for d >= r_outer, with its derivative."""
    if math.isinf(r_outer):
        return np.ones_like(d), np.zeros_like(d)
    width = r_outer - r_inner
    s = np.clip((d - r_inner) / width, 0.0, 1.0)
    value = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
    slope = -30.0 * s ** 2 * (1.0 - s) ** 2 / width
    return value, slope


class TestFunction(ABC):
    """A scalar field on a patch with a surface gradient."""
    
    amplitude: float = 1.0
    
    @abstractmethod
    def values(self, nodes) -> np.ndarray:
        """Field values at nodes exposing u and x."""
    
    @abstractmethod
    def surface_gradient(self, nodes: NodeSet) -> np.ndarray:
        """Tangent ambient vectors, one per node."""
    
    def scaled(self, alpha: float) -> "TestFunction":
        return replace(self, amplitude=self.amplitude * alpha)


@dataclass(frozen=True)
class RadialAmbientFunction(TestFunction):
    """offset + amplitude * phi(|x - c|) for an ambient centre c."""
    center: np.ndarray
    amplitude: float = 1.0
    offset: float = 0.0
    
    @abstractmethod
    def profile(self, d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """phi and phi' at distances d."""
    
    def _distances(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        diff = x - self.center[None, :]
        return diff, np.linalg.norm(diff, axis=1)
    
    def values(self, nodes) -> np.ndarray:
        _, d = self._distances(nodes.x)
        phi, _ = self.profile(d)
        return self.offset + self.amplitude * phi
    
    def surface_gradient(self, nodes: NodeSet) -> np.ndarray:
        diff, d = self._distances(nodes.x)
        _, dphi = self.profile(d)
        safe = np.where(d > 0, d, 1.0)
        ambient = (self.amplitude * np.where(d > 0, dphi / safe, 0.0))[:, None] * diff
        return nodes.project_tangent(ambient)


@dataclass(frozen=True)
class BubbleFunction(RadialAmbientFunction):
    """Talenti bubble (1 + (d/lam)^p')^(-(n-p)/p) times a C^2 cutoff."""
    lam: float = 1.0
    p: float = 2.0
    n: int = 3
    r_inner: float = math.inf
    r_outer: float = math.inf
    
    def profile(self, d):
        q = self.p / (self.p - 1.0)
        e = (self.n - self.p) / self.p
        z = (d / self.lam) ** q
        base = (1.0 + z) ** (-e)
        dbase = -e * (1.0 + z) ** (-e - 1.0) * q * np.where(d > 0, z / np.where(d > 0, d, 1.0), 0.0)
        cut, dcut = smooth_cutoff(d, self.r_inner, self.r_outer)
        return base * cut, dbase * cut + base * dcut


@dataclass(frozen=True)
class BumpFunction(RadialAmbientFunction):
    """(1 - (d/R)^2)^3 inside the ambient ball of radius R, zero outside."""
    radius: float = 1.0
    
    def profile(self, d):
        w = np.clip(1.0 - (d / self.radius) ** 2, 0.0, None)
        return w ** 3, -6.0 * d / self.radius ** 2 * w ** 2


@dataclass(frozen=True)
class ChartFunction(TestFunction):
    """A field given on chart coordinates; gradients by central differences unless partials are supplied."""
    fn: Callable[[np.ndarray], np.ndarray]
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    amplitude: float = 1.0
    
    def values(self, nodes) -> np.ndarray:
        return self.amplitude * np.asarray(self.fn(nodes.u), dtype=float)
    
    def surface_gradient(self, nodes: NodeSet) -> np.ndarray:
        du = self.partials(nodes.u) if self.partials else fd_partials(self.fn, nodes.u)
        return self.amplitude * gradient_from_partials(nodes, du)


def lp_norm(patch: Patch, f: TestFunction, q: float) -> float:
    """(int |f|^q dvol)^(1/q)."""
    if q <= 0:
        raise DomainError("Norm exponent must be positive", {"q": q})
    result = integrate_patch(patch, lambda nodes: np.abs(f.values(nodes)) ** q)
    return max(result.value, 0.0) ** (1.0 / q)


def dirichlet_energy(patch: Patch, f: TestFunction, p: float) -> float:
    """(int |grad f|^p dvol)^(1/p)."""
    if p <= 1:
        raise DomainError("Energy exponent must exceed 1", {"p": p})
    result = integrate_patch(
        patch, lambda nodes: np.linalg.norm(f.surface_gradient(nodes), axis=1) ** p
    )
    return max(result.value, 0.0) ** (1.0 / p)


def _norms_on(patch: Patch, f: TestFunction, params: SobolevParams) -> Tuple[float, float]:
    nodes = patch.nodes
    lp = max(patch_sum(patch, np.abs(f.values(nodes)) ** params.p_star), 0.0) ** (1.0 / params.p_star)
    grad = np.linalg.norm(f.surface_gradient(nodes), axis=1)
    energy = max(patch_sum(patch, grad ** params.p), 0.0) ** (1.0 / params.p)
    return lp, energy


def applicable_bounds(params: SobolevParams, permissive: bool = False) -> Tuple[BoundName, Dict[str, float], bool]:
    """Primary bound name, every applicable bound, and whether evaluation left the theorem ranges."""
    n, m, p = params.n, params.m, params.p
    bounds: Dict[str, float] = {}
    s_inside = n >= 3 and p >= 2.0
    if s_inside:
        bounds[BoundName.S.value] = constants.sobolev_s(n, p)
    
    if m == 0:
        bounds[BoundName.AT_REFERENCE.value] = constants.aubin_talenti(n, p)
        return BoundName.AT_REFERENCE, bounds, False
    
    if p <= 2.0 and not (n == 2 and p >= 2.0):
        bounds[BoundName.S_TILDE.value] = constants.sobolev_s_tilde(n, m, p)
    if bounds:
        primary = BoundName.S if BoundName.S.value in bounds else BoundName.S_TILDE
        return primary, bounds, False
    
    if not permissive:
        raise DomainError("No theorem bound applies to these parameters", params.model_dump())
    if n >= 3:
        bounds[BoundName.S.value] = constants.sobolev_s(n, p, permissive=True)
        return BoundName.S, bounds, True
    bounds[BoundName.S_TILDE.value] = constants.sobolev_s_tilde(n, m, p, permissive=True)
    return BoundName.S_TILDE, bounds, True


def _check_patch(patch: Patch, params: SobolevParams) -> None:
    if params.m != patch.m or params.n != patch.n:
        raise DomainError("Parameters do not match the patch dimensions",
                          {"n": params.n, "m": params.m, "patch_n": patch.n, "patch_m": patch.m})
    if not patch.chart.minimal:
        raise NonMinimalPatchError(
            f"Surface {patch.chart.name} is not minimal; the Sobolev bounds need H = 0",
            {"surface": patch.chart.name},
        )


def sobolev_quotient(patch: Patch, f: TestFunction, params: SobolevParams,
                     permissive: bool = False, seed: Optional[int] = None) -> QuotientReport:
    """||f||_{p*} / ||grad f||_p on the patch grid and its refinement, against the theorem bound."""
    _check_patch(patch, params)
    primary, bounds, outside = applicable_bounds(params, permissive)
    bound = bounds[primary.value]
    report = QuotientReport(
        surface=patch.chart.name, n=params.n, m=params.m, p=params.p, seed=seed,
        bound=bound, bound_name=primary, bounds=bounds, grid=list(patch.grid),
        out_of_theorem=outside,
    )
    
    lp_coarse, energy_coarse = _norms_on(patch, f, params)
    lp_fine, energy_fine = _norms_on(patch.refined, f, params)
    report.lpstar_norm, report.dirichlet_p_norm = lp_fine, energy_fine
    
    if energy_fine < DEGENERATE_ENERGY or energy_coarse < DEGENERATE_ENERGY:
        logger.warning(f"Degenerate test function on {patch.chart.name}: energy {energy_fine:.3e}")
        report.degenerate = True
        return report
    
    report.quotient = lp_fine / energy_fine
    report.quotient_coarse = lp_coarse / energy_coarse
    report.uncertainty = abs(report.quotient - report.quotient_coarse)
    report.margin = bound - report.quotient
    return report


def quick_quotient(patch: Patch, f: TestFunction, params: SobolevParams) -> float:
    """Quotient on the patch grid only; -inf for degenerate functions."""
    lp, energy = _norms_on(patch, f, params)
    if energy < DEGENERATE_ENERGY:
        return -math.inf
    return lp / energy


@dataclass(frozen=True)
class BubbleFamily:
    """Bubbles centred in a chart box (or at a fixed ambient point) with log-uniform scales."""
    lam_range: Tuple[float, float]
    center_box: Optional[Tuple[Tuple[float, float], ...]] = None
    fixed_center: Optional[Tuple[float, ...]] = None
    inner_fraction: float = settings.cutoff_inner
    outer_fraction: float = settings.cutoff_outer
    amplitude: float = 1.0
    
    def validate(self, patch: Patch) -> None:
        lo, hi = self.lam_range
        if self.amplitude == 0.0 or not (0.0 < lo <= hi):
            raise EmptyFamilyError("Bubble family admits only the zero function",
                                   {"amplitude": self.amplitude, "lam_range": list(self.lam_range)})
        if self.fixed_center is None and self.center_box is None:
            raise EmptyFamilyError("Bubble family has no admissible centre", {})
        if self.center_box is not None and len(self.center_box) != patch.n:
            raise DomainError("Centre box needs one interval per chart axis", {"n": patch.n})
    
    def free_axes(self) -> List[int]:
        if self.center_box is None:
            return []
        return [i for i, (lo, hi) in enumerate(self.center_box) if hi > lo]
    
    def member(self, patch: Patch, u_center: Optional[np.ndarray], lam: float,
               params: SobolevParams) -> BubbleFunction:
        if self.fixed_center is not None:
            center = np.asarray(self.fixed_center, dtype=float)
        else:
            center = patch.chart.map(np.asarray(u_center, dtype=float))
        margin = patch.distance_to_boundary(center)
        if margin <= 0:
            raise EmptyFamilyError("Bubble centre sits on the boundary", {"center": center.tolist()})
        return BubbleFunction(
            center=center, amplitude=self.amplitude, lam=lam, p=params.p, n=params.n,
            r_inner=self.inner_fraction * margin, r_outer=self.outer_fraction * margin,
        )


def maximize_quotient(patch: Patch, family: BubbleFamily, params: SobolevParams,
                      budget: int = 80, seed: Optional[int] = None,
                      line_iterations: int = 14, permissive: bool = False) -> SearchReport:
    """Coordinate ascent with golden-section line searches over (centre, log lam)."""
    _check_patch(patch, params)
    family.validate(patch)
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    
    axes = family.free_axes()
    u = None
    if family.fixed_center is None:
        u = np.array([0.5 * (lo + hi) for lo, hi in family.center_box])
        for i in axes:
            lo, hi = family.center_box[i]
            u[i] = rng.uniform(lo, hi)
    log_lo, log_hi = (math.log(v) for v in family.lam_range)
    log_lam = rng.uniform(log_lo, log_hi) if log_hi > log_lo else log_lo
    
    evaluations = 0
    
    def objective(u_c, ll) -> float:
        nonlocal evaluations
        evaluations += 1
        return quick_quotient(patch, family.member(patch, u_c, math.exp(ll), params), params)
    
    best = objective(u, log_lam)
    exhausted = False
    coordinates = [("lam", None)] + [("center", i) for i in axes]
    
    while not exhausted:
        start = best
        for kind, axis in coordinates:
            if evaluations + line_iterations + 2 > budget:
                exhausted = True
                break
            if kind == "lam":
                if log_hi <= log_lo:
                    continue
                x, value, _ = golden_section_max(lambda ll: objective(u, ll), log_lo, log_hi,
                                                 settings.golden_tol, line_iterations)
                if value > best:
                    best, log_lam = value, x
            else:
                lo, hi = family.center_box[axis]
                
                def along(s, axis=axis):
                    trial = u.copy()
                    trial[axis] = s
                    return objective(trial, log_lam)
                x, value, _ = golden_section_max(along, lo, hi, settings.golden_tol, line_iterations)
                if value > best:
                    best = value
                    u = u.copy()
                    u[axis] = x
        if best - start <= 1e-10 * max(1.0, abs(best)):
            break
    
    if exhausted:
        logger.warning(f"Quotient search on {patch.chart.name} used its budget of {budget} evaluations")
    
    winner = family.member(patch, u, math.exp(log_lam), params)
    report = sobolev_quotient(patch, winner, params, permissive=permissive, seed=seed)
    argmax = {"lam": math.exp(log_lam), "center": winner.center.tolist()}
    if u is not None:
        argmax["u_center"] = u.tolist()
    return SearchReport(best=report, argmax=argmax, evaluations=evaluations, budget_exhausted=exhausted)


def seeded_bumps(patch: Patch, count: int, seed: int, inner: float = 0.6,
                 radius_range: Tuple[float, float] = (0.3, 0.9)) -> List[BumpFunction]:
    """Bumps centred in the middle of the parameter box with radii a fraction of the boundary margin."""
    rng = np.random.default_rng(seed)
    chart = patch.chart
    bumps = []
    for _ in range(count):
        u = np.empty(chart.n)
        for i, ((lo, hi), periodic) in enumerate(zip(chart.bounds, chart.periodic)):
            if periodic:
                u[i] = rng.uniform(lo, hi)
            else:
                mid, half = 0.5 * (lo + hi), 0.5 * inner * (hi - lo)
                u[i] = rng.uniform(mid - half, mid + half)
        center = chart.map(u)
        margin = patch.distance_to_boundary(center)
        if math.isinf(margin):
            margin = 1.0
        radius = rng.uniform(*radius_range) * margin
        bumps.append(BumpFunction(center=center, radius=radius))
    return bumps
