import math
import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Optional

import numpy as np

from app.core.config import settings
from app.schemas.reports import AlphaBoundReport, AlphaReport, IsoperimetricReport
from app.services import constants
from app.services.geometry import Patch
from app.services.quadrature import integrate_1d, integrate_boundary, integrate_patch, integrate_radial
from app.services.sobolev import TestFunction
from app.services.specfun import log_unit_ball_volume, unit_ball_volume
from app.utils.errors import DomainError, OrderingViolationError, PositivityError
from app.utils.search import golden_section_max

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-8
NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class RadialDensity:
    """A profile rho(s), zero for s > 1, normalized over the unit ball of R^(n+m).

    gap_profile, when given, evaluates rho(1 - w) directly from w; it keeps the
    slice integrals accurate where 1 - s would cancel.
    """
    name: str
    n: int
    m: int
    normalizer: float
    profile: Callable[[float], float]
    gap_profile: Optional[Callable[[float], float]] = None
    upper_bound: Optional[float] = None
    normalization_error: float = 0.0


def _verify_normalization(density: RadialDensity) -> RadialDensity:
    mass = integrate_radial(density.profile, density.n + density.m, radius=1.0, sine_map=True).value
    error = abs(mass - 1.0)
    if error > NORMALIZATION_TOL:
        raise DomainError(f"Density {density.name} is not normalized", {"mass": mass})
    return replace(density, normalization_error=error)


def power_density(j: int, n: int, m: int) -> RadialDensity:
    """rho_j(s) = c_j s^j on [0,1] with c_j = (2j+n+m)/((n+m) w_(n+m))."""
    if j < 1 or n < 2 or m < 1:
        raise DomainError("power_density needs j >= 1, n >= 2, m >= 1", {"j": j, "n": n, "m": m})
    c = math.exp(math.log(2 * j + n + m) - math.log(n + m) - log_unit_ball_volume(n + m))
    upper = m * unit_ball_volume(m) * c / (2 * j + m)
    density = RadialDensity(
        name=f"power_j{j}", n=n, m=m, normalizer=c,
        profile=lambda s: c * s ** j if 0.0 <= s <= 1.0 else 0.0,
        upper_bound=upper,
    )
    return _verify_normalization(density)


def sqrt_density(n: int) -> RadialDensity:
    """rho(s) = c / sqrt(1-s) on [0,1) with c = 1/(pi w_n); codimension one."""
    if n < 2:
        raise DomainError("sqrt_density needs n >= 2", {"n": n})
    c = 1.0 / (math.pi * unit_ball_volume(n))
    density = RadialDensity(
        name="sqrt", n=n, m=1, normalizer=c,
        profile=lambda s: c / math.sqrt(1.0 - s) if 0.0 <= s < 1.0 else 0.0,
        gap_profile=lambda w: c / math.sqrt(w) if w > 0.0 else 0.0,
    )
    return _verify_normalization(density)


def slice_integral(density: RadialDensity, r: float, tol: Optional[float] = None) -> float:
    """m w_m int_0^sqrt(1-r^2) rho(r^2 + t^2) t^(m-1) dt, using t = a sin(phi)."""
    if not 0.0 <= r <= 1.0:
        raise DomainError("Slice offset must lie in [0,1]", {"r": r})
    a = math.sqrt((1.0 - r) * (1.0 + r))
    if a == 0.0:
        return 0.0
    m = density.m
    
    def integrand(phi: float) -> float:
        sin_phi, cos_phi = math.sin(phi), math.cos(phi)
        if density.gap_profile is not None:
            rho = density.gap_profile(a * a * cos_phi * cos_phi)
        else:
            rho = density.profile(r * r + a * a * sin_phi * sin_phi)
        return rho * (a * sin_phi) ** (m - 1) * a * cos_phi
    
    inner = integrate_1d(integrand, 0.0, math.pi / 2, tol)
    return m * unit_ball_volume(m) * inner.value


def slice_spread(density: RadialDensity, z_grid: Optional[int] = None) -> float:
    """max - min of the slice integral over z in [0,1)."""
    z = np.linspace(0.0, 1.0, z_grid or settings.z_grid, endpoint=False)
    values = np.array([slice_integral(density, float(v)) for v in z])
    return float(values.max() - values.min())


def alpha_bounds(n: int, m: int) -> AlphaBoundReport:
    """Lower bound max{m w_m/((n+m) w_(n+m)), 1/w_n} on the alpha functional."""
    if n < 2 or m < 1:
        raise DomainError("alpha_bounds needs n >= 2, m >= 1", {"n": n, "m": m})
    log_volume = math.log(m) + log_unit_ball_volume(m) - math.log(n + m) - log_unit_ball_volume(n + m)
    log_inverse = -log_unit_ball_volume(n)
    equal = abs(log_volume - log_inverse) <= 1e-12 * max(1.0, abs(log_inverse))
    if m == 2 and not equal:
        raise OrderingViolationError("Branches differ at m = 2", {"n": n, "gap": log_volume - log_inverse})
    active = 1 if (log_volume > log_inverse and not equal) else 2
    return AlphaBoundReport(
        n=n, m=m, lower_bound=math.exp(max(log_volume, log_inverse)),
        branch_volume_ratio=math.exp(log_volume), branch_inverse_ball=math.exp(log_inverse),
        active_branch=active, branches_equal=equal,
    )


def alpha_of_density(density: RadialDensity, grid: Optional[int] = None) -> AlphaReport:
    """sup over r in [0,1] of the slice integral: dense scan, then golden-section refinement."""
    grid = grid or settings.alpha_grid
    nodes = np.linspace(0.0, 1.0, grid)
    values = np.array([slice_integral(density, float(r)) for r in nodes])
    k = int(np.argmax(values))
    best_r, best = float(nodes[k]), float(values[k])
    
    left, right = float(nodes[max(k - 1, 0)]), float(nodes[min(k + 1, grid - 1)])
    r, value, _ = golden_section_max(lambda s: slice_integral(density, s), left, right, settings.golden_tol)
    if value > best:
        best_r, best = r, value
    
    interior = values[:-1]
    return AlphaReport(
        density=density.name, n=density.n, m=density.m, alpha=best, argmax_r=best_r,
        slice_min=float(interior.min()), slice_max=float(interior.max()),
        lower_bound=alpha_bounds(density.n, density.m).lower_bound,
        upper_bound=density.upper_bound,
    )


def isoperimetric_constant(alpha: float, n: int) -> float:
    """Constant alpha^(1/n) / n produced by a density through the alpha form of the bound."""
    if alpha <= 0 or n < 2:
        raise DomainError("isoperimetric_constant needs alpha > 0 and n >= 2", {"alpha": alpha, "n": n})
    return alpha ** (1.0 / n) / n


def alpha_sweep(n: int, m: int, js: Iterable[int]) -> List[AlphaReport]:
    reports = []
    for j in js:
        report = alpha_of_density(power_density(j, n, m))
        logger.info(f"alpha(rho_{j}; n={n}, m={m}) = {report.alpha:.12g}")
        reports.append(report)
    return reports


def _check_positive(f: TestFunction, nodes, where: str) -> None:
    values = f.values(nodes)
    low = float(np.min(values)) if values.size else math.inf
    if low < POSITIVITY_FLOOR:
        raise PositivityError(f"Field is not strictly positive on the {where}", {"min": low})


def verify_isoperimetric(patch: Patch, f: TestFunction, rel_tol: float = 1e-8) -> IsoperimetricReport:
    """Both sides of the isoperimetric inequality with the mean curvature and boundary terms.

    The flat case m = 0 uses the codimension-one constant, which is the
    classical Euclidean one.
    """
    n, m = patch.n, patch.m
    _check_positive(f, patch.nodes, "patch")
    _check_positive(f, patch.refined.nodes, "refined patch")
    
    q = n / (n - 1.0)
    lhs = integrate_patch(patch, lambda nodes: f.values(nodes) ** q).value ** (1.0 / q)
    
    def gradient_integrand(nodes):
        grad = np.linalg.norm(f.surface_gradient(nodes), axis=1)
        h = np.linalg.norm(nodes.mean_curvature, axis=1)
        return np.sqrt(grad ** 2 + (f.values(nodes) * h) ** 2)
    gradient_term = integrate_patch(patch, gradient_integrand).value
    
    boundary_term = 0.0
    if patch.chart.boundary.kind != "closed" and patch.chart.boundary.faces:
        for face in patch.boundary_faces():
            _check_positive(f, face, "boundary")
        boundary_term = integrate_boundary(patch, f.values, respect_vanishing=False).value
    
    constant = constants.brendle_c(n, max(m, 1))
    rhs = constant * (gradient_term + boundary_term)
    ratio = lhs / rhs
    return IsoperimetricReport(
        surface=patch.chart.name, n=n, m=m, lhs=lhs, gradient_term=gradient_term,
        boundary_term=boundary_term, constant=constant, rhs=rhs, ratio=ratio,
        passed=lhs <= rhs * (1.0 + rel_tol),
    )
