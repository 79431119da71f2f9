import math
import logging
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from app.core.config import settings
from app.schemas.reports import QuadratureResult
from app.services.geometry import BoundaryFace, Patch
from app.services.specfun import unit_ball_volume
from app.utils.errors import DomainError, NoBoundaryError, NonConvergenceError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[float], float]
PatchIntegrand = Callable[[object], np.ndarray]


def integrate_1d(
    f: ScalarFn,
    a: float,
    b: float,
    tol: Optional[float] = None,
    points: Optional[Sequence[float]] = None,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod on [a, b]; b may be +inf.

    An infinite upper limit is mapped to [0, 1) by r = a + t/(1-t). The
    subdivision budget settings.quad_limit plays the role of a recursion
    depth cap: running out of it raises NonConvergenceError.
    """
    tol = settings.quad_tol if tol is None else tol
    if math.isnan(a) or math.isnan(b) or math.isinf(a):
        raise DomainError("Integration limits must be finite or b = +inf", {"a": a, "b": b})
    if b < a:
        raise DomainError("Integration interval is reversed", {"a": a, "b": b})
    if b == a:
        return QuadratureResult(value=0.0, abs_error_estimate=0.0, evaluations=0)
    
    if math.isinf(b):
        def g(t: float) -> float:
            s = 1.0 - t
            return f(a + t / s) / (s * s)
        lo, hi = 0.0, 1.0
        mapped = None if points is None else [(p - a) / (1.0 + p - a) for p in points]
    else:
        g, lo, hi, mapped = f, a, b, points
    
    mapped = None if not mapped else [p for p in mapped if lo < p < hi] or None
    out = integrate.quad(
        g, lo, hi, epsabs=tol, epsrel=tol, limit=settings.quad_limit,
        points=mapped, full_output=1,
    )
    value, err, info = out[0], out[1], out[2]
    if len(out) > 3 and err > max(tol, tol * abs(value)):
        logger.warning(f"Quadrature on [{a}, {b}] stopped early: {out[3]}")
        raise NonConvergenceError(
            "Adaptive quadrature did not reach tolerance",
            {"a": a, "b": b, "value": value, "error": err, "message": str(out[3])},
        )
    if not math.isfinite(value):
        raise NonConvergenceError("Quadrature produced a non-finite value", {"a": a, "b": b})
    return QuadratureResult(value=value, abs_error_estimate=err, evaluations=int(info["neval"]))


def integrate_radial(
    rho: Callable[[float], float],
    d: int,
    tol: Optional[float] = None,
    radius: float = math.inf,
    sine_map: bool = False,
) -> QuadratureResult:
    """Integral over R^d of x -> rho(|x|^2), reduced to d omega_d int rho(r^2) r^(d-1) dr.

    With sine_map the radius variable is r = radius sin(phi), which removes
    inverse square-root singularities at the edge of a finite support.
    """
    if d < 1:
        raise DomainError("Radial dimension must be positive", {"d": d})
    sphere = d * unit_ball_volume(d)
    
    if sine_map:
        if math.isinf(radius):
            raise DomainError("The sine substitution needs a finite radius", {"radius": radius})
        
        def integrand(phi: float) -> float:
            r = radius * math.sin(phi)
            return rho(r * r) * r ** (d - 1) * radius * math.cos(phi)
        inner = integrate_1d(integrand, 0.0, math.pi / 2, tol)
    else:
        inner = integrate_1d(lambda r: rho(r * r) * r ** (d - 1), 0.0, radius, tol)
    
    return QuadratureResult(
        value=sphere * inner.value,
        abs_error_estimate=sphere * inner.abs_error_estimate,
        evaluations=inner.evaluations,
    )


def patch_sum(patch: Patch, values: np.ndarray) -> float:
    """Tensor quadrature of node values against the area element."""
    return float(np.dot(patch.area_weights, values))


def integrate_patch(patch: Patch, integrand: PatchIntegrand, tol: Optional[float] = None) -> QuadratureResult:
    """Integrate a node-wise integrand over a patch.

    The value comes from the refined grid; the error estimate is the
    difference to the patch's own grid.
    """
    tol = settings.patch_tol if tol is None else tol
    coarse = patch_sum(patch, integrand(patch.nodes))
    fine_patch = patch.refined
    fine = patch_sum(fine_patch, integrand(fine_patch.nodes))
    err = abs(fine - coarse)
    if err > max(tol, tol * abs(fine)):
        logger.warning(
            f"Patch quadrature on {patch.chart.name} grid {patch.grid}: "
            f"error estimate {err:.3e} above tolerance {tol:.1e}"
        )
    return QuadratureResult(value=fine, abs_error_estimate=err,
                            evaluations=patch.size + fine_patch.size)


def _face_sum(faces: Sequence[BoundaryFace], integrand: PatchIntegrand) -> float:
    return float(sum(np.dot(face.weights * face.line_element, integrand(face)) for face in faces))


def integrate_boundary(patch: Patch, integrand: PatchIntegrand, respect_vanishing: bool = True) -> QuadratureResult:
    """Integrate over the declared boundary faces with the induced (n-1)-volume.

    The integrand receives each face, which exposes u and x like a node set.
    """
    spec = patch.chart.boundary
    if spec.kind == "closed" or not spec.faces:
        raise NoBoundaryError(f"Surface {patch.chart.name} has no boundary", {"kind": spec.kind})
    if spec.kind == "vanishing" and respect_vanishing:
        raise NoBoundaryError(
            f"Surface {patch.chart.name} declares vanishing test functions at its faces",
            {"kind": spec.kind},
        )
    coarse = _face_sum(patch.boundary_faces(), integrand)
    fine_faces = patch.refined.boundary_faces()
    fine = _face_sum(fine_faces, integrand)
    return QuadratureResult(
        value=fine,
        abs_error_estimate=abs(fine - coarse),
        evaluations=sum(face.size for face in fine_faces) + sum(f.size for f in patch.boundary_faces()),
    )
