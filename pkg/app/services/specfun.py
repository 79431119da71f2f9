import math
import logging

from scipy.special import gammaln

from app.schemas.params import RadialIntegralParams
from app.utils.errors import DomainError

logger = logging.getLogger(__name__)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for real x > 0."""
    if not math.isfinite(x) or x <= 0:
        raise DomainError("log_gamma requires a finite positive argument", {"x": x})
    return float(gammaln(x))


def log_unit_ball_volume(d: int) -> float:
    """ln omega_d with omega_d = pi^(d/2) / Gamma(d/2 + 1), for integer d >= 1."""
    if d < 1 or int(d) != d:
        raise DomainError("Ball dimension must be an integer d >= 1", {"d": d})
    return 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d + 1.0)


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    return math.exp(log_unit_ball_volume(d))


def unit_sphere_area(d: int) -> float:
    """Area of the unit sphere in R^d, d * omega_d."""
    return d * unit_ball_volume(d)


def radial_integral_log(params: RadialIntegralParams) -> float:
    """ln of int_0^inf (lam + r^alpha)^(-gamma) r^beta dr.

    Closed form via the Beta function:
    lam^((beta+1)/alpha - gamma) / alpha * B((beta+1)/alpha, gamma - (beta+1)/alpha).
    """
    a = (params.beta + 1.0) / params.alpha
    b = params.gamma - a
    return (
        (a - params.gamma) * math.log(params.lam)
        - math.log(params.alpha)
        + log_gamma(a)
        + log_gamma(b)
        - log_gamma(params.gamma)
    )


def radial_integral_closed(
    lam: float, alpha: float, beta: float, gamma: float
) -> float:
    """Closed form of int_0^inf (lam + r^alpha)^(-gamma) r^beta dr."""
    try:
        params = RadialIntegralParams(lam=lam, alpha=alpha, beta=beta, gamma=gamma)
    except ValueError as e:
        raise DomainError(
            "Radial integral parameters outside the convergence region",
            {"lambda": lam, "alpha": alpha, "beta": beta, "gamma": gamma, "reason": str(e)},
        )
    return math.exp(radial_integral_log(params))
