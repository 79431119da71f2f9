import csv
import math
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse, stats
from scipy.interpolate import PchipInterpolator
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from app.core.config import settings
from app.schemas.params import SobolevParams
from app.schemas.reports import JReport, ResidualReport, TransportReport
from app.services import constants
from app.services.catalog import catalog, default_grid
from app.services.geometry import NodeSet, Patch, evaluate_nodes, gradient_from_partials
from app.services.quadrature import integrate_1d
from app.services.sobolev import BumpFunction, TestFunction
from app.services.specfun import unit_ball_volume
from app.utils.errors import (
    DegenerateFunctionError, DomainError, InsufficientNeighborsError, NonConvergenceError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightedCloud:
    """Points in R^D with probability weights; source clouds also carry their surface geometry."""
    points: np.ndarray
    weights: np.ndarray
    label: str = ""
    nodes: Optional[NodeSet] = None
    periods: Optional[np.ndarray] = None
    
    def __post_init__(self):
        if self.points.shape[0] != self.weights.shape[0]:
            raise DomainError("Cloud points and weights differ in length",
                              {"points": self.points.shape[0], "weights": self.weights.shape[0]})
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise DomainError("Cloud weights must be a probability vector", {"sum": total})
    
    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class TransportPlan:
    """Entropic coupling with its dual potentials and solver diagnostics."""
    coupling: sparse.csr_matrix
    source_potential: np.ndarray
    target_potential: np.ndarray
    epsilon: float
    marginal_residual: float
    iterations: int
    converged: bool
    dual_history: Tuple[float, ...]
    dual_monotone: bool
    
    @cached_property
    def dense(self) -> np.ndarray:
        return self.coupling.toarray()
    
    def transport_cost(self, source: WeightedCloud, target: WeightedCloud) -> float:
        cost = 0.5 * cdist(source.points, target.points, "sqeuclidean")
        return float(np.sum(self.dense * cost))


def _lattice(chart, n_points: int, rng: np.random.Generator, jitter: float) -> Tuple[np.ndarray, float]:
    lengths = np.array([hi - lo for lo, hi in chart.bounds])
    scale = (n_points / np.prod(lengths)) ** (1.0 / chart.n)
    counts = [max(1, int(round(L * scale))) for L in lengths]
    axes = []
    for (lo, hi), count in zip(chart.bounds, counts):
        h = (hi - lo) / count
        axes.append(lo + h * (np.arange(count) + 0.5))
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=1)
    if jitter > 0:
        steps = lengths / np.array(counts)
        u = u + jitter * steps[None, :] * rng.uniform(-0.5, 0.5, size=u.shape)
    return u, float(np.prod(lengths) / u.shape[0])


def sample_source(patch: Patch, f: TestFunction, params: SobolevParams, n_points: int,
                  seed: Optional[int] = None, jitter: float = 0.0, halton: bool = False) -> WeightedCloud:
    """Parameter-space nodes weighted by f^{p*} sqrt(det g), normalized to a probability vector."""
    if not 0 < n_points <= settings.max_points:
        raise DomainError("Source size outside the allowed range",
                          {"n_points": n_points, "max_points": settings.max_points})
    chart = patch.chart
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    if halton:
        sampler = stats.qmc.Halton(d=chart.n, scramble=True, seed=rng)
        lo = np.array([b[0] for b in chart.bounds])
        hi = np.array([b[1] for b in chart.bounds])
        u = stats.qmc.scale(sampler.random(n_points), lo, hi)
        cell = float(np.prod(hi - lo) / n_points)
    else:
        u, cell = _lattice(chart, n_points, rng, jitter)
    
    nodes = evaluate_nodes(chart, u, curvature=False)
    raw = cell * np.abs(f.values(nodes)) ** params.p_star * nodes.sqrt_det
    total = float(np.sum(raw))
    if not math.isfinite(total) or total <= np.finfo(float).tiny:
        raise DegenerateFunctionError("Source density integrates to zero", {"total": total})
    
    keep = raw > 0
    dropped = int(np.sum(~keep))
    if dropped:
        logger.info(f"Dropped {dropped} zero-weight source nodes on {chart.name}")
    weights = raw[keep] / total
    weights = weights / weights.sum()
    periods = np.array([hi - lo if per else 0.0 for (lo, hi), per in zip(chart.bounds, chart.periodic)])
    return WeightedCloud(points=nodes.x[keep], weights=weights, label=f"source:{chart.name}",
                         nodes=nodes.subset(keep), periods=periods)


class TalentiRadialLaw:
    """Radial law of the target density proportional to (1 + |y|^p')^(-n - m/p') on R^(n+m).

    The CDF is tabulated in t = r/(1+r) by segment-wise quadrature and
    interpolated monotonically.
    """
    
    def __init__(self, params: SobolevParams, nodes: Optional[int] = None):
        self.params = params
        self.d = params.n + params.m
        self.q = params.p_dual
        self.e = params.n + params.m / self.q
        K = nodes or settings.target_cdf_nodes
        
        t = np.linspace(0.0, 1.0, K)
        pieces = np.array([integrate_1d(self._t_density, float(a), float(b)).value
                           for a, b in zip(t[:-1], t[1:])])
        total = float(np.sum(pieces))
        expected = constants.talenti_normalizer(params.n, params.m, params.p) / (self.d * unit_ball_volume(self.d))
        if abs(total - expected) > 1e-8 * expected:
            raise NonConvergenceError("Radial CDF construction failed",
                                      {"total": total, "expected": expected})
        
        cdf = np.concatenate([[0.0], np.cumsum(pieces) / total])
        cdf[-1] = 1.0
        self.t_nodes = t
        self.cdf_nodes = cdf
        self._cdf_t = PchipInterpolator(t, cdf)
        strictly = np.concatenate([[True], np.diff(cdf) > 0])
        self._quantile_t = PchipInterpolator(cdf[strictly], t[strictly])
    
    def radial_density(self, r: float) -> float:
        """Unnormalized density of |y|."""
        return (1.0 + r ** self.q) ** (-self.e) * r ** (self.d - 1)
    
    def _t_density(self, t: float) -> float:
        s = 1.0 - t
        return self.radial_density(t / s) / (s * s)
    
    def cdf(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.where(np.isinf(r), 1.0, r / (1.0 + np.where(np.isinf(r), 0.0, r)))
        return np.clip(self._cdf_t(t), 0.0, 1.0)
    
    def quantile(self, u) -> np.ndarray:
        t = np.clip(self._quantile_t(np.asarray(u, dtype=float)), 0.0, 1.0 - 1e-12)
        return t / (1.0 - t)


def target_moment(params: SobolevParams, upper: float = math.inf) -> float:
    """E|y|^p' under the target law, optionally truncated to |y| <= upper, by quadrature."""
    law_norm = constants.talenti_normalizer(params.n, params.m, params.p)
    d, q, e = params.ambient_dim, params.p_dual, params.n + params.m / params.p_dual
    sphere = d * unit_ball_volume(d)
    value = integrate_1d(lambda r: r ** q * (1.0 + r ** q) ** (-e) * r ** (d - 1), 0.0, upper).value
    return sphere * value / law_norm


def sample_target(params: SobolevParams, n_points: int, seed: Optional[int] = None,
                  stratified: bool = False, law: Optional[TalentiRadialLaw] = None) -> WeightedCloud:
    """Inverse-CDF radii times uniform directions on the sphere, equal weights.

    stratified replaces the i.i.d. radial uniforms by the midpoints (k + 1/2)/N
    in a seeded random order.
    """
    if not 0 < n_points <= settings.max_target_points:
        raise DomainError("Target size outside the allowed range",
                          {"n_points": n_points, "max_target_points": settings.max_target_points})
    law = law or TalentiRadialLaw(params)
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    if stratified:
        u = rng.permutation((np.arange(n_points) + 0.5) / n_points)
    else:
        u = rng.uniform(0.0, 1.0, n_points)
    radii = law.quantile(u)
    directions = rng.standard_normal((n_points, params.ambient_dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return WeightedCloud(points=radii[:, None] * directions,
                         weights=np.full(n_points, 1.0 / n_points), label="target:talenti")


def solve_plan(source: WeightedCloud, target: WeightedCloud, epsilon: float,
               tol: Optional[float] = None, max_iter: Optional[int] = None,
               check_every: int = 10) -> TransportPlan:
    """Log-domain Sinkhorn iterations for the cost |x - y|^2 / 2.

    The dual objective <f,a> + <g,b> - eps is recorded at each check and must
    not decrease. Potentials are shifted so that f has zero mean under a.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive", {"epsilon": epsilon})
    if max(source.size, target.size) > settings.max_points:
        raise DomainError("Clouds too large for a dense plan",
                          {"source": source.size, "target": target.size, "max_points": settings.max_points})
    tol = settings.sinkhorn_tol if tol is None else tol
    max_iter = settings.sinkhorn_max_iter if max_iter is None else max_iter
    
    a, b = source.weights, target.weights
    log_a, log_b = np.log(a), np.log(b)
    C = 0.5 * cdist(source.points, target.points, "sqeuclidean")
    f = np.zeros(source.size)
    g = np.zeros(target.size)
    history: List[float] = []
    residual = math.inf
    iterations = 0
    
    for iterations in range(1, max_iter + 1):
        f = epsilon * (log_a - logsumexp((g[None, :] - C) / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp((f[:, None] - C) / epsilon, axis=0))
        if iterations % check_every == 0 or iterations == max_iter:
            log_rows = logsumexp((f[:, None] + g[None, :] - C) / epsilon, axis=1)
            residual = float(np.sum(np.abs(np.exp(log_rows) - a)))
            history.append(float(f @ a + g @ b - epsilon))
            if residual <= tol:
                break
    
    converged = residual <= tol
    if not converged:
        logger.warning(f"Sinkhorn stopped after {iterations} iterations with residual {residual:.3e}")
    slack = 1e-12 * max(1.0, max((abs(v) for v in history), default=1.0))
    monotone = all(later >= earlier - slack for earlier, later in zip(history, history[1:]))
    if not monotone:
        logger.warning("Sinkhorn dual objective decreased between checks")
    
    shift = float(f @ a)
    f, g = f - shift, g + shift
    P = np.exp((f[:, None] + g[None, :] - C) / epsilon)
    logger.info(f"Sinkhorn eps={epsilon}: {iterations} iterations, residual {residual:.3e}")
    return TransportPlan(
        coupling=sparse.csr_matrix(P), source_potential=f, target_potential=g,
        epsilon=epsilon, marginal_residual=residual, iterations=iterations,
        converged=converged, dual_history=tuple(history), dual_monotone=monotone,
    )


def barycenters(plan: TransportPlan, target: WeightedCloud) -> Tuple[np.ndarray, np.ndarray]:
    """Row masses and barycentric targets y_bar(x)."""
    P = plan.dense
    rows = P.sum(axis=1)
    return rows, (P @ target.points) / rows[:, None]


def _wrap(du: np.ndarray, periods: Optional[np.ndarray]) -> np.ndarray:
    if periods is None:
        return du
    out = du.copy()
    for i, L in enumerate(periods):
        if L > 0:
            out[..., i] = (out[..., i] + 0.5 * L) % L - 0.5 * L
    return out


def potential_gradient(plan: TransportPlan, source: WeightedCloud, k: Optional[int] = None) -> np.ndarray:
    """Surface gradient of u = |x|^2/2 - f by local weighted quadratic least squares.

    Neighbours come from the k nearest source points in R^D; the fit uses
    chart-coordinate differences and is lifted with g^ij.
    """
    if source.nodes is None:
        raise DomainError("Gradient fitting needs a source cloud with surface geometry", {})
    k = k or settings.neighbors
    n = source.nodes.u.shape[1]
    unknowns = n + n * (n + 1) // 2
    if k < unknowns + 1 or source.size - 1 < k:
        raise InsufficientNeighborsError(
            "Not enough neighbours for a local quadratic fit",
            {"k": k, "unknowns": unknowns, "points": source.size},
        )
    
    phi = 0.5 * np.sum(source.points ** 2, axis=1) - plan.source_potential
    tree = cKDTree(source.points)
    dist, idx = tree.query(source.points, k=k + 1)
    dist, idx = dist[:, 1:], idx[:, 1:]
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    
    partials = np.empty((source.size, n))
    for i in range(source.size):
        du = _wrap(source.nodes.u[idx[i]] - source.nodes.u[i], source.periods)
        quad = np.stack([du[:, a] * du[:, b] * (0.5 if a == b else 1.0) for a, b in pairs], axis=1)
        design = np.hstack([du, quad])
        reach = dist[i].max() * 1.0001
        w = np.sqrt((1.0 - (dist[i] / reach) ** 3) ** 3)
        coef, *_ = np.linalg.lstsq(design * w[:, None], (phi[idx[i]] - phi[i]) * w, rcond=None)
        partials[i] = coef[:n]
    return gradient_from_partials(source.nodes, partials)


def _tangential_second_moments(plan: TransportPlan, source: WeightedCloud, target: WeightedCloud,
                               power: float, chunk: int = 256) -> np.ndarray:
    """Per source point: sum_y P(x,y) |P_T y|^power."""
    P = plan.dense
    Q = source.nodes.tangent_basis
    out = np.empty(source.size)
    for start in range(0, source.size, chunk):
        stop = min(start + chunk, source.size)
        coeffs = np.einsum("kdn,jd->kjn", Q[start:stop], target.points)
        norms = np.linalg.norm(coeffs, axis=2)
        out[start:stop] = np.sum(P[start:stop] * norms ** power, axis=1)
    return out


def structure_fields(plan: TransportPlan, source: WeightedCloud, target: WeightedCloud,
                     k: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Per-point tangential residual |P_T y_bar - grad u|, fibre dispersion and projector identity."""
    rows, ybar = barycenters(plan, target)
    tangential = source.nodes.project_tangent(ybar)
    normal = ybar - tangential
    grad_u = potential_gradient(plan, source, k)
    
    identity = np.abs(
        np.sum(ybar ** 2, axis=1) - np.sum(tangential ** 2, axis=1) - np.sum(normal ** 2, axis=1)
    ) / np.maximum(1.0, np.sum(ybar ** 2, axis=1))
    barycentric = np.linalg.norm(tangential - grad_u, axis=1)
    second = _tangential_second_moments(plan, source, target, 2.0) / rows
    dispersion = np.clip(second - np.sum(tangential ** 2, axis=1), 0.0, None)
    return {
        "ybar": ybar, "tangential": tangential, "grad_u": grad_u, "identity": identity,
        "barycentric": barycentric, "dispersion": dispersion,
    }


def tangential_structure_residual(plan: TransportPlan, source: WeightedCloud, target: WeightedCloud,
                                  k: Optional[int] = None) -> ResidualReport:
    """Median and 90th percentile of |P_T y_bar(x) - grad u(x)|; the fibre spread is reported apart."""
    fields = structure_fields(plan, source, target, k)
    spread = np.sqrt(fields["dispersion"])
    return ResidualReport(
        median=float(np.median(fields["barycentric"])),
        p90=float(np.percentile(fields["barycentric"], 90)),
        dispersion_median=float(np.median(spread)),
        dispersion_p90=float(np.percentile(spread, 90)),
        projector_identity_max=float(np.max(fields["identity"])),
        points=source.size,
    )


def estimate_J(plan: TransportPlan, source: WeightedCloud, target: WeightedCloud,
               params: SobolevParams) -> JReport:
    """Barycentric estimate sum_x a(x) |P_T y_bar(x)|^p' with its Jensen companion."""
    q = params.p_dual
    rows, ybar = barycenters(plan, target)
    tangential = source.nodes.project_tangent(ybar)
    j_hat = float(np.sum(source.weights * np.linalg.norm(tangential, axis=1) ** q))
    planwise = float(np.sum(_tangential_second_moments(plan, source, target, q)))
    empirical = float(np.sum(target.weights * np.linalg.norm(target.points, axis=1) ** q))
    bound = constants.j_bound(params.n, params.m, params.p)
    slack = max(0.0, empirical - bound) + plan.marginal_residual * float(
        np.max(np.linalg.norm(target.points, axis=1)) ** q
    )
    return JReport(
        j_hat=j_hat, planwise_moment=planwise, target_moment=empirical, j_bound=bound,
        slack=slack, jensen_ok=j_hat <= planwise + 1e-12,
    )


def experiment_source_function(patch: Patch) -> BumpFunction:
    """A bump around the area-weighted centroid reaching almost to the boundary."""
    weights = patch.area_weights
    center = (weights[:, None] * patch.nodes.x).sum(axis=0) / weights.sum()
    margin = patch.distance_to_boundary(center)
    radius = 0.98 * margin if math.isfinite(margin) else 1.0
    return BumpFunction(center=center, radius=radius)


def experiment_clouds(surface: str, params: SobolevParams, n_points: int, seed: int,
                      source_function: Optional[TestFunction] = None) -> Tuple[WeightedCloud, WeightedCloud]:
    """Source cloud on a catalog surface and a stratified Talenti target of the same size."""
    chart = catalog(surface)
    if chart.n != params.n or chart.codim != params.m:
        raise DomainError("Surface dimensions do not match the parameters",
                          {"surface": surface, "n": chart.n, "m": chart.codim})
    patch = Patch(chart, default_grid(chart))
    f = source_function or experiment_source_function(patch)
    source = sample_source(patch, f, params, n_points, seed=seed)
    target = sample_target(params, n_points, seed=seed, stratified=True)
    return source, target


def summarize(surface: str, params: SobolevParams, plan: TransportPlan, source: WeightedCloud,
              target: WeightedCloud, seed: int, k: Optional[int] = None) -> TransportReport:
    residual = tangential_structure_residual(plan, source, target, k)
    j = estimate_J(plan, source, target, params)
    return TransportReport(
        surface=surface, n=params.n, m=params.m, p=params.p, N=source.size, epsilon=plan.epsilon,
        seed=seed, marginal_residual=plan.marginal_residual, converged=plan.converged,
        iterations=plan.iterations, dual_monotone=plan.dual_monotone,
        median_tangential_residual=residual.median,
        median_tangential_dispersion=residual.dispersion_median,
        projector_identity_max=residual.projector_identity_max,
        J_hat=j.j_hat, j_bound=j.j_bound, slack=j.slack,
    )


def run_experiment(surface: str, params: SobolevParams, n_points: int, epsilon: float,
                   seed: int, k: Optional[int] = None,
                   source_function: Optional[TestFunction] = None) -> TransportReport:
    """Transport the surface measure f^{p*} dvol onto the Talenti target and summarize the structure."""
    source, target = experiment_clouds(surface, params, n_points, seed, source_function)
    plan = solve_plan(source, target, epsilon)
    return summarize(surface, params, plan, source, target, seed, k)


def export_pairs_csv(plan: TransportPlan, source: WeightedCloud, target: WeightedCloud,
                     path: Union[str, Path]) -> int:
    """One row per source point: x, its weight and the barycentric target."""
    _, ybar = barycenters(plan, target)
    D = source.points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{d}" for d in range(D)] + ["weight"] + [f"ybar{d}" for d in range(D)])
        for x, w, y in zip(source.points, source.weights, ybar):
            writer.writerow([f"{v:.17g}" for v in x] + [f"{w:.17g}"] + [f"{v:.17g}" for v in y])
    return source.size
