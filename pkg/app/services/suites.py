import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.schemas.params import SobolevParams
from app.schemas.reports import AsymptoticsReport, CheckResult, SuiteReport
from app.services import constants
from app.services.catalog import catalog, default_grid
from app.services.geometry import Patch, evaluate_nodes
from app.services.isoperimetric import (
    alpha_bounds, alpha_of_density, alpha_sweep, isoperimetric_constant, power_density,
    slice_spread, sqrt_density, verify_isoperimetric,
)
from app.services.quadrature import integrate_1d, integrate_radial
from app.services.sobolev import BubbleFunction, ChartFunction, seeded_bumps, sobolev_quotient
from app.services.specfun import log_unit_ball_volume, radial_integral_closed, unit_ball_volume
from app.services.transport import (
    experiment_clouds, solve_plan, summarize, tangential_structure_residual,
)
from app.utils.errors import NonConvergenceError, OrderingViolationError, UsageError

logger = logging.getLogger(__name__)

MINIMAL_SURFACES = ("catenoid", "helicoid", "enneper", "holomorphic_graph_z2")
ISOPERIMETRIC_SURFACES = ("flat", "disk", "catenoid", "helicoid", "enneper", "holomorphic_graph_z2", "sphere")


def sobolev_params(n: int, m: int, p: float, t: Optional[float] = None) -> SobolevParams:
    """Validated (n, m, p[, t]); validation failures become usage errors."""
    try:
        return SobolevParams(n=n, m=m, p=p, t=t)
    except ValidationError as e:
        raise UsageError("Invalid (n, m, p) parameters",
                         {"n": n, "m": m, "p": p, "t": t, "reason": str(e.errors()[0]["msg"])})


def check(name: str, passed: bool, value: Optional[float] = None,
          threshold: Optional[float] = None, detail: Optional[str] = None) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), value=value, threshold=threshold, detail=detail)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def _log_rel(log_a: float, log_b: float) -> float:
    """Relative difference of two positive numbers given by their logs."""
    return abs(math.expm1(log_a - log_b))


def _suite(name: str, checks: List[CheckResult], artifacts: Optional[Dict[str, Any]] = None) -> SuiteReport:
    passed = all(c.passed for c in checks)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        logger.warning(f"Suite {name}: {len(failed)} failed checks: {failed}")
    else:
        logger.info(f"Suite {name}: all {len(checks)} checks passed")
    return SuiteReport(suite=name, passed=passed, checks=checks, artifacts=artifacts or {})


def _collect(jobs: Sequence[Callable[[], List[CheckResult]]]) -> List[CheckResult]:
    """Run independent check groups; results keep the order of the jobs."""
    if settings.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            groups = list(pool.map(lambda job: job(), jobs))
    else:
        groups = [job() for job in jobs]
    return [c for group in groups for c in group]


class VerificationService:
    """Named verification suites over the constants, geometry and inequality services."""

    SUITES = (
        "identities", "quadrature-check", "sobolev-quotient", "isoperimetric",
        "alpha-sweep", "ot-experiment", "geometry", "asymptotics",
    )

    def run(self, suite: str, **options) -> SuiteReport:
        handlers = {
            "identities": self.identities,
            "quadrature-check": self.quadrature_check,
            "sobolev-quotient": self.sobolev_quotient,
            "isoperimetric": self.isoperimetric,
            "alpha-sweep": self.alpha_sweep,
            "ot-experiment": self.ot_experiment,
            "geometry": self.geometry,
            "asymptotics": self.asymptotics,
        }
        handler = handlers.get(suite)
        if handler is None:
            raise UsageError(f"Unknown suite: {suite}", {"known": list(self.SUITES)})
        options = {k: v for k, v in options.items() if v is not None}
        logger.info(f"Running suite {suite} with {options}")
        return handler(**options)

    # Constant identities

    def _closed_form_identities(self) -> List[CheckResult]:
        worst_tilde = max(
            _log_rel(constants.log_sobolev_s_tilde(n, m, 2.0), constants.log_sobolev_s(n, 2.0))
            for n in range(3, 51) for m in range(1, 101)
        )
        worst_at = max(
            _log_rel(constants.log_sobolev_s(n, 2.0),
                     math.log((n - 1) / math.sqrt(n * (n - 2))) + constants.log_aubin_talenti(n, 2.0))
            for n in range(3, 51)
        )
        worst_k = max(
            _log_rel(constants.log_k_of_t(n, m, 2.0, t), -0.5 * n * math.log(math.pi))
            for n in range(3, 51) for m in (0, 1, 2, 7, 30, 100) for t in (0.1, 0.5, 0.9)
        )
        worst_limit = max(
            _log_rel(
                constants.log_sobolev_s(n, p),
                math.log(constants.critical_exponent(n, p) / n) + math.log1p(-1.0 / n)
                - math.log(p) / p - math.log(constants.dual_exponent(p)) / constants.dual_exponent(p)
                + constants.log_k_limit(n, p) / n
                + (math.lgamma(n) - math.lgamma(n / p)) / n,
            )
            for n in range(3, 51) for p in (2.0, 2.5) if p < n
        )
        return [
            check("S_tilde(n,m,2) = S(n,2)", worst_tilde <= 1e-12, worst_tilde, 1e-12,
                  "n in [3,50], m in [1,100]"),
            check("S(n,2) = (n-1)/sqrt(n(n-2)) AT(n,2)", worst_at <= 1e-12, worst_at, 1e-12, "n in [3,50]"),
            check("K(n,m,2,t) = pi^(-n/2)", worst_k <= 1e-12, worst_k, 1e-12, "independent of m and t"),
            check("S(n,p) through the K limit", worst_limit <= 1e-11, worst_limit, 1e-11),
        ]

    def _chain(self) -> List[CheckResult]:
        try:
            for n in range(3, 31):
                constants.compare_chain(n)
        except OrderingViolationError as e:
            return [check("MS > C > S > AT", False, detail=e.message)]
        return [check("MS > C > S > AT", True, detail="n in [3,30], compact and non-compact codimension")]

    def _crossover(self) -> List[CheckResult]:
        results = []
        for p, below in ((1.5, True), (1.01, False)):
            s_tilde = constants.sobolev_s_tilde(3, 4, p)
            first, second = constants.legacy_constants(3, 4, p)
            ok = s_tilde < min(first, second) if below else s_tilde > max(first, second)
            relation = "below" if below else "above"
            results.append(check(f"S_tilde(3,4,{p}) {relation} both legacy constants", ok, s_tilde,
                                 min(first, second) if below else max(first, second)))
        return results

    def _exponents_and_volumes(self) -> List[CheckResult]:
        worst_exp = max(constants.exponent_identity_residual(n, p)
                        for n in range(2, 51) for p in (1.1, 1.5, 1.9, 2.0, 3.0, 7.5) if p < n)
        m1 = all((n + 1) * unit_ball_volume(n + 1) > 2 * unit_ball_volume(n) for n in range(2, 51))
        m2 = max(_log_rel(math.log(n + 2) + log_unit_ball_volume(n + 2),
                          math.log(2 * math.pi) + log_unit_ball_volume(n)) for n in range(2, 51))
        m3 = all(
            math.log(n + m) + log_unit_ball_volume(n + m)
            < math.log(m) + log_unit_ball_volume(m) + log_unit_ball_volume(n)
            for n in range(2, 51) for m in range(3, 31)
        )
        worst_tilde = max(
            _log_rel(constants.log_c_tilde(n, m, p), constants.log_c_tilde_from_normalizer(n, m, p))
            for n in range(2, 11) for m in range(1, 11) for p in (1.25, 1.5, 2.0, 3.0) if p < n
        )
        young = max(
            _rel(constants.young_cap_numeric(p, t)[1], constants.young_cap(p, t))
            for p in (1.5, 2.0, 3.0) for t in (1.0, 0.5)
        )
        argmin = max(abs(constants.k_argmin_numeric(n, m, p) - n / (n + m))
                     for n, m, p in ((3, 1, 2.5), (4, 2, 3.0), (5, 3, 4.0)))
        return [
            check("p'(p*(1-1/n) - 1) = p*", worst_exp <= 1e-12, worst_exp, 1e-12),
            check("(n+1) w_(n+1) > 2 w_n", m1),
            check("(n+2) w_(n+2) = 2 pi w_n", m2 <= 1e-12, m2, 1e-12),
            check("(n+m) w_(n+m) < m w_m w_n for m >= 3", m3),
            check("C_tilde closed form = normalizer form", worst_tilde <= 1e-11, worst_tilde, 1e-11),
            check("Young cap closed form = numeric maximum", young <= 1e-9, young, 1e-9),
            check("argmin_t K(n,m,p,t) = n/(n+m)", argmin <= 1e-6, argmin, 1e-6),
        ]

    def identities(self) -> SuiteReport:
        checks = _collect([self._closed_form_identities, self._chain, self._crossover, self._exponents_and_volumes])
        return _suite("identities", checks)

    # Quadrature oracles

    def quadrature_check(self, seed: Optional[int] = None, tuples: int = 20) -> SuiteReport:
        rng = np.random.default_rng(settings.seed if seed is None else seed)
        worst = 0.0
        rows = []
        for _ in range(tuples):
            beta = rng.uniform(0.0, 2.5)
            alpha = rng.uniform(1.5, 4.0)
            lam = rng.uniform(0.5, 3.0)
            gamma = (beta + 2.0) / alpha + rng.uniform(0.2, 2.0)
            closed = radial_integral_closed(lam, alpha, beta, gamma)
            numeric = integrate_1d(lambda r: (lam + r ** alpha) ** (-gamma) * r ** beta, 0.0, math.inf).value
            err = _rel(numeric, closed)
            worst = max(worst, err)
            rows.append({"lambda": lam, "alpha": alpha, "beta": beta, "gamma": gamma, "rel_error": err})

        normalizer_worst = 0.0
        for n, m, p in ((2, 1, 1.5), (3, 1, 2.0), (3, 2, 2.0), (3, 4, 1.5), (4, 3, 3.0)):
            q = constants.dual_exponent(p)
            e = n + m / q
            numeric = integrate_radial(lambda s: (1.0 + s ** (q / 2)) ** (-e), n + m).value
            normalizer_worst = max(normalizer_worst, _rel(numeric, constants.talenti_normalizer(n, m, p)))

        checks = [
            check("radial closed form = adaptive quadrature", worst <= 1e-10, worst, 1e-10,
                  f"{tuples} seeded admissible tuples"),
            check("c_nmp closed form = radial quadrature", normalizer_worst <= 1e-8, normalizer_worst, 1e-8),
        ]
        return _suite("quadrature-check", checks, {"tuples": rows})

    # Sobolev quotients

    def euclidean_recovery(self, radius: float = 50.0, lam: float = 0.1,
                           grid: Sequence[int] = (256, 8, 8)) -> List[CheckResult]:
        """A truncated bubble on a large flat 3-ball reaches the Euclidean constant from below."""
        params = sobolev_params(3, 0, 2.0)
        patch = Patch(catalog("flat_ball", n=3, m=0, radius=radius, grading=6.0), grid)
        margin = patch.distance_to_boundary(np.zeros(3))
        bubble = BubbleFunction(center=np.zeros(3), lam=lam, p=2.0, n=3,
                                r_inner=settings.cutoff_inner * margin, r_outer=settings.cutoff_outer * margin)
        report = sobolev_quotient(patch, bubble, params)
        at, s = constants.aubin_talenti(3, 2.0), constants.sobolev_s(3, 2.0)
        return [
            check("bubble quotient within [0.95, 1.0001] AT(3,2)",
                  0.95 * at <= report.quotient <= 1.0001 * at, report.quotient / at, 1.0),
            check("bubble quotient below S(3,2)", report.quotient < s, report.quotient, s),
        ]

    def sobolev_quotient(self, surface: str = "catenoid", p: float = 1.5, seeds: int = 10,
                         seed: Optional[int] = None, grid: Optional[List[int]] = None,
                         permissive: bool = False) -> SuiteReport:
        seed = settings.seed if seed is None else seed
        chart = catalog(surface)
        params = sobolev_params(chart.n, chart.codim, p)
        patch = Patch(chart, grid or default_grid(chart))
        checks: List[CheckResult] = []
        reports = []
        for k, bump in enumerate(seeded_bumps(patch, seeds, seed)):
            report = sobolev_quotient(patch, bump, params, permissive=permissive, seed=seed + k)
            reports.append(report.model_dump(mode="json"))
            if report.degenerate:
                checks.append(check(f"{surface} bump {k}: non-degenerate", False))
                continue
            checks.append(check(
                f"{surface} bump {k}: margin exceeds twice the quadrature uncertainty",
                report.margin > 0 and report.margin > 2 * report.uncertainty,
                report.margin, 2 * report.uncertainty, f"bound {report.bound_name.value}={report.bound:.6g}",
            ))
        if surface == "flat_ball" and chart.n == 3 and p == 2.0:
            checks.extend(self.euclidean_recovery())
        return _suite("sobolev-quotient", checks, {"quotients": reports})

    # Isoperimetric inequality

    def _constant_field(self) -> ChartFunction:
        return ChartFunction(fn=lambda u: np.ones(u.shape[0]), partials=lambda u: np.zeros(u.shape))

    def _isoperimetric_exact(self) -> List[CheckResult]:
        one = self._constant_field()
        sphere = verify_isoperimetric(Patch(catalog("sphere", n=2), [32, 64]), one)
        results = [check("unit sphere, f = 1: ratio 1/2", abs(sphere.ratio - 0.5) <= 1e-6, sphere.ratio, 0.5)]
        for m in (1, 2):
            disk = verify_isoperimetric(Patch(catalog("disk", m=m), [32, 64]), one)
            results.append(check(f"flat unit disk in R^{2 + m}, f = 1: ratio 1",
                                 abs(disk.ratio - 1.0) <= 1e-8, disk.ratio, 1.0))
        return results

    def _isoperimetric_seeded(self, surface: str, seeds: int, seed: int) -> List[CheckResult]:
        chart = catalog(surface)
        patch = Patch(chart, default_grid(chart))
        results = []
        for k, bump in enumerate(seeded_bumps(patch, seeds, seed)):
            report = verify_isoperimetric(patch, replace(bump, offset=1.0))
            results.append(check(f"{surface} field {k}: LHS <= RHS", report.passed, report.ratio, 1.0))
        return results

    def isoperimetric(self, seeds: int = 10, seed: Optional[int] = None,
                      surfaces: Sequence[str] = ISOPERIMETRIC_SURFACES) -> SuiteReport:
        seed = settings.seed if seed is None else seed
        jobs = [self._isoperimetric_exact] + [
            (lambda s=s: self._isoperimetric_seeded(s, seeds, seed)) for s in surfaces
        ]
        return _suite("isoperimetric", _collect(jobs))

    # Alpha functional

    def alpha_sweep(self, n: int = 2, m: int = 3, js: Sequence[int] = (1, 10, 100, 1000)) -> SuiteReport:
        checks: List[CheckResult] = []
        for dim in (2, 3):
            density = sqrt_density(dim)
            spread = slice_spread(density)
            checks.append(check(f"sqrt density n={dim}: slice integral constant", spread <= 1e-10, spread, 1e-10))
            alpha = alpha_of_density(density).alpha
            err = _rel(alpha, 1.0 / unit_ball_volume(dim))
            checks.append(check(f"sqrt density n={dim}: alpha = 1/w_n", err <= 1e-10, err, 1e-10))

        for j in (1, 10, 100):
            density = power_density(j, n, 2)
            alpha = alpha_of_density(density).alpha
            closed = math.pi * density.normalizer / (j + 1)
            err = max(_rel(alpha, closed), _rel(alpha, density.upper_bound))
            checks.append(check(f"m=2, j={j}: alpha = pi c_j/(j+1) = upper bound", err <= 1e-8, err, 1e-8))

        bounds = alpha_bounds(n, m)
        sweep = alpha_sweep(n, m, js)
        for report in sweep:
            inside = bounds.lower_bound * (1 - 1e-12) <= report.alpha <= report.upper_bound * (1 + 1e-10)
            checks.append(check(f"m={m}, {report.density}: lower <= alpha <= upper", inside, report.alpha,
                                report.upper_bound))
        alphas = [r.alpha for r in sweep]
        checks.append(check(f"m={m}: alpha decreasing along j", all(b < a for a, b in zip(alphas, alphas[1:]))))
        gap = _rel(alphas[-1], bounds.lower_bound)
        checks.append(check(f"m={m}, j={js[-1]}: alpha near the lower bound", gap <= 1e-2, gap, 1e-2))

        rows = [
            {"j": j, "alpha": r.alpha, "upper_bound": r.upper_bound, "lower_bound": r.lower_bound,
             "constant": isoperimetric_constant(r.alpha, n)}
            for j, r in zip(js, sweep)
        ]
        return _suite("alpha-sweep", checks, {"n": n, "m": m, "sweep": rows,
                                              "brendle_constant": constants.brendle_c(n, m)})

    # Optimal transport

    def ot_experiment(self, surface: str = "catenoid", p: float = 1.5, n_points: int = 500,
                      epsilon: float = 0.01, seed: int = 7,
                      epsilons: Sequence[float] = (0.1, 0.05, 0.025)) -> SuiteReport:
        chart = catalog(surface)
        params = sobolev_params(chart.n, chart.codim, p)
        source, target = experiment_clouds(surface, params, n_points, seed)
        plan = solve_plan(source, target, epsilon)
        report = summarize(surface, params, plan, source, target, seed)

        checks = [
            check("marginal residual", report.converged and report.marginal_residual <= settings.sinkhorn_tol,
                  report.marginal_residual, settings.sinkhorn_tol),
            check("dual objective non-decreasing", report.dual_monotone),
            check("projector identity", report.projector_identity_max <= 1e-12, report.projector_identity_max, 1e-12),
            check("J_hat <= j_bound + slack", report.J_hat <= report.j_bound + report.slack + 1e-12,
                  report.J_hat, report.j_bound + report.slack),
            check("J_hat <= j_bound + 0.1", report.J_hat <= report.j_bound + 0.1, report.J_hat, report.j_bound + 0.1),
        ]

        medians = []
        for eps in epsilons:
            trend_plan = solve_plan(source, target, eps)
            medians.append(tangential_structure_residual(trend_plan, source, target).median)
        checks.append(check(
            "tangential residual decreasing in epsilon",
            all(b < a for a, b in zip(medians, medians[1:])),
            detail=", ".join(f"eps={e}: {v:.4g}" for e, v in zip(epsilons, medians)),
        ))
        return _suite("ot-experiment", checks, {
            "report": report.model_dump(mode="json"),
            "trend": [{"epsilon": e, "median_residual": v} for e, v in zip(epsilons, medians)],
        })

    # Geometry

    def _geometry_of(self, name: str, points: int, rng: np.random.Generator, **params) -> List[CheckResult]:
        chart = catalog(name, **params)
        lo = np.array([b[0] for b in chart.bounds])
        hi = np.array([b[1] for b in chart.bounds])
        inset = 1e-3 * (hi - lo)
        u = rng.uniform(lo + inset, hi - inset, size=(points, chart.n))
        nodes = evaluate_nodes(chart, u)
        label = f"{name}(n={chart.n})" if name == "sphere" else name

        D = chart.ambient_dim
        P = np.einsum("kdn,ken->kde", nodes.tangent_basis, nodes.tangent_basis)
        P += np.einsum("kdm,kem->kde", nodes.normal_frame, nodes.normal_frame)
        projector = float(np.max(np.abs(P - np.eye(D)[None])))
        Q = nodes.tangent_basis
        tangential_ii = float(np.max(np.linalg.norm(
            np.einsum("kdn,kijn->kijd", Q, np.einsum("kdn,kijd->kijn", Q, nodes.second_fundamental_form)),
            axis=-1,
        )))
        abs_h = np.linalg.norm(nodes.mean_curvature, axis=1)
        results = [
            check(f"{label}: P_T + P_N = I", projector <= 1e-10, projector, 1e-10),
            check(f"{label}: II is normal", tangential_ii <= 1e-8, tangential_ii, 1e-8),
        ]
        if chart.minimal:
            worst = float(abs_h.max())
            results.append(check(f"{label}: |H| vanishes", worst <= 1e-6, worst, 1e-6))
        else:
            worst = float(np.max(np.abs(abs_h - chart.n)))
            results.append(check(f"{label}: |H| = n", worst <= 1e-8, worst, 1e-8))

        sample = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), size=(200, chart.n))
        fd_chart = replace(chart, jacobian_fn=None, hessian_fn=None)
        fd_nodes = evaluate_nodes(fd_chart, sample)
        exact = evaluate_nodes(chart, sample)
        fd_gap = float(max(
            np.max(np.abs(fd_nodes.jacobian - exact.jacobian)),
            np.max(np.abs(fd_nodes.mean_curvature - exact.mean_curvature)),
        ))
        results.append(check(f"{label}: finite differences match analytic derivatives", fd_gap <= 1e-5, fd_gap, 1e-5))
        return results

    def geometry(self, points: int = 10000, seed: Optional[int] = None) -> SuiteReport:
        rng = np.random.default_rng(settings.seed if seed is None else seed)
        checks: List[CheckResult] = []
        for name in MINIMAL_SURFACES:
            checks.extend(self._geometry_of(name, points, rng))
        for n in (2, 3):
            checks.extend(self._geometry_of("sphere", points, rng, n=n))
        return _suite("geometry", checks)

    # Asymptotics

    def asymptotics_report(self, ns: Sequence[int] = (100, 1000, 10 ** 4, 10 ** 6),
                           ps: Sequence[float] = (2.0, 3.0, 5.0)) -> AsymptoticsReport:
        rows = [constants.asymptotic_ratios(n, p, with_nash=(p == 2.0)) for p in ps for n in ns]
        checks: List[CheckResult] = []
        for p in ps:
            ratios = [r.ratio_s_at for r in rows if r.p == p]
            checks.append(check(f"S/AT > 1 (p={p})", all(r > 1 for r in ratios), min(ratios), 1.0))
            checks.append(check(f"S/AT decreasing in n (p={p})", all(b < a for a, b in zip(ratios, ratios[1:]))))
            checks.append(check(f"S/AT at n={ns[-1]} (p={p})", ratios[-1] <= 1.01, ratios[-1], 1.01))
        nash = [r.log_ratio_ms_c for r in rows if r.log_ratio_ms_c is not None]
        checks.append(check("MS/C(n,m_n) increasing in n", all(b > a for a, b in zip(nash, nash[1:]))))

        ms = np.array([1, 2, 5, 10, 100, 10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6], dtype=float)
        k_rows = []
        for n, p in ((3, 3.0), (4, 2.5)):
            logs = constants.log_k_opt_sequence(n, ms, p)
            limit = constants.log_k_limit(n, p)
            gap = _log_rel(float(logs[-1]), limit)
            checks.append(check(f"K_opt increasing in m (n={n}, p={p})", bool(np.all(np.diff(logs) > 0))))
            checks.append(check(f"K_opt -> K_limit (n={n}, p={p})", gap <= 1e-4, gap, 1e-4))
            k_rows.extend({"n": n, "p": p, "m": float(m), "k_opt": math.exp(v), "k_limit": math.exp(limit)}
                          for m, v in zip(ms, logs))
        return AsymptoticsReport(rows=rows, k_limit_rows=k_rows, checks=checks)

    def asymptotics(self) -> SuiteReport:
        report = self.asymptotics_report()
        return _suite("asymptotics", report.checks, {
            "rows": [r.model_dump() for r in report.rows], "k_limit_rows": report.k_limit_rows,
        })


# Global verification service instance
verification_service = VerificationService()
