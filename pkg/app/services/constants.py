import math
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn, gammaln

from app.core.config import settings
from app.schemas.reports import (
    AsymptoticRow, ChainEntry, ChainReport, CheckResult, ConstantReport, ConstantTable,
)
from app.services.specfun import log_gamma, log_unit_ball_volume
from app.utils.errors import DomainError, OrderingViolationError
from app.utils.search import golden_section_min, scan_then_refine_max

logger = logging.getLogger(__name__)

LOG_MAX = math.log(np.finfo(float).max)


def safe_exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < LOG_MAX else math.inf


def dual_exponent(p: float) -> float:
    return p / (p - 1.0)


def critical_exponent(n: int, p: float) -> float:
    return p * n / (n - p)


def _log_codim_ball(m: int) -> float:
    # omega_0 = 1 so the ambient formulas cover m = 0
    return 0.0 if m == 0 else log_unit_ball_volume(m)


def _require_p(n: int, p: float, what: str) -> None:
    if n < 2:
        raise DomainError(f"{what} needs n >= 2", {"n": n})
    if not (1.0 < p < n):
        raise DomainError(f"{what} needs 1 < p < n", {"n": n, "p": p})


def _theorem_window(inside: bool, what: str, permissive: bool, details: Dict) -> bool:
    """Return True when evaluation is outside the theorem's range (only allowed if permissive)."""
    if inside:
        return False
    if not permissive:
        raise DomainError(f"{what} is outside its theorem range; use the permissive flag to study it", details)
    logger.info(f"Evaluating {what} out of theorem range: {details}")
    return True


def log_aubin_talenti(n: int, p: float) -> float:
    _require_p(n, p, "AT(n,p)")
    q = dual_exponent(p)
    return (
        -0.5 * math.log(math.pi)
        - math.log(n) / p
        + math.log((p - 1.0) / (n - p)) / q
        + (log_gamma(n / 2 + 1) + log_gamma(n) - log_gamma(n / p) - log_gamma(n / q + 1)) / n
    )


def aubin_talenti(n: int, p: float) -> float:
    """Sharp Euclidean L^p Sobolev constant."""
    return safe_exp(log_aubin_talenti(n, p))


def log_michael_simon(n: int) -> float:
    if n < 2:
        raise DomainError("MS(n) needs n >= 2", {"n": n})
    return (n + 1) * math.log(4.0) - log_unit_ball_volume(n) / n


def michael_simon(n: int) -> float:
    return safe_exp(log_michael_simon(n))


def brendle_branches(n: int, m: int) -> Tuple[float, float]:
    """Log values of the volume-ratio branch and the inverse-ball branch of C(n,m)."""
    if n < 2 or m < 1:
        raise DomainError("C(n,m) needs n >= 2 and m >= 1", {"n": n, "m": m})
    volume_ratio = -math.log(n) + (
        math.log(m) + log_unit_ball_volume(m) - math.log(n + m) - log_unit_ball_volume(n + m)
    ) / n
    inverse_ball = -math.log(n) - log_unit_ball_volume(n) / n
    return volume_ratio, inverse_ball


def active_branch(n: int, m: int) -> int:
    """1 when the volume-ratio branch strictly dominates, otherwise 2."""
    b1, b2 = brendle_branches(n, m)
    return 1 if b1 - b2 > 1e-12 * max(1.0, abs(b2)) else 2


def log_brendle_c(n: int, m: int) -> float:
    return max(brendle_branches(n, m))


def brendle_c(n: int, m: int) -> float:
    """Isoperimetric constant C(n,m) for submanifolds of codimension m."""
    return safe_exp(log_brendle_c(n, m))


def log_sobolev_s(n: int, p: float, permissive: bool = False) -> float:
    _require_p(n, p, "S(n,p)")
    _theorem_window(n >= 3 and p >= 2.0, "S(n,p)", permissive, {"n": n, "p": p})
    q = dual_exponent(p)
    return (
        math.log(critical_exponent(n, p) / n)
        + math.log1p(-1.0 / n)
        - math.log(p) / p
        - 0.5 * math.log(2.0 * math.pi)
        + (1.0 / q - 0.5) * (1.0 - math.log(n))
        + (log_gamma(n) - log_gamma(n / p)) / n
    )


def sobolev_s(n: int, p: float, permissive: bool = False) -> float:
    """Codimension-free Sobolev constant for p >= 2."""
    return safe_exp(log_sobolev_s(n, p, permissive))


def log_c_tilde(n: int, m: int, p: float) -> float:
    """ln of (w_m G(m/p'+1) / (w_(n+m) G((n+m)/p'+1)) * G(n)/G(n/p))^(1/n)."""
    _require_p(n, p, "C~(n,m,p)")
    if m < 0:
        raise DomainError("Codimension must be non-negative", {"m": m})
    q = dual_exponent(p)
    return (
        _log_codim_ball(m) + log_gamma(m / q + 1) - log_unit_ball_volume(n + m)
        - log_gamma((n + m) / q + 1) + log_gamma(n) - log_gamma(n / p)
    ) / n


def log_c_tilde_from_normalizer(n: int, m: int, p: float) -> float:
    """Same constant written through c_{n,m,p}; an independent path for cross-checks."""
    if m < 1:
        raise DomainError("The normalizer form needs m >= 1", {"m": m})
    q = dual_exponent(p)
    return (
        -log_talenti_normalizer(n, m, p) + math.log(m) + log_unit_ball_volume(m)
        + log_gamma(n) + log_gamma(m / q) - math.log(q) - log_gamma(n + m / q)
    ) / n


def c_tilde(n: int, m: int, p: float) -> float:
    return safe_exp(log_c_tilde(n, m, p))


def log_c_of_t(n: int, m: int, p: float, t: float) -> float:
    """ln C_{n,m,p,t}: the t-split constant, C~ times (1-t)^((1/2-1/p') m / n)."""
    if not 0.0 < t < 1.0:
        raise DomainError("t must lie in (0,1)", {"t": t})
    q = dual_exponent(p)
    return log_c_tilde(n, m, p) + (0.5 - 1.0 / q) * m * math.log1p(-t) / n


def c_of_t(n: int, m: int, p: float, t: float) -> float:
    return safe_exp(log_c_of_t(n, m, p, t))


def log_sobolev_s_tilde(n: int, m: int, p: float, permissive: bool = False) -> float:
    _require_p(n, p, "S~(n,m,p)")
    if m < 1:
        raise DomainError("S~(n,m,p) needs m >= 1", {"m": m})
    inside = 1.0 < p <= 2.0 and not (n == 2 and p >= 2.0)
    _theorem_window(inside, "S~(n,m,p)", permissive, {"n": n, "m": m, "p": p})
    q = dual_exponent(p)
    return (
        math.log(critical_exponent(n, p) / n)
        + math.log1p(-1.0 / n)
        - math.log(p) / p
        - math.log(q) / q
        + log_c_tilde(n, m, p)
    )


def sobolev_s_tilde(n: int, m: int, p: float, permissive: bool = False) -> float:
    """Codimension-dependent Sobolev constant for 1 < p <= 2."""
    return safe_exp(log_sobolev_s_tilde(n, m, p, permissive))


def log_talenti_normalizer(n: int, m: int, p: float) -> float:
    _require_p(n, p, "c_{n,m,p}")
    if m < 0:
        raise DomainError("Codimension must be non-negative", {"m": m})
    q = dual_exponent(p)
    d = n + m
    return (
        math.log(d) + log_unit_ball_volume(d) + log_gamma(n / p) + log_gamma(d / q)
        - math.log(q) - log_gamma(n + m / q)
    )


def talenti_normalizer(n: int, m: int, p: float) -> float:
    """c_{n,m,p} = integral over R^(n+m) of (1 + |y|^p')^(-n - m/p')."""
    return safe_exp(log_talenti_normalizer(n, m, p))


def _check_k_args(n: int, m: int, p: float) -> float:
    _require_p(n, p, "K(n,m,p)")
    if p < 2.0:
        raise DomainError("K(n,m,p,t) needs p >= 2", {"p": p})
    if m < 0:
        raise DomainError("Codimension must be non-negative", {"m": m})
    return dual_exponent(p)


def log_k_of_t(n: int, m: int, p: float, t: float) -> float:
    q = _check_k_args(n, m, p)
    if not 0.0 < t < 1.0:
        raise DomainError("t must lie in (0,1)", {"t": t})
    return (
        _log_codim_ball(m) + log_gamma(m / q + 1) - log_unit_ball_volume(m + n)
        - log_gamma((m + n) / q + 1)
        + (0.5 - 1.0 / q) * (m * math.log1p(-t) + n * math.log(t))
    )


def k_of_t(n: int, m: int, p: float, t: float) -> float:
    return safe_exp(log_k_of_t(n, m, p, t))


def k_of_t_linear(n: int, m: int, p: float, t: float) -> float:
    """K(n,m,p,t) multiplied out in the linear domain (small parameters only)."""
    q = _check_k_args(n, m, p)
    if not 0.0 < t < 1.0:
        raise DomainError("t must lie in (0,1)", {"t": t})
    ball = lambda d: math.pi ** (d / 2) / gamma_fn(d / 2 + 1)
    gamma_factor = ball(m) * gamma_fn(m / q + 1) / (ball(m + n) * gamma_fn((m + n) / q + 1))
    power_factor = ((1.0 - t) ** m * t ** n) ** (0.5 - 1.0 / q)
    return float(gamma_factor * power_factor)


def log_k_opt(n: int, m: int, p: float) -> float:
    """K at the optimal split t = n/(n+m)."""
    if m == 0:
        raise DomainError("The optimal split needs m >= 1", {"m": m})
    return float(log_k_opt_sequence(n, np.array([m]), p)[0])


def log_k_opt_sequence(n: int, ms: np.ndarray, p: float) -> np.ndarray:
    """Vectorized ln K_opt over an array of codimensions m >= 1."""
    q = _check_k_args(n, 1, p)
    m = np.asarray(ms, dtype=float)
    log_ball = lambda d: 0.5 * d * math.log(math.pi) - gammaln(d / 2 + 1)
    split = -m * np.log1p(n / m) + n * np.log(n / (m + n))
    return (
        log_ball(m) + gammaln(m / q + 1) - log_ball(m + n) - gammaln((m + n) / q + 1)
        + (0.5 - 1.0 / q) * split
    )


def k_opt(n: int, m: int, p: float) -> float:
    return safe_exp(log_k_opt(n, m, p))


def log_k_limit(n: int, p: float) -> float:
    q = _check_k_args(n, 0, p)
    return (n / q) * math.log(q) - 0.5 * n * math.log(2 * math.pi) + n * (1.0 / q - 0.5) * (1.0 - math.log(n))


def k_limit(n: int, p: float) -> float:
    """Limit of K_opt as the codimension grows."""
    return safe_exp(log_k_limit(n, p))


def k_argmin_numeric(n: int, m: int, p: float, tol: Optional[float] = None) -> float:
    """Golden-section minimizer of t -> ln K(n,m,p,t) on (0,1)."""
    tol = settings.golden_tol if tol is None else tol
    edge = 1e-9
    t, _, _ = golden_section_min(lambda s: log_k_of_t(n, m, p, s), edge, 1.0 - edge, tol)
    return t


def nash_codim(n: int, compact: bool) -> int:
    """Codimension sufficient for an isometric embedding of any n-manifold."""
    if n < 2:
        raise DomainError("nash_codim needs n >= 2", {"n": n})
    twice = 3 * n * (n + 3) if compact else n * (3 * n * n + 14 * n + 9)
    if twice % 2:
        raise OrderingViolationError("Codimension formula produced a non-integer", {"n": n})
    return twice // 2


def j_bound(n: int, m: int, p: float) -> float:
    """(n+m)(p-1)/(n-p); the exact Euclidean value when m = 0."""
    _require_p(n, p, "j_bound")
    if m < 0:
        raise DomainError("Codimension must be non-negative", {"m": m})
    return (n + m) * (p - 1.0) / (n - p)


def _young_weight(p: float, t: float) -> float:
    if p <= 1.0:
        raise DomainError("young_cap needs p > 1", {"p": p})
    if not 0.0 < t <= 1.0:
        raise DomainError("t must lie in (0,1]", {"t": t})
    return t ** (1.0 - dual_exponent(p) / 2.0)


def young_cap(p: float, t: float = 1.0) -> float:
    """sup over J >= 0 of J^(1/p') / (1 + t^(1-p'/2) J)."""
    _young_weight(p, t)
    q = dual_exponent(p)
    return t ** (0.5 - 1.0 / q) / (p ** (1.0 / p) * q ** (1.0 / q))


def young_maximizer(p: float, t: float = 1.0) -> float:
    """The J attaining young_cap: (p-1) / t^(1-p'/2)."""
    return (p - 1.0) / _young_weight(p, t)


def young_cap_numeric(p: float, t: float = 1.0, j_max: float = 100.0) -> Tuple[float, float]:
    """Grid scan plus golden-section oracle; returns (maximizer, cap)."""
    w = _young_weight(p, t)
    q = dual_exponent(p)
    x, value, _ = scan_then_refine_max(
        lambda J: J ** (1.0 / q) / (1.0 + w * J), 0.0, j_max, settings.alpha_grid, settings.golden_tol
    )
    return x, value


def legacy_constants(n: int, m: int, p: float) -> Tuple[float, float]:
    """Constants from the change-of-function and the rearrangement routes."""
    _require_p(n, p, "legacy constants")
    if m < 1:
        raise DomainError("Legacy constants need m >= 1", {"m": m})
    log_c = log_brendle_c(n, m)
    first = math.log(critical_exponent(n, p)) + math.log1p(-1.0 / n) + log_c
    second = math.log(n) + log_unit_ball_volume(n) / n + log_c + log_aubin_talenti(n, p)
    return safe_exp(first), safe_exp(second)


def exponent_identity_residual(n: int, p: float) -> float:
    """|p'(p*(1-1/n) - 1) - p*|, zero up to rounding."""
    _require_p(n, p, "exponent identity")
    q, s = dual_exponent(p), critical_exponent(n, p)
    return abs(q * (s * (1.0 - 1.0 / n) - 1.0) - s) / s


def compare_chain(n: int) -> List[ChainReport]:
    """MS(n) > C(n, m_n) > S(n,2) > AT(n,2) for compact and non-compact m_n."""
    if n < 3:
        raise DomainError("The chain needs n >= 3", {"n": n})
    reports = []
    for compact in (True, False):
        m_n = nash_codim(n, compact)
        logs = [
            ("MS", log_michael_simon(n)),
            ("C", log_brendle_c(n, m_n)),
            ("S", log_sobolev_s(n, 2.0)),
            ("AT", log_aubin_talenti(n, 2.0)),
        ]
        ratios = [logs[k][1] - logs[k + 1][1] for k in range(3)]
        ordered = all(r > 0 for r in ratios)
        report = ChainReport(
            n=n, compact=compact, m_n=m_n,
            entries=[ChainEntry(name=k, log_value=v, value=safe_exp(v)) for k, v in logs],
            log_ratios=ratios, strictly_ordered=ordered,
        )
        if not ordered:
            raise OrderingViolationError("Constant chain is not strictly ordered", report.model_dump())
        reports.append(report)
    return reports


def asymptotic_ratios(n: int, p: float = 2.0, with_nash: bool = True) -> AsymptoticRow:
    """Log ratios S/AT and, for p = 2, MS/C(n,m_n) and C(n,m_n)/S along growing n."""
    log_s = log_sobolev_s(n, p)
    log_ratio = log_s - log_aubin_talenti(n, p)
    row = AsymptoticRow(n=n, p=p, log_ratio_s_at=log_ratio, ratio_s_at=safe_exp(log_ratio))
    if with_nash:
        log_c = log_brendle_c(n, nash_codim(n, compact=True))
        row.log_ratio_ms_c = log_michael_simon(n) - log_c
        row.log_ratio_c_s = log_c - log_s
    return row


def _report(name: str, log_value: float, citation: str, params: Dict[str, float],
            out_of_theorem: bool = False, note: Optional[str] = None) -> ConstantReport:
    return ConstantReport(
        name=name, params=params, log_value=log_value, value=safe_exp(log_value),
        formula_citation=citation, out_of_theorem=out_of_theorem, note=note,
    )


def constant_table(n: int, m: int, p: float, t: Optional[float] = None,
                   permissive: bool = False, chain: bool = False) -> ConstantTable:
    """Every constant applicable to (n, m, p), plus comparison verdicts."""
    _require_p(n, p, "constant table")
    base = {"n": n, "m": m, "p": p}
    rows = [
        _report("AT", log_aubin_talenti(n, p),
                "pi^(-1/2) n^(-1/p) ((p-1)/(n-p))^(1/p') (G(n/2+1)G(n)/(G(n/p)G(n/p'+1)))^(1/n)", base),
        _report("c_nmp", log_talenti_normalizer(n, m, p),
                "(n+m) w_(n+m) G(n/p) G((n+m)/p') / (p' G(n+m/p'))", base),
        _report("j_bound", math.log(j_bound(n, m, p)), "(n+m)(p-1)/(n-p)", base),
    ]
    verdicts: List[CheckResult] = []
    
    if m >= 1:
        branch = active_branch(n, m)
        rows.append(_report("MS", log_michael_simon(n), "4^(n+1) / w_n^(1/n)", {"n": n}))
        rows.append(_report("C", log_brendle_c(n, m),
                            "max{(1/n)(m w_m/((n+m) w_(n+m)))^(1/n), 1/(n w_n^(1/n))}",
                            {"n": n, "m": m}, note=f"active branch {branch}"))
        rows.append(_report("C_tilde", log_c_tilde(n, m, p),
                            "(w_m G(m/p'+1)/(w_(n+m) G((n+m)/p'+1)) G(n)/G(n/p))^(1/n)", base))
        
        s_inside = n >= 3 and p >= 2.0
        if s_inside or permissive:
            rows.append(_report("S", log_sobolev_s(n, p, permissive),
                                "(p*/n)(1-1/n) p^(-1/p) (2 pi)^(-1/2) (e/n)^(1/p'-1/2) (G(n)/G(n/p))^(1/n)",
                                {"n": n, "p": p}, out_of_theorem=not s_inside))
        st_inside = p <= 2.0 and not (n == 2 and p >= 2.0)
        if st_inside or permissive:
            rows.append(_report("S_tilde", log_sobolev_s_tilde(n, m, p, permissive),
                                "(p*/n)(1-1/n) p^(-1/p) p'^(-1/p') C_tilde", base,
                                out_of_theorem=not st_inside))
        if p >= 2.0:
            rows.append(_report("K_opt", log_k_opt(n, m, p), "K(n,m,p,t) at t = n/(n+m)", base))
            rows.append(_report("K_limit", log_k_limit(n, p),
                                "p'^(n/p') (2 pi)^(-n/2) (e/n)^(n(1/p'-1/2))", {"n": n, "p": p}))
            if t is not None:
                rows.append(_report("K_t", log_k_of_t(n, m, p, t),
                                    "(w_m G(m/p'+1)/(w_(m+n) G((m+n)/p'+1))) ((1-t)^m t^n)^(1/2-1/p')",
                                    {**base, "t": t}))
        if t is not None:
            rows.append(_report("C_t", log_c_of_t(n, m, p, t), "C_tilde (1-t)^((1/2-1/p') m/n)", {**base, "t": t}))
        
        legacy_first, legacy_second = legacy_constants(n, m, p)
        rows.append(_report("legacy_change_of_function", math.log(legacy_first), "p* (1-1/n) C(n,m)", base))
        rows.append(_report("legacy_rearrangement", math.log(legacy_second), "n w_n^(1/n) C(n,m) AT(n,p)", base))
        
        if st_inside or permissive:
            s_tilde = sobolev_s_tilde(n, m, p, permissive)
            legacy_best = min(legacy_first, legacy_second)
            verdicts.append(CheckResult(
                name="S_tilde below both legacy constants",
                passed=s_tilde < legacy_best, value=s_tilde, threshold=legacy_best,
                detail="the codimension-dependent constant improves on both earlier routes"
                if s_tilde < legacy_best else "an earlier route gives the smaller constant here",
            ))
    
    chains = []
    if chain and n >= 3:
        chains = compare_chain(n)
        verdicts.append(CheckResult(name="MS > C > S > AT", passed=all(c.strictly_ordered for c in chains)))
    
    return ConstantTable(n=n, m=m, p=p, t=t, rows=rows, verdicts=verdicts, chains=chains)
