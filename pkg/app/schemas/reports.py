from pydantic import BaseModel, Field
from typing import List, Optional, Dict, Any, Tuple
from enum import Enum


class QuadratureResult(BaseModel):
    """Outcome of a numerical integration."""
    value: float
    abs_error_estimate: float = Field(..., ge=0.0)
    evaluations: int = Field(..., ge=0)


class BoundName(str, Enum):
    """Theorem bounds a Sobolev quotient can be compared against."""
    S = "S"
    S_TILDE = "S_tilde"
    AT_REFERENCE = "AT_reference"


class ConstantReport(BaseModel):
    """A named constant with its log-domain value."""
    name: str
    params: Dict[str, float] = Field(default_factory=dict)
    log_value: float
    value: float
    formula_citation: str
    out_of_theorem: bool = False
    note: Optional[str] = None


class ChainEntry(BaseModel):
    name: str
    log_value: float
    value: float


class ChainReport(BaseModel):
    """Ordered comparison MS(n) > C(n, m_n) > S(n,2) > AT(n,2)."""
    n: int
    compact: bool
    m_n: int
    entries: List[ChainEntry]
    log_ratios: List[float]
    strictly_ordered: bool


class QuotientReport(BaseModel):
    """Both sides of a Sobolev inequality evaluated on a patch."""
    surface: str
    n: int
    m: int
    p: float
    seed: Optional[int] = None
    lpstar_norm: Optional[float] = None
    dirichlet_p_norm: Optional[float] = None
    quotient: Optional[float] = None
    quotient_coarse: Optional[float] = None
    uncertainty: Optional[float] = None
    bound: float
    bound_name: BoundName
    bounds: Dict[str, float] = Field(default_factory=dict)
    margin: Optional[float] = None
    grid: List[int]
    degenerate: bool = False
    out_of_theorem: bool = False


class SearchReport(BaseModel):
    """Best member of a bubble family found by coordinate ascent."""
    best: QuotientReport
    argmax: Dict[str, Any]
    evaluations: int
    budget_exhausted: bool


class AlphaReport(BaseModel):
    """The alpha functional of a radial density."""
    density: str
    n: int
    m: int
    alpha: float
    argmax_r: float
    slice_min: float
    slice_max: float
    lower_bound: float
    upper_bound: Optional[float] = None


class AlphaBoundReport(BaseModel):
    n: int
    m: int
    lower_bound: float
    branch_volume_ratio: float
    branch_inverse_ball: float
    active_branch: int
    branches_equal: bool


class IsoperimetricReport(BaseModel):
    """Both sides of the isoperimetric inequality with mean curvature and boundary terms."""
    surface: str
    n: int
    m: int
    lhs: float
    gradient_term: float
    boundary_term: float
    constant: float
    rhs: float
    ratio: float
    passed: bool


class ResidualReport(BaseModel):
    """Tangential-structure diagnostics of a discrete transport plan."""
    median: float
    p90: float
    dispersion_median: float
    dispersion_p90: float
    projector_identity_max: float
    points: int


class JReport(BaseModel):
    j_hat: float
    planwise_moment: float
    target_moment: float
    j_bound: float
    slack: float
    jensen_ok: bool


class TransportReport(BaseModel):
    """JSON experiment report of a transport run."""
    surface: str
    n: int
    m: int
    p: float
    N: int
    epsilon: float
    seed: int
    marginal_residual: float
    converged: bool
    iterations: int
    dual_monotone: bool
    median_tangential_residual: float
    median_tangential_dispersion: float
    projector_identity_max: float
    J_hat: float
    j_bound: float
    slack: float
    not_checked: List[str] = Field(
        default_factory=lambda: [
            "determinant-trace inequality (out of scope)",
            "distributional Laplacian comparison (out of scope)",
        ]
    )


class CheckResult(BaseModel):
    """A single pass/fail assertion of a verification suite."""
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: Optional[str] = None


class SuiteReport(BaseModel):
    suite: str
    passed: bool
    checks: List[CheckResult]
    artifacts: Dict[str, Any] = Field(default_factory=dict)


class ConstantTable(BaseModel):
    """All constants for one (n, m, p[, t]) with comparison verdicts."""
    n: int
    m: int
    p: float
    t: Optional[float] = None
    rows: List[ConstantReport]
    verdicts: List[CheckResult] = Field(default_factory=list)
    chains: List[ChainReport] = Field(default_factory=list)


class AsymptoticRow(BaseModel):
    n: int
    p: float
    log_ratio_s_at: float
    ratio_s_at: float
    log_ratio_ms_c: Optional[float] = None
    log_ratio_c_s: Optional[float] = None


class AsymptoticsReport(BaseModel):
    rows: List[AsymptoticRow]
    k_limit_rows: List[Dict[str, float]] = Field(default_factory=list)
    checks: List[CheckResult] = Field(default_factory=list)
