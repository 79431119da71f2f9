from fastapi import APIRouter, Query
from typing import Optional
import logging

from app.schemas.reports import ConstantTable, SuiteReport
from app.services.constants import constant_table
from app.services.suites import sobolev_params, verification_service
from app.utils.errors import create_http_exception

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/lab", tags=["lab"])

# Suites cheap enough to run inside a request
HTTP_SUITES = ("identities", "quadrature-check", "asymptotics")


@router.get("/constants", response_model=ConstantTable)
async def get_constants(
    n: int = Query(..., ge=2),
    p: float = Query(..., gt=1.0),
    m: int = Query(1, ge=0),
    t: Optional[float] = Query(None, gt=0.0, lt=1.0),
    chain: bool = False,
    permissive: bool = False,
):
    """Every constant applicable to (n, m, p) with comparison verdicts."""
    params = sobolev_params(n, m, p, t)
    table = constant_table(params.n, params.m, params.p, params.t, permissive=permissive, chain=chain)
    logger.info(f"Constant table for n={n}, m={m}, p={p}")
    return table


@router.get("/suites", response_model=dict)
async def list_suites():
    """Suites runnable over HTTP; the others are CLI-only."""
    return {
        "http": list(HTTP_SUITES),
        "cli_only": [s for s in verification_service.SUITES if s not in HTTP_SUITES],
    }


@router.post("/verify/{suite}", response_model=SuiteReport)
async def run_suite(suite: str):
    """Run a verification suite with its default parameters."""
    if suite not in verification_service.SUITES:
        raise create_http_exception(404, f"Unknown suite: {suite}", {"known": list(verification_service.SUITES)})
    if suite not in HTTP_SUITES:
        raise create_http_exception(
            400, f"Suite {suite} is too long-running for a request; use the command line",
            {"http": list(HTTP_SUITES)},
        )
    return verification_service.run(suite)
