from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import logging
from contextlib import asynccontextmanager

from app.core.config import settings
from app.routers.lab import router as lab_router
from app.services.catalog import SURFACES
from app.services.suites import verification_service
from app.utils.errors import (
    SobolevLabException, DomainError, UsageError, NonConvergenceError
)

# Configure logging
logging.basicConfig(
    level=logging.INFO if settings.debug else logging.WARNING,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager."""
    logger.info(f"Starting {settings.title} {settings.version} (seed {settings.seed})")
    yield
    logger.info(f"{settings.title} shutdown complete")


# Create FastAPI app
app = FastAPI(
    title=settings.title,
    version=settings.version,
    description="""
    Numerical lab for sharp Sobolev and isoperimetric constants on minimal submanifolds.

    ## Features
    - Closed-form constants in log domain with comparison verdicts
    - Verification suites with pass/fail checks
    - The full command line (`python -m app.cli`) runs the long suites
    """,
    debug=settings.debug,
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(lab_router)


def _error_response(status_code: int, exc: SobolevLabException) -> JSONResponse:
    return JSONResponse(
        status_code=status_code,
        content={
            "error": exc.message,
            "details": exc.details,
            "type": type(exc).__name__
        }
    )


@app.exception_handler(SobolevLabException)
async def lab_exception_handler(request, exc: SobolevLabException):
    """Map lab exceptions to HTTP status codes."""
    if isinstance(exc, (DomainError, UsageError)):
        return _error_response(422, exc)
    if isinstance(exc, NonConvergenceError):
        logger.warning(f"Numerical failure: {exc.message}")
        return _error_response(503, exc)
    logger.error(f"Lab error {type(exc).__name__}: {exc.message}")
    return _error_response(500, exc)


@app.get("/")
async def root():
    """Root endpoint with API information."""
    return {
        "message": f"Welcome to {settings.title}",
        "version": settings.version,
        "schema_version": settings.schema_version,
        "surfaces": sorted(SURFACES),
        "suites": list(verification_service.SUITES),
        "endpoints": {
            "constants": "GET /lab/constants?n=3&m=1&p=2",
            "suites": "GET /lab/suites",
            "verify": "POST /lab/verify/{suite}",
            "health_check": "GET /health"
        }
    }


@app.get("/health")
async def health_check():
    """Application health check."""
    return {
        "status": "healthy",
        "service": settings.title,
        "version": settings.version,
        "seed": settings.seed
    }


# Development server
if __name__ == "__main__":
    import uvicorn
    
    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=8000,
        reload=settings.debug,
        log_level="info" if settings.debug else "warning"
    )
