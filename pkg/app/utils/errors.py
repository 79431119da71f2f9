from fastapi import HTTPException
from typing import Optional, Dict, Any


class SobolevLabException(Exception):
    """Base exception for the Sobolev lab."""
    
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class DomainError(SobolevLabException):
    """Raised when an argument lies outside the domain of a formula."""
    pass


class NonConvergenceError(SobolevLabException):
    """Raised when a numerical procedure exhausts its budget."""
    pass


class ImmersionError(SobolevLabException):
    """Raised when a chart is not an immersion at a sampled node."""
    pass


class NoBoundaryError(SobolevLabException):
    """Raised when a boundary integral is requested on a patch without usable boundary."""
    pass


class UnknownSurfaceError(SobolevLabException):
    """Raised when a catalog name is not known."""
    pass


class NonMinimalPatchError(SobolevLabException):
    """Raised when a bound requiring H = 0 is applied to a non-minimal patch."""
    pass


class DegenerateFunctionError(SobolevLabException):
    """Raised when a test function has (numerically) zero energy or mass."""
    pass


class PositivityError(SobolevLabException):
    """Raised when a field required to be positive is not."""
    pass


class OrderingViolationError(SobolevLabException):
    """Raised when the constant chain is not strictly ordered."""
    pass


class InsufficientNeighborsError(SobolevLabException):
    """Raised when a local fit has fewer neighbors than unknowns."""
    pass


class EmptyFamilyError(SobolevLabException):
    """Raised when a test-function family has no admissible member."""
    pass


class UsageError(SobolevLabException):
    """Raised for invalid command-line or request input."""
    pass


def create_http_exception(
    status_code: int,
    message: str,
    details: Optional[Dict[str, Any]] = None
) -> HTTPException:
    """Create HTTP exception with structured error response."""
    return HTTPException(
        status_code=status_code,
        detail={
            "error": message,
            "details": details or {}
        }
    )
