from pydantic import BaseModel, Field, model_validator
from typing import Optional
import math

from app.core.config import settings


class SobolevParams(BaseModel):
    """The triple (n, m, p) with its derived exponents."""
    n: int = Field(..., ge=2, description="Submanifold dimension")
    m: int = Field(0, ge=0, description="Codimension (0 = Euclidean case)")
    p: float = Field(..., gt=1.0, description="Integrability exponent")
    t: Optional[float] = Field(None, gt=0.0, lt=1.0, description="Concavity split parameter")
    guard: float = Field(default_factory=lambda: settings.p_guard, ge=0.0)
    
    @model_validator(mode="after")
    def check_exponent_window(self):
        if not (1.0 + self.guard < self.p < self.n - self.guard):
            raise ValueError(
                f"p={self.p} must lie in (1+{self.guard}, {self.n}-{self.guard})"
            )
        return self
    
    @property
    def p_dual(self) -> float:
        """p' = p/(p-1)."""
        return self.p / (self.p - 1.0)
    
    @property
    def p_star(self) -> float:
        """p* = pn/(n-p)."""
        return self.p * self.n / (self.n - self.p)
    
    @property
    def ambient_dim(self) -> int:
        return self.n + self.m
    
    @property
    def bubble_exponent(self) -> float:
        """Exponent (n-p)/p of the Talenti bubble."""
        return (self.n - self.p) / self.p


class RadialIntegralParams(BaseModel):
    """Parameters of the closed-form radial integral of (lam + r^alpha)^-gamma r^beta."""
    lam: float = Field(..., gt=0.0, alias="lambda")
    alpha: float = Field(..., gt=1.0)
    beta: float = Field(..., gt=-1.0)
    gamma: float
    
    model_config = {"populate_by_name": True}
    
    @model_validator(mode="after")
    def check_convergence(self):
        if not self.gamma > (self.beta + 1.0) / self.alpha:
            raise ValueError(
                f"gamma={self.gamma} must exceed (beta+1)/alpha={(self.beta + 1.0) / self.alpha}"
            )
        for name in ("lam", "alpha", "beta", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        return self
