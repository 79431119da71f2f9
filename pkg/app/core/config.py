from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings."""
    
    # Application (defaults provided)
    debug: bool = False
    title: str = "Sobolev Lab"
    version: str = "1.0.0"
    schema_version: int = 1
    
    # Reproducibility (SOBOLEV_LAB_SEED overrides)
    seed: int = 20240601
    
    # Quadrature
    quad_tol: float = 1e-10
    quad_limit: int = 200  # subinterval budget of the adaptive 1-D engine
    patch_tol: float = 1e-8
    patch_order: int = 8  # Gauss-Legendre nodes per panel
    
    # Constants
    p_guard: float = 1e-6
    golden_tol: float = 1e-10
    
    # Isoperimetric
    alpha_grid: int = 2048
    z_grid: int = 512
    
    # Sobolev test functions (fractions of the support margin)
    cutoff_inner: float = 0.7
    cutoff_outer: float = 0.95
    
    # Transport
    neighbors: int = 12
    max_points: int = 5000  # dense plans are max_points x max_points
    max_target_points: int = 1_000_000
    sinkhorn_tol: float = 1e-6
    sinkhorn_max_iter: int = 50000
    target_cdf_nodes: int = 2001
    
    # Independent checks may run concurrently; output order stays fixed
    workers: int = 1
    
    class Config:
        env_file = ".env"
        case_sensitive = False
        env_prefix = "SOBOLEV_LAB_"
        extra = "ignore"


settings = Settings()
