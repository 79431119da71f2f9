from pydantic import BaseModel, Field
from typing import Optional, List, Dict, Any
from datetime import datetime
from enum import Enum


class Command(str, Enum):
    CONSTANTS = "constants"
    ASYMPTOTICS = "asymptotics"
    VERIFY = "verify"
    GEOMETRY = "geometry"


class OutputFormat(str, Enum):
    TABLE = "table"
    JSON = "json"
    CSV = "csv"


class RunConfig(BaseModel):
    """Everything needed to reproduce a run."""
    command: Command
    action: Optional[str] = None
    n: Optional[int] = None
    m: Optional[int] = None
    p: Optional[float] = None
    t: Optional[float] = None
    j: Optional[List[int]] = None
    surface: Optional[str] = None
    grid: Optional[List[int]] = None
    seeds: Optional[int] = None
    n_points: Optional[int] = None
    epsilon: Optional[float] = None
    points: Optional[int] = None
    seed: int
    tolerances: Dict[str, float] = Field(default_factory=dict)
    chain: bool = False
    permissive: bool = False
    format: OutputFormat = OutputFormat.TABLE
    output: Optional[str] = None


class ReportEnvelope(BaseModel):
    """Versioned wrapper around every emitted report."""
    schema_version: int
    version: str
    generated_at: Optional[datetime] = None
    config: RunConfig
    passed: Optional[bool] = None
    payload: Any
