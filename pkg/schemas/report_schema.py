from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

REPORT_SCHEMA_VERSION = 1


class Population(str, Enum):
    warm = "warm"
    cold = "cold"


class MetricReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: str
    m: int
    precision: float = Field(ge=0.0, le=1.0)
    map: float = Field(ge=0.0, le=1.0)
    ndcg: float = Field(ge=0.0, le=1.0)
    fav_loss_value: float = Field(ge=0.0)
    population: Population


class NormBucket(BaseModel):
    high_count: int
    n_items: int
    mean: float
    variance: float


class NormDiagnostics(BaseModel):
    normalized_norms: tuple[float, ...]
    median: float
    group_occupancy: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_ranges(self) -> "NormDiagnostics":
        if any(not 0.0 <= v <= 1.0 for v in self.normalized_norms):
            raise ValueError("normalized norms must lie in [0, 1]")
        if any(not 0.0 <= v <= 1.0 for v in self.group_occupancy.values()):
            raise ValueError("occupancy fractions must lie in [0, 1]")
        return self


class ReportRow(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    method: str
    m: int
    population: Population
    fav_loss: Optional[float] = None
    fav_loss_per_user: Optional[float] = None
    precision: Optional[float] = None
    map: Optional[float] = None
    ndcg: Optional[float] = None
    wall_time: Optional[float] = None
    shared_time: Optional[float] = None
    error: Optional[str] = None


class Provenance(BaseModel):
    config_hash: str
    seed: int
    input_digests: dict[str, str] = Field(default_factory=dict)


class EvalReport(BaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    provenance: Optional[Provenance] = None
    rows: list[ReportRow] = Field(default_factory=list)

    def rows_for(self, method: str, population: Population) -> list[ReportRow]:
        return sorted(
            (r for r in self.rows if r.method == method and r.population == population),
            key=lambda r: r.m,
        )


class RunSummary(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    config_hash: str
    seed: int
    schema_version: int


class StoredReport(BaseModel):
    run_id: int
    report: EvalReport
