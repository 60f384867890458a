import hashlib
from typing import Any, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from schemas.embedding_schema import EmbeddingMatrix
from schemas.graph_schema import GraphMode, InsertionOrder
from schemas.selection_schema import Method

DEFAULT_METHODS = (
    Method.max_norm,
    Method.max_in_degree,
    Method.user_expectation,
    Method.ipgs,
    Method.submodular,
)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    m_grid: tuple[int, ...] = (5, 20, 50, 100, 200)
    dim: int = Field(default=32, ge=1)
    split_ratio: tuple[int, int] = (4, 1)
    seed: int = 0
    methods: tuple[Method, ...] = DEFAULT_METHODS

    graph_k: int = Field(default=10, ge=1)
    graph_mode: GraphMode = GraphMode.approximate
    insertion_order: InsertionOrder = InsertionOrder.norm
    ef_construction: int = Field(default=200, ge=1)
    ef_search: int = Field(default=200, ge=1)
    exact_search: bool = False

    lazy_greedy: bool = False
    hull_directions: int = Field(default=1000, ge=1)
    exhaustive_budget: int = Field(default=2_000_000, ge=1)

    mf_epochs: int = Field(default=20, ge=0)
    mf_reg: float = Field(default=0.1, ge=0.0)
    cold_reg: float = Field(default=0.1, ge=0.0)

    parallel_methods: bool = False
    timings: bool = False

    @field_validator("m_grid", "split_ratio", "methods", mode="before")
    @classmethod
    def split_csv(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(part.strip() for part in value.replace(":", ",").split(",") if part.strip())
        return value

    @field_validator("m_grid")
    @classmethod
    def check_grid(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(m < 1 for m in value):
            raise ValueError("m_grid values must be positive")
        return tuple(sorted(set(value)))

    @field_validator("methods")
    @classmethod
    def check_methods(cls, value: tuple[Method, ...]) -> tuple[Method, ...]:
        if Method.external in value:
            raise ValueError("external rankings are read from files and cannot be run")
        return value

    @model_validator(mode="after")
    def check_ratio(self) -> "ExperimentConfig":
        if any(part < 1 for part in self.split_ratio):
            raise ValueError(f"split ratio parts must be positive, got {self.split_ratio}")
        if self.ef_search < 1 or self.graph_k < 1:
            raise ValueError("graph parameters must be positive")
        return self

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any], **overrides: Any) -> "ExperimentConfig":
        """Builds a config from a flat key=value mapping; non-None overrides win."""
        values = dict(mapping)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.model_validate(values)

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class SyntheticSpec(BaseModel):
    """Gaussian-mixture generator parameters for desk-scale experiments."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_items: int = Field(default=2000, ge=1)
    n_users: int = Field(default=1250, ge=1)
    dim: int = Field(default=16, ge=1)
    clusters: int = Field(default=40, ge=1)
    center_scale: float = Field(default=1.0, ge=0.0)
    cluster_std: float = Field(default=0.3, ge=0.0)
    norm_skew: float = Field(default=0.0, ge=0.0)
    seed: int = 0


class ExperimentRequest(BaseModel):
    config: ExperimentConfig = Field(default_factory=ExperimentConfig)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)


class ExperimentInputs(BaseModel):
    """Embeddings an experiment runs on. `cold_users` may be absent."""

    model_config = ConfigDict(frozen=True)

    warm_users: EmbeddingMatrix
    items: EmbeddingMatrix
    cold_users: Optional[EmbeddingMatrix] = None
    extra_digests: dict[str, str] = Field(default_factory=dict)
