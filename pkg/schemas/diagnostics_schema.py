from typing import Optional

from pydantic import BaseModel, Field, model_validator

from services.metrics import DEFAULT_PERCENTILE_EDGES


class NormsRequest(BaseModel):
    items: list[list[float]]
    item_ids: Optional[list[str]] = None
    users: Optional[list[list[float]]] = None
    k: int = Field(default=10, ge=1)
    percentile_edges: list[float] = Field(default_factory=lambda: list(DEFAULT_PERCENTILE_EDGES))

    @model_validator(mode="after")
    def check_items(self) -> "NormsRequest":
        if not self.items:
            raise ValueError("at least one item vector is required")
        return self
