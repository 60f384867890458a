from pydantic import BaseModel, ConfigDict, Field, field_validator


class ExtremeSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    indices: tuple[int, ...]
    num_directions: int
    exact: bool = False
    # first direction index whose support probe returned the point
    witness: dict[int, int] = Field(default_factory=dict)

    @field_validator("indices")
    @classmethod
    def sorted_unique(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(sorted(set(value)))

    def __len__(self) -> int:
        return len(self.indices)
