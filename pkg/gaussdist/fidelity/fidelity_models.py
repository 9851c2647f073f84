import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

IDENTITY_TOLERANCE = 1e-12


class DiscriminationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    fidelity: float = Field(ge=0.0, le=1.0)
    trace_distance: float = Field(ge=0.0, le=2.0)
    p_err: float = Field(ge=0.0, le=0.5)

    @model_validator(mode="after")
    def _check_identities(self) -> "DiscriminationResult":
        expected_distance = 2 * math.sqrt(1 - self.fidelity)
        if abs(self.trace_distance - expected_distance) > IDENTITY_TOLERANCE:
            raise ValueError(
                f"trace distance {self.trace_distance} != 2 sqrt(1 - F) = {expected_distance}"
            )
        if abs(self.p_err - (0.5 - 0.25 * self.trace_distance)) > IDENTITY_TOLERANCE:
            raise ValueError(
                f"p_err {self.p_err} != 1/2 - T/4 for trace distance {self.trace_distance}"
            )
        return self

    @classmethod
    def from_fidelity(cls, fidelity: float) -> "DiscriminationResult":
        root = math.sqrt(1 - fidelity)
        if fidelity < 1e-8:
            p_err = fidelity / (2 * (1 + root))
        else:
            p_err = 0.5 * (1 - root)
        return cls(fidelity=fidelity, trace_distance=2 * root, p_err=p_err)
