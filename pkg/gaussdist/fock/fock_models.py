from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

NORM_TOLERANCE = 1e-10


class FockVector(BaseModel):
    """Amplitudes c_0..c_N of a single-mode state in the truncated number basis."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cutoff: int = Field(ge=1)
    amplitudes: np.ndarray
    truncation_loss: float = 0.0
    renormalized: bool = False

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _coerce_amplitudes(cls, value: Any) -> np.ndarray:
        amplitudes = np.array(np.ravel(value), dtype=complex)
        amplitudes.setflags(write=False)
        return amplitudes

    @model_validator(mode="after")
    def _check_norm(self) -> "FockVector":
        if self.amplitudes.shape != (self.cutoff + 1,):
            raise ValueError(
                f"expected {self.cutoff + 1} amplitudes for cutoff {self.cutoff}, "
                f"got {self.amplitudes.size}"
            )
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")
        norm = self.norm
        if not 1.0 - self.truncation_loss - NORM_TOLERANCE <= norm <= 1.0 + NORM_TOLERANCE:
            raise ValueError(
                f"norm {norm} outside [1 - loss, 1] for reported loss {self.truncation_loss}"
            )
        return self

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def tail_mass(self) -> float:
        """Weight on n > 0.9 N."""
        return tail_mass(self.amplitudes)

    def renormalize(self) -> "FockVector":
        return FockVector(
            cutoff=self.cutoff,
            amplitudes=self.amplitudes / np.sqrt(self.norm),
            truncation_loss=0.0,
            renormalized=True,
        )

    @field_serializer("amplitudes")
    def _serialize_amplitudes(self, value: np.ndarray) -> list:
        return [[z.real, z.imag] for z in value.tolist()]


def tail_mass(amplitudes: np.ndarray) -> float:
    cutoff = amplitudes.shape[0] - 1
    start = int(np.floor(0.9 * cutoff)) + 1
    return float(np.sum(np.abs(amplitudes[start:]) ** 2))


class GridMinimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    resolution: int
    angles: int
    fidelity: float
    r1: float
    theta1: float
    r2: float
    theta2: float
    grid_states: int
    cutoff: int

    @property
    def grid_pairs(self) -> int:
        return self.grid_states * self.grid_states
