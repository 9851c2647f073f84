import math
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from gaussdist.states.gaussian_models import GaussianState

ENERGY_TOLERANCE = 1e-10
LOG_FIDELITY_TOLERANCE = 1e-10


class MultimodeOptimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    modes: int
    energy_per_mode: float
    neg_log_fidelity: float
    fidelity: float
    numeric_neg_log_fidelity: float
    lambda_closed: List[float]
    lambda_numeric: List[float]
    lambda_spectrum: List[float]
    allin_fidelity: float
    state1: GaussianState
    state2: GaussianState

    @model_validator(mode="after")
    def _check_optimum(self) -> "MultimodeOptimum":
        total = self.modes * self.energy_per_mode
        exponent = 4 * total * total + 4 * total
        if abs(self.neg_log_fidelity - exponent) > LOG_FIDELITY_TOLERANCE * max(1.0, exponent):
            raise ValueError(f"-log F={self.neg_log_fidelity} differs from 4M^2E^2+4ME={exponent}")
        if len(self.lambda_spectrum) != 2 * self.modes:
            raise ValueError("lambda_spectrum must hold 2M eigenvalues")
        if any(a < b for a, b in zip(self.lambda_spectrum, self.lambda_spectrum[1:])):
            raise ValueError("lambda_spectrum must be sorted in decreasing order")
        for label, state in (("state1", self.state1), ("state2", self.state2)):
            state_energy = 0.5 * (float(np.trace(state.cov)) + float(state.mean @ state.mean) - state.modes)
            if abs(state_energy - total) > ENERGY_TOLERANCE * max(1.0, total):
                raise ValueError(f"{label} has energy {state_energy}, expected {total}")
        if not self.state1.allclose(self.state2.model_copy(update={"mean": self.state1.mean})):
            raise ValueError("optimal multimode states must share their covariance")
        return self

    @property
    def pair(self) -> tuple[GaussianState, GaussianState]:
        return self.state1, self.state2

    @property
    def numeric_fidelity(self) -> float:
        return math.exp(-self.numeric_neg_log_fidelity)


class SeparableBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    modes: int
    energy_per_mode: float
    symmetric_neg_log: float
    general_neg_log: float

    @property
    def symmetric(self) -> float:
        """Identical factor pairs, each factor at energy E."""
        return math.exp(-self.symmetric_neg_log)

    @property
    def general(self) -> float:
        """Per-mode constrained factors with the whole budget ME in one factor."""
        return math.exp(-self.general_neg_log)
