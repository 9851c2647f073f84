import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from gaussdist.states.gaussian_models import PureStateParams

ENERGY_TOLERANCE = 1e-10
LOG_FIDELITY_TOLERANCE = 1e-10
INTERSECTION_TOLERANCE = 1e-9


class CriticalPointKind(str, Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"


class SearchFamily(str, Enum):
    FULL = "full"
    COHERENT = "coherent"


class OptimalPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    d_c: float
    r: float
    state1: PureStateParams
    state2: PureStateParams
    neg_log_fidelity: float
    fidelity: float
    p_err: float

    @model_validator(mode="after")
    def _check_closed_form(self) -> "OptimalPair":
        energy = self.energy
        if self.d_c != 2 * energy + 1:
            raise ValueError(f"d_c={self.d_c} differs from 2E+1 for E={energy}")
        expected_r = math.sqrt((energy * energy + energy) / (2 * energy + 1))
        if abs(self.r - expected_r) > 1e-12 * max(1.0, expected_r):
            raise ValueError(f"r={self.r} differs from sqrt((E^2+E)/(2E+1))={expected_r}")
        for label, state in (("state1", self.state1), ("state2", self.state2)):
            if abs(state.energy - energy) > ENERGY_TOLERANCE * max(1.0, energy):
                raise ValueError(f"{label} has energy {state.energy}, expected {energy}")
        exponent = 4 * energy * energy + 4 * energy
        if abs(self.neg_log_fidelity - exponent) > LOG_FIDELITY_TOLERANCE * max(1.0, exponent):
            raise ValueError(f"-log F={self.neg_log_fidelity} differs from 4E^2+4E={exponent}")
        return self


class PolarIntersection(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: float
    radius: float
    d1: float
    d2: float
    residual: float
    quartic_residuals: tuple[float, float]
    quartic_scale: float
    kind: CriticalPointKind
    feasible: bool


class PolarSolveReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    grid_points: int
    r2_domain_start: Optional[float] = None
    intersections: List[PolarIntersection]

    @model_validator(mode="after")
    def _check_intersections(self) -> "PolarSolveReport":
        if not any(math.isclose(x.theta, math.pi / 4) for x in self.intersections):
            raise ValueError("the symmetric intersection at theta = pi/4 must be reported")
        for x in self.intersections:
            if not x.residual < INTERSECTION_TOLERANCE:
                raise ValueError(f"intersection at theta={x.theta} has residual {x.residual}")
        return self

    @property
    def residuals(self) -> List[float]:
        return [x.residual for x in self.intersections]

    @property
    def quartic_residuals(self) -> List[tuple[float, float]]:
        return [x.quartic_residuals for x in self.intersections]

    @property
    def secondary(self) -> Optional[PolarIntersection]:
        others = [x for x in self.intersections if not math.isclose(x.theta, math.pi / 4)]
        return others[0] if others else None


class StartTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    start: List[float]
    final: List[float]
    objective: float
    gradient_norm: float
    curvature: float
    converged: bool
    local_minimum: bool
    message: str


class OptimumReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    family: SearchFamily
    seed: int
    state1: PureStateParams
    state2: PureStateParams
    parameters: List[float]
    neg_log_fidelity: float
    fidelity: float
    p_err: float
    gradient_norm: float
    hessian_eigenvalues: List[float]
    canonical_phases: tuple[float, float]
    closed_form_neg_log_fidelity: float
    closed_form_fidelity: float
    relative_error: float
    starts: List[StartTrace]

    @property
    def converged_starts(self) -> int:
        return sum(1 for trace in self.starts if trace.converged)

    @property
    def minimum_starts(self) -> int:
        return sum(1 for trace in self.starts if trace.local_minimum)


class CenteredMinimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    w1: float
    w2: float
    fidelity: float
