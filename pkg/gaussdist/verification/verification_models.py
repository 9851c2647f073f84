from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from gaussdist.common.exceptions import GaussDistError


class VerificationFailure(GaussDistError):
    def __init__(self, failed: List[str]):
        super().__init__(f"failed checks: {', '.join(failed)}")
        self.failed = failed

    def __reduce__(self):
        return type(self), (self.failed,)


class VerificationLevel(str, Enum):
    FAST = "fast"
    FULL = "full"


class VerificationPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: VerificationLevel
    seed: int = 0
    samples: int = Field(gt=0)
    energies: Tuple[float, ...]

    @classmethod
    def for_level(cls, level: VerificationLevel, seed: int = 0) -> "VerificationPlan":
        if level is VerificationLevel.FULL:
            return cls(level=level, seed=seed, samples=500, energies=(0.1, 0.5, 1.0, 2.0, 5.0))
        return cls(level=level, seed=seed, samples=50, energies=(0.1, 0.5, 1.0))


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    measured: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""


class VerificationReport(BaseModel):
    plan: VerificationPlan
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def raise_for_failures(self) -> None:
        if not self.passed:
            raise VerificationFailure(self.failed)
