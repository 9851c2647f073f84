from enum import Enum
from typing import Any, Dict, List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Cell = Union[float, int, str, bool, None]


class SweepQuantity(str, Enum):
    OPTIMAL_FIDELITY = "optimal-fidelity"
    POLAR_CURVES = "polar-curves"
    SCALING_COMPARE = "scaling-compare"
    MULTIMODE = "multimode"
    ORACLE_CHECK = "oracle-check"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class SweepSpec(BaseModel):
    """Energy sweep over start..stop in `steps` evenly spaced points."""

    model_config = ConfigDict(frozen=True)

    quantity: SweepQuantity
    start: float = Field(gt=0)
    stop: float
    steps: int = Field(ge=2)
    output_format: OutputFormat = OutputFormat.CSV
    seed: int = 0
    modes: int = Field(default=1, ge=1)
    resolution: int = Field(default=32, ge=32)
    full_angles: bool = False

    @model_validator(mode="after")
    def _check_range(self) -> "SweepSpec":
        if not self.start < self.stop:
            raise ValueError(f"start={self.start} must be below stop={self.stop}")
        return self

    @property
    def energies(self) -> List[float]:
        return np.linspace(self.start, self.stop, self.steps).tolist()


class SweepTable(BaseModel):
    command: str
    columns: List[str]
    rows: List[List[Cell]]
    footer: List[List[Cell]] = []
    footer_columns: List[str] = []
    metadata: Dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_widths(self) -> "SweepTable":
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"row {row} does not match columns {self.columns}")
        for row in self.footer:
            if len(row) != len(self.footer_columns):
                raise ValueError(f"footer row {row} does not match {self.footer_columns}")
        return self

    def column(self, name: str) -> List[Cell]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]
