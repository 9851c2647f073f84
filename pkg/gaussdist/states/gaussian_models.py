import cmath
import math
from typing import Any

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)

from gaussdist.states.symplectic import symplectic_form

UNCERTAINTY_TOLERANCE = 1e-10
PURITY_TOLERANCE = 1e-9
SYMPLECTIC_TOLERANCE = 1e-10
DETERMINANT_TOLERANCE = 1e-9


def _frozen_array(value: Any, dtype=float) -> np.ndarray:
    array = np.array(value, dtype=dtype)
    array.setflags(write=False)
    return array


class GaussianState(BaseModel):
    """Mean vector and covariance matrix of an M-mode Gaussian state.

    Quadratures are interleaved per mode as (q1, p1, ..., qM, pM) with the
    vacuum covariance equal to I/2.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    modes: int = Field(gt=0)
    mean: np.ndarray
    cov: np.ndarray

    @field_validator("mean", mode="before")
    @classmethod
    def _coerce_mean(cls, value: Any) -> np.ndarray:
        return _frozen_array(np.ravel(np.asarray(value, dtype=float)))

    @field_validator("cov", mode="before")
    @classmethod
    def _coerce_cov(cls, value: Any) -> np.ndarray:
        cov = np.asarray(value, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be a square matrix, got shape {cov.shape}")
        return _frozen_array((cov + cov.T) / 2)

    @model_validator(mode="after")
    def _check_invariants(self) -> "GaussianState":
        dim = 2 * self.modes
        if self.mean.shape != (dim,):
            raise ValueError(
                f"mean must have length {dim} for {self.modes} mode(s), got {self.mean.shape}"
            )
        if self.cov.shape != (dim, dim):
            raise ValueError(
                f"covariance must be {dim}x{dim} for {self.modes} mode(s), got {self.cov.shape}"
            )
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise ValueError("mean and covariance must be finite")

        min_eigenvalue = float(
            np.linalg.eigvalsh(self.cov + 0.5j * symplectic_form(self.modes))[0]
        )
        if min_eigenvalue < -UNCERTAINTY_TOLERANCE:
            raise ValueError(
                f"covariance violates the uncertainty relation (min eigenvalue {min_eigenvalue:.3e})"
            )
        return self

    @property
    def dim(self) -> int:
        return 2 * self.modes

    @property
    def purity_defect(self) -> float:
        return abs(float(np.linalg.det(2 * self.cov)) - 1.0)

    @property
    def purity_tolerance(self) -> float:
        """Relative 1e-9, widened when 2*cov is badly conditioned."""
        condition = float(np.linalg.cond(2 * self.cov))
        return max(PURITY_TOLERANCE, 64 * float(np.finfo(float).eps) * condition)

    @property
    def is_pure(self) -> bool:
        return self.purity_defect <= self.purity_tolerance

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return (
            self.modes == other.modes
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )

    @field_serializer("mean", "cov")
    def _serialize_array(self, value: np.ndarray) -> list:
        return value.tolist()


class PureStateParams(BaseModel):
    """Single-mode parameters of D(alpha) S(z) |0>."""

    model_config = ConfigDict(frozen=True)

    displacement: complex = 0j
    squeeze_magnitude: float = Field(default=0.0, ge=0.0)
    squeeze_phase: float = 0.0

    @field_validator("squeeze_phase")
    @classmethod
    def _wrap_phase(cls, value: float) -> float:
        if not math.isfinite(value):
            return value
        wrapped = math.fmod(value, 2 * math.pi)
        if wrapped < 0:
            wrapped += 2 * math.pi
        # fmod of a value just below a multiple of 2*pi can round up to 2*pi
        return 0.0 if wrapped >= 2 * math.pi else wrapped

    @classmethod
    def from_squeeze(cls, displacement: complex, squeeze: complex) -> "PureStateParams":
        magnitude, phase = cmath.polar(squeeze)
        return cls(
            displacement=displacement, squeeze_magnitude=magnitude, squeeze_phase=phase
        )

    @classmethod
    def centered(cls, w: float) -> "PureStateParams":
        """Squeezed vacuum S(w)|0> for real, possibly negative, w."""
        return cls(squeeze_magnitude=abs(w), squeeze_phase=0.0 if w >= 0 else math.pi)

    @property
    def squeeze(self) -> complex:
        return cmath.rect(self.squeeze_magnitude, self.squeeze_phase)

    @property
    def energy(self) -> float:
        return abs(self.displacement) ** 2 + math.sinh(self.squeeze_magnitude) ** 2

    @property
    def is_finite(self) -> bool:
        return all(
            math.isfinite(x)
            for x in (
                self.displacement.real,
                self.displacement.imag,
                self.squeeze_magnitude,
                self.squeeze_phase,
            )
        )


class SymplecticMatrix(BaseModel):
    """Real 2M x 2M matrix preserving the interleaved symplectic form."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce_matrix(cls, value: Any) -> np.ndarray:
        matrix = np.asarray(value)
        if np.iscomplexobj(matrix):
            if np.max(np.abs(matrix.imag), initial=0.0) > SYMPLECTIC_TOLERANCE:
                raise ValueError("symplectic matrix must be real")
            matrix = matrix.real
        return _frozen_array(matrix)

    @model_validator(mode="after")
    def _check_symplectic(self) -> "SymplecticMatrix":
        matrix = self.matrix
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
            raise ValueError(f"expected an even square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("symplectic matrix must be finite")

        # entries of S^T Delta S are products of two entries of S
        scale = max(1.0, float(np.max(np.abs(matrix))) ** 2)
        delta = symplectic_form(matrix.shape[0] // 2)
        defect = float(np.max(np.abs(matrix.T @ delta @ matrix - delta)))
        if defect > SYMPLECTIC_TOLERANCE * scale:
            raise ValueError(f"matrix does not preserve the symplectic form (defect {defect:.3e})")
        det_defect = abs(float(np.linalg.det(matrix)) - 1.0)
        if det_defect > DETERMINANT_TOLERANCE * scale:
            raise ValueError(f"symplectic matrix must have unit determinant (defect {det_defect:.3e})")
        return self

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def modes(self) -> int:
        return self.dim // 2

    @property
    def is_positive_definite(self) -> bool:
        if not np.allclose(self.matrix, self.matrix.T, rtol=0, atol=SYMPLECTIC_TOLERANCE):
            return False
        return bool(np.linalg.eigvalsh(self.matrix)[0] > 0)

    def pairing_defect(self) -> float:
        """Largest |lambda_i * lambda_(2M-1-i) - 1| over the sorted spectrum.

        Only meaningful for positive definite matrices, whose spectrum comes
        in reciprocal pairs.
        """
        if not self.is_positive_definite:
            raise ValueError("spectral pairing is only defined for positive definite matrices")
        eigenvalues = np.linalg.eigvalsh(self.matrix)
        return float(np.max(np.abs(eigenvalues * eigenvalues[::-1] - 1.0)))

    def compose(self, other: "SymplecticMatrix") -> "SymplecticMatrix":
        return SymplecticMatrix(matrix=self.matrix @ other.matrix)

    @field_serializer("matrix")
    def _serialize_matrix(self, value: np.ndarray) -> list:
        return value.tolist()
