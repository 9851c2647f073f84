import logging
import math
from typing import List, Sequence, Union

import numpy as np
from pydantic import ValidationError
from scipy.linalg import block_diag

from gaussdist.common.exceptions import InternalError, InvalidInputError
from gaussdist.common.validation import require_modes
from gaussdist.states.gaussian_models import (
    GaussianState,
    PureStateParams,
    SymplecticMatrix,
)
from gaussdist.states.symplectic import (
    rotation_matrix,
    symplectic_form,
)

logger = logging.getLogger(__name__)

ENERGY_CONSERVATION_TOLERANCE = 1e-12


def squeezed_covariance(magnitude: float, phase: float) -> np.ndarray:
    """Covariance of S(z)|0> for z = magnitude * exp(i phase)."""
    ch = math.cosh(2 * magnitude)
    sh = math.sinh(2 * magnitude)
    c, s = math.cos(phase), math.sin(phase)
    return 0.5 * np.array([[ch - c * sh, -s * sh], [-s * sh, ch + c * sh]])


def displacement_mean(displacement: complex) -> np.ndarray:
    return math.sqrt(2) * np.array([displacement.real, displacement.imag])


class GaussianService:
    def make_state(self, mean: Sequence[float], cov: np.ndarray) -> GaussianState:
        mean = np.ravel(np.asarray(mean, dtype=float))
        if mean.size % 2:
            raise InvalidInputError(f"mean vector must have even length, got {mean.size}")
        try:
            return GaussianState(modes=mean.size // 2, mean=mean, cov=cov)
        except ValidationError as e:
            raise InvalidInputError(f"Invalid Gaussian state: {e}") from e

    def make_symplectic(self, matrix: np.ndarray) -> SymplecticMatrix:
        try:
            return SymplecticMatrix(matrix=matrix)
        except ValidationError as e:
            raise InvalidInputError(f"Invalid symplectic matrix: {e}") from e

    def vacuum(self, modes: int = 1) -> GaussianState:
        require_modes(modes)
        return GaussianState(
            modes=modes, mean=np.zeros(2 * modes), cov=0.5 * np.eye(2 * modes)
        )

    def state_from_params(
        self, params: Union[PureStateParams, Sequence[PureStateParams]]
    ) -> GaussianState:
        if isinstance(params, PureStateParams):
            params = [params]
        if not params:
            raise InvalidInputError("at least one mode is required")

        for index, mode_params in enumerate(params):
            if not mode_params.is_finite:
                raise InvalidInputError(
                    f"non-finite parameters for mode {index}: {mode_params}"
                )

        mean = np.concatenate([displacement_mean(p.displacement) for p in params])
        cov = block_diag(
            *(squeezed_covariance(p.squeeze_magnitude, p.squeeze_phase) for p in params)
        )
        state = self.make_state(mean, cov)
        if not state.is_pure:
            # unreachable for finite parameters unless the squeezing overflows precision
            raise InternalError(
                f"state built from parameters is not pure (defect {state.purity_defect:.3e})"
            )
        return state

    def energy(self, state: GaussianState) -> float:
        """Mean photon number -M/2 + Tr(cov)/2 + |mean|^2/2."""
        return (
            -state.modes / 2
            + 0.5 * float(np.trace(state.cov))
            + 0.5 * float(state.mean @ state.mean)
        )

    def mode_marginal(self, state: GaussianState, mode: int) -> GaussianState:
        if not 0 <= mode < state.modes:
            raise InvalidInputError(f"mode index {mode} out of range for {state.modes} mode(s)")
        block = slice(2 * mode, 2 * mode + 2)
        return GaussianState(modes=1, mean=state.mean[block], cov=state.cov[block, block])

    def mode_energies(self, state: GaussianState) -> List[float]:
        return [
            self.energy(self.mode_marginal(state, mode)) for mode in range(state.modes)
        ]

    def rotate(
        self, state: GaussianState, theta: Union[float, Sequence[float]]
    ) -> GaussianState:
        angles = [float(theta)] * state.modes if np.isscalar(theta) else list(theta)
        if len(angles) != state.modes:
            raise InvalidInputError(
                f"expected {state.modes} rotation angle(s), got {len(angles)}"
            )
        rotated = self._transform(state, rotation_matrix(angles))

        before, after = self.energy(state), self.energy(rotated)
        if abs(after - before) >= ENERGY_CONSERVATION_TOLERANCE * max(1.0, before):
            logger.error(f"Rotation changed the energy from {before} to {after}")
            raise InternalError("phase rotation did not conserve energy")
        return rotated

    def conjugate(self, state: GaussianState, symplectic: SymplecticMatrix) -> GaussianState:
        if symplectic.modes != state.modes:
            raise InvalidInputError(
                f"symplectic matrix acts on {symplectic.modes} mode(s), state has {state.modes}"
            )
        return self._transform(state, symplectic.matrix)

    def tensor(self, states: Sequence[GaussianState]) -> GaussianState:
        if not states:
            raise InvalidInputError("tensor product needs at least one state")
        return GaussianState(
            modes=sum(s.modes for s in states),
            mean=np.concatenate([s.mean for s in states]),
            cov=block_diag(*(s.cov for s in states)),
        )

    def characteristic_function(
        self, state: GaussianState, point: Sequence[float]
    ) -> complex:
        z = np.ravel(np.asarray(point, dtype=float))
        if z.shape != (state.dim,):
            raise InvalidInputError(
                f"point must have length {state.dim}, got {z.size}"
            )
        return complex(np.exp(-0.5 * z @ state.cov @ z + 1j * (state.mean @ z)))

    def symplectic_eigenvalues(self, state: GaussianState) -> np.ndarray:
        """Williamson spectrum; all entries equal 1/2 for pure states."""
        eigenvalues = np.abs(np.linalg.eigvals(1j * symplectic_form(state.modes) @ state.cov))
        # each symplectic eigenvalue appears twice, as +nu and -nu
        return np.sort(eigenvalues)[::2]

    def _transform(self, state: GaussianState, matrix: np.ndarray) -> GaussianState:
        return GaussianState(
            modes=state.modes, mean=matrix @ state.mean, cov=matrix @ state.cov @ matrix.T
        )
