import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import expm

from gaussdist.common.exceptions import InvalidInputError, PreconditionError
from gaussdist.common.validation import require_positive_energy
from gaussdist.config.settings import Settings
from gaussdist.fock.fock_models import FockVector, GridMinimum, tail_mass
from gaussdist.states.gaussian_models import PureStateParams

logger = logging.getLogger(__name__)

MIN_CUTOFF = 32
MAX_CUTOFF = 4096
MIN_RESOLUTION = 32
GRAM_BLOCK = 256


class CutoffTooSmallError(PreconditionError):
    def __init__(self, tail_mass: float, cutoff: int):
        super().__init__(
            f"tail mass {tail_mass:.3e} above n > 0.9N is too large for cutoff N={cutoff}"
        )
        self.tail_mass = tail_mass
        self.cutoff = cutoff

    def __reduce__(self):
        return type(self), (self.tail_mass, self.cutoff)


def annihilation_operator(cutoff: int) -> np.ndarray:
    """Truncated a with a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def _amplitudes(params: PureStateParams, cutoff: int) -> np.ndarray:
    a = annihilation_operator(cutoff)
    a_dag = a.conj().T
    z, alpha = params.squeeze, params.displacement

    vacuum = np.zeros(cutoff + 1, dtype=complex)
    vacuum[0] = 1.0
    squeezed = expm(0.5 * (np.conj(z) * (a @ a) - z * (a_dag @ a_dag))) @ vacuum
    return expm(alpha * a_dag - np.conj(alpha) * a) @ squeezed


def _checked_amplitudes(params: PureStateParams, cutoff: int, tolerance: float) -> np.ndarray:
    amplitudes = _amplitudes(params, cutoff)
    tail = tail_mass(amplitudes)
    if tail >= tolerance:
        raise CutoffTooSmallError(tail, cutoff)
    return amplitudes


def _pair_overlaps_block(
    block: np.ndarray, vectors: np.ndarray, offset: int
) -> Tuple[float, int]:
    """Smallest |<v_i|v_j>|^2 for i in the block, with its flat index in the full Gram matrix."""
    fidelities = np.abs(block.conj().T @ vectors) ** 2
    local = int(np.argmin(fidelities))
    row, column = divmod(local, vectors.shape[1])
    return float(fidelities[row, column]), (offset + row) * vectors.shape[1] + column


class FockService:
    """Number-basis oracle built from truncated ladder operators."""

    def __init__(self, settings: Settings):
        self._settings = settings

    def auto_cutoff(self, energy: float) -> int:
        if not energy >= 0:
            raise InvalidInputError(f"energy must be >= 0, got {energy}")
        return max(MIN_CUTOFF, math.ceil(8 * (energy + math.sqrt(energy)) + 16))

    def build_state(self, params: PureStateParams, cutoff: int) -> FockVector:
        """D(alpha) S(z)|0> truncated to n <= cutoff; S is applied first."""
        if not params.is_finite:
            raise InvalidInputError(f"non-finite state parameters: {params}")
        if cutoff < MIN_CUTOFF:
            raise InvalidInputError(f"cutoff must be >= {MIN_CUTOFF}, got {cutoff}")
        amplitudes = _checked_amplitudes(params, cutoff, self._settings.fock_tail_tolerance)
        norm = float(np.vdot(amplitudes, amplitudes).real)
        return FockVector(
            cutoff=cutoff, amplitudes=amplitudes, truncation_loss=max(0.0, 1.0 - norm)
        )

    def build_state_auto(self, params: PureStateParams) -> FockVector:
        return self.build_pair(params, params)[0]

    def build_pair(
        self, params1: PureStateParams, params2: PureStateParams
    ) -> Tuple[FockVector, FockVector]:
        """Both states at the smallest common cutoff that passes the tail check."""
        cutoff = self.auto_cutoff(max(params1.energy, params2.energy))
        while True:
            try:
                return self.build_state(params1, cutoff), self.build_state(params2, cutoff)
            except CutoffTooSmallError as e:
                if 2 * cutoff > MAX_CUTOFF:
                    logger.error(f"Tail mass {e.tail_mass:.3e} still too large at cutoff {cutoff}")
                    raise
                logger.warning(
                    f"Tail mass {e.tail_mass:.3e} at cutoff {cutoff}, retrying with {2 * cutoff}"
                )
                cutoff *= 2

    def overlap(self, v1: FockVector, v2: FockVector) -> complex:
        self._require_common_cutoff(v1, v2)
        return complex(np.vdot(v1.amplitudes, v2.amplitudes))

    def fidelity(self, v1: FockVector, v2: FockVector) -> float:
        return abs(self.overlap(v1, v2)) ** 2

    def fock_energy(self, v: FockVector) -> float:
        return float(np.arange(v.cutoff + 1) @ v.probabilities)

    def trace_distance_pure(self, v1: FockVector, v2: FockVector) -> float:
        """Trace norm of |v1><v1| - |v2><v2| from its two nonzero eigenvalues."""
        self._require_common_cutoff(v1, v2)
        e1 = v1.amplitudes / np.linalg.norm(v1.amplitudes)
        c = np.vdot(e1, v2.amplitudes)
        residual = v2.amplitudes - c * e1
        s = float(np.linalg.norm(residual))

        # coordinates of v1, v2 in the orthonormal basis {e1, residual / s}
        x1 = np.array([np.linalg.norm(v1.amplitudes), 0.0], dtype=complex)
        x2 = np.array([c, s], dtype=complex)
        difference = np.outer(x1, x1.conj()) - np.outer(x2, x2.conj())
        return float(np.sum(np.abs(np.linalg.eigvalsh(difference))))

    def grid_bruteforce(
        self,
        energy: float,
        resolution: int,
        angles: int = 8,
        full_angles: bool = False,
    ) -> GridMinimum:
        """Smallest |<psi_i|psi_j>|^2 over a grid of energy-E states.

        Each grid state has real displacement r_k = sqrt(E) k / resolution,
        k = -resolution..resolution, squeeze magnitude fixed by the energy and
        squeeze phase from an even angular sweep containing 0 and pi.
        """
        require_positive_energy(energy)
        if resolution < MIN_RESOLUTION:
            raise InvalidInputError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
        if full_angles:
            angles = max(angles, resolution // 2)
        if angles < 2 or angles % 2:
            raise InvalidInputError(f"angle count must be even and >= 2, got {angles}")

        radii = math.sqrt(energy) * np.arange(-resolution, resolution + 1) / resolution
        phases = 2 * math.pi * np.arange(angles) / angles
        grid = [
            PureStateParams(
                displacement=complex(r),
                squeeze_magnitude=math.asinh(math.sqrt(max(0.0, energy - r * r))),
                squeeze_phase=theta,
            )
            for r in radii
            for theta in phases
        ]
        logger.info(
            f"Brute-force grid at E={energy}: {len(radii)} displacements x {angles} angles"
        )

        vectors, cutoff = self._grid_vectors(grid, self.auto_cutoff(energy))
        blocks = range(0, len(grid), GRAM_BLOCK)
        results = Parallel(n_jobs=self._settings.n_jobs)(
            delayed(_pair_overlaps_block)(vectors[:, start:start + GRAM_BLOCK], vectors, start)
            for start in blocks
        )
        # ties resolve to the lowest flat index
        fidelity, index = min(results)
        i, j = divmod(index, len(grid))

        return GridMinimum(
            energy=energy,
            resolution=resolution,
            angles=angles,
            fidelity=fidelity,
            r1=grid[i].displacement.real,
            theta1=grid[i].squeeze_phase,
            r2=grid[j].displacement.real,
            theta2=grid[j].squeeze_phase,
            grid_states=len(grid),
            cutoff=cutoff,
        )

    def _grid_vectors(
        self, grid: Sequence[PureStateParams], cutoff: int
    ) -> Tuple[np.ndarray, int]:
        tolerance = self._settings.fock_tail_tolerance
        while True:
            try:
                columns: List[np.ndarray] = Parallel(n_jobs=self._settings.n_jobs)(
                    delayed(_checked_amplitudes)(params, cutoff, tolerance) for params in grid
                )
                return np.column_stack(columns), cutoff
            except CutoffTooSmallError as e:
                if 2 * cutoff > MAX_CUTOFF:
                    raise
                logger.warning(
                    f"Grid state tail mass {e.tail_mass:.3e} at cutoff {cutoff}, "
                    f"retrying with {2 * cutoff}"
                )
                cutoff *= 2

    def _require_common_cutoff(self, v1: FockVector, v2: FockVector) -> None:
        if v1.cutoff != v2.cutoff:
            raise InvalidInputError(
                f"vectors have different cutoffs ({v1.cutoff} and {v2.cutoff})"
            )
