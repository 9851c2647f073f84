import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from gaussdist.common.exceptions import InternalError, InvalidInputError, PreconditionError
from gaussdist.common.validation import require_modes, require_positive_energy
from gaussdist.fidelity.fidelity_service import FidelityService
from gaussdist.multimode.multimode_models import MultimodeOptimum, SeparableBounds
from gaussdist.optimum.optimum_service import OptimumService
from gaussdist.states.gaussian_models import GaussianState, SymplecticMatrix
from gaussdist.states.gaussian_service import GaussianService
from gaussdist.states.symplectic import (
    fourier_unitary,
    passive_matrix,
    random_symplectic_matrix,
)

logger = logging.getLogger(__name__)

TRACE_SLACK = 1e-12
SPECTRUM_AGREEMENT = 1e-8
PAIRING_TOLERANCE = 1e-9


class InfeasibleCovarianceError(InvalidInputError):
    """Tr(cov) leaves no energy for displacement."""


def spectrum_objective(lambdas: Sequence[float], modes: int, energy: float) -> float:
    """log of exp(-2 l1 (2ME + M - sum(l + 1/l)/2)), l1 the first entry."""
    lambdas = np.asarray(lambdas, dtype=float)
    budget = 2 * modes * energy + modes
    return float(-2 * lambdas[0] * (budget - 0.5 * np.sum(lambdas + 1 / lambdas)))


def _spectrum_gradient(lambdas: np.ndarray, modes: int, energy: float) -> np.ndarray:
    budget = 2 * modes * energy + modes
    gradient = lambdas[0] * (1 - 1 / lambdas**2)
    gradient[0] = -2 * (budget - 0.5 * np.sum(lambdas + 1 / lambdas)) + lambdas[0] - 1 / lambdas[0]
    return gradient


class MultimodeService:
    def __init__(
        self,
        gaussian_service: GaussianService,
        fidelity_service: FidelityService,
        optimum_service: OptimumService,
    ):
        self._gaussian_service = gaussian_service
        self._fidelity_service = fidelity_service
        self._optimum_service = optimum_service

    def allin_pair(self, modes: int, energy: float) -> Tuple[GaussianState, GaussianState]:
        """Vacuum on the first M-1 modes, the single-mode optimum at energy ME on the last."""
        require_modes(modes)
        require_positive_energy(energy)
        pair = self._optimum_service.optimal_pair(modes * energy)

        states = []
        for params in (pair.state1, pair.state2):
            factor = self._gaussian_service.state_from_params(params)
            if modes > 1:
                factor = self._gaussian_service.tensor(
                    [self._gaussian_service.vacuum(modes - 1), factor]
                )
            states.append(factor)
        return states[0], states[1]

    def isocovariant_bound(self, cov: np.ndarray, modes: int, energy: float) -> float:
        return math.exp(-self.isocovariant_neg_log_bound(cov, modes, energy))

    def isocovariant_neg_log_bound(self, cov: np.ndarray, modes: int, energy: float) -> float:
        require_modes(modes)
        require_positive_energy(energy)
        state = self._gaussian_service.make_state(np.zeros(2 * modes), cov)
        if state.modes != modes:
            raise InvalidInputError(
                f"covariance acts on {state.modes} mode(s), expected {modes}"
            )
        if not state.is_pure:
            raise PreconditionError(
                f"covariance is not pure: |det(2 cov) - 1| = {state.purity_defect:.3e}"
            )

        budget = 2 * modes * energy + modes
        remaining = budget - float(np.trace(state.cov))
        if remaining < -TRACE_SLACK * budget:
            raise InfeasibleCovarianceError(
                f"Tr(cov)={np.trace(state.cov)} exceeds 2ME+M={budget}; no energy left for displacement"
            )
        # ||cov^-1|| is the reciprocal of the smallest eigenvalue
        inverse_norm = 1.0 / float(np.linalg.eigvalsh(state.cov)[0])
        return inverse_norm * max(remaining, 0.0)

    def spectrum_minimize(self, modes: int, energy: float) -> MultimodeOptimum:
        require_modes(modes)
        require_positive_energy(energy)
        total = modes * energy
        closed = [2 * total + 1] + [1.0] * (modes - 1)
        numeric = self._descend_spectrum(modes, energy)

        pair = self._optimum_service.optimal_pair(total)
        numeric_neg_log = -spectrum_objective(numeric, modes, energy)
        disagreement = abs(math.expm1(pair.neg_log_fidelity - numeric_neg_log))
        if disagreement > SPECTRUM_AGREEMENT:
            logger.error(
                f"Spectrum descent for M={modes}, E={energy} ended at {numeric}, "
                f"fidelity off by {disagreement:.3e}"
            )
            raise InternalError("numerical spectrum descent disagrees with the stationary point")

        state1, state2 = self.allin_pair(modes, energy)
        twice_cov = 2 * state1.cov
        pairing = SymplecticMatrix(matrix=twice_cov).pairing_defect()
        if pairing > PAIRING_TOLERANCE * closed[0] ** 2:
            raise InternalError(f"optimal covariance spectrum is not reciprocal (defect {pairing:.3e})")
        spectrum = np.sort(np.linalg.eigvalsh(twice_cov))[::-1]

        logger.info(
            f"Isocovariant optimum for M={modes}, E={energy}: -log F={pair.neg_log_fidelity!r}, "
            f"descent reached lambda_1={numeric[0]!r}"
        )
        return MultimodeOptimum(
            modes=modes,
            energy_per_mode=energy,
            neg_log_fidelity=pair.neg_log_fidelity,
            fidelity=pair.fidelity,
            numeric_neg_log_fidelity=numeric_neg_log,
            lambda_closed=closed,
            lambda_numeric=numeric,
            lambda_spectrum=spectrum.tolist(),
            allin_fidelity=self._fidelity_service.pure_fidelity(state1, state2),
            state1=state1,
            state2=state2,
        )

    def symmetric_transform(
        self, s1: GaussianState, s2: GaussianState
    ) -> Tuple[GaussianState, GaussianState]:
        """Spread both states over all modes with the discrete Fourier beam splitter."""
        if s1.modes != s2.modes:
            raise InvalidInputError(
                f"states have different mode counts ({s1.modes} and {s2.modes})"
            )
        if s1.modes == 1:
            return s1, s2
        transform = self._gaussian_service.make_symplectic(
            passive_matrix(fourier_unitary(s1.modes))
        )
        return (
            self._gaussian_service.conjugate(s1, transform),
            self._gaussian_service.conjugate(s2, transform),
        )

    def separable_product_min(self, modes: int, energy: float) -> SeparableBounds:
        require_modes(modes)
        require_positive_energy(energy)
        return SeparableBounds(
            modes=modes,
            energy_per_mode=energy,
            symmetric_neg_log=modes * self._optimum_service.closed_form_neg_log_fidelity(energy),
            general_neg_log=self._optimum_service.closed_form_neg_log_fidelity(modes * energy),
        )

    def random_isocovariant_pair(
        self,
        rng: np.random.Generator,
        modes: int,
        energy: float,
        antipodal: bool = True,
    ) -> Tuple[GaussianState, GaussianState]:
        """Two pure states sharing a random covariance, means on the energy sphere."""
        require_modes(modes)
        require_positive_energy(energy)
        budget = 2 * modes * energy
        # cosh(2 r_j) - 1 shares out a random fraction of the budget
        weights = rng.dirichlet(np.ones(modes))
        share = rng.random()
        magnitudes = [0.5 * math.acosh(1 + budget * share * w) for w in weights]

        matrix = random_symplectic_matrix(rng, magnitudes)
        cov = matrix @ matrix.T / 2
        radius = math.sqrt(max(0.0, budget + modes - float(np.trace(cov))))

        mean1 = radius * self._unit_vector(rng, 2 * modes)
        mean2 = -mean1 if antipodal else radius * self._unit_vector(rng, 2 * modes)
        return (
            self._gaussian_service.make_state(mean1, cov),
            self._gaussian_service.make_state(mean2, cov),
        )

    def _descend_spectrum(self, modes: int, energy: float) -> List[float]:
        budget = 4 * modes * energy + 2 * modes
        start = np.array([1 + modes * energy] + [1 + 0.25 * energy] * (modes - 1))
        constraint = {
            "type": "ineq",
            "fun": lambda lam: budget - float(np.sum(lam + 1 / lam)),
            "jac": lambda lam: -(1 - 1 / lam**2),
        }
        result = minimize(
            spectrum_objective,
            start,
            args=(modes, energy),
            jac=_spectrum_gradient,
            method="SLSQP",
            bounds=[(1.0, budget)] * modes,
            constraints=[constraint],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        if not result.success:
            logger.warning(f"SLSQP spectrum descent for M={modes}, E={energy}: {result.message}")
        # the objective singles out the first entry as the largest eigenvalue
        return [float(result.x[0])] + sorted((float(x) for x in result.x[1:]), reverse=True)

    @staticmethod
    def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
        vector = rng.standard_normal(dim)
        return vector / np.linalg.norm(vector)
