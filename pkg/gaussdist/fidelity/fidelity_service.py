import logging
import math

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from gaussdist.common.exceptions import (
    InternalError,
    InvalidInputError,
    PreconditionError,
)
from gaussdist.common.validation import require_finite
from gaussdist.fidelity.fidelity_models import DiscriminationResult
from gaussdist.states.gaussian_models import GaussianState

logger = logging.getLogger(__name__)

CLAMP_WARNING_THRESHOLD = 1e-9
# tolerance on the upper end of the opposite-phase interval, which is an irrational root
INTERVAL_SLACK = 1e-12


def max_squeeze_parameter(energy: float) -> float:
    """Largest d = e^{2|z|} a state of energy E can carry (all energy in squeezing)."""
    return 2 * energy + 1 + 2 * math.sqrt(energy * energy + energy)


class FidelityService:
    def pure_fidelity(self, s1: GaussianState, s2: GaussianState) -> float:
        """|<psi1|psi2>|^2 for pure Gaussian states, clamped to [0, 1]."""
        fidelity = math.exp(-self.neg_log_pure_fidelity(s1, s2))
        if fidelity > 1.0:
            if fidelity - 1.0 > CLAMP_WARNING_THRESHOLD:
                logger.warning(f"Fidelity {fidelity!r} exceeds 1, clamping")
            fidelity = 1.0
        return fidelity

    def neg_log_pure_fidelity(self, s1: GaussianState, s2: GaussianState) -> float:
        self._require_pure_pair(s1, s2)
        delta = s1.mean - s2.mean
        total = s1.cov + s2.cov

        if s1.modes == 1:
            a, b, d = total[0, 0], total[0, 1], total[1, 1]
            det = a * d - b * b
            if not det > 0:
                raise InternalError(f"sum of covariances is singular (det {det})")
            quadratic = (d * delta[0] ** 2 - 2 * b * delta[0] * delta[1] + a * delta[1] ** 2) / det
        else:
            try:
                lu, piv = lu_factor(total, check_finite=False)
            except LinAlgError as e:
                raise InternalError("sum of covariances is singular") from e
            diagonal = np.diag(lu)
            if np.any(diagonal == 0):
                raise InternalError("sum of covariances is singular")
            det = float(np.prod(diagonal)) * (-1.0) ** int(np.sum(piv != np.arange(piv.size)))
            if not det > 0:
                raise InternalError(f"sum of covariances is not positive definite (det {det})")
            quadratic = float(delta @ lu_solve((lu, piv), delta, check_finite=False))

        return 0.5 * quadratic + 0.5 * math.log(det)

    def discriminate(self, s1: GaussianState, s2: GaussianState) -> DiscriminationResult:
        return DiscriminationResult.from_fidelity(self.pure_fidelity(s1, s2))

    def helstrom_error(self, fidelity: float) -> float:
        self._require_fidelity(fidelity)
        return DiscriminationResult.from_fidelity(fidelity).p_err

    def trace_distance(self, fidelity: float) -> float:
        self._require_fidelity(fidelity)
        return 2 * math.sqrt(1 - fidelity)

    def neg_log_helstrom_error(self, neg_log_fidelity: float) -> float:
        """-log p_err from -log F; stays finite when F underflows."""
        if not neg_log_fidelity >= 0:
            raise InvalidInputError(f"-log F must be >= 0, got {neg_log_fidelity}")
        fidelity = math.exp(-neg_log_fidelity)
        return neg_log_fidelity + math.log(2 * (1 + math.sqrt(1 - fidelity)))

    def squeezed_pair_fidelity(self, r1: float, r2: float, d1: float, d2: float) -> float:
        require_finite("squeezed pair parameters", r1, r2, d1, d2)
        if d1 <= 0 or d2 <= 0:
            raise InvalidInputError(f"squeezing parameters must be positive, got d1={d1}, d2={d2}")
        total = d1 + d2
        prefactor = 2 * math.sqrt(d1 * d2) / total
        return prefactor * math.exp(-2 * d1 * d2 * (r2 - r1) ** 2 / total)

    def squeezed_pair_neg_log_fidelity(
        self, r1: float, r2: float, d1: float, d2: float
    ) -> float:
        require_finite("squeezed pair parameters", r1, r2, d1, d2)
        if d1 <= 0 or d2 <= 0:
            raise InvalidInputError(f"squeezing parameters must be positive, got d1={d1}, d2={d2}")
        total = d1 + d2
        return 2 * d1 * d2 * (r2 - r1) ** 2 / total - math.log(2 * math.sqrt(d1 * d2) / total)

    def opposite_phase_squeeze_fidelity(self, b: float, energy: float) -> float:
        require_finite("opposite phase parameters", b, energy)
        if energy < 0:
            raise InvalidInputError(f"energy must be >= 0, got {energy}")
        upper = max_squeeze_parameter(energy)
        if not 1.0 <= b <= upper * (1 + INTERVAL_SLACK):
            raise InvalidInputError(
                f"b={b} outside the feasible interval [1, {upper}] = [1, 2E+1+2sqrt(E^2+E)]"
            )
        ratio = 1 + b * b
        displacement_budget = max(0.0, energy - (b - 1) ** 2 / (4 * b))
        return (2 * b / ratio) * math.exp(-(8 * b / ratio) * displacement_budget)

    def centered_squeezed_fidelity(self, w1: float, w2: float) -> float:
        require_finite("squeezing parameters", w1, w2)
        return 1.0 / math.cosh(w1 - w2)

    def coherent_pair_fidelity(self, energy: float) -> float:
        """|<-sqrt(E)|sqrt(E)>|^2."""
        return math.exp(-self.coherent_pair_neg_log_fidelity(energy))

    def coherent_pair_neg_log_fidelity(self, energy: float) -> float:
        require_finite("energy", energy)
        if energy < 0:
            raise InvalidInputError(f"energy must be >= 0, got {energy}")
        return 4 * energy

    def _require_pure_pair(self, s1: GaussianState, s2: GaussianState) -> None:
        if s1.modes != s2.modes:
            raise InvalidInputError(
                f"states have different mode counts ({s1.modes} and {s2.modes})"
            )
        for label, state in (("first", s1), ("second", s2)):
            if not state.is_pure:
                raise PreconditionError(
                    f"{label} state is not pure: |det(2 cov) - 1| = {state.purity_defect:.3e}"
                )

    def _require_fidelity(self, fidelity: float) -> None:
        if not 0.0 <= fidelity <= 1.0:
            raise InvalidInputError(f"fidelity must lie in [0, 1], got {fidelity}")
