import logging
import math
from abc import ABC, abstractmethod
from typing import List, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import null_space
from scipy.optimize import minimize

from gaussdist.common.exceptions import GaussDistError
from gaussdist.common.validation import require_positive_energy
from gaussdist.config.settings import Settings
from gaussdist.fidelity.fidelity_service import FidelityService
from gaussdist.optimum.optimum_models import OptimumReport, SearchFamily, StartTrace
from gaussdist.optimum.optimum_service import OptimumService
from gaussdist.states.gaussian_models import PureStateParams

logger = logging.getLogger(__name__)

NEWTON_STEPS = 8
HESSIAN_STEP = 1e-6
# smallest reduced Hessian eigenvalue, relative to the largest, that counts as curvature
CURVATURE_FLOOR = 1e-8
# math.expm1 overflows above ~709.78
MAX_EXPONENT_GAP = 700.0


class ConvergenceError(GaussDistError, RuntimeError):
    def __init__(self, message: str, starts: List[StartTrace]):
        super().__init__(message)
        self.starts = starts


class PairFamily(ABC):
    """Parameterisation of a pair of single-mode pure states with energy E each.

    `moments` returns the mean difference, the covariance sum and their
    derivatives with respect to every parameter. The search runs on
    log F / scale with scale = E (1 + E), which keeps gradients and
    curvatures of order one across energies.
    """

    def __init__(self, energy: float):
        self.energy = energy
        self.scale = energy * (1 + energy)

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @property
    @abstractmethod
    def flat_direction(self) -> np.ndarray:
        """Unit vector of the common phase rotation; log F is constant along it."""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def moments(
        self, x: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]: ...

    @abstractmethod
    def to_params(self, x: np.ndarray) -> Tuple[PureStateParams, PureStateParams]: ...

    def log_fidelity(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        """log F and its gradient; F = exp(-d^T C^-1 d / 2) / sqrt(det C)."""
        delta, total, d_delta, d_total = self.moments(x)
        a, b, d = total[0, 0], total[0, 1], total[1, 1]
        det = a * d - b * b
        inverse = np.array([[d, -b], [-b, a]]) / det
        y = inverse @ delta
        value = -0.5 * float(delta @ y) - 0.5 * math.log(det)
        weight = inverse - np.outer(y, y)
        gradient = -(d_delta @ y) - 0.5 * np.einsum("kij,ij->k", d_total, weight)
        return value, gradient

    def scaled_log_fidelity(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        value, gradient = self.log_fidelity(x)
        return value / self.scale, gradient / self.scale


class FullPairFamily(PairFamily):
    """x = (psi1, arg alpha1, theta1, psi2, arg alpha2, theta2).

    Each state has |alpha| = sqrt(E) cos psi and sinh|z| = sqrt(E) sin psi, so
    every x satisfies the energy constraint. A negative cos psi or sin psi is
    the same state with arg alpha or theta shifted by pi.
    """

    dim = 6
    flat_direction = np.array([0.0, 1.0, 2.0, 0.0, 1.0, 2.0]) / math.sqrt(10.0)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        draws = rng.random(6)
        return np.array(
            [
                0.5 * math.pi * draws[0],
                2 * math.pi * draws[1],
                2 * math.pi * draws[2],
                0.5 * math.pi * draws[3],
                2 * math.pi * draws[4],
                2 * math.pi * draws[5],
            ]
        )

    def moments(self, x):
        mean1, cov1, d_mean1, d_cov1 = self._single(x[0:3])
        mean2, cov2, d_mean2, d_cov2 = self._single(x[3:6])
        return (
            mean1 - mean2,
            cov1 + cov2,
            np.concatenate([d_mean1, -d_mean2]),
            np.concatenate([d_cov1, d_cov2]),
        )

    def to_params(self, x):
        return self._params(x[0:3]), self._params(x[3:6])

    def _params(self, block: np.ndarray) -> PureStateParams:
        psi, phi, theta = block
        root = math.sqrt(self.energy)
        sinh = root * math.sin(psi)
        return PureStateParams(
            displacement=root * math.cos(psi) * complex(math.cos(phi), math.sin(phi)),
            squeeze_magnitude=math.asinh(abs(sinh)),
            squeeze_phase=theta if sinh >= 0 else theta + math.pi,
        )

    def _single(self, block: np.ndarray):
        psi, phi, theta = block
        root = math.sqrt(self.energy)
        rho = root * math.cos(psi)
        u = root * math.sin(psi)
        lift = math.sqrt(1 + u * u)
        # cosh 2|z| = 1 + 2 u^2 and sinh 2|z| = 2 u cosh|z| with u = sinh|z|; du/dpsi = rho
        ch = 1 + 2 * u * u
        sh = 2 * u * lift
        d_ch = 4 * u * rho
        d_sh = 2 * (1 + 2 * u * u) / lift * rho
        c, s = math.cos(theta), math.sin(theta)
        direction = np.array([math.cos(phi), math.sin(phi)])
        normal = np.array([-math.sin(phi), math.cos(phi)])

        mean = math.sqrt(2) * rho * direction
        cov = 0.5 * np.array([[ch - c * sh, -s * sh], [-s * sh, ch + c * sh]])

        d_mean = np.array(
            [
                -math.sqrt(2) * u * direction,
                math.sqrt(2) * rho * normal,
                np.zeros(2),
            ]
        )
        d_cov = np.array(
            [
                0.5 * np.array([[d_ch - c * d_sh, -s * d_sh], [-s * d_sh, d_ch + c * d_sh]]),
                np.zeros((2, 2)),
                0.5 * sh * np.array([[s, -c], [-c, -s]]),
            ]
        )
        return mean, cov, d_mean, d_cov


class CoherentPairFamily(PairFamily):
    """x = (arg alpha1, arg alpha2) with |alpha_j| = sqrt(E) and no squeezing."""

    dim = 2
    flat_direction = np.array([1.0, 1.0]) / math.sqrt(2.0)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return 2 * math.pi * rng.random(2)

    def moments(self, x):
        radius = math.sqrt(2 * self.energy)
        direction1 = np.array([math.cos(x[0]), math.sin(x[0])])
        direction2 = np.array([math.cos(x[1]), math.sin(x[1])])
        d_delta = np.array(
            [
                radius * np.array([-direction1[1], direction1[0]]),
                -radius * np.array([-direction2[1], direction2[0]]),
            ]
        )
        return radius * (direction1 - direction2), np.eye(2), d_delta, np.zeros((2, 2, 2))

    def to_params(self, x):
        radius = math.sqrt(self.energy)
        return (
            PureStateParams(displacement=complex(radius * math.cos(x[0]), radius * math.sin(x[0]))),
            PureStateParams(displacement=complex(radius * math.cos(x[1]), radius * math.sin(x[1]))),
        )


def _scaled_hessian(family: PairFamily, x: np.ndarray) -> np.ndarray:
    columns = []
    for k in range(family.dim):
        step = np.zeros(family.dim)
        step[k] = HESSIAN_STEP
        forward = family.scaled_log_fidelity(x + step)[1]
        backward = family.scaled_log_fidelity(x - step)[1]
        columns.append((forward - backward) / (2 * HESSIAN_STEP))
    hessian = np.array(columns)
    return 0.5 * (hessian + hessian.T)


def reduced_curvature(family: PairFamily, hessian: np.ndarray) -> float:
    """Least eigenvalue of the Hessian across the phase rotation, over the largest magnitude.

    Positive at a strict local minimum; zero or negative at saddles and at
    points with a second flat direction.
    """
    basis = null_space(family.flat_direction[np.newaxis, :])
    eigenvalues = np.linalg.eigvalsh(basis.T @ hessian @ basis)
    largest = float(np.max(np.abs(eigenvalues)))
    if largest == 0.0:
        return 0.0
    return float(eigenvalues[0]) / largest


def _newton_polish(
    family: PairFamily, x: np.ndarray, gradient_tolerance: float
) -> Tuple[np.ndarray, np.ndarray]:
    value, gradient = family.scaled_log_fidelity(x)
    for _ in range(NEWTON_STEPS):
        if np.linalg.norm(gradient) < 1e-2 * gradient_tolerance:
            break
        # the pseudo-inverse ignores the flat direction of the common phase rotation
        step = -np.linalg.pinv(_scaled_hessian(family, x), rcond=1e-8) @ gradient
        candidate = x + step
        candidate_value, candidate_gradient = family.scaled_log_fidelity(candidate)
        if candidate_value > value + 1e-14 * max(1.0, abs(value)):
            break
        if np.linalg.norm(candidate_gradient) >= np.linalg.norm(gradient):
            break
        x, value, gradient = candidate, candidate_value, candidate_gradient
    return x, gradient


def run_start(
    family: PairFamily, index: int, start: np.ndarray, gradient_tolerance: float
) -> StartTrace:
    """One local descent of log F from `start`, finished with Newton steps."""
    result = minimize(
        family.scaled_log_fidelity,
        start,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12},
    )
    x, gradient = _newton_polish(family, np.asarray(result.x), gradient_tolerance)
    gradient_norm = float(np.linalg.norm(gradient))
    curvature = reduced_curvature(family, _scaled_hessian(family, x))
    converged = gradient_norm < gradient_tolerance
    return StartTrace(
        index=index,
        start=start.tolist(),
        final=x.tolist(),
        objective=family.log_fidelity(x)[0],
        gradient_norm=gradient_norm,
        curvature=curvature,
        converged=converged,
        local_minimum=converged and curvature > CURVATURE_FLOOR,
        message=str(result.message),
    )


def relative_gap(neg_log: float, reference_neg_log: float) -> float:
    """|F - F_ref| / F_ref from the two exponents, finite where both F underflow."""
    exponent = reference_neg_log - neg_log
    if exponent > MAX_EXPONENT_GAP:
        return math.inf
    return abs(math.expm1(exponent))


class NumericMinimizer:
    """Multi-start local descent of the fidelity over energy-constrained pairs."""

    def __init__(
        self,
        fidelity_service: FidelityService,
        optimum_service: OptimumService,
        settings: Settings,
    ):
        self._fidelity_service = fidelity_service
        self._optimum_service = optimum_service
        self._settings = settings

    def numeric_minimize(
        self,
        energy: float,
        seed: int = 0,
        family: SearchFamily = SearchFamily.FULL,
    ) -> OptimumReport:
        require_positive_energy(energy)
        pair_family = self._family(energy, family)
        tolerance = self._settings.gradient_tolerance

        rng = np.random.default_rng(seed)
        starts = [pair_family.sample(rng) for _ in range(self._settings.multistart_count)]
        logger.info(
            f"Minimizing fidelity at E={energy} ({family.value} family) "
            f"from {len(starts)} starts, seed={seed}"
        )

        traces: List[StartTrace] = Parallel(n_jobs=self._settings.n_jobs)(
            delayed(run_start)(pair_family, index, start, tolerance)
            for index, start in enumerate(starts)
        )

        minima = [trace for trace in traces if trace.local_minimum]
        for trace in traces:
            if not trace.local_minimum:
                logger.debug(
                    f"Start {trace.index} rejected: scaled gradient norm "
                    f"{trace.gradient_norm:.3e}, curvature {trace.curvature:.3e}: {trace.message}"
                )
        if not minima:
            logger.error(f"No start reached a local minimum for E={energy}")
            raise ConvergenceError(
                f"none of {len(traces)} starts reached a local minimum "
                f"(scaled gradient norm < {tolerance}, positive curvature) at E={energy}",
                traces,
            )

        best = min(minima, key=lambda trace: (trace.objective, trace.index))
        x = np.array(best.final)
        state1, state2 = pair_family.to_params(x)
        neg_log_fidelity = -best.objective
        fidelity = math.exp(-neg_log_fidelity)
        closed_neg_log = self._closed_form_neg_log(energy, family)
        relative_error = relative_gap(neg_log_fidelity, closed_neg_log)

        logger.info(
            f"Best start {best.index} of {len(minima)} minima at E={energy}: "
            f"-log F={neg_log_fidelity!r}, closed form {closed_neg_log!r}, "
            f"relative error {relative_error:.3e}"
        )

        hessian = pair_family.scale * _scaled_hessian(pair_family, x)
        return OptimumReport(
            energy=energy,
            family=family,
            seed=seed,
            state1=state1,
            state2=state2,
            parameters=best.final,
            neg_log_fidelity=neg_log_fidelity,
            fidelity=fidelity,
            p_err=self._fidelity_service.helstrom_error(min(fidelity, 1.0)),
            gradient_norm=best.gradient_norm,
            hessian_eigenvalues=np.linalg.eigvalsh(hessian).tolist(),
            canonical_phases=self._canonical_phases(state1, state2),
            closed_form_neg_log_fidelity=closed_neg_log,
            closed_form_fidelity=math.exp(-closed_neg_log),
            relative_error=relative_error,
            starts=traces,
        )

    def _family(self, energy: float, family: SearchFamily) -> PairFamily:
        if family is SearchFamily.COHERENT:
            return CoherentPairFamily(energy)
        return FullPairFamily(energy)

    def _closed_form_neg_log(self, energy: float, family: SearchFamily) -> float:
        if family is SearchFamily.COHERENT:
            return self._fidelity_service.coherent_pair_neg_log_fidelity(energy)
        return self._optimum_service.closed_form_neg_log_fidelity(energy)

    @staticmethod
    def _canonical_phases(
        state1: PureStateParams, state2: PureStateParams
    ) -> Tuple[float, float]:
        """Squeeze phases after rotating the pair so that alpha2 - alpha1 is real and positive.

        A phase rotation by beta maps theta to theta - 2 beta; results are
        wrapped to (-pi, pi].
        """
        beta = math.atan2(
            (state2.displacement - state1.displacement).imag,
            (state2.displacement - state1.displacement).real,
        )

        def wrap(angle: float) -> float:
            wrapped = math.remainder(angle, 2 * math.pi)
            return math.pi if wrapped == -math.pi else wrapped

        return (
            wrap(state1.squeeze_phase - 2 * beta),
            wrap(state2.squeeze_phase - 2 * beta),
        )
