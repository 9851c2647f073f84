import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from gaussdist.common.exceptions import InvalidInputError
from gaussdist.config.settings import Settings
from gaussdist.fidelity.fidelity_service import FidelityService
from gaussdist.fock.fock_service import FockService
from gaussdist.multimode.multimode_service import MultimodeService
from gaussdist.optimum.numeric_minimizer import NumericMinimizer
from gaussdist.optimum.optimum_service import OptimumService
from gaussdist.states.gaussian_models import PureStateParams
from gaussdist.states.gaussian_service import GaussianService
from gaussdist.states.symplectic import random_passive_matrix
from gaussdist.verification.verification_models import (
    CheckResult,
    VerificationPlan,
    VerificationReport,
)

logger = logging.getLogger(__name__)

ORACLE_MAX_ENERGY = 4.0
ORACLE_TOLERANCE = 1e-8
INVARIANCE_TOLERANCE = 1e-10
BOUND_SLACK = 1e-12
SCALING_GRID = 100

Check = Callable[[VerificationPlan], CheckResult]


def random_params(rng: np.random.Generator, max_energy: float) -> PureStateParams:
    """Single-mode parameters with energy uniform in [0, max_energy) split at random."""
    energy = max_energy * rng.random()
    split = rng.random()
    return PureStateParams(
        displacement=math.sqrt(split * energy) * np.exp(2j * math.pi * rng.random()),
        squeeze_magnitude=math.asinh(math.sqrt((1 - split) * energy)),
        squeeze_phase=2 * math.pi * rng.random(),
    )


def _oracle_sample(
    gaussian_service: GaussianService,
    fidelity_service: FidelityService,
    fock_service: FockService,
    seed: np.random.SeedSequence,
) -> Tuple[float, float]:
    rng = np.random.default_rng(seed)
    p1, p2 = random_params(rng, ORACLE_MAX_ENERGY), random_params(rng, ORACLE_MAX_ENERGY)
    v1, v2 = fock_service.build_pair(p1, p2)
    s1, s2 = gaussian_service.state_from_params(p1), gaussian_service.state_from_params(p2)

    fidelity_error = abs(fock_service.fidelity(v1, v2) - fidelity_service.pure_fidelity(s1, s2))
    energy_error = max(
        abs(fock_service.fock_energy(v) - gaussian_service.energy(s))
        for v, s in ((v1, s1), (v2, s2))
    )
    return fidelity_error, energy_error


def _invariance_sample(
    gaussian_service: GaussianService,
    fidelity_service: FidelityService,
    seed: np.random.SeedSequence,
) -> float:
    """Worst relative change of -log F under swap, rotation and a random passive map."""
    rng = np.random.default_rng(seed)
    modes = int(rng.integers(1, 4))
    s1 = gaussian_service.state_from_params([random_params(rng, 2.0) for _ in range(modes)])
    s2 = gaussian_service.state_from_params([random_params(rng, 2.0) for _ in range(modes)])
    reference = fidelity_service.neg_log_pure_fidelity(s1, s2)
    scale = max(1.0, reference)

    angles = (2 * math.pi * rng.random(modes)).tolist()
    passive = gaussian_service.make_symplectic(random_passive_matrix(rng, modes))
    variants = [
        (s2, s1),
        (gaussian_service.rotate(s1, angles), gaussian_service.rotate(s2, angles)),
        (gaussian_service.conjugate(s1, passive), gaussian_service.conjugate(s2, passive)),
    ]
    worst = max(
        abs(fidelity_service.neg_log_pure_fidelity(a, b) - reference) / scale for a, b in variants
    )
    energy_drift = max(
        abs(gaussian_service.energy(gaussian_service.conjugate(s, passive)) - gaussian_service.energy(s))
        / max(1.0, gaussian_service.energy(s))
        for s in (s1, s2)
    )
    return max(worst, energy_drift)


def _isocovariant_sample(
    multimode_service: MultimodeService,
    fidelity_service: FidelityService,
    seed: np.random.SeedSequence,
) -> Tuple[float, float]:
    """|det(cov1 + cov2) - 1| and how far the fidelity falls below the isocovariant bound."""
    rng = np.random.default_rng(seed)
    modes = int(rng.integers(1, 5))
    energy = 0.1 + 1.9 * rng.random()
    s1, s2 = multimode_service.random_isocovariant_pair(rng, modes, energy, antipodal=True)
    det_defect = abs(float(np.linalg.det(s1.cov + s2.cov)) - 1.0)
    bound = multimode_service.isocovariant_bound(s1.cov, modes, energy)
    shortfall = bound - fidelity_service.pure_fidelity(s1, s2)
    return det_defect, shortfall


class VerificationService:
    """Self-checks of the closed forms against numerics and the number-basis oracle."""

    def __init__(
        self,
        gaussian_service: GaussianService,
        fidelity_service: FidelityService,
        optimum_service: OptimumService,
        numeric_minimizer: NumericMinimizer,
        multimode_service: MultimodeService,
        fock_service: FockService,
        settings: Settings,
    ):
        self._gaussian_service = gaussian_service
        self._fidelity_service = fidelity_service
        self._optimum_service = optimum_service
        self._numeric_minimizer = numeric_minimizer
        self._multimode_service = multimode_service
        self._fock_service = fock_service
        self._settings = settings
        self._checks: Dict[str, Check] = {}
        self._register_default_checks()

    @property
    def check_names(self) -> List[str]:
        return list(self._checks)

    def verify(
        self, plan: VerificationPlan, only: Optional[List[str]] = None
    ) -> VerificationReport:
        unknown = sorted(set(only or []) - set(self._checks))
        if unknown:
            raise InvalidInputError(f"unknown checks: {unknown}")
        selected = [name for name in self._checks if not only or name in only]
        logger.info(
            f"Running {len(selected)} {plan.level.value} checks "
            f"({plan.samples} samples, seed={plan.seed})"
        )
        results = []
        for name in selected:
            check = self._checks[name]
            try:
                result = check(plan)
            except Exception as e:
                logger.error(f"Check {name} raised: {e}", exc_info=True)
                result = CheckResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}")
            level = logging.INFO if result.passed else logging.WARNING
            logger.log(level, f"{name}: {'pass' if result.passed else 'FAIL'} ({result.measured})")
            results.append(result)
        return VerificationReport(plan=plan, checks=results)

    def _register_default_checks(self) -> None:
        self._checks["numeric_optimum"] = self._check_numeric_optimum
        self._checks["oracle_equivalence"] = self._check_oracle_equivalence
        self._checks["optimal_pair_oracle"] = self._check_optimal_pair_oracle
        self._checks["polar_intersections"] = self._check_polar_intersections
        self._checks["hessian_determinant"] = self._check_hessian
        self._checks["centered_minimum"] = self._check_centered_minimum
        self._checks["isocovariant_optimum"] = self._check_isocovariant_optimum
        self._checks["scaling_hierarchy"] = self._check_scaling_hierarchy
        self._checks["bruteforce_floor"] = self._check_bruteforce_floor
        self._checks["fidelity_invariance"] = self._check_fidelity_invariance
        self._checks["isocovariant_bound"] = self._check_isocovariant_bound
        self._checks["symmetric_transform"] = self._check_symmetric_transform

    def _check_numeric_optimum(self, plan: VerificationPlan) -> CheckResult:
        tolerance = 1e-6
        worst = max(
            self._numeric_minimizer.numeric_minimize(energy, seed=plan.seed).relative_error
            for energy in plan.energies
        )
        return CheckResult(
            name="numeric_optimum", passed=worst <= tolerance, measured=worst, tolerance=tolerance
        )

    def _check_oracle_equivalence(self, plan: VerificationPlan) -> CheckResult:
        seeds = np.random.SeedSequence(plan.seed).spawn(plan.samples)
        errors = Parallel(n_jobs=self._settings.n_jobs)(
            delayed(_oracle_sample)(
                self._gaussian_service, self._fidelity_service, self._fock_service, seed
            )
            for seed in seeds
        )
        worst_fidelity = max(error[0] for error in errors)
        worst_energy = max(error[1] for error in errors)
        worst = max(worst_fidelity, worst_energy)
        return CheckResult(
            name="oracle_equivalence",
            passed=worst < ORACLE_TOLERANCE,
            measured=worst,
            tolerance=ORACLE_TOLERANCE,
            detail=f"fidelity {worst_fidelity:.3e}, energy {worst_energy:.3e}",
        )

    def _check_optimal_pair_oracle(self, plan: VerificationPlan) -> CheckResult:
        worst = 0.0
        for energy in (0.5, 1.0, 2.0):
            pair = self._optimum_service.optimal_pair(energy)
            v1, v2 = self._fock_service.build_pair(pair.state1, pair.state2)
            worst = max(
                worst,
                abs(self._fock_service.fock_energy(v1) - energy),
                abs(self._fock_service.fock_energy(v2) - energy),
                abs(self._fock_service.fidelity(v1, v2) - pair.fidelity),
            )
        return CheckResult(
            name="optimal_pair_oracle",
            passed=worst < ORACLE_TOLERANCE,
            measured=worst,
            tolerance=ORACLE_TOLERANCE,
        )

    def _check_polar_intersections(self, plan: VerificationPlan) -> CheckResult:
        tolerance = 1e-10
        worst_residual, worst_quartic = 0.0, 0.0
        counts = {}
        for energy in plan.energies:
            report = self._optimum_service.find_intersections(energy, self._settings.polar_points)
            counts[energy] = len(report.intersections)
            for x in report.intersections:
                worst_residual = max(worst_residual, x.residual)
                worst_quartic = max(worst_quartic, max(x.quartic_residuals) / x.quartic_scale)
        reference = self._optimum_service.find_intersections(0.5, self._settings.polar_points)
        passed = (
            worst_residual < tolerance
            and worst_quartic < 1e-6
            and len(reference.intersections) == 2
        )
        return CheckResult(
            name="polar_intersections",
            passed=passed,
            measured=worst_residual,
            tolerance=tolerance,
            detail=f"scaled quartic residual {worst_quartic:.3e}, intersections {counts}",
        )

    def _check_hessian(self, plan: VerificationPlan) -> CheckResult:
        tolerance = 1e-5
        worst, positive = 0.0, True
        for energy in (0.5, 1.0, 2.0):
            determinant = self._optimum_service.hessian_check(energy)
            expected = self._optimum_service.hessian_closed_form(energy)
            positive = positive and determinant > 0
            worst = max(worst, abs(determinant - expected) / expected)
        return CheckResult(
            name="hessian_determinant",
            passed=positive and worst < tolerance,
            measured=worst,
            tolerance=tolerance,
        )

    def _check_centered_minimum(self, plan: VerificationPlan) -> CheckResult:
        tolerance = 1e-8
        worst_fidelity, worst_w1 = 0.0, 0.0
        for energy in (0.5, 1.0, 5.0):
            minimum = self._optimum_service.centered_minimum(energy)
            worst_fidelity = max(worst_fidelity, abs(minimum.fidelity - 1 / (2 * energy + 1)))
            worst_w1 = max(worst_w1, abs(minimum.w1 + math.asinh(math.sqrt(energy))))
        return CheckResult(
            name="centered_minimum",
            passed=worst_fidelity < tolerance and worst_w1 < 1e-6,
            measured=worst_fidelity,
            tolerance=tolerance,
            detail=f"w1 error {worst_w1:.3e}",
        )

    def _check_isocovariant_optimum(self, plan: VerificationPlan) -> CheckResult:
        tolerance = 1e-8
        worst_fidelity, worst_lambda, worst_allin = 0.0, 0.0, 0.0
        for modes, energy in ((1, 1.0), (2, 0.5), (3, 1.0), (4, 0.25)):
            optimum = self._multimode_service.spectrum_minimize(modes, energy)
            exponent = self._optimum_service.closed_form_neg_log_fidelity(modes * energy)
            worst_fidelity = max(
                worst_fidelity,
                abs(math.expm1(exponent - optimum.neg_log_fidelity)),
                abs(math.expm1(exponent - optimum.numeric_neg_log_fidelity)),
            )
            worst_lambda = max(
                worst_lambda,
                max(
                    abs(a - b) / optimum.lambda_closed[0]
                    for a, b in zip(optimum.lambda_numeric, optimum.lambda_closed)
                ),
            )
            allin = self._fidelity_service.neg_log_pure_fidelity(optimum.state1, optimum.state2)
            worst_allin = max(worst_allin, abs(math.expm1(exponent - allin)))
        return CheckResult(
            name="isocovariant_optimum",
            passed=worst_fidelity < tolerance and worst_lambda < 1e-6 and worst_allin < 1e-9,
            measured=worst_fidelity,
            tolerance=tolerance,
            detail=f"lambda {worst_lambda:.3e}, all-in pure fidelity {worst_allin:.3e}",
        )

    def _check_scaling_hierarchy(self, plan: VerificationPlan) -> CheckResult:
        energies = np.linspace(0.05, max(plan.energies), SCALING_GRID).tolist()
        table = self._sweep_scaling(energies)
        margin = min(optimal - coherent for optimal, coherent in table)
        return CheckResult(
            name="scaling_hierarchy", passed=margin > 0, measured=margin, tolerance=0.0
        )

    def _check_bruteforce_floor(self, plan: VerificationPlan) -> CheckResult:
        closed = self._optimum_service.closed_form_fidelity(0.5)
        coarse = self._fock_service.grid_bruteforce(0.5, 64)
        fine = self._fock_service.grid_bruteforce(0.5, 128)
        coarse_gap = coarse.fidelity - closed
        fine_gap = fine.fidelity - closed
        passed = (
            coarse_gap >= -1e-9
            and fine_gap >= -1e-9
            and coarse_gap < 1e-3
            and fine_gap <= 0.5 * coarse_gap
        )
        return CheckResult(
            name="bruteforce_floor",
            passed=passed,
            measured=coarse_gap,
            tolerance=1e-3,
            detail=f"gap at 128: {fine_gap:.3e}",
        )

    def _check_fidelity_invariance(self, plan: VerificationPlan) -> CheckResult:
        seeds = np.random.SeedSequence([plan.seed, 1]).spawn(plan.samples)
        drifts = Parallel(n_jobs=self._settings.n_jobs)(
            delayed(_invariance_sample)(self._gaussian_service, self._fidelity_service, seed)
            for seed in seeds
        )
        worst = max(drifts)
        return CheckResult(
            name="fidelity_invariance",
            passed=worst < INVARIANCE_TOLERANCE,
            measured=worst,
            tolerance=INVARIANCE_TOLERANCE,
        )

    def _check_isocovariant_bound(self, plan: VerificationPlan) -> CheckResult:
        seeds = np.random.SeedSequence([plan.seed, 2]).spawn(plan.samples)
        samples = Parallel(n_jobs=self._settings.n_jobs)(
            delayed(_isocovariant_sample)(self._multimode_service, self._fidelity_service, seed)
            for seed in seeds
        )
        worst_det = max(sample[0] for sample in samples)
        worst_shortfall = max(sample[1] for sample in samples)
        return CheckResult(
            name="isocovariant_bound",
            passed=worst_det < 1e-9 and worst_shortfall <= BOUND_SLACK,
            measured=worst_shortfall,
            tolerance=BOUND_SLACK,
            detail=f"det defect {worst_det:.3e}",
        )

    def _check_symmetric_transform(self, plan: VerificationPlan) -> CheckResult:
        worst = 0.0
        for modes in (2, 3, 4):
            s1, s2 = self._multimode_service.allin_pair(modes, 0.5)
            t1, t2 = self._multimode_service.symmetric_transform(s1, s2)
            before = self._fidelity_service.neg_log_pure_fidelity(s1, s2)
            after = self._fidelity_service.neg_log_pure_fidelity(t1, t2)
            worst = max(worst, abs(after - before) / max(1.0, before))
            for state in (t1, t2):
                spread = np.ptp(self._gaussian_service.mode_energies(state))
                worst = max(worst, float(spread), abs(self._gaussian_service.energy(state) - modes * 0.5))
        return CheckResult(
            name="symmetric_transform",
            passed=worst < INVARIANCE_TOLERANCE,
            measured=worst,
            tolerance=INVARIANCE_TOLERANCE,
        )

    def _sweep_scaling(self, energies: List[float]) -> List[Tuple[float, float]]:
        rows = []
        for energy in energies:
            optimal = self._optimum_service.optimal_pair(energy).neg_log_fidelity
            coherent = -math.log(self._fidelity_service.coherent_pair_fidelity(energy))
            rows.append(
                (
                    self._fidelity_service.neg_log_helstrom_error(optimal),
                    self._fidelity_service.neg_log_helstrom_error(coherent),
                )
            )
        return rows
