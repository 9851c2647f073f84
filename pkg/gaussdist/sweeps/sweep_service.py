import logging
import math
from typing import Callable, Dict, List, Tuple

from joblib import Parallel, delayed

from gaussdist.common.validation import require_modes, require_positive_energy
from gaussdist.config.settings import Settings
from gaussdist.fidelity.fidelity_service import FidelityService
from gaussdist.fock.fock_service import FockService
from gaussdist.multimode.multimode_service import MultimodeService
from gaussdist.optimum.numeric_minimizer import NumericMinimizer
from gaussdist.optimum.optimum_service import OptimumService
from gaussdist.sweeps.sweep_models import Cell, SweepQuantity, SweepSpec, SweepTable

logger = logging.getLogger(__name__)

RowBuilder = Callable[[float, SweepSpec], List[Cell]]

SCALING_COLUMNS = [
    "E",
    "neg_log_F_coherent",
    "neg_log_F_centered",
    "neg_log_F_optimal",
    "neg_log_perr_optimal",
    "neg_log_perr_coherent",
]
POLAR_COLUMNS = ["theta", "R1", "R2", "defined2", "defined1"]
INTERSECTION_COLUMNS = ["theta", "radius", "d1", "d2", "residual", "kind", "feasible"]


def polar_angles(points: int) -> List[float]:
    """Evenly spaced angles strictly inside (0, pi/2) with pi/4 in the middle."""
    step = (math.pi / 2) / (points + 1)
    middle = points // 2
    return [math.pi / 4 + (k - middle) * step for k in range(points)]


class SweepService:
    def __init__(
        self,
        fidelity_service: FidelityService,
        optimum_service: OptimumService,
        numeric_minimizer: NumericMinimizer,
        multimode_service: MultimodeService,
        fock_service: FockService,
        settings: Settings,
    ):
        self._fidelity_service = fidelity_service
        self._optimum_service = optimum_service
        self._numeric_minimizer = numeric_minimizer
        self._multimode_service = multimode_service
        self._fock_service = fock_service
        self._settings = settings
        self._row_builders: Dict[SweepQuantity, Tuple[List[str], RowBuilder]] = {}
        self._register_default_builders()

    def sweep(self, spec: SweepSpec) -> SweepTable:
        columns, builder = self._row_builders[spec.quantity]
        energies = spec.energies
        logger.info(
            f"Sweeping {spec.quantity.value} over {len(energies)} energies "
            f"in [{spec.start}, {spec.stop}]"
        )
        try:
            rows = Parallel(n_jobs=self._settings.n_jobs)(
                delayed(builder)(energy, spec) for energy in energies
            )
        except Exception as e:
            logger.error(f"Sweep of {spec.quantity.value} failed: {e}")
            raise
        return SweepTable(command=f"sweep {spec.quantity.value}", columns=columns, rows=rows)

    def scaling_table(self, energies: List[float]) -> SweepTable:
        rows = [self._scaling_row(energy) for energy in energies]
        return SweepTable(command="scaling", columns=SCALING_COLUMNS, rows=rows)

    def polar_table(self, energy: float, points: int) -> SweepTable:
        require_positive_energy(energy)
        rows: List[List[Cell]] = []
        for theta in polar_angles(points):
            r1, r2 = self._optimum_service.polar_curves(energy, theta)
            rows.append([theta, r1, r2, int(r2 is not None), int(r1 is not None)])

        report = self._optimum_service.find_intersections(energy, self._settings.polar_points)
        footer = [
            [x.theta, x.radius, x.d1, x.d2, x.residual, x.kind.value, x.feasible]
            for x in report.intersections
        ]
        logger.info(
            f"Polar curves at E={energy}: {points} rows, {len(footer)} intersections"
        )
        return SweepTable(
            command="polar",
            columns=POLAR_COLUMNS,
            rows=rows,
            footer=footer,
            footer_columns=INTERSECTION_COLUMNS,
        )

    def optimal_table(self, energy: float, modes: int = 1, seed: int = 0) -> SweepTable:
        """Field/value report of the optimal pair, closed form against numerics."""
        require_positive_energy(energy)
        require_modes(modes)
        pair = self._optimum_service.optimal_pair(modes * energy)
        fields: List[Tuple[str, Cell]] = [
            ("energy", energy),
            ("modes", modes),
            ("d_c", pair.d_c),
            ("r", pair.r),
        ]

        if modes == 1:
            numeric = self._numeric_minimizer.numeric_minimize(energy, seed=seed)
            state1, state2 = self._multimode_service.allin_pair(1, energy)
            neg_log_fidelity = pair.neg_log_fidelity
            numeric_neg_log = numeric.neg_log_fidelity
            fields.append(("minimum_starts", numeric.minimum_starts))
        else:
            optimum = self._multimode_service.spectrum_minimize(modes, energy)
            state1, state2 = optimum.state1, optimum.state2
            neg_log_fidelity = optimum.neg_log_fidelity
            numeric_neg_log = optimum.numeric_neg_log_fidelity
            fields.append(("lambda_1", optimum.lambda_numeric[0]))

        # the energy sits in the last mode, all others are vacuum
        block = slice(2 * modes - 2, 2 * modes)
        mean1, mean2 = state1.mean[block], state2.mean[block]
        cov = state1.cov[block, block]
        fidelity = math.exp(-neg_log_fidelity)
        fields += [
            ("mean1_q", float(mean1[0])),
            ("mean1_p", float(mean1[1])),
            ("mean2_q", float(mean2[0])),
            ("mean2_p", float(mean2[1])),
            ("cov_qq", float(cov[0, 0])),
            ("cov_qp", float(cov[0, 1])),
            ("cov_pp", float(cov[1, 1])),
            ("fidelity", fidelity),
            ("neg_log_fidelity", neg_log_fidelity),
            ("trace_distance", self._fidelity_service.trace_distance(fidelity)),
            ("p_err", self._fidelity_service.helstrom_error(fidelity)),
            ("neg_log_p_err", self._fidelity_service.neg_log_helstrom_error(neg_log_fidelity)),
            ("pure_fidelity", self._fidelity_service.pure_fidelity(state1, state2)),
            ("numeric_neg_log_fidelity", numeric_neg_log),
            ("numeric_fidelity", math.exp(-numeric_neg_log)),
            ("relative_discrepancy", abs(math.expm1(neg_log_fidelity - numeric_neg_log))),
        ]
        return SweepTable(
            command="optimal",
            columns=["field", "value"],
            rows=[[name, value] for name, value in fields],
        )

    def _scaling_row(self, energy: float) -> List[Cell]:
        require_positive_energy(energy)
        coherent = -math.log(self._fidelity_service.coherent_pair_fidelity(energy))
        centered = -math.log(self._optimum_service.centered_minimum(energy).fidelity)
        optimal = self._optimum_service.optimal_pair(energy).neg_log_fidelity
        return [
            energy,
            coherent,
            centered,
            optimal,
            self._fidelity_service.neg_log_helstrom_error(optimal),
            self._fidelity_service.neg_log_helstrom_error(coherent),
        ]

    def _register_default_builders(self) -> None:
        self._row_builders[SweepQuantity.OPTIMAL_FIDELITY] = (
            ["E", "d_c", "r", "fidelity", "neg_log_fidelity", "trace_distance", "p_err"],
            self._optimal_fidelity_row,
        )
        self._row_builders[SweepQuantity.POLAR_CURVES] = (
            ["E", "intersections", "second_theta", "second_radius", "second_kind", "second_feasible"],
            self._polar_row,
        )
        self._row_builders[SweepQuantity.SCALING_COMPARE] = (
            SCALING_COLUMNS,
            lambda energy, spec: self._scaling_row(energy),
        )
        self._row_builders[SweepQuantity.MULTIMODE] = (
            ["E", "M", "neg_log_F_closed", "neg_log_F_numeric", "neg_log_F_allin"],
            self._multimode_row,
        )
        self._row_builders[SweepQuantity.ORACLE_CHECK] = (
            ["E", "oracle_fidelity", "closed_form_fidelity", "abs_error", "grid_minimum", "grid_gap"],
            self._oracle_row,
        )

    def _optimal_fidelity_row(self, energy: float, spec: SweepSpec) -> List[Cell]:
        pair = self._optimum_service.optimal_pair(energy)
        return [
            energy,
            pair.d_c,
            pair.r,
            pair.fidelity,
            pair.neg_log_fidelity,
            self._fidelity_service.trace_distance(pair.fidelity),
            pair.p_err,
        ]

    def _polar_row(self, energy: float, spec: SweepSpec) -> List[Cell]:
        report = self._optimum_service.find_intersections(energy, self._settings.polar_points)
        second = report.secondary
        if second is None:
            return [energy, len(report.intersections), None, None, None, None]
        return [
            energy,
            len(report.intersections),
            second.theta,
            second.radius,
            second.kind.value,
            second.feasible,
        ]

    def _multimode_row(self, energy: float, spec: SweepSpec) -> List[Cell]:
        optimum = self._multimode_service.spectrum_minimize(spec.modes, energy)
        return [
            energy,
            spec.modes,
            optimum.neg_log_fidelity,
            optimum.numeric_neg_log_fidelity,
            self._fidelity_service.neg_log_pure_fidelity(optimum.state1, optimum.state2),
        ]

    def _oracle_row(self, energy: float, spec: SweepSpec) -> List[Cell]:
        pair = self._optimum_service.optimal_pair(energy)
        v1, v2 = self._fock_service.build_pair(pair.state1, pair.state2)
        oracle = self._fock_service.fidelity(v1, v2)
        grid = self._fock_service.grid_bruteforce(
            energy, spec.resolution, full_angles=spec.full_angles
        )
        return [
            energy,
            oracle,
            pair.fidelity,
            abs(oracle - pair.fidelity),
            grid.fidelity,
            grid.fidelity - pair.fidelity,
        ]
