import logging
import math
from typing import List, Optional, Tuple

import mpmath as mp
import numpy as np
from scipy.optimize import brentq

from gaussdist.common.exceptions import InvalidInputError
from gaussdist.common.validation import require_finite, require_positive_energy
from gaussdist.fidelity.fidelity_service import FidelityService, max_squeeze_parameter
from gaussdist.optimum.optimum_models import (
    CenteredMinimum,
    CriticalPointKind,
    OptimalPair,
    PolarIntersection,
    PolarSolveReport,
)
from gaussdist.states.gaussian_models import PureStateParams

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 64
BISECTION_STEPS = 400
INTERSECTION_RESIDUAL = 1e-10
HESSIAN_RELATIVE_STEP = 1e-4
LOG_STEP = 1e-4


class OptimumService:
    """Closed forms and critical-point analysis for single-mode pairs of energy E."""

    def __init__(self, fidelity_service: FidelityService):
        self._fidelity_service = fidelity_service

    def closed_form_neg_log_fidelity(self, energy: float) -> float:
        return 4 * energy * energy + 4 * energy

    def closed_form_fidelity(self, energy: float) -> float:
        return math.exp(-self.closed_form_neg_log_fidelity(energy))

    def optimal_pair(self, energy: float) -> OptimalPair:
        require_positive_energy(energy)
        d_c = 2 * energy + 1
        r = math.sqrt((energy * energy + energy) / d_c)
        magnitude = 0.5 * math.log(d_c)

        neg_log_fidelity = self._fidelity_service.squeezed_pair_neg_log_fidelity(
            -r, r, d_c, d_c
        )
        fidelity = math.exp(-neg_log_fidelity)

        return OptimalPair(
            energy=energy,
            d_c=d_c,
            r=r,
            state1=PureStateParams(displacement=complex(-r), squeeze_magnitude=magnitude),
            state2=PureStateParams(displacement=complex(r), squeeze_magnitude=magnitude),
            neg_log_fidelity=neg_log_fidelity,
            fidelity=fidelity,
            p_err=self._fidelity_service.helstrom_error(fidelity),
        )

    def displacement_ratio(self, energy: float) -> float:
        """d_c / r^2 for the optimal pair; tends to 4 for large E."""
        pair = self.optimal_pair(energy)
        return pair.d_c / pair.r**2

    def squeeze_for_displacement(self, r: float, energy: float) -> float:
        """d = e^{2|z|} of the state with displacement r and energy E."""
        require_finite("displacement and energy", r, energy)
        budget = energy - r * r
        if budget < 0:
            raise InvalidInputError(f"|r|={abs(r)} exceeds sqrt(E)={math.sqrt(max(energy, 0))}")
        return 2 * budget + 1 + 2 * math.sqrt(budget * budget + budget)

    def equal_d_fidelity(self, d: float, energy: float) -> float:
        require_finite("d and energy", d, energy)
        if energy < 0:
            raise InvalidInputError(f"energy must be >= 0, got {energy}")
        upper = max_squeeze_parameter(energy)
        if not 1.0 <= d <= upper * (1 + 1e-12):
            raise InvalidInputError(f"d={d} outside the feasible interval [1, {upper}]")
        return math.exp(d * d - (4 * energy + 2) * d + 1)

    def relaxed_log_fidelity(self, d1: float, d2: float, energy: float) -> float:
        """log of (2 sqrt(d1 d2)/(d1+d2)) exp(-(8 d1 d2/(d1+d2)) (E - f/2))."""
        total = d1 + d2
        budget = energy - 0.5 * self._squeeze_cost(d1, d2)
        return (
            math.log(2.0)
            + 0.5 * math.log(d1)
            + 0.5 * math.log(d2)
            - math.log(total)
            - 8 * d1 * d2 / total * budget
        )

    def relaxed_fidelity(self, d1: float, d2: float, energy: float) -> float:
        return math.exp(self.relaxed_log_fidelity(d1, d2, energy))

    def relaxed_log_gradient(self, d1: float, d2: float, energy: float) -> np.ndarray:
        total = d1 + d2
        weight = 8 * d1 * d2 / total
        budget = energy - 0.5 * self._squeeze_cost(d1, d2)

        def partial(own: float, other: float) -> float:
            weight_slope = 8 * other * other / total**2
            budget_slope = -(own * own - 1) / (8 * own * own)
            return 0.5 / own - 1 / total - (weight_slope * budget + weight * budget_slope)

        return np.array([partial(d1, d2), partial(d2, d1)])

    def quartic_g(self, d1: float, d2: float, energy: float) -> float:
        return sum(self._quartic_terms(d1, d2, energy))

    def quartic_scale(self, d1: float, d2: float, energy: float) -> float:
        return max(
            1.0,
            sum(abs(t) for t in self._quartic_terms(d1, d2, energy)),
            sum(abs(t) for t in self._quartic_terms(d2, d1, energy)),
        )

    def polar_curves(
        self, energy: float, theta: float
    ) -> Tuple[Optional[float], Optional[float]]:
        """(R1, R2) at angle theta; None where a curve is undefined."""
        require_finite("energy and angle", energy, theta)
        if not 0 < theta < math.pi / 2:
            raise InvalidInputError(f"theta must lie in (0, pi/2), got {theta}")
        a, rad1, rad2, k, s, c, s2 = self._polar_terms(energy, theta)
        if a <= 0:
            return None, None
        r1 = (k * s * s2 + 0.5 * math.sqrt(rad1)) / a if rad1 >= 0 else None
        r2 = (k * c * s2 + 0.5 * math.sqrt(rad2)) / a if rad2 >= 0 else None
        return r1, r2

    def polar_curve_limit(self, energy: float, theta: float) -> Tuple[float, float]:
        """Large-E asymptotes of R1 and R2."""
        s2 = math.sin(2 * theta)
        a = s2 + s2 * s2
        return (
            8 * energy * math.sin(theta) * s2 / a,
            8 * energy * math.cos(theta) * s2 / a,
        )

    def find_intersections(
        self, energy: float, grid_points: int = 2048
    ) -> PolarSolveReport:
        """Angles in (0, pi/4] where R1 = R2.

        The second intersection lies just past the root of the R2 radicand and
        approaches it like 1/(4E+2)^4 as E grows, so the scan and the bisection
        run in mpmath with precision scaled to E.
        """
        require_positive_energy(energy)
        if grid_points < MIN_GRID_POINTS:
            raise InvalidInputError(
                f"grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}"
            )

        grid = math.pi / 4 * np.arange(1, grid_points) / grid_points
        with mp.workdps(25 + 4 * math.ceil(math.log10(4 * energy + 2))):
            domain_start = self._r2_domain_start(energy)

            def gap(theta):
                r1, r2 = self._precise_curves(energy, theta)
                return r1 - r2

            samples = [domain_start] + [mp.mpf(float(t)) for t in grid if t > domain_start]
            values = [gap(t) for t in samples]
            roots = []
            for (left, f_left), (right, f_right) in zip(
                zip(samples, values), zip(samples[1:], values[1:])
            ):
                if f_left == 0:
                    roots.append(left)
                elif f_left * f_right < 0:
                    roots.append(
                        mp.findroot(
                            gap,
                            (left, right),
                            solver="bisect",
                            maxsteps=BISECTION_STEPS,
                            verify=False,
                        )
                    )
            roots.append(mp.pi / 4)
            described = [self._describe_intersection(energy, theta) for theta in roots]

        intersections = []
        for intersection in described:
            if intersection.residual < INTERSECTION_RESIDUAL:
                intersections.append(intersection)
            else:
                logger.warning(
                    f"Dropping polar intersection at theta={intersection.theta} for E={energy}: "
                    f"residual {intersection.residual:.3e}"
                )
        if len(intersections) != 2:
            logger.warning(
                f"Expected two polar intersections in (0, pi/4] for E={energy}, "
                f"found {len(intersections)}"
            )

        return PolarSolveReport(
            energy=energy,
            grid_points=grid_points,
            r2_domain_start=float(domain_start),
            intersections=intersections,
        )

    def classify_critical_point(
        self, energy: float, d1: float, d2: float
    ) -> Tuple[CriticalPointKind, bool]:
        """Kind of stationary point of the relaxed fidelity and whether it is feasible.

        The Hessian is taken in (log d1, log d2); at a stationary point it has
        the same inertia as in (d1, d2) and stays well scaled when d1 >> d2.
        """
        hessian = self._finite_difference_hessian(
            lambda u, v: self.relaxed_log_fidelity(math.exp(u), math.exp(v), energy),
            math.log(d1),
            math.log(d2),
            LOG_STEP,
            LOG_STEP,
        )
        eigenvalues = np.linalg.eigvalsh(hessian)
        tolerance = 1e-6 * max(1.0, float(np.max(np.abs(eigenvalues))))
        if np.any(np.abs(eigenvalues) <= tolerance):
            kind = CriticalPointKind.DEGENERATE
        elif np.all(eigenvalues > 0):
            kind = CriticalPointKind.MINIMUM
        elif np.all(eigenvalues < 0):
            kind = CriticalPointKind.MAXIMUM
        else:
            kind = CriticalPointKind.SADDLE
        feasible = energy - 0.5 * self._squeeze_cost(d1, d2) >= 0
        return kind, feasible

    def hessian_check(self, energy: float) -> float:
        """Determinant of the finite-difference Hessian of the relaxed fidelity at d1=d2=2E+1."""
        require_positive_energy(energy)
        d_c = 2 * energy + 1
        hessian = self._finite_difference_hessian(
            lambda x, y: self.relaxed_fidelity(x, y, energy), d_c, d_c,
            HESSIAN_RELATIVE_STEP * d_c,
            HESSIAN_RELATIVE_STEP * d_c,
        )
        determinant = float(np.linalg.det(hessian))
        expected = self.hessian_closed_form(energy)
        logger.debug(
            f"Hessian determinant at E={energy}: {determinant!r} (closed form {expected!r})"
        )
        return determinant

    def hessian_closed_form(self, energy: float) -> float:
        e2 = energy * energy
        return (
            math.exp(-8 * e2 - 8 * energy)
            * (8 * e2 + 8 * energy + 1)
            / (2 * (2 * energy + 1) ** 2)
        )

    def centered_minimum(self, energy: float) -> CenteredMinimum:
        """Least fidelity of squeezed vacua S(w1)|0>, S(w2)|0> sharing total energy 2E."""
        require_positive_energy(energy)
        w_max = math.asinh(math.sqrt(2 * energy))

        def partner(w1: float) -> float:
            return math.asinh(math.sqrt(max(0.0, 2 * energy - math.sinh(w1) ** 2)))

        def separation_slope(w1: float) -> float:
            remaining = 2 * energy - math.sinh(w1) ** 2
            return (
                -math.sinh(w1)
                * math.cosh(w1)
                / (math.sqrt(remaining) * math.sqrt(1 + remaining))
                - 1
            )

        # the separation w2 - w1 rises from the lower edge to its peak, then falls to w1 = 0
        w1 = brentq(
            separation_slope, -w_max * (1 - 1e-9), 0.0, xtol=1e-15, rtol=4 * np.finfo(float).eps
        )
        w2 = partner(w1)
        return CenteredMinimum(
            energy=energy,
            w1=w1,
            w2=w2,
            fidelity=self._fidelity_service.centered_squeezed_fidelity(w1, w2),
        )

    def _describe_intersection(self, energy: float, theta) -> PolarIntersection:
        r1, r2 = self._precise_curves(energy, theta)
        d1, d2 = r1 * mp.cos(theta), r1 * mp.sin(theta)
        kind, feasible = self.classify_critical_point(energy, float(d1), float(d2))
        return PolarIntersection(
            theta=float(theta),
            radius=float(r1),
            d1=float(d1),
            d2=float(d2),
            residual=float(abs(r1 - r2)),
            quartic_residuals=(
                float(abs(self.quartic_g(d1, d2, energy))),
                float(abs(self.quartic_g(d2, d1, energy))),
            ),
            quartic_scale=float(self.quartic_scale(d1, d2, energy)),
            kind=kind,
            feasible=feasible,
        )

    def _precise_curves(self, energy: float, theta) -> Tuple[mp.mpf, mp.mpf]:
        """R1 and R2 at an mpmath angle, radicands clamped at zero."""
        a, rad1, rad2, k, s, c, s2 = self._polar_terms(energy, theta, mp)
        r1 = (k * s * s2 + mp.sqrt(max(rad1, 0)) / 2) / a
        r2 = (k * c * s2 + mp.sqrt(max(rad2, 0)) / 2) / a
        return r1, r2

    @staticmethod
    def _r2_domain_start(energy: float) -> mp.mpf:
        """Root of the R2 radicand; R2 is undefined at smaller angles."""
        k = 4 * energy + 2

        def reduced(theta):
            # radicand / (4 sin 2theta), negative near 0 and k^2/2 at pi/4
            s2 = mp.sin(2 * theta)
            return k * k * mp.cos(theta) ** 2 * s2 - mp.cos(2 * theta) * (1 + s2)

        return mp.findroot(
            reduced,
            (mp.mpf(1) / (4 * k * k), mp.pi / 4),
            solver="bisect",
            maxsteps=BISECTION_STEPS,
            verify=False,
        )

    @staticmethod
    def _finite_difference_hessian(
        function, x: float, y: float, hx: float, hy: float
    ) -> np.ndarray:
        centre = function(x, y)
        fxx = (function(x + hx, y) - 2 * centre + function(x - hx, y)) / hx**2
        fyy = (function(x, y + hy) - 2 * centre + function(x, y - hy)) / hy**2
        fxy = (
            function(x + hx, y + hy)
            - function(x + hx, y - hy)
            - function(x - hx, y + hy)
            + function(x - hx, y - hy)
        ) / (4 * hx * hy)
        return np.array([[fxx, fxy], [fxy, fyy]])

    @staticmethod
    def _squeeze_cost(d1: float, d2: float) -> float:
        return sum((d - 1) ** 2 / (4 * d) for d in (d1, d2))

    @staticmethod
    def _quartic_terms(d1: float, d2: float, energy: float) -> Tuple[float, ...]:
        return (
            2 * d1 * d2**3,
            2 * d1**3 * d2,
            d2 * d2,
            -d1 * d1,
            -d1 * d2 * d2 * (16 * energy + 8),
            4 * d1 * d1 * d2 * d2,
        )

    @staticmethod
    def _polar_terms(energy: float, theta, lib=math):
        s, c = lib.sin(theta), lib.cos(theta)
        s2 = lib.sin(2 * theta)
        c2 = lib.cos(2 * theta)
        a = s2 + s2 * s2
        k = 4 * energy + 2
        radicand1 = (2 * k) ** 2 * s * s * s2 * s2 + 4 * c2 * a
        radicand2 = (2 * k) ** 2 * c * c * s2 * s2 - 4 * c2 * a
        return a, radicand1, radicand2, k, s, c, s2
