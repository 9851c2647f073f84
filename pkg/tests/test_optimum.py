import math

import numpy as np
import pytest

from gaussdist.common.exceptions import InvalidInputError
from gaussdist.fidelity.fidelity_service import max_squeeze_parameter
from gaussdist.optimum.optimum_models import CriticalPointKind
from gaussdist.states.gaussian_models import PureStateParams


@pytest.mark.parametrize("energy", [0.1, 0.5, 1.0, 2.0, 5.0])
def test_optimal_pair_closed_form(optimum_service, energy):
    pair = optimum_service.optimal_pair(energy)

    assert pair.d_c == 2 * energy + 1
    assert pair.neg_log_fidelity == pytest.approx(4 * energy**2 + 4 * energy, rel=1e-12)
    assert pair.state1.displacement == -pair.state2.displacement
    assert pair.state1.energy == pytest.approx(energy, rel=1e-12)


def test_optimal_pair_at_unit_energy(optimum_service):
    pair = optimum_service.optimal_pair(1.0)

    assert pair.r == pytest.approx(math.sqrt(2 / 3), rel=1e-14)
    assert pair.fidelity == pytest.approx(math.exp(-8), rel=1e-12)
    assert pair.state1.squeeze_magnitude == pytest.approx(0.5 * math.log(3))


def test_optimal_pair_matches_phase_space_fidelity(optimum_service, fidelity_service, gaussian_service):
    pair = optimum_service.optimal_pair(0.7)
    direct = fidelity_service.pure_fidelity(
        gaussian_service.state_from_params(pair.state1),
        gaussian_service.state_from_params(pair.state2),
    )

    assert direct == pytest.approx(pair.fidelity, rel=1e-12)


def test_small_energy_fidelity_tends_to_one(optimum_service):
    assert optimum_service.optimal_pair(1e-9).fidelity == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("energy", [0.0, -1.0, math.inf, math.nan])
def test_optimal_pair_rejects_bad_energy(optimum_service, energy):
    with pytest.raises(InvalidInputError):
        optimum_service.optimal_pair(energy)


def test_displacement_ratio_tends_to_four(optimum_service):
    assert optimum_service.displacement_ratio(1000.0) == pytest.approx(4.0, rel=1e-6)
    assert optimum_service.displacement_ratio(1.0) == pytest.approx(4.5)


def test_squeeze_for_displacement(optimum_service):
    assert optimum_service.squeeze_for_displacement(0.0, 0.5) == pytest.approx(
        max_squeeze_parameter(0.5)
    )
    assert optimum_service.squeeze_for_displacement(1.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        optimum_service.squeeze_for_displacement(1.5, 1.0)


@pytest.mark.parametrize("energy", [0.1, 0.5, 2.0])
def test_equal_d_fidelity(optimum_service, energy):
    assert optimum_service.equal_d_fidelity(1.0, energy) == pytest.approx(math.exp(-4 * energy))
    assert optimum_service.equal_d_fidelity(2 * energy + 1, energy) == pytest.approx(
        optimum_service.closed_form_fidelity(energy), rel=1e-12
    )


def test_equal_d_fidelity_is_log_convex(optimum_service):
    energy = 0.8
    ds = np.linspace(1.0, max_squeeze_parameter(energy), 41)
    logs = np.log([optimum_service.equal_d_fidelity(d, energy) for d in ds])
    step = ds[1] - ds[0]
    second = (logs[2:] - 2 * logs[1:-1] + logs[:-2]) / step**2

    assert np.allclose(second, 2.0, rtol=1e-6)


def test_equal_d_fidelity_outside_interval(optimum_service):
    with pytest.raises(InvalidInputError):
        optimum_service.equal_d_fidelity(0.5, 1.0)


@pytest.mark.parametrize("energy", [0.1, 0.5, 1.0, 3.0])
def test_optimum_beats_suboptimal_families(optimum_service, fidelity_service, energy):
    optimum = optimum_service.closed_form_fidelity(energy)
    upper = max_squeeze_parameter(energy)
    slack = 1 + 1e-12

    for d in np.linspace(1.0, upper, 50):
        assert optimum <= optimum_service.equal_d_fidelity(d, energy) * slack
    for b in np.linspace(1.0, upper, 50):
        assert optimum <= fidelity_service.opposite_phase_squeeze_fidelity(b, energy) * slack
    assert optimum <= optimum_service.centered_minimum(energy).fidelity


@pytest.mark.parametrize("energy", [0.3, 1.0, 4.0])
def test_relaxed_fidelity_at_symmetric_point(optimum_service, energy):
    d_c = 2 * energy + 1

    assert optimum_service.relaxed_fidelity(d_c, d_c, energy) == pytest.approx(
        optimum_service.closed_form_fidelity(energy), rel=1e-12
    )
    assert np.allclose(optimum_service.relaxed_log_gradient(d_c, d_c, energy), 0.0, atol=1e-12)
    assert optimum_service.quartic_g(d_c, d_c, energy) == pytest.approx(
        0.0, abs=1e-9 * optimum_service.quartic_scale(d_c, d_c, energy)
    )


def test_relaxed_log_gradient_matches_finite_differences(optimum_service):
    energy, d1, d2, h = 0.6, 1.7, 2.9, 1e-6
    gradient = optimum_service.relaxed_log_gradient(d1, d2, energy)
    numeric = [
        (
            optimum_service.relaxed_log_fidelity(d1 + h, d2, energy)
            - optimum_service.relaxed_log_fidelity(d1 - h, d2, energy)
        )
        / (2 * h),
        (
            optimum_service.relaxed_log_fidelity(d1, d2 + h, energy)
            - optimum_service.relaxed_log_fidelity(d1, d2 - h, energy)
        )
        / (2 * h),
    ]

    assert np.allclose(gradient, numeric, rtol=1e-6, atol=1e-8)


def test_relaxed_fidelity_matches_squeezed_pair(optimum_service, fidelity_service):
    energy, d1, d2 = 0.9, 2.0, 3.5
    cost = sum((d - 1) ** 2 / (4 * d) for d in (d1, d2))
    r = math.sqrt(energy - 0.5 * cost)

    assert optimum_service.relaxed_fidelity(d1, d2, energy) == pytest.approx(
        fidelity_service.squeezed_pair_fidelity(-r, r, d1, d2), rel=1e-12
    )


def test_quartic_vacuum_limit(optimum_service):
    assert optimum_service.quartic_g(1.0, 1.0, 0.0) == 0.0


def test_quartic_vanishes_at_half_energy_point(optimum_service):
    assert optimum_service.quartic_g(2.0, 2.0, 0.5) == 0.0


@pytest.mark.parametrize("energy", [0.1, 1.0, 5.0])
def test_quartic_vanishes_at_optimal_squeezing(optimum_service, energy):
    d = 2 * energy + 1

    assert abs(optimum_service.quartic_g(d, d, energy)) < 1e-12 * optimum_service.quartic_scale(
        d, d, energy
    )


def test_polar_curves_meet_at_quarter_turn(optimum_service):
    energy = 0.5
    r1, r2 = optimum_service.polar_curves(energy, math.pi / 4)

    assert r1 == pytest.approx(r2, rel=1e-12)
    assert r1 == pytest.approx(math.sqrt(2) * (2 * energy + 1), rel=1e-12)


def test_polar_curves_reject_angle_outside_quadrant(optimum_service):
    with pytest.raises(InvalidInputError):
        optimum_service.polar_curves(0.5, 0.0)
    with pytest.raises(InvalidInputError):
        optimum_service.polar_curves(0.5, math.pi / 2)


def test_polar_curves_approach_large_energy_limit(optimum_service):
    energy, theta = 1e6, 0.6
    r1, r2 = optimum_service.polar_curves(energy, theta)
    l1, l2 = optimum_service.polar_curve_limit(energy, theta)

    assert r1 == pytest.approx(l1, rel=1e-4)
    assert r2 == pytest.approx(l2, rel=1e-4)


def test_find_intersections_at_half_energy(optimum_service):
    report = optimum_service.find_intersections(0.5)

    assert len(report.intersections) == 2
    assert all(0 < x.theta <= math.pi / 4 for x in report.intersections)
    assert all(r < 1e-10 for r in report.residuals)
    for x in report.intersections:
        assert max(x.quartic_residuals) < 1e-6 * x.quartic_scale


def test_symmetric_intersection_is_feasible_minimum(optimum_service):
    report = optimum_service.find_intersections(0.5)
    symmetric = next(x for x in report.intersections if math.isclose(x.theta, math.pi / 4))

    assert symmetric.d1 == pytest.approx(2.0, rel=1e-10)
    assert symmetric.kind is CriticalPointKind.MINIMUM
    assert symmetric.feasible


@pytest.mark.parametrize("energy", [0.1, 0.5, 1.0, 5.0])
def test_secondary_intersection_stays_away_from_quarter_turn(optimum_service, energy):
    secondary = optimum_service.find_intersections(energy).secondary

    assert secondary is not None
    assert not math.isclose(secondary.theta, math.pi / 4, rel_tol=1e-6)


@pytest.mark.parametrize("energy", [20.0, 100.0, 1000.0])
def test_secondary_intersection_found_at_large_energy(optimum_service, energy):
    report = optimum_service.find_intersections(energy)
    secondary = report.secondary

    assert len(report.intersections) == 2
    assert report.r2_domain_start <= secondary.theta < 1e-3
    assert secondary.residual < 1e-10
    assert max(secondary.quartic_residuals) < 1e-6 * secondary.quartic_scale


def test_find_intersections_rejects_coarse_grid(optimum_service):
    with pytest.raises(InvalidInputError):
        optimum_service.find_intersections(0.5, grid_points=8)


@pytest.mark.parametrize("energy", [0.5, 1.0, 2.0])
def test_hessian_check(optimum_service, energy):
    determinant = optimum_service.hessian_check(energy)

    assert determinant > 0
    assert determinant == pytest.approx(optimum_service.hessian_closed_form(energy), rel=1e-5)


@pytest.mark.parametrize("energy", [0.5, 1.0, 5.0])
def test_centered_minimum(optimum_service, energy):
    minimum = optimum_service.centered_minimum(energy)

    assert minimum.w1 == pytest.approx(-math.asinh(math.sqrt(energy)), abs=1e-6)
    assert minimum.fidelity == pytest.approx(1 / (2 * energy + 1), abs=1e-8)


def test_centered_minimum_matches_phase_space_fidelity(
    optimum_service, fidelity_service, gaussian_service
):
    minimum = optimum_service.centered_minimum(1.0)
    direct = fidelity_service.pure_fidelity(
        gaussian_service.state_from_params(PureStateParams.centered(minimum.w1)),
        gaussian_service.state_from_params(PureStateParams.centered(minimum.w2)),
    )

    assert direct == pytest.approx(minimum.fidelity, rel=1e-12)
