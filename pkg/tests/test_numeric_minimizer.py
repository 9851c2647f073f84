import math

import numpy as np
import pytest

from gaussdist.common.exceptions import InvalidInputError
from gaussdist.optimum.numeric_minimizer import (
    CoherentPairFamily,
    ConvergenceError,
    FullPairFamily,
    NumericMinimizer,
    relative_gap,
    run_start,
)
from gaussdist.optimum.optimum_models import SearchFamily


@pytest.fixture
def minimizer(fidelity_service, optimum_service, settings):
    settings.multistart_count = 12
    return NumericMinimizer(fidelity_service, optimum_service, settings)


@pytest.mark.parametrize("energy", [0.1, 0.5, 1.0, 2.0, 5.0])
def test_reproduces_closed_form_optimum(minimizer, energy):
    report = minimizer.numeric_minimize(energy, seed=0)

    assert report.relative_error < 1e-6
    assert report.fidelity == pytest.approx(math.exp(-4 * energy**2 - 4 * energy), rel=1e-6)
    assert report.gradient_norm < 1e-8
    assert report.minimum_starts >= 1


def test_optimum_states_saturate_energy(minimizer):
    report = minimizer.numeric_minimize(1.0, seed=3)

    assert report.state1.energy == pytest.approx(1.0, rel=1e-9)
    assert report.state2.energy == pytest.approx(1.0, rel=1e-9)
    assert report.state2.displacement == pytest.approx(-report.state1.displacement, abs=1e-4)


def test_optimum_is_squeezed_along_displacement(minimizer):
    report = minimizer.numeric_minimize(0.5, seed=1)

    assert report.canonical_phases[0] == pytest.approx(0.0, abs=1e-4)
    assert report.canonical_phases[1] == pytest.approx(0.0, abs=1e-4)
    assert report.state1.squeeze_magnitude == pytest.approx(0.5 * math.log(2.0), rel=1e-4)


def test_coherent_family_finds_antipodal_pair(minimizer):
    report = minimizer.numeric_minimize(0.5, seed=0, family=SearchFamily.COHERENT)

    assert report.fidelity == pytest.approx(math.exp(-2.0), rel=1e-8)
    assert report.closed_form_fidelity == pytest.approx(math.exp(-2.0))


def test_same_seed_gives_same_report(minimizer):
    first = minimizer.numeric_minimize(0.5, seed=7)
    second = minimizer.numeric_minimize(0.5, seed=7)

    assert first.parameters == second.parameters
    assert [t.start for t in first.starts] == [t.start for t in second.starts]


def test_rejects_nonpositive_energy(minimizer):
    with pytest.raises(InvalidInputError):
        minimizer.numeric_minimize(0.0)


def test_reports_when_no_start_converges(fidelity_service, optimum_service, settings):
    settings.multistart_count = 2
    settings.gradient_tolerance = 0.0
    minimizer = NumericMinimizer(fidelity_service, optimum_service, settings)

    with pytest.raises(ConvergenceError) as error:
        minimizer.numeric_minimize(0.5)
    assert len(error.value.starts) == 2


@pytest.mark.parametrize(
    "family, x",
    [
        (FullPairFamily(0.8), np.array([0.3, 0.4, 1.1, 0.6, 2.5, -0.7])),
        (CoherentPairFamily(0.8), np.array([0.2, 2.9])),
    ],
)
def test_log_fidelity_gradient_matches_finite_differences(family, x):
    _, gradient = family.log_fidelity(x)
    h = 1e-6
    numeric = []
    for k in range(family.dim):
        step = np.zeros(family.dim)
        step[k] = h
        numeric.append((family.log_fidelity(x + step)[0] - family.log_fidelity(x - step)[0]) / (2 * h))

    assert np.allclose(gradient, numeric, rtol=1e-6, atol=1e-8)


def test_full_family_matches_phase_space_fidelity(fidelity_service, gaussian_service):
    family = FullPairFamily(0.8)
    x = np.array([0.3, 0.4, 1.1, 0.6, 2.5, -0.7])
    p1, p2 = family.to_params(x)
    direct = fidelity_service.neg_log_pure_fidelity(
        gaussian_service.state_from_params(p1), gaussian_service.state_from_params(p2)
    )

    assert -family.log_fidelity(x)[0] == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("energy", [1e-5, 1e-4, 0.5])
def test_few_starts_still_reach_closed_form(fidelity_service, optimum_service, settings, energy):
    settings.multistart_count = 4
    minimizer = NumericMinimizer(fidelity_service, optimum_service, settings)

    report = minimizer.numeric_minimize(energy, seed=0)

    assert report.relative_error < 1e-6
    assert report.neg_log_fidelity == pytest.approx(4 * energy**2 + 4 * energy, rel=1e-6)
    assert all(trace.curvature > 0 for trace in report.starts if trace.local_minimum)


def test_centered_saddle_is_not_a_local_minimum(settings):
    # squeezed vacua with opposite squeeze phases: stationary, but displacing lowers F
    saddle = np.array([math.pi / 2, 0.0, 0.0, math.pi / 2, math.pi, math.pi])

    trace = run_start(FullPairFamily(0.5), 0, saddle, settings.gradient_tolerance)

    assert trace.objective == pytest.approx(-math.log(2.0), rel=1e-9)
    assert trace.converged
    assert trace.curvature < 0
    assert not trace.local_minimum


def test_large_energy_compares_in_log_domain(minimizer):
    report = minimizer.numeric_minimize(14.0, seed=0)

    assert report.fidelity == 0.0
    assert report.closed_form_neg_log_fidelity == pytest.approx(4 * 14.0**2 + 4 * 14.0)
    assert report.relative_error < 1e-6


@pytest.mark.parametrize(
    "neg_log, reference, expected",
    [
        (840.0, 840.0, 0.0),
        (3.0, 3.0 + math.log(2.0), 1.0),
        (1.0, 900.0, math.inf),
    ],
)
def test_relative_gap(neg_log, reference, expected):
    assert relative_gap(neg_log, reference) == pytest.approx(expected)
