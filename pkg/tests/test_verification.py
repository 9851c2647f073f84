import pickle

import numpy as np
import pytest

from gaussdist.common.exceptions import InvalidInputError
from gaussdist.verification.verification_models import (
    CheckResult,
    VerificationFailure,
    VerificationLevel,
    VerificationPlan,
    VerificationReport,
)
from gaussdist.verification.verification_service import random_params

FAST = VerificationPlan.for_level(VerificationLevel.FAST)


def test_plans_per_level():
    full = VerificationPlan.for_level(VerificationLevel.FULL, seed=4)

    assert FAST.samples == 50
    assert FAST.energies == (0.1, 0.5, 1.0)
    assert full.samples == 500
    assert full.energies == (0.1, 0.5, 1.0, 2.0, 5.0)
    assert full.seed == 4


def test_random_params_respect_energy_cap(rng):
    energies = [random_params(rng, 2.0).energy for _ in range(200)]

    assert max(energies) < 2.0 + 1e-12
    assert min(energies) >= 0.0


@pytest.mark.parametrize(
    "name",
    [
        "optimal_pair_oracle",
        "polar_intersections",
        "hessian_determinant",
        "centered_minimum",
        "isocovariant_optimum",
        "scaling_hierarchy",
        "fidelity_invariance",
        "isocovariant_bound",
        "symmetric_transform",
    ],
)
def test_single_check_passes(verification_service, name):
    report = verification_service.verify(FAST, only=[name])

    assert [check.name for check in report.checks] == [name]
    assert report.passed, report.checks[0]


def test_oracle_equivalence_check(verification_service):
    plan = FAST.model_copy(update={"samples": 10})
    report = verification_service.verify(plan, only=["oracle_equivalence"])

    assert report.passed, report.checks[0]
    assert report.checks[0].measured < 1e-8


def test_numeric_optimum_check(verification_service, settings):
    settings.multistart_count = 8
    plan = FAST.model_copy(update={"energies": (0.5,)})

    assert verification_service.verify(plan, only=["numeric_optimum"]).passed


def test_tampered_closed_form_is_detected(verification_service, optimum_service, settings, monkeypatch):
    settings.multistart_count = 4
    monkeypatch.setattr(optimum_service, "closed_form_neg_log_fidelity", lambda energy: 0.7)
    plan = FAST.model_copy(update={"energies": (0.5,)})

    report = verification_service.verify(plan, only=["numeric_optimum"])

    assert not report.passed
    assert report.failed == ["numeric_optimum"]
    with pytest.raises(VerificationFailure) as error:
        report.raise_for_failures()
    assert error.value.failed == ["numeric_optimum"]


def test_raising_check_is_reported_as_failure(verification_service, optimum_service, monkeypatch):
    def broken(energy):
        raise RuntimeError("boom")

    monkeypatch.setattr(optimum_service, "hessian_check", broken)

    report = verification_service.verify(FAST, only=["hessian_determinant"])

    assert not report.passed
    assert "RuntimeError: boom" in report.checks[0].detail


def test_unknown_check_rejected(verification_service):
    with pytest.raises(InvalidInputError):
        verification_service.verify(FAST, only=["no_such_check"])


def test_check_names_are_registered_in_order(verification_service):
    names = verification_service.check_names

    assert names[0] == "numeric_optimum"
    assert len(names) == len(set(names)) == 12


def test_report_properties():
    report = VerificationReport(
        plan=FAST,
        checks=[
            CheckResult(name="a", passed=True, measured=0.0, tolerance=1.0),
            CheckResult(name="b", passed=False, measured=2.0, tolerance=1.0),
        ],
    )

    assert not report.passed
    assert report.failed == ["b"]


def test_failure_survives_pickling():
    error = pickle.loads(pickle.dumps(VerificationFailure(["a", "b"])))

    assert error.failed == ["a", "b"]


@pytest.mark.slow
def test_fast_level_passes_end_to_end(verification_service):
    report = verification_service.verify(FAST)

    assert report.passed, report.failed
    assert np.isfinite([c.measured for c in report.checks if c.measured is not None]).all()
