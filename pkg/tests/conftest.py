import numpy as np
import pytest

from gaussdist.config.settings import Settings
from gaussdist.fidelity.fidelity_service import FidelityService
from gaussdist.fock.fock_service import FockService
from gaussdist.multimode.multimode_service import MultimodeService
from gaussdist.optimum.numeric_minimizer import NumericMinimizer
from gaussdist.optimum.optimum_service import OptimumService
from gaussdist.states.gaussian_service import GaussianService
from gaussdist.sweeps.sweep_repository import SweepRepository
from gaussdist.sweeps.sweep_service import SweepService
from gaussdist.verification.verification_service import VerificationService


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture
def gaussian_service():
    return GaussianService()


@pytest.fixture
def fidelity_service():
    return FidelityService()


@pytest.fixture
def optimum_service(fidelity_service):
    return OptimumService(fidelity_service)


@pytest.fixture
def numeric_minimizer(fidelity_service, optimum_service, settings):
    return NumericMinimizer(fidelity_service, optimum_service, settings)


@pytest.fixture
def multimode_service(gaussian_service, fidelity_service, optimum_service):
    return MultimodeService(gaussian_service, fidelity_service, optimum_service)


@pytest.fixture
def fock_service(settings):
    return FockService(settings)


@pytest.fixture
def sweep_service(
    fidelity_service, optimum_service, numeric_minimizer, multimode_service, fock_service, settings
):
    return SweepService(
        fidelity_service=fidelity_service,
        optimum_service=optimum_service,
        numeric_minimizer=numeric_minimizer,
        multimode_service=multimode_service,
        fock_service=fock_service,
        settings=settings,
    )


@pytest.fixture
def sweep_repository():
    return SweepRepository()


@pytest.fixture
def verification_service(
    gaussian_service,
    fidelity_service,
    optimum_service,
    numeric_minimizer,
    multimode_service,
    fock_service,
    settings,
):
    return VerificationService(
        gaussian_service=gaussian_service,
        fidelity_service=fidelity_service,
        optimum_service=optimum_service,
        numeric_minimizer=numeric_minimizer,
        multimode_service=multimode_service,
        fock_service=fock_service,
        settings=settings,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
