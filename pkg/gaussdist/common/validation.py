import math
import numbers

from gaussdist.common.exceptions import InvalidInputError


def require_finite(name: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise InvalidInputError(f"{name} must be finite, got {value}")


def require_positive_energy(energy: float) -> None:
    require_finite("energy", energy)
    if energy <= 0:
        raise InvalidInputError(
            f"energy must be > 0, got {energy}; the only energy-0 Gaussian state is the vacuum"
        )


def require_modes(modes: int) -> None:
    if isinstance(modes, bool) or not isinstance(modes, numbers.Integral) or modes < 1:
        raise InvalidInputError(f"mode count must be a positive integer, got {modes!r}")

