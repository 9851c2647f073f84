"""Phase-space matrices on interleaved (q, p) quadratures.

Everything here works with the form Delta = diag(J, ..., J), J = [[0, 1], [-1, 0]],
so a real matrix S is symplectic when S^T Delta S = Delta.
"""

import math
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.stats import unitary_group

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(modes: int) -> np.ndarray:
    return np.kron(np.eye(modes), _J)


def rotation_block(theta: float) -> np.ndarray:
    """Phase-space action of exp(-i theta a^dagger a) on (q, p)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def rotation_matrix(angles: Sequence[float]) -> np.ndarray:
    return block_diag(*(rotation_block(theta) for theta in angles))


def squeezing_matrix(magnitudes: Sequence[float]) -> np.ndarray:
    """q-squeezing by e^{-r}, p-anti-squeezing by e^{r}, per mode."""
    return block_diag(*(np.diag([math.exp(-r), math.exp(r)]) for r in magnitudes))


def passive_matrix(unitary: np.ndarray) -> np.ndarray:
    """Orthogonal symplectic matrix of the mode transformation a -> U a."""
    unitary = np.asarray(unitary, dtype=complex)
    modes = unitary.shape[0]
    matrix = np.empty((2 * modes, 2 * modes))
    matrix[0::2, 0::2] = unitary.real
    matrix[0::2, 1::2] = -unitary.imag
    matrix[1::2, 0::2] = unitary.imag
    matrix[1::2, 1::2] = unitary.real
    return matrix


def fourier_unitary(modes: int) -> np.ndarray:
    """U_jl = exp(2 pi i j l / M) / sqrt(M) with modes labelled 1..M."""
    labels = np.arange(1, modes + 1)
    return np.exp(2j * math.pi * np.outer(labels, labels) / modes) / math.sqrt(modes)


def random_unitary(rng: np.random.Generator, modes: int) -> np.ndarray:
    if modes == 1:
        return np.array([[np.exp(2j * math.pi * rng.random())]])
    return unitary_group.rvs(modes, random_state=rng)


def random_passive_matrix(rng: np.random.Generator, modes: int) -> np.ndarray:
    return passive_matrix(random_unitary(rng, modes))


def random_symplectic_matrix(
    rng: np.random.Generator, magnitudes: Sequence[float]
) -> np.ndarray:
    """Euler decomposition: passive . squeeze . passive."""
    modes = len(magnitudes)
    return (
        random_passive_matrix(rng, modes)
        @ squeezing_matrix(magnitudes)
        @ random_passive_matrix(rng, modes)
    )
