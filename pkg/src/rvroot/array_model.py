"""Uniform linear array signal model: steering vectors, synthetic snapshots,
sample covariance and the conventional beamformer spectrum.

Angles are in degrees at every public boundary.

Random streams are ``numpy.random.Generator(PCG64)`` seeded from a
``SeedSequence(seed, spawn_key=key)``, so a (seed, key) pair always maps to the
same stream regardless of which process or in what order it is consumed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class UlaConfig:
    elements: int
    spacing_ratio: float = 0.5  # d / lambda

    def __post_init__(self):
        if int(self.elements) != self.elements or self.elements < 3:
            raise ContractViolation(f"elements must be an integer >= 3, got {self.elements}")
        if not 0 < self.spacing_ratio <= 0.5:
            raise ContractViolation(f"spacing_ratio must be in (0, 0.5], got {self.spacing_ratio}")

    @property
    def max_sources(self) -> int:
        # two real dimensions per source
        return (self.elements - 1) // 2


@dataclass(frozen=True)
class Scenario:
    array: UlaConfig
    angles_deg: tuple[float, ...]
    snapshots: int = 200
    noise_power: float = 0.0
    seed: int = 0

    def __post_init__(self):
        angles = tuple(float(a) for a in np.atleast_1d(self.angles_deg))
        object.__setattr__(self, "angles_deg", angles)
        if not angles:
            raise ContractViolation("at least one source angle is required")
        if any(not -90 < a < 90 for a in angles):
            raise ContractViolation(f"angles must lie in (-90, 90) degrees, got {angles}")
        if len(set(angles)) != len(angles):
            raise ContractViolation(f"angles must be pairwise distinct, got {angles}")
        if len(angles) > self.array.max_sources:
            raise ContractViolation(
                f"{len(angles)} sources do not fit a {self.array.elements}-element array "
                f"(at most {self.array.max_sources})"
            )
        if int(self.snapshots) != self.snapshots or self.snapshots < 1:
            raise ContractViolation(f"snapshots must be a positive integer, got {self.snapshots}")
        if not self.noise_power >= 0:
            raise ContractViolation(f"noise_power must be >= 0, got {self.noise_power}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ContractViolation(f"seed must be a non-negative integer, got {self.seed}")

    @property
    def num_sources(self) -> int:
        return len(self.angles_deg)


class SnapshotData(NamedTuple):
    clean: np.ndarray
    noise: np.ndarray
    observed: np.ndarray


def noise_power_from_snr(snr_db: float) -> float:
    """Per-source SNR with unit source power: sigma^2 = 10^(-SNR/10)."""
    if np.isposinf(snr_db):
        return 0.0
    return float(10.0 ** (-snr_db / 10.0))


def snr_from_noise_power(noise_power: float) -> float:
    if noise_power == 0:
        return float("inf")
    return float(-10.0 * np.log10(noise_power))


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def steering_vector(array: UlaConfig, theta_deg: float) -> np.ndarray:
    if not abs(theta_deg) < 90:
        raise ContractViolation(f"|theta| must be < 90 degrees, got {theta_deg}")
    phase = 2 * np.pi * array.spacing_ratio * np.sin(np.deg2rad(theta_deg))
    return np.exp(-1j * phase * np.arange(array.elements))


def steering_matrix(array: UlaConfig, angles_deg: Sequence[float]) -> np.ndarray:
    return np.stack([steering_vector(array, a) for a in angles_deg], axis=1)


def _circular_gaussian(rng, rows, cols, power):
    # snapshot-major: the first m columns do not depend on cols
    z = rng.standard_normal((cols, rows, 2))
    return (z[..., 0] + 1j * z[..., 1]).T * np.sqrt(power / 2.0)


def generate_sources(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Independent unit-power circular Gaussian waveforms, shape (K, M)."""
    return _circular_gaussian(rng, scenario.num_sources, scenario.snapshots, 1.0)


def generate_noise(array: UlaConfig, snapshots: int, noise_power: float,
                   rng: np.random.Generator) -> np.ndarray:
    """White circular Gaussian noise; real and imaginary parts each have variance noise_power/2."""
    if noise_power < 0:
        raise ContractViolation("noise_power must be >= 0")
    return _circular_gaussian(rng, array.elements, snapshots, noise_power)


def synthesize(scenario: Scenario, rng: np.random.Generator) -> SnapshotData:
    """Draw one realization of X~ = A(theta) S + N.

    Sources and noise come from two child streams of ``rng`` so that changing
    the noise power or the snapshot count leaves the other draw untouched
    (common random numbers across a sweep).
    """
    src_rng, noise_rng = rng.spawn(2)
    s = generate_sources(scenario, src_rng)
    clean = steering_matrix(scenario.array, scenario.angles_deg) @ s
    noise = generate_noise(scenario.array, scenario.snapshots, scenario.noise_power, noise_rng)
    return SnapshotData(clean, noise, clean + noise)


def sample_covariance(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ContractViolation(f"expected an L x M matrix with M >= 1, got shape {x.shape}")
    r = x @ x.conj().T / x.shape[1]
    return (r + r.conj().T) / 2


def model_covariance(array: UlaConfig, angles_deg: Sequence[float], noise_power: float = 0.0) -> np.ndarray:
    """Ensemble covariance A A^H + sigma^2 I for unit-power uncorrelated sources."""
    a = steering_matrix(array, angles_deg)
    return a @ a.conj().T + noise_power * np.eye(array.elements)


def cbf_spectrum(r: np.ndarray, array: UlaConfig, theta_deg: float) -> float:
    a = steering_vector(array, theta_deg)
    return float(np.abs(a.conj() @ r @ a) ** 2)
