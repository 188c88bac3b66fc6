"""
Random road profiles from an inverse-square displacement spectrum.

A profile is a finite sum of sines whose amplitudes follow the roughness
class and whose phases are drawn from a seeded generator:

    r(t) = sum_i A_i sin(omega_i * t * v - phi_i)
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import signal

from exceptions import DomainError
from schemas import RoadClass

logger = logging.getLogger(__name__)

OMEGA_0 = 1.0
OMEGA_FIRST = 0.02 * math.pi
OMEGA_LAST = 6.0 * math.pi


@dataclass(frozen=True)
class FrequencyGrid:
    """Linearly spaced spatial frequencies (rad per unit distance)."""
    omega: np.ndarray
    delta_omega: float
    omega0: float = OMEGA_0

    @property
    def size(self) -> int:
        return int(self.omega.shape[0])


@dataclass(frozen=True)
class RoadProfile:
    """Spectral road description, evaluable at any time."""
    road_class: RoadClass
    amplitudes: np.ndarray
    grid: FrequencyGrid
    phases: np.ndarray
    velocity: float
    seed: int


def roughness_coefficient(road_class: RoadClass) -> float:
    """Reference spectral density 2^k * 1e-6 of a road class."""
    return float(2 ** RoadClass(road_class).k) * 1e-6


def psd(phi0: float, omega_i: float) -> float:
    """Displacement spectral density at `omega_i`, falling off with the inverse square."""
    if not omega_i > 0:
        raise DomainError(f"Spatial frequency must be positive, got {omega_i}")
    return phi0 * (omega_i / OMEGA_0) ** -2


def amplitude(phi_i: float, delta_omega: float) -> float:
    """Sine amplitude sqrt(phi_i * delta_omega / pi)."""
    if phi_i < 0:
        raise DomainError(f"Spectral density must be non-negative, got {phi_i}")
    if not delta_omega > 0:
        raise DomainError(f"Frequency spacing must be positive, got {delta_omega}")
    return math.sqrt(phi_i * delta_omega / math.pi)


def build_grid(M: int) -> FrequencyGrid:
    """
    M frequencies from 0.02*pi to 6*pi, equally spaced.

    The last entry is set to 6*pi exactly instead of accumulating the spacing.
    """
    if M < 2:
        raise DomainError(f"Need at least 2 frequencies, got {M}")
    delta = (OMEGA_LAST - OMEGA_FIRST) / (M - 1)
    omega = OMEGA_FIRST + np.arange(M, dtype=np.float64) * delta
    omega[-1] = OMEGA_LAST
    return FrequencyGrid(omega=omega, delta_omega=delta)


def derive_seed(*keys: int) -> int:
    """Stable 63-bit seed derived from a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def generate_road(road_class: RoadClass, M: int, v: float, seed: int) -> RoadProfile:
    """
    Draw a road of the given class.

    Amplitudes depend only on (class, M); the seed only moves the phases.
    """
    if not v > 0:
        raise DomainError(f"Velocity must be positive, got {v}")
    road_class = RoadClass(road_class)
    grid = build_grid(M)
    phi0 = roughness_coefficient(road_class)
    amplitudes = np.array([amplitude(psd(phi0, w), grid.delta_omega) for w in grid.omega])
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=M)
    logger.debug(f"Generated class {road_class.value} road: M={M}, v={v}, seed={seed}")
    return RoadProfile(
        road_class=road_class, amplitudes=amplitudes, grid=grid, phases=phases, velocity=float(v), seed=int(seed)
    )


def evaluate_road(profile: RoadProfile, t: float) -> float:
    """Road displacement (m) at time t (s)."""
    if t < 0:
        raise DomainError(f"Time must be non-negative, got {t}")
    args = profile.grid.omega * (t * profile.velocity) - profile.phases
    return float(np.dot(profile.amplitudes, np.sin(args)))


def sample_road(profile: RoadProfile, times: np.ndarray) -> np.ndarray:
    """Vectorized `evaluate_road` over a time grid."""
    times = np.asarray(times, dtype=np.float64)
    if times.size and times.min() < 0:
        raise DomainError("Times must be non-negative")
    args = np.outer(times * profile.velocity, profile.grid.omega) - profile.phases
    return np.sin(args) @ profile.amplitudes


def periodogram_slope(values: np.ndarray, dt: float, band: Tuple[float, float], nperseg: int = 256) -> float:
    """
    Log-log slope of the averaged periodogram inside `band` (rad/s).

    Welch averaging with segments short enough that every frequency bin
    spans several sine components, so the estimate follows the
    continuous spectrum rather than individual lines.
    """
    freqs, power = signal.welch(values, fs=1.0 / dt, nperseg=nperseg, detrend=False)
    omega = 2.0 * math.pi * freqs
    mask = (omega >= band[0]) & (omega <= band[1]) & (power > 0)
    if mask.sum() < 2:
        raise DomainError("Band holds fewer than two periodogram bins")
    slope, _ = np.polyfit(np.log(omega[mask]), np.log(power[mask]), 1)
    return float(slope)
