"""
Tests for road profile synthesis.
"""
import math

import numpy as np
import pytest
from scipy import stats

from exceptions import DomainError
from schemas import RoadClass
from services.road_synth import (
    OMEGA_FIRST,
    OMEGA_LAST,
    amplitude,
    build_grid,
    derive_seed,
    evaluate_road,
    generate_road,
    periodogram_slope,
    psd,
    roughness_coefficient,
    sample_road,
)


def test_roughness_coefficient_per_class():
    """Class k exponents 0, 2, 4, 6, 8 give 2^k * 1e-6."""
    assert roughness_coefficient(RoadClass.A) == pytest.approx(1e-6)
    assert roughness_coefficient(RoadClass.C) == pytest.approx(16e-6)
    assert roughness_coefficient(RoadClass.E) == pytest.approx(256e-6)
    assert RoadClass.from_k(6) == RoadClass.D


def test_psd_inverse_square():
    """Doubling the frequency quarters the density."""
    phi0 = roughness_coefficient(RoadClass.B)
    assert psd(phi0, 1.0) == pytest.approx(phi0)
    assert psd(phi0, 2.0) == pytest.approx(phi0 / 4)


def test_psd_rejects_non_positive_frequency():
    """Zero frequency is outside the domain."""
    with pytest.raises(DomainError):
        psd(1e-6, 0.0)


def test_amplitude_formula_and_domain():
    """A = sqrt(phi * delta / pi); negative density rejected."""
    assert amplitude(math.pi, 1.0) == pytest.approx(1.0)
    assert amplitude(0.0, 0.5) == 0.0
    with pytest.raises(DomainError):
        amplitude(-1.0, 0.5)


def test_class_e_amplitude_is_sixteen_times_class_a():
    """Eight roughness steps scale the amplitude by exactly 16."""
    grid = build_grid(100)
    for omega in grid.omega[[0, 50, 99]]:
        a = amplitude(psd(roughness_coefficient(RoadClass.A), omega), grid.delta_omega)
        e = amplitude(psd(roughness_coefficient(RoadClass.E), omega), grid.delta_omega)
        assert e / a == pytest.approx(16.0, rel=1e-12)


def test_build_grid_endpoints_and_spacing():
    """Grid runs from 0.02*pi to exactly 6*pi."""
    grid = build_grid(100)
    assert grid.size == 100
    assert grid.omega[0] == pytest.approx(OMEGA_FIRST)
    assert grid.omega[-1] == OMEGA_LAST
    assert np.allclose(np.diff(grid.omega), grid.delta_omega)


def test_build_grid_needs_two_frequencies():
    """A single frequency has no spacing."""
    with pytest.raises(DomainError):
        build_grid(1)


def test_generate_road_is_deterministic_per_seed():
    """Same seed, same phases; another seed, other phases."""
    a = generate_road(RoadClass.C, 50, 25.0, seed=5)
    b = generate_road(RoadClass.C, 50, 25.0, seed=5)
    c = generate_road(RoadClass.C, 50, 25.0, seed=6)
    assert np.array_equal(a.phases, b.phases)
    assert not np.array_equal(a.phases, c.phases)
    assert np.array_equal(a.amplitudes, c.amplitudes)
    assert np.all((a.phases >= 0) & (a.phases < 2 * math.pi))


def test_phases_are_uniform_on_the_circle():
    """KS test of 2000 phases pooled over 20 road seeds."""
    phases = np.concatenate([generate_road(RoadClass.B, 100, 25.0, seed=s).phases for s in range(20)])
    assert phases.size == 2000
    assert stats.kstest(phases, "uniform", args=(0.0, 2 * math.pi)).pvalue > 0.01


def test_generate_road_rejects_non_positive_velocity():
    """Velocity must be positive."""
    with pytest.raises(DomainError):
        generate_road(RoadClass.A, 10, 0.0, seed=1)


def test_evaluate_road_at_zero_is_sum_of_minus_sin_phases():
    """r(0) = -sum A_i sin(phi_i)."""
    profile = generate_road(RoadClass.D, 30, 25.0, seed=9)
    expected = -np.sum(profile.amplitudes * np.sin(profile.phases))
    assert evaluate_road(profile, 0.0) == pytest.approx(expected, abs=1e-15)


def test_evaluate_road_bounded_by_amplitude_sum():
    """|r(t)| never exceeds the sum of amplitudes."""
    profile = generate_road(RoadClass.E, 40, 25.0, seed=2)
    values = sample_road(profile, np.linspace(0.0, 30.0, 3001))
    assert np.max(np.abs(values)) <= profile.amplitudes.sum() + 1e-12


def test_evaluate_road_rejects_negative_time():
    """Time starts at zero."""
    profile = generate_road(RoadClass.A, 10, 25.0, seed=1)
    with pytest.raises(DomainError):
        evaluate_road(profile, -0.1)


def test_sample_road_matches_pointwise_evaluation():
    """Vectorized sampling agrees with evaluate_road."""
    profile = generate_road(RoadClass.B, 25, 25.0, seed=4)
    times = np.array([0.0, 0.005, 1.234, 29.995])
    pointwise = np.array([evaluate_road(profile, t) for t in times])
    assert np.allclose(sample_road(profile, times), pointwise, rtol=0, atol=1e-15)


def test_derive_seed_stable_and_key_sensitive():
    """Seeds depend on every key and nothing else."""
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert 0 <= derive_seed(0) < 2 ** 63


def test_class_a_spectrum_slope_near_minus_two():
    """Averaged periodogram of a class-A profile falls off with the inverse square."""
    dt = 0.001
    profile = generate_road(RoadClass.A, 100, 25.0, seed=3)
    values = sample_road(profile, np.arange(0.0, 60.0, dt))
    high = profile.grid.omega[-1] * profile.velocity
    slope = periodogram_slope(values, dt, (74.0, 0.9 * high))
    assert slope == pytest.approx(-2.0, abs=0.3)
