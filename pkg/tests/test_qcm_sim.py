"""
Tests for the quarter-car model and its integrator.
"""
import numpy as np
import pytest

from exceptions import DomainError, SimulationDivergedError
from schemas import QcmParams, RoadClass
from services.qcm_sim import (
    QcmState,
    accelerations,
    assemble_system_matrix,
    forcing_vector,
    mechanical_energy,
    simulate,
    simulate_forcing,
    symplectic_step,
    true_parameters,
)
from services.road_synth import evaluate_road, generate_road
from tests.conftest import rk4_reference


def test_true_parameters_for_default_seat():
    """p1 = C3/m3, p2 = K3/m3."""
    target = true_parameters(QcmParams(m3=100))
    assert target.p1 == pytest.approx(6.15)
    assert target.p2 == pytest.approx(989.35)


def test_seat_mass_outside_range_is_rejected():
    """m3 lives in [50, 200]."""
    with pytest.raises(ValueError):
        QcmParams(m3=20)


def test_zero_road_keeps_equilibrium():
    """No excitation, no motion."""
    trace = simulate_forcing(QcmParams(), np.zeros(200), 0.005)
    assert np.all(trace.states == 0.0)
    assert np.all(trace.z_ddot == 0.0)
    assert trace.final_state == QcmState()


def test_first_step_moves_only_through_the_wheel():
    """A unit road value accelerates the wheel; body and seat follow with the new velocities."""
    params = QcmParams()
    h = 0.005
    state = symplectic_step(QcmState(), 1.0, params, h)
    u1 = h * params.K1 / params.m1
    v1 = h * params.C2 / params.m2 * u1
    w1 = h * params.C3 / params.m3 * v1
    assert state.u == pytest.approx(u1)
    assert state.v == pytest.approx(v1)
    assert state.w == pytest.approx(w1)
    assert state.x == pytest.approx(h * u1)
    assert state.y == pytest.approx(h * v1)
    assert state.z == pytest.approx(h * w1)


def test_step_rejects_non_positive_width():
    """h must be positive."""
    with pytest.raises(DomainError):
        symplectic_step(QcmState(), 0.0, QcmParams(), 0.0)


def test_system_matrix_matches_step_for_small_h():
    """The componentwise update is the semi-implicit form of A*rho + f."""
    params = QcmParams(m3=150)
    A = assemble_system_matrix(params)
    rng = np.random.default_rng(0)
    values = rng.normal(size=6) * 1e-2
    state = QcmState.from_array(values)
    rho = values[[2, 1, 0, 5, 4, 3]]
    h = 1e-9
    stepped = symplectic_step(state, 0.01, params, h).as_array()[[2, 1, 0, 5, 4, 3]]
    derivative = (stepped - rho) / h
    assert np.allclose(derivative, A @ rho + forcing_vector(params, 0.01), rtol=1e-5, atol=1e-6)


def test_simulate_is_deterministic():
    """Same inputs give bit-identical traces."""
    profile = generate_road(RoadClass.C, 20, 25.0, seed=1)
    a = simulate(QcmParams(m3=80), profile, 0.005, 400)
    b = simulate(QcmParams(m3=80), profile, 0.005, 400)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.z_ddot, b.z_ddot)


def test_trace_has_requested_length_and_starts_at_rest():
    """states[0] is the zero initial condition."""
    profile = generate_road(RoadClass.B, 20, 25.0, seed=2)
    trace = simulate(QcmParams(), profile, 0.005, 50)
    assert trace.states.shape == (50, 6)
    assert trace.z_ddot.shape == (50,)
    assert np.all(trace.states[0] == 0.0)


def test_simulate_rejects_bad_arguments():
    """N >= 1 and h > 0."""
    profile = generate_road(RoadClass.A, 10, 25.0, seed=1)
    with pytest.raises(DomainError):
        simulate(QcmParams(), profile, 0.005, 0)
    with pytest.raises(DomainError):
        simulate(QcmParams(), profile, -0.005, 10)


def test_accelerations_follow_the_seat_equation():
    """z''_k = -p1 (z'_k - y'_{k+1}) - p2 (z_k - y_k), the coupling of the seat update."""
    params = QcmParams(m3=120)
    profile = generate_road(RoadClass.D, 20, 25.0, seed=3)
    trace = simulate(params, profile, 0.005, 300)
    target = true_parameters(params)
    expected = (-target.p1 * (trace.column("w") - trace.next_column("v"))
                - target.p2 * (trace.column("z") - trace.column("y")))
    assert np.allclose(trace.z_ddot, expected, rtol=1e-12, atol=1e-15)
    z_ddot, _ = accelerations(trace.states[:6], params)
    assert np.array_equal(z_ddot, trace.z_ddot[:5])


def test_accelerations_are_the_velocity_increments():
    """Stored accelerations times h are exactly what each step adds to w and v."""
    params = QcmParams(m3=50)
    h = 0.005
    trace = simulate(params, generate_road(RoadClass.E, 30, 25.0, seed=9), h, 1000)
    for acc, name in ((trace.z_ddot, "w"), (trace.y_ddot, "v")):
        increments = (trace.next_column(name) - trace.column(name)) / h
        assert np.allclose(increments, acc, rtol=1e-9, atol=1e-9 * np.max(np.abs(acc)))


def test_accelerations_need_two_states():
    """One row has no step to describe."""
    with pytest.raises(DomainError):
        accelerations(np.zeros((1, 6)), QcmParams())


def test_step_is_affine_in_state_and_road():
    """step(s1 + s2, r1 + r2) = step(s1, r1) + step(s2, r2) - step(0, 0)."""
    params = QcmParams(m3=70)
    h = 0.005
    rng = np.random.default_rng(12)
    s1, s2 = rng.normal(size=(2, 6)) * 1e-2
    r1, r2 = rng.normal(size=2) * 1e-2

    def step(values, r):
        return symplectic_step(QcmState.from_array(values), r, params, h).as_array()

    combined = step(s1 + s2, r1 + r2)
    superposed = step(s1, r1) + step(s2, r2) - step(np.zeros(6), 0.0)
    assert np.allclose(combined, superposed, rtol=0, atol=1e-12)


def test_divergence_raises_with_step_index():
    """A huge step blows the state up and reports where."""
    profile = generate_road(RoadClass.E, 20, 25.0, seed=4)
    with pytest.raises(SimulationDivergedError) as excinfo:
        simulate(QcmParams(), profile, 5.0, 2000)
    assert excinfo.value.step >= 1


def test_energy_decays_after_the_road_goes_flat():
    """With the road clamped to zero only dampers act, so energy keeps falling."""
    params = QcmParams()
    profile = generate_road(RoadClass.C, 20, 25.0, seed=5)
    h = 0.005
    state = QcmState()
    energies = []
    for k in range(3000):
        r = evaluate_road(profile, k * h) if k < 100 else 0.0
        state = symplectic_step(state, r, params, h)
        if k >= 100 and (k - 100) % 400 == 0:
            energies.append(mechanical_energy(state, params))
    assert energies[0] > 0
    assert all(later <= earlier for earlier, later in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]


def test_integrator_converges_at_first_order():
    """Halving h roughly halves the error against a fine RK4 reference."""
    params = QcmParams(m3=100)
    profile = generate_road(RoadClass.C, 20, 25.0, seed=6)

    def road(t):
        return evaluate_road(profile, t)

    errors = []
    for h in (0.002, 0.001):
        N = int(round(1.0 / h)) + 1
        trace = simulate(params, profile, h, N)
        reference = rk4_reference(params, road, h, N, substeps=50)
        scale = np.max(np.abs(reference), axis=0)
        errors.append(np.max(np.abs(trace.states - reference) / scale))
    ratio = errors[0] / errors[1]
    assert 1.5 <= ratio <= 2.5
    assert errors[1] < 0.1
