"""
Pytest configuration and shared fixtures.
"""
import numpy as np
import pytest

from config import get_settings
from schemas import Architecture, GenConfig
from services.dataset import generate_dataset
from services.qcm_sim import assemble_system_matrix, forcing_vector


@pytest.fixture(autouse=True)
def fresh_settings():
    """Re-read QCM_SYSID_* variables for every test."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def tiny_config():
    """Three short roads with two masses each; roads 1-2 train, road 3 test."""
    return GenConfig(
        roads=3, masses=2, train_roads=2, n_steps=300, step_width=0.005,
        frequencies=20, velocity=25.0, master_seed=11,
    )


@pytest.fixture
def tiny_dataset(tiny_config):
    """Generated in-process from tiny_config."""
    return generate_dataset(tiny_config)


@pytest.fixture
def small_arch():
    """Shrunk estimator for gradient checks and fast training."""
    return Architecture(
        window_length=20, conv1_filters=3, conv1_width=5, conv2_filters=2, conv2_width=3,
        dense1_units=4, dense2_units=3,
    )


def rk4_reference(params, road, h, N, substeps=100):
    """
    Classical RK4 on the continuous system at step h/substeps.

    `road` maps time to displacement. Returns states at t_k = k*h in the
    trace column order u, v, w, x, y, z.
    """
    A = assemble_system_matrix(params)
    dt = h / substeps

    def rhs(t, rho):
        return A @ rho + forcing_vector(params, road(t))

    rho = np.zeros(6)
    out = np.empty((N, 6))
    t = 0.0
    for k in range(N):
        # reference order is (z', y', x', z, y, x)
        out[k] = rho[[2, 1, 0, 5, 4, 3]]
        for _ in range(substeps):
            k1 = rhs(t, rho)
            k2 = rhs(t + dt / 2, rho + dt / 2 * k1)
            k3 = rhs(t + dt / 2, rho + dt / 2 * k2)
            k4 = rhs(t + dt, rho + dt * k3)
            rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
    return out
