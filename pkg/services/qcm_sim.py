"""
Quarter-car model and its semi-implicit (symplectic) Euler integration.

State naming: x, y, z are the displacements of wheel suspension, car body
and passenger seat; u, v, w are the matching velocities.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from exceptions import DomainError, SimulationDivergedError
from schemas import QcmParams
from services.road_synth import RoadProfile, sample_road

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QcmState:
    """Velocities (m/s) and displacements (m) of the three masses."""
    u: float = 0.0
    v: float = 0.0
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w, self.x, self.y, self.z])

    @classmethod
    def from_array(cls, values) -> "QcmState":
        u, v, w, x, y, z = (float(a) for a in values)
        return cls(u, v, w, x, y, z)

    def is_finite(self) -> bool:
        return all(math.isfinite(a) for a in (self.u, self.v, self.w, self.x, self.y, self.z))


@dataclass(frozen=True)
class TargetParams:
    """The two hidden parameters of the seat equation."""
    p1: float
    p2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2])


@dataclass(frozen=True)
class SimTrace:
    """
    Discrete run of length N.

    states[k] and road[k] are the state at t_k = k*h and the road value fed
    into step k; z_ddot[k] and y_ddot[k] are the accelerations applied by
    step k. final_state is the state after the N-th step.
    """
    h: float
    N: int
    states: np.ndarray  # (N, 6) columns u, v, w, x, y, z
    road: np.ndarray
    z_ddot: np.ndarray
    y_ddot: np.ndarray
    final_state: QcmState

    def state(self, k: int) -> QcmState:
        return QcmState.from_array(self.states[k])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, "uvwxyz".index(name)]

    def next_column(self, name: str) -> np.ndarray:
        """Column `name` one step later: states 1 .. N-1, then the final state."""
        return np.append(self.states[1:, "uvwxyz".index(name)], getattr(self.final_state, name))


def assemble_system_matrix(params: QcmParams) -> np.ndarray:
    """
    First-order system matrix for rho = (z', y', x', z, y, x).

    Only used to cross-check the integrator; simulation uses the componentwise update.
    """
    C2, C3, K1, K2, K3 = params.C2, params.C3, params.K1, params.K2, params.K3
    m1, m2, m3 = params.m1, params.m2, params.m3
    A = np.zeros((6, 6))
    A[0] = [-C3 / m3, C3 / m3, 0.0, -K3 / m3, K3 / m3, 0.0]
    A[1] = [C3 / m2, -(C2 + C3) / m2, C2 / m2, K3 / m2, -(K2 + K3) / m2, K2 / m2]
    A[2] = [0.0, C2 / m1, -C2 / m1, 0.0, K2 / m1, -(K1 + K2) / m1]
    A[3:, :3] = np.eye(3)
    return A


def forcing_vector(params: QcmParams, r: float) -> np.ndarray:
    """Non-homogeneous term of the first-order system for road displacement r."""
    f = np.zeros(6)
    f[2] = params.K1 / params.m1 * r
    return f


def symplectic_step(state: QcmState, r_k: float, params: QcmParams, h: float) -> QcmState:
    """
    One semi-implicit Euler step.

    Update order is u, then v with the new u, then w with the new v,
    then the displacements with the new velocities.
    """
    if not h > 0:
        raise DomainError(f"Step width must be positive, got {h}")
    C2, C3, K1, K2, K3 = params.C2, params.C3, params.K1, params.K2, params.K3
    m1, m2, m3 = params.m1, params.m2, params.m3
    u, v, w, x, y, z = state.u, state.v, state.w, state.x, state.y, state.z

    u1 = u + h * (C2 / m1 * v - C2 / m1 * u + K2 / m1 * y - (K1 + K2) / m1 * x + K1 / m1 * r_k)
    v1 = v + h * (C3 / m2 * w - (C2 + C3) / m2 * v + C2 / m2 * u1 + K3 / m2 * z - (K2 + K3) / m2 * y + K2 / m2 * x)
    w1 = w + h * (-C3 / m3 * w + C3 / m3 * v1 - K3 / m3 * z + K3 / m3 * y)
    return QcmState(u1, v1, w1, x + h * u1, y + h * v1, z + h * w1)


def accelerations(states: np.ndarray, params: QcmParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seat and body accelerations of each step, from N+1 consecutive states
    (columns u, v, w, x, y, z).

    Step k reads rows k and k+1 the way symplectic_step couples them: the
    seat sees the body velocity after the step, the body sees the wheel
    velocity after the step. The result is (w_{k+1} - w_k) / h and
    (v_{k+1} - v_k) / h without dividing by h.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[1] != 6:
        raise DomainError(f"Expected 6 state columns, got {states.shape[1]}")
    if states.shape[0] < 2:
        raise DomainError("Need at least two consecutive states")
    u, v, w, x, y, z = states[:-1].T
    u1, v1 = states[1:, 0], states[1:, 1]
    z_ddot = -params.C3 / params.m3 * (w - v1) - params.K3 / params.m3 * (z - y)
    y_ddot = (
        -params.C3 / params.m2 * (v - w)
        - params.C2 / params.m2 * (v - u1)
        - params.K3 / params.m2 * (y - z)
        - params.K2 / params.m2 * (y - x)
    )
    return z_ddot, y_ddot


def simulate(params: QcmParams, profile: RoadProfile, h: float, N: int) -> SimTrace:
    """Integrate N steps from the all-zero equilibrium state."""
    if N < 1:
        raise DomainError(f"Trace length must be at least 1, got {N}")
    if not h > 0:
        raise DomainError(f"Step width must be positive, got {h}")
    road = sample_road(profile, np.arange(N) * h)
    return simulate_forcing(params, road, h)


def simulate_forcing(params: QcmParams, road: np.ndarray, h: float) -> SimTrace:
    """Integrate against an explicit sequence of road values r_0 .. r_{N-1}."""
    road = np.asarray(road, dtype=np.float64)
    N = int(road.shape[0])
    states = np.empty((N, 6))
    state = QcmState()
    for k in range(N):
        states[k] = (state.u, state.v, state.w, state.x, state.y, state.z)
        state = symplectic_step(state, float(road[k]), params, h)
        if not state.is_finite():
            raise SimulationDivergedError(k + 1)
    z_ddot, y_ddot = accelerations(np.vstack([states, state.as_array()]), params)
    return SimTrace(h=h, N=N, states=states, road=road, z_ddot=z_ddot, y_ddot=y_ddot, final_state=state)


def true_parameters(params: QcmParams) -> TargetParams:
    """(C3/m3, K3/m3), the targets of the estimator."""
    if not params.m3 > 0:
        raise DomainError("m3 must be positive")
    return TargetParams(p1=params.C3 / params.m3, p2=params.K3 / params.m3)


def mechanical_energy(state: QcmState, params: QcmParams) -> float:
    """Kinetic plus spring energy, with the tyre spring measured against a flat road."""
    kinetic = 0.5 * (params.m1 * state.u ** 2 + params.m2 * state.v ** 2 + params.m3 * state.w ** 2)
    springs = 0.5 * (
        params.K1 * state.x ** 2 + params.K2 * (state.y - state.x) ** 2 + params.K3 * (state.z - state.y) ** 2
    )
    return kinetic + springs
