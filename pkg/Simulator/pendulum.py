from __future__ import annotations

from dataclasses import dataclass
from math import ceil, cos, pi, sin, sqrt
from typing import TYPE_CHECKING

import numpy as np

from Common import ConfigurationError

if TYPE_CHECKING:
    from Common import NoiseConfig, SimulatorConfig

__all__ = (
    "PendulumParams",
    "PendulumState",
    "wrap_angle",
    "angular_acceleration",
    "step_dynamics",
    "energy",
)


@dataclass(kw_only=True, frozen=True)
class PendulumParams:
    mass: float
    length: float
    gravity: float
    dt: float
    torque_limit: float
    max_speed: float
    dynamics_std: float

    def __post_init__(self):
        for name in ("mass", "length", "gravity", "dt", "max_speed"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"Pendulum {name} must be positive.")
        if self.dynamics_std < 0 or self.torque_limit < 0:
            raise ConfigurationError("Pendulum noise and torque limit must be non-negative.")

    @classmethod
    def from_config(cls, simulator: SimulatorConfig, noise: NoiseConfig, /) -> PendulumParams:
        return cls(
            mass=simulator.mass,
            length=simulator.length,
            gravity=simulator.gravity,
            dt=simulator.dt,
            torque_limit=simulator.torque_limit,
            max_speed=simulator.max_speed,
            dynamics_std=sqrt(noise.dynamics_variance),
        )


@dataclass(frozen=True)
class PendulumState:
    angle: float
    velocity: float


def wrap_angle(angle, /):
    """Maps any angle (or array of angles) into (−π, π]."""
    if isinstance(angle, np.ndarray):
        return angle - 2.0 * pi * np.ceil((angle - pi) / (2.0 * pi))
    return angle - 2.0 * pi * ceil((angle - pi) / (2.0 * pi))


def angular_acceleration(
    state: PendulumState, torque: float, params: PendulumParams, /, disturbance: float = 0.0
) -> float:
    m, l, g = params.mass, params.length, params.gravity
    return -(m * g * sin(state.angle) + torque + disturbance) / (m * l)


def step_dynamics(
    state: PendulumState, torque: float, params: PendulumParams, rng: np.random.Generator, /
) -> PendulumState:
    """One semi-implicit Euler step; the torque is clamped to the limit."""
    torque = min(max(torque, -params.torque_limit), params.torque_limit)

    # Drawn even when the disturbance is off so control sequences line up across noise levels
    disturbance = params.dynamics_std * rng.standard_normal()

    acceleration = angular_acceleration(state, torque, params, disturbance)
    velocity = state.velocity + acceleration * params.dt
    velocity = min(max(velocity, -params.max_speed), params.max_speed)

    return PendulumState(wrap_angle(state.angle + velocity * params.dt), velocity)


def energy(state: PendulumState, params: PendulumParams, /) -> float:
    m, l, g = params.mass, params.length, params.gravity
    return 0.5 * m * l * l * state.velocity**2 + m * g * l * (1.0 - cos(state.angle))
