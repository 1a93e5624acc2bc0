"""PID position loop on a first-order motor velocity plant."""

from __future__ import annotations

import math
from typing import NamedTuple

from .domain import PidGains

PULLEY_DIAMETER = 0.035  # m


class PidState(NamedTuple):
    kp: float
    ki: float
    kd: float
    integral: float = 0.0
    prev_error: float | None = None
    integral_limit: float = math.inf
    omega_max: float = math.inf

    @classmethod
    def from_gains(cls, gains: PidGains) -> PidState:
        return cls(gains.kp, gains.ki, gains.kd, integral_limit=gains.integral_limit, omega_max=gains.omega_max)


class MotorState(NamedTuple):
    theta_m: float = 0.0
    omega_m: float = 0.0
    omega_cmd: float = 0.0


def pid_step(pid: PidState, error: float, dt: float) -> tuple[PidState, float]:
    """Velocity command from the position error.

    The integral is clamped to ``integral_limit`` and frozen while the output
    is saturated in the direction of the error (conditional integration).  The
    derivative is the first difference of the error; it is zero on the first
    call.
    """
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    deriv = 0.0 if pid.prev_error is None else (error - pid.prev_error) / dt
    lim = pid.integral_limit
    integral = min(max(pid.integral + error * dt, -lim), lim)
    raw = pid.kp * error + pid.ki * integral + pid.kd * deriv
    cap = pid.omega_max
    if raw > cap or raw < -cap:
        if error * raw > 0.0:
            integral = pid.integral
            raw = pid.kp * error + pid.ki * integral + pid.kd * deriv
        cmd = min(max(raw, -cap), cap)
    else:
        cmd = raw
    return pid._replace(integral=integral, prev_error=error), cmd


def plant_step(motor: MotorState, omega_cmd: float, dt: float, tau: float = 0.02) -> MotorState:
    """First-order velocity lag, explicit Euler; position integrates the previous velocity."""
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    omega = motor.omega_m + dt / tau * (omega_cmd - motor.omega_m)
    return MotorState(motor.theta_m + dt * motor.omega_m, omega, omega_cmd)


def cable_kinematics(theta_m: float) -> float:
    """Tendon payout (m) wound on the pulley for a shaft angle (rad)."""
    return theta_m * (PULLEY_DIAMETER / 2.0)


class LowLevel:
    def __init__(self, gains: PidGains, tau: float = 0.02):
        self.pid = PidState.from_gains(gains)
        self.motor = MotorState()
        self.tau = tau

    def step(self, theta_ref: float, dt: float) -> tuple[float, float]:
        """Returns (error, omega_cmd) and advances the plant."""
        error = theta_ref - self.motor.theta_m
        self.pid, cmd = pid_step(self.pid, error, dt)
        self.motor = plant_step(self.motor, cmd, dt, self.tau)
        return error, cmd
