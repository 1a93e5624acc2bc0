"""Adaptive-oscillator gait phase estimation from a streaming hip flexion angle.

The hip angle is modelled as an offset plus three harmonics whose amplitudes,
phases and common fundamental frequency adapt to the error between the
measured and reconstructed angle.  The fundamental phase is then re-anchored
so that each step (maximum hip extension) starts at 0 rad.
"""

from __future__ import annotations

import math
from collections import deque
from typing import NamedTuple, Sequence

from .domain import TWO_PI, ControllerConfig

N_HARMONICS = 3


class NonFiniteInput(ValueError):
    pass


class TimingFault(ValueError):
    pass


class AOState(NamedTuple):
    alpha0: float
    alpha: tuple[float, float, float]
    phi: tuple[float, float, float]  # unwrapped phase accumulators
    omega: float
    psi: float = 0.0
    e_psi: float = 0.0
    t_s: float = 0.0
    t: float = 0.0
    n_steps: int = 0

    @property
    def theta_hat(self) -> float:
        return reconstruct(self)


class PhaseSample(NamedTuple):
    t: float
    phi_gait: float
    phi1_norm: float
    omega: float
    theta_hat: float
    step_event: bool


def reconstruct(state: AOState) -> float:
    a, p = state.alpha, state.phi
    return state.alpha0 + a[0] * math.sin(p[0]) + a[1] * math.sin(p[1]) + a[2] * math.sin(p[2])


def ao_init(cfg: ControllerConfig, theta0: float = 0.0, t0: float = 0.0) -> AOState:
    """Seed state at time ``t0``, the time of the first measurement to be fed."""
    return AOState(
        alpha0=float(theta0),
        alpha=(cfg.ao_seed_amplitude, 0.0, 0.0),
        phi=(0.0, 0.0, 0.0),
        omega=cfg.omega_init,
        t_s=t0,
        t=t0,
    )


def ao_integrate(state: AOState, theta_meas: float, dt: float, cfg: ControllerConfig) -> AOState:
    """One explicit-Euler step of the offset/amplitude/phase/frequency adaptation.

    ``theta_meas`` is the angle measured at ``state.t``; the returned state
    belongs to ``state.t + dt``.  Raises NonFiniteInput for NaN/Inf angles and TimingFault when ``dt`` is not
    in (0, 2/control_rate].
    """
    if not math.isfinite(theta_meas):
        raise NonFiniteInput(f"theta_meas={theta_meas!r} at t={state.t:.4f}")
    if not (dt > 0.0 and dt <= 2.0 / cfg.control_rate):
        raise TimingFault(f"dt={dt!r} outside (0, {2.0 / cfg.control_rate}]")

    a1, a2, a3 = state.alpha
    p1, p2, p3 = state.phi
    s1, s2, s3 = math.sin(p1), math.sin(p2), math.sin(p3)
    c1 = math.cos(p1)
    err = theta_meas - (state.alpha0 + a1 * s1 + a2 * s2 + a3 * s3)
    omega = state.omega

    # Σα may collapse to zero (or go negative) during transients
    coupling = err / max(a1 + a2 + a3, cfg.epsilon_amp)
    eta_f = cfg.eta * err
    k_phi = cfg.nu_phi * coupling

    new_omega = omega + dt * (cfg.nu_omega * coupling * c1)
    lo, hi = cfg.omega_bounds
    if new_omega < lo:
        new_omega = lo
    elif new_omega > hi:
        new_omega = hi

    return state._replace(
        alpha0=state.alpha0 + dt * eta_f,
        alpha=(a1 + dt * (eta_f * s1), a2 + dt * (eta_f * s2), a3 + dt * (eta_f * s3)),
        phi=(
            p1 + dt * (omega + k_phi * c1),
            p2 + dt * (2.0 * omega + k_phi * math.cos(p2)),
            p3 + dt * (3.0 * omega + k_phi * math.cos(p3)),
        ),
        omega=new_omega,
        t=state.t + dt,
    )


def gait_phase(state: AOState) -> float:
    """mod(mod(phi_1, 2pi) + psi, 2pi), always in [0, 2pi)."""
    return _wrap(_wrap(state.phi[0]) + state.psi)


def _wrap(x: float) -> float:
    y = x % TWO_PI
    # float modulo can round up to exactly 2pi for tiny negative x
    return 0.0 if y >= TWO_PI else y


def phase_correction_target(phi1_norm: float, psi: float) -> float:
    """Step-start phase error: bring the normalized fundamental phase to 0 along the shorter side."""
    if phi1_norm < math.pi:
        return -phi1_norm - psi
    return TWO_PI - phi1_norm - psi


def psi_step(state: AOState, step_event: bool, dt: float) -> AOState:
    """Advance the corrective phase shift by one tick.

    On a step event the target error is re-evaluated from the current
    normalized fundamental phase and held; every tick the shift moves by
    ``e_psi * omega * exp(-omega (t - t_s)) * dt``.
    """
    if step_event:
        state = state._replace(
            t_s=state.t,
            e_psi=phase_correction_target(_wrap(state.phi[0]), state.psi),
            n_steps=state.n_steps + 1,
        )
    if state.e_psi == 0.0:
        return state
    w = state.omega
    rate = state.e_psi * w * math.exp(-w * (state.t - state.t_s))
    return state._replace(psi=state.psi + dt * rate)


def detect_step_event(state: AOState, history: Sequence[PhaseSample]) -> bool:
    """Maximum hip extension detector on the reconstructed angle.

    ``history`` holds recent samples, oldest first, ending with the current
    tick.  Fires on the tick after a local minimum of ``theta_hat`` once at
    least one estimated period of history is available and half a period has
    elapsed since the previous event.  The minimum must lie below the offset
    ``alpha0``: sensor noise can put tiny dips on the flexion plateau, which
    are not extension.
    """
    if len(history) < 3:
        return False
    period = TWO_PI / state.omega
    newest = history[-1]
    if newest.t - history[0].t < period - 1e-9:
        return False
    if state.n_steps > 0 and newest.t - state.t_s < 0.5 * period:
        return False
    prev2, prev1 = history[-3].theta_hat, history[-2].theta_hat
    return prev1 < prev2 and prev1 <= newest.theta_hat and prev1 < state.alpha0


def ao_step(
    state: AOState,
    theta_meas: float,
    dt: float,
    cfg: ControllerConfig,
    history: Sequence[PhaseSample] = (),
) -> tuple[AOState, PhaseSample]:
    """Full estimator tick: step detection, phase output, then adaptation.

    ``state`` belongs to the measurement time.  The sample is evaluated on it,
    so ``theta_hat`` and the phase refer to the same instant as
    ``theta_meas``; the returned state is advanced by ``dt``.  ``history`` are
    the samples emitted on previous ticks (oldest first); without it no step
    event can be detected.
    """
    if not math.isfinite(theta_meas):
        raise NonFiniteInput(f"theta_meas={theta_meas!r} at t={state.t:.4f}")
    theta_hat = reconstruct(state)
    event = False
    if history:
        provisional = PhaseSample(state.t, 0.0, 0.0, state.omega, theta_hat, False)
        window = list(history)
        window.append(provisional)
        event = detect_step_event(state, window)
    phi1_norm = _wrap(state.phi[0])
    sample = PhaseSample(
        t=state.t,
        phi_gait=_wrap(phi1_norm + state.psi),
        phi1_norm=phi1_norm,
        omega=state.omega,
        theta_hat=theta_hat,
        step_event=event,
    )
    # psi_step reads omega and t of the current instant, so it goes first
    state = psi_step(state, event, dt)
    state = ao_integrate(state, theta_meas, dt, cfg)
    return state, sample


class GaitPhaseEstimator:
    """Stateful wrapper around :func:`ao_step` for one leg."""

    def __init__(self, cfg: ControllerConfig, theta0: float = 0.0, t0: float = 0.0):
        self.cfg = cfg
        self.state = ao_init(cfg, theta0, t0)
        # enough samples to span one period at the lowest admissible frequency
        span = math.ceil(cfg.control_rate * TWO_PI / cfg.omega_bounds[0]) + 3
        self.history: deque[PhaseSample] = deque(maxlen=span)

    def update(self, theta_meas: float, dt: float | None = None) -> PhaseSample:
        dt = self.cfg.dt if dt is None else dt
        self.state, sample = ao_step(self.state, theta_meas, dt, self.cfg, self.history)
        self.history.append(sample)
        return sample

    def run(self, signal: Sequence[float], dt: float | None = None) -> list[PhaseSample]:
        return [self.update(float(x), dt) for x in signal]
