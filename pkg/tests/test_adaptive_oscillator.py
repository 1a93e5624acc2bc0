import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exoctl.adaptive_oscillator import (
    AOState,
    GaitPhaseEstimator,
    NonFiniteInput,
    PhaseSample,
    TimingFault,
    ao_init,
    ao_integrate,
    ao_step,
    detect_step_event,
    gait_phase,
    phase_correction_target,
    psi_step,
    reconstruct,
)
from exoctl.domain import TWO_PI, ControllerConfig
from exoctl.gait_sim import PROFILE_PRESETS
from exoctl.domain import LG
from oracles import ao_oracle

CFG = ControllerConfig()


def _run(signal, seconds, cfg=CFG, theta0=None):
    dt = cfg.dt
    est = GaitPhaseEstimator(cfg, signal(dt) if theta0 is None else theta0, t0=dt)
    n = int(round(seconds / dt))
    xs = [signal(k * dt) for k in range(1, n + 1)]
    return est, xs, est.run(xs)


# --- init -------------------------------------------------------------------------


def test_init_identity_seed():
    s = ao_init(CFG, 0.0)
    assert s.alpha0 == 0.0 and s.omega == CFG.omega_init
    assert s.alpha == (CFG.ao_seed_amplitude, 0.0, 0.0) and s.phi == (0.0, 0.0, 0.0)
    assert (s.psi, s.e_psi, s.t_s) == (0.0, 0.0, 0.0)


def test_init_offset_pass_through():
    assert ao_init(CFG, 0.3).alpha0 == 0.3


def test_init_omega_value():
    assert ao_init(CFG).omega == pytest.approx(5.0265, abs=1e-4)


# --- integration --------------------------------------------------------------------


def test_zero_error_fixed_point():
    s = AOState(0.1, (0.4, 0.1, 0.02), (0.3, 1.1, 2.0), 5.5)
    nxt = ao_integrate(s, reconstruct(s), 0.01, CFG)
    assert nxt.alpha0 == s.alpha0 and nxt.alpha == s.alpha and nxt.omega == s.omega
    for n in range(3):
        assert nxt.phi[n] == s.phi[n] + 0.01 * (n + 1) * s.omega


def test_one_euler_step_by_hand():
    s = AOState(0.0, (0.5, 0.0, 0.0), (0.0, 0.0, 0.0), 5.0)
    nxt = ao_integrate(s, 0.2, 0.01, CFG)
    # F = 0.2, sum alpha = 0.5, sin(0) = 0, cos(0) = 1
    assert nxt.alpha0 == pytest.approx(0.01 * 5 * 0.2)
    assert nxt.alpha == pytest.approx((0.5, 0.0, 0.0))
    assert nxt.phi[0] == pytest.approx(0.01 * (5.0 + 20 * 0.2 / 0.5))
    assert nxt.phi[1] == pytest.approx(0.01 * (10.0 + 20 * 0.2 / 0.5))
    assert nxt.omega == pytest.approx(5.0 + 0.01 * 20 * 0.2 / 0.5)


def test_amplitude_guard_prevents_division_blowup():
    s = AOState(0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 5.0)
    nxt = ao_integrate(s, 1.0, 0.01, CFG)
    assert all(math.isfinite(x) for x in (*nxt.phi, nxt.omega))


def test_rejects_bad_input_and_timing():
    s = ao_init(CFG)
    with pytest.raises(NonFiniteInput):
        ao_integrate(s, math.nan, 0.01, CFG)
    with pytest.raises(NonFiniteInput):
        ao_integrate(s, math.inf, 0.01, CFG)
    with pytest.raises(TimingFault):
        ao_integrate(s, 0.0, 0.0, CFG)
    with pytest.raises(TimingFault):
        ao_integrate(s, 0.0, 0.03, CFG)


def test_frequency_lock_against_high_rate_oracle():
    f = lambda t: math.sin(TWO_PI * t)
    est, _, _ = _run(f, 30.0)
    w_oracle = ao_oracle(f, 30.0)[0]
    assert abs(est.state.omega - TWO_PI) / TWO_PI < 0.01
    assert abs(w_oracle - TWO_PI) / TWO_PI < 0.01
    assert est.state.omega == pytest.approx(w_oracle, rel=1e-3)


@pytest.mark.parametrize("freq", [0.5, 0.7, 0.9, 1.1, 1.3])
def test_frequency_lock_range(freq):
    est, _, samples = _run(lambda t: math.sin(TWO_PI * freq * t), 60.0)
    target = TWO_PI * freq
    lock = next(i for i in range(len(samples)) if all(
        abs(s.omega - target) / target < 0.01 for s in samples[i:]))
    assert lock * CFG.dt <= 60.0


def test_three_harmonic_reconstruction():
    w = TWO_PI * 0.9
    f = lambda t: 0.2 + 0.5 * math.sin(w * t) + 0.1 * math.sin(2 * w * t) + 0.05 * math.sin(3 * w * t)
    _, xs, samples = _run(f, 40.0)
    n = int(round(1 / 0.9 / CFG.dt))
    err = np.array(xs[-n:]) - np.array([s.theta_hat for s in samples[-n:]])
    assert math.sqrt(np.mean(err**2)) < 0.02


def test_grid_refinement_first_order():
    f = lambda t: math.sin(TWO_PI * t)
    rec = ao_oracle(f, 20.0, record_every=100)[4]
    errs = []
    for dt in (0.01, 0.005, 0.0025):
        cfg = replace(CFG, control_rate=1 / dt, vision_rate=0.3 / dt)
        s = ao_init(cfg, f(0.0))
        every = int(round(0.01 / dt))
        traj = []
        for k in range(1, int(round(20.0 / dt)) + 1):
            s = ao_integrate(s, f((k - 1) * dt), dt, cfg)
            if k % every == 0:
                traj.append((s.omega, s.alpha0, *s.alpha))
        errs.append(np.abs(np.array(traj) - rec[:, 1:]).max())
    r1, r2 = errs[1] / errs[0], errs[2] / errs[1]
    assert 0.3 < r1 < 0.7 and 0.3 < r2 < 0.7


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=50, max_size=300), st.integers(0, 2**31))
def test_omega_clamped_for_any_stream(xs, seed):
    rng = np.random.default_rng(seed)
    xs = np.asarray(xs) * rng.choice([1.0, 1e3], size=len(xs))
    est = GaitPhaseEstimator(CFG)
    lo, hi = CFG.omega_bounds
    for x in xs:
        s = est.update(float(x))
        assert lo <= s.omega <= hi
        assert 0.0 <= s.phi_gait < TWO_PI


# --- phase --------------------------------------------------------------------------


def test_gait_phase_examples():
    base = ao_init(CFG)
    assert gait_phase(base) == 0.0
    assert gait_phase(base._replace(phi=(3 * math.pi, 0.0, 0.0))) == pytest.approx(math.pi)
    assert gait_phase(base._replace(phi=(5.5, 0.0, 0.0), psi=1.2)) == pytest.approx(0.4168, abs=1e-4)


@settings(max_examples=300)
@given(st.floats(-1e6, 1e6), st.floats(-1e3, 1e3))
def test_gait_phase_range(phi1, psi):
    p = gait_phase(ao_init(CFG)._replace(phi=(phi1, 0.0, 0.0), psi=psi))
    assert 0.0 <= p < TWO_PI


def test_correction_target_cases():
    assert phase_correction_target(0.0, 0.0) == 0.0
    assert phase_correction_target(math.pi, 0.0) == pytest.approx(math.pi)
    assert phase_correction_target(1.0, 0.5) == pytest.approx(-1.5)
    assert phase_correction_target(5.0, 0.5) == pytest.approx(TWO_PI - 5.5)


def test_psi_aligned_stays_zero():
    s = ao_init(CFG)
    for _ in range(10):
        s = psi_step(s._replace(t=s.t + 0.01), False, 0.01)
    s = psi_step(s, True, 0.01)
    assert s.e_psi == 0.0 and s.psi == 0.0


def test_psi_second_case_target():
    s = ao_init(CFG)._replace(phi=(math.pi, 0.0, 0.0), t=1.0)
    s = psi_step(s, True, 0.01)
    assert s.e_psi == pytest.approx(math.pi) and s.t_s == 1.0


def test_psi_converges_to_closed_form():
    # E = 1, omega = 5: psi(t) - psi(t_s) = 1 - exp(-5 (t - t_s)) in the limit dt -> 0
    dt = 1e-4
    s = ao_init(CFG)._replace(omega=5.0, e_psi=1.0, t_s=0.0, t=0.0)
    for k in range(int(2.0 / dt)):
        s = psi_step(s, False, dt)
        s = s._replace(t=s.t + dt)
    assert s.psi == pytest.approx(1 - math.exp(-10.0), abs=1e-3)
    long = s
    for k in range(int(2.0 / dt)):
        long = psi_step(long, False, dt)
        long = long._replace(t=long.t + dt)
    assert long.psi == pytest.approx(1.0, abs=1e-3)


# --- step events --------------------------------------------------------------------


def _history(values, dt=0.01, t0=0.0):
    return [PhaseSample(t0 + (k + 1) * dt, 0.0, 0.0, TWO_PI, v, False) for k, v in enumerate(values)]


def test_event_once_per_period_at_sine_minimum():
    w = TWO_PI * 1.0
    state = ao_init(CFG)._replace(omega=w)
    hist: list[PhaseSample] = []
    events = []
    for k in range(1, 501):
        t = k * 0.01
        sample = PhaseSample(t, 0.0, 0.0, w, math.sin(w * t), False)
        hist.append(sample)
        state = state._replace(t=t)
        if detect_step_event(state, hist[-150:]):
            events.append(t)
            state = state._replace(t_s=t, n_steps=state.n_steps + 1)
    assert len(events) == 4  # first full period of history ends at t = 1
    for t in events:
        # minimum at w t = 3pi/2, detected one tick late
        assert abs(((w * t - 1.5 * math.pi + math.pi) % TWO_PI) - math.pi) <= 2 * w * 0.01


def test_constant_never_fires():
    state = ao_init(CFG)._replace(omega=TWO_PI, t=3.0)
    assert not detect_step_event(state, _history([0.4] * 300))


def test_short_history_never_fires():
    state = ao_init(CFG)._replace(omega=TWO_PI, t=0.5)
    assert not detect_step_event(state, _history([1.0, 0.0, 1.0]))


def test_refractory_suppresses_second_shallow_minimum():
    w = TWO_PI
    state = ao_init(CFG)._replace(omega=w)
    # base sine plus a notch making two local minima 0.1 s apart near t = 0.75 (mod 1)
    def theta(t):
        ph = (t % 1.0)
        return math.sin(w * t) + 0.12 * math.exp(-((ph - 0.75) / 0.04) ** 2)

    hist: list[PhaseSample] = []
    per_cycle = {}
    for k in range(1, 401):
        t = k * 0.01
        hist.append(PhaseSample(t, 0.0, 0.0, w, theta(t), False))
        state = state._replace(t=t)
        if detect_step_event(state, hist[-150:]):
            per_cycle[int(t)] = per_cycle.get(int(t), 0) + 1
            state = state._replace(t_s=t, n_steps=state.n_steps + 1)
    # the constructed signal does have two minima per cycle
    vals = [theta(k * 0.01) for k in range(100, 200)]
    minima = [k for k in range(1, 99) if vals[k] < vals[k - 1] and vals[k] <= vals[k + 1]]
    assert len(minima) == 2 and 8 <= minima[1] - minima[0] <= 12
    assert per_cycle and all(v == 1 for v in per_cycle.values())


def test_phase_aligned_at_step_events():
    prof = PROFILE_PRESETS[LG]
    f = lambda t: prof.angle(TWO_PI * ((0.9 * t) % 1.0))
    _, _, samples = _run(f, 40.0)
    ev = [s.phi_gait for s in samples if s.step_event]
    tail = ev[-12:]
    assert len(tail) >= 10
    assert max(min(p, TWO_PI - p) for p in tail) < 0.1


def test_ao_step_sample_belongs_to_measurement_instant():
    pre = ao_init(CFG, 0.1, t0=0.5)._replace(alpha=(0.3, 0.05, 0.0), phi=(1.0, 2.5, 0.4))
    post, sample = ao_step(pre, 0.2, 0.01, CFG)
    assert sample.t == 0.5 and post.t == pytest.approx(0.51)
    assert sample.theta_hat == reconstruct(pre)
    assert sample.phi_gait == gait_phase(pre)
    assert not sample.step_event
    assert post == ao_integrate(pre, 0.2, 0.01, CFG)


def test_ao_step_rejects_non_finite():
    with pytest.raises(NonFiniteInput):
        ao_step(ao_init(CFG), math.nan, 0.01, CFG)


def test_noisy_plateau_gives_one_event_per_cycle():
    # 0.5 deg noise puts tiny dips on the flexion plateau; only extension minima count
    prof = PROFILE_PRESETS[LG]
    rng = np.random.default_rng(0)
    f = lambda t: prof.angle(TWO_PI * ((0.9 * t) % 1.0)) + rng.normal(0.0, math.radians(0.5))
    _, _, samples = _run(f, 40.0)
    t_ev = np.array([s.t for s in samples if s.step_event and s.t > 10.0])
    assert np.all(np.abs(np.diff(t_ev) - 1 / 0.9) < 0.1)
    assert all(min(s.phi_gait, TWO_PI - s.phi_gait) < 0.25 for s in samples if s.step_event and s.t > 10.0)
