"""
Seeding the PID gains
=====================

Where the default motor gains come from.  A Ziegler-Nichols ultimate-gain
experiment on the simulated plant (first-order velocity lag, 100 Hz update)
gives a starting point; the integral gain is then detuned to cut the
overshoot while keeping 1 Hz tracking well under 5% RMS.
"""

import math

import numpy as np

from exoctl.domain import PidGains
from exoctl.low_level import LowLevel

DT = 0.01
TAU = 0.02


def p_only_response(kp, n=400):
    ll = LowLevel(PidGains(kp=kp, ki=0.0, kd=0.0, omega_max=1e9), TAU)
    th = []
    for _ in range(n):
        ll.step(0.01, DT)
        th.append(ll.motor.theta_m)
    return np.array(th) - 0.01


def growth(kp):
    # ratio of late to early oscillation envelope; 1 means sustained
    e = p_only_response(kp)
    return np.abs(e[300:]).max() / np.abs(e[50:150]).max()


###############################################################################
# Bisect on the gain where the proportional loop neither decays nor grows.

lo, hi = 10.0, 200.0
for _ in range(40):
    mid = 0.5 * (lo + hi)
    lo, hi = (mid, hi) if growth(mid) < 1.0 else (lo, mid)
ku = 0.5 * (lo + hi)
e = p_only_response(ku, 2000)
crossings = np.where(np.diff(np.sign(e[1000:])) != 0)[0]
tu = 2 * np.mean(np.diff(crossings)) * DT
print(f"ultimate gain Ku = {ku:.1f}, period Tu = {tu:.3f} s")

###############################################################################
# Classic PID rule: kp = 0.6 Ku, ki = 1.2 Ku / Tu, kd = 0.075 Ku Tu

zn = PidGains(kp=0.6 * ku, ki=1.2 * ku / tu, kd=0.075 * ku * tu)
print(f"ZN seed: kp={zn.kp:.1f} ki={zn.ki:.0f} kd={zn.kd:.3f}")


def evaluate(g):
    ll = LowLevel(g, TAU)
    th = []
    for _ in range(300):
        ll.step(0.2, DT)
        th.append(ll.motor.theta_m)
    overshoot = (max(th) - 0.2) / 0.2
    ll = LowLevel(g, TAU)
    err = [ll.step(math.sin(2 * math.pi * k * DT), DT)[0] for k in range(1, 1001)]
    return overshoot, math.sqrt(np.mean(np.square(err[-500:])))


for name, g in (("ZN seed", zn), ("ki x0.6", PidGains(kp=zn.kp, ki=0.6 * zn.ki, kd=zn.kd)), ("default", PidGains())):
    ov, rms = evaluate(g)
    print(f"{name:<8} kp={g.kp:5.1f} ki={g.ki:5.0f} kd={g.kd:.3f}  step overshoot {100 * ov:5.1f}%  "
          f"1 Hz RMS {100 * rms:.2f}%")
