"""
From gait phase to motor position
=================================

The mid-level controller turns phase into an assistance reference
``M * sin(phase - pi)`` clamped at zero, with ``M`` set by the latched
terrain.  A PID loop drives the cable motor to follow it.
"""

import math

import numpy as np

from exoctl import ControllerConfig, LowLevel
from exoctl.domain import IS, LG, TWO_PI, Condition
from exoctl.mid_level import ActiveAssistance, reference_point, smooth_reference

cfg = ControllerConfig()
dt = cfg.dt

###############################################################################
# Two strides, level ground then stairs.  The amplitude changes at phase 0,
# where the reference is already 0, so the switch is continuous.

f = 0.9
t = np.arange(1, int(2 / f / dt) + 1) * dt
phase = (TWO_PI * f * t) % TWO_PI
amp = [ActiveAssistance(LG, cfg.m_lg) if x < 1 / f else ActiveAssistance(IS, cfg.m_is) for x in t]
ref = np.array([reference_point(p, a, Condition.VISION_ON) for p, a in zip(phase, amp)])
print(f"peak reference stride 1: {ref[t < 1 / f].max():.3f} rad, stride 2: {ref[t >= 1 / f].max():.3f} rad")
k = np.argmin(np.abs(t - 1 / f))
print(f"reference around the switch: {np.round(ref[k - 2:k + 3], 4)}")

# cubic smoothing between 100 Hz knots, evaluated at 1 kHz
fine = np.arange(t[0], t[-1], 0.001)
smooth = smooth_reference(t, ref, fine)
print(f"spline passes through the knots: {np.abs(smooth_reference(t, ref, t) - ref).max():.1e}")
print(f"1 kHz samples {len(fine)}, range [{smooth.min():.3f}, {smooth.max():.3f}] rad")

###############################################################################
# Tracking with the default gains

ll = LowLevel(cfg.pid, cfg.motor_tau)
err = np.array([ll.step(r, dt)[0] for r in ref])
print(f"RMS tracking error: {math.sqrt(np.mean(err[len(err) // 2:] ** 2)):.4f} rad")
print(f"cable excursion at peak: {1000 * 0.0175 * ref.max():.1f} mm")
