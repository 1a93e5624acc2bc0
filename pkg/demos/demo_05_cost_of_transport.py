"""
Metabolic cost of transport
===========================

Gas exchange is converted to power with Peronnet-Massicotte coefficients,
the standing baseline is removed, and the net power is normalised by body
weight and walking speed.  The traces below are synthetic.
"""

import numpy as np

from exoctl.metrics import (
    GasSample,
    baseline_power,
    cost_of_transport,
    metabolic_power,
    relative_saving,
    segment_cost_of_transport,
)

print(f"1000 mL/min O2, 850 mL/min CO2 -> {metabolic_power(1000, 850):.1f} W")


def trace(watts, t0, t1, rq=0.85, noise=0.0, rng=None):
    vo2 = watts * 60 / (16.89 + 4.84 * rq)
    out = []
    for t in np.arange(t0, t1, 5.0):
        v = vo2 + (rng.normal(0, noise) if rng else 0.0)
        out.append(GasSample(float(t), v, rq * v))
    return out


rng = np.random.default_rng(3)
mass, distance, duration = 70.0, 250.0, 380.0
standing = trace(95, -180, 0, noise=15, rng=rng)
base = baseline_power(standing)
print(f"standing baseline {base:.1f} W")

###############################################################################
# Exo off versus assisted, same route and duration

off = trace(430, 0, duration, noise=15, rng=rng)
on = trace(378, 0, duration, noise=15, rng=rng)
a = cost_of_transport(off, base, mass, distance, duration)
b = cost_of_transport(on, base, mass, distance, duration)
print(f"CoT exo off {a:.3f}, assisted {b:.3f}, saving {100 * relative_saving(a, b):+.2f}%")

###############################################################################
# Per-terrain split: segments carry their own time window and distance

segments = [{"terrain": "LG", "t_start": 0, "t_end": 150, "distance_m": 170.0},
            {"terrain": "IS", "t_start": 150, "t_end": 270, "distance_m": 22.9},
            {"terrain": "DS", "t_start": 270, "t_end": 380, "distance_m": 22.9}]
for k, v in segment_cost_of_transport(on, segments, base, mass).items():
    print(f"{k}: CoT {v:.3f}")
