"""Engineered gas-exchange traces with known metabolic power."""

import numpy as np

from exoctl.metrics import PERONNET_K1, PERONNET_K2, GasSample

RQ = 0.85


def constant_power_gas(power_w, t0, t1, step=5.0, rq=RQ):
    # VO2/VCO2 flows (mL/min) that give exactly power_w with the default coefficients
    vo2 = power_w * 60.0 / (PERONNET_K1 + PERONNET_K2 * rq)
    return [GasSample(float(t), vo2, rq * vo2) for t in np.arange(t0, t1, step)]


def session_gas(baseline_w, walking_w, duration, standing=180.0, step=5.0):
    """Quiet standing for ``standing`` s before t=0, then walking until ``duration``."""
    return constant_power_gas(baseline_w, -standing, 0.0, step) + constant_power_gas(walking_w, 0.0, duration + step, step)


def saving_pair(saving, baseline_w=95.0, exo_off_net_w=320.0):
    """(exo-off walking power, assisted walking power) whose net ratio gives ``saving``."""
    return baseline_w + exo_off_net_w, baseline_w + exo_off_net_w * (1.0 + saving)
