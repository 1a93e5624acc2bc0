"""Evaluation quantities: classification accuracy, swing peak velocity,
SPARC smoothness and Cost of Transport from gas exchange."""

from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .domain import TERRAINS, TWO_PI, TerrainClass

G = 9.81  # m/s^2

# Peronnet & Massicotte (1991), non-protein table, linear form:
# energy (J) = 16.89 * VO2 (mL) + 4.84 * VCO2 (mL)
PERONNET_K1 = 16.89
PERONNET_K2 = 4.84


class SeriesTooShort(ValueError):
    pass


class WindowTooShort(ValueError):
    pass


class GasParseError(ValueError):
    pass


class NegativeNetPowerWarning(UserWarning):
    """Standing baseline exceeds the activity power; the CoT is returned negative."""


# --- steps and accuracy -----------------------------------------------------------


@dataclass
class StepRecord:
    step_idx: int
    true_terrain: TerrainClass
    latched_class: TerrainClass
    is_transition: bool
    duration: float = 0.0
    peak_swing_velocity: float = math.nan
    hip_velocity_series: np.ndarray = field(default_factory=lambda: np.zeros(0))
    transition: str = ""  # boundary kind, e.g. "LG->IS", for transition steps


def accuracy_per_class(steps: Iterable[StepRecord]) -> dict[TerrainClass, float | None]:
    """TP / (TP + FP) per latched class; ``None`` for a class never latched.

    Pass the steady-state steps to get the per-class figures; transition
    steps are scored separately by :func:`transition_accuracy`.
    """
    tp = dict.fromkeys(TERRAINS, 0)
    fp = dict.fromkeys(TERRAINS, 0)
    for s in steps:
        if s.latched_class is s.true_terrain:
            tp[s.latched_class] += 1
        else:
            fp[s.latched_class] += 1
    return {c: (tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] else None) for c in TERRAINS}


def confusion_matrix(steps: Iterable[StepRecord]) -> np.ndarray:
    """Counts, rows = true class, columns = latched class, order IS/LG/DS."""
    m = np.zeros((3, 3), dtype=int)
    for s in steps:
        m[s.true_terrain.index, s.latched_class.index] += 1
    return m


def recall_per_class(steps: Iterable[StepRecord]) -> dict[TerrainClass, float | None]:
    """Fraction of each true class latched correctly (diagonal over row sum)."""
    m = confusion_matrix(steps)
    rows = m.sum(axis=1)
    return {c: (m[c.index, c.index] / rows[c.index] if rows[c.index] else None) for c in TERRAINS}


def transition_accuracy(steps: Iterable[StepRecord]) -> dict[str, float]:
    """Fraction latched correctly among transition steps, per boundary kind."""
    hit: dict[str, int] = defaultdict(int)
    total: dict[str, int] = defaultdict(int)
    for s in steps:
        if not s.is_transition:
            continue
        total[s.transition] += 1
        hit[s.transition] += s.latched_class is s.true_terrain
    return {k: hit[k] / total[k] for k in sorted(total)}


# --- kinematics --------------------------------------------------------------------


def swing_peak_velocity(step: StepRecord | Sequence[float]) -> float:
    """Largest hip angular velocity in the swing half of the step.

    The step's samples are mapped uniformly onto phase [0, 2pi); swing is the
    window (pi, 2pi), i.e. the second half of the step.
    """
    v = np.asarray(step.hip_velocity_series if isinstance(step, StepRecord) else step, dtype=float)
    if v.size == 0:
        raise ValueError("empty velocity series")
    phase = TWO_PI * np.arange(v.size) / v.size
    window = v[phase > math.pi]
    if window.size == 0:
        window = v[-1:]
    return float(window.max())


def sparc(
    velocity: Sequence[float],
    rate: float,
    fc: float = 10.0,
    amp_threshold: float = 0.05,
    padlevel: int = 4,
) -> float:
    """Spectral arc length of a speed profile (Balasubramanian et al., 2015).

    The magnitude spectrum (zero padded) is normalised by its maximum, cut at
    ``fc`` and then trimmed to the band where it exceeds ``amp_threshold``.
    Returns minus the arc length of that curve over normalised frequency;
    values closer to 0 mean smoother movement.
    """
    speed = np.abs(np.asarray(velocity, dtype=float))
    if speed.size < 32:
        raise SeriesTooShort(f"SPARC needs >= 32 samples, got {speed.size}")
    if not rate > 2.0 * fc:
        raise ValueError("rate must exceed 2 * fc")
    nfft = int(2 ** (math.ceil(math.log2(speed.size)) + padlevel))
    freq = np.arange(nfft) * rate / nfft
    mag = np.abs(np.fft.fft(speed, nfft))
    mag = mag / mag.max()
    keep = freq <= fc
    freq, mag = freq[keep], mag[keep]
    above = np.nonzero(mag >= amp_threshold)[0]
    lo, hi = above[0], above[-1]
    freq, mag = freq[lo : hi + 1], mag[lo : hi + 1]
    span = freq[-1] - freq[0]
    if span == 0.0:
        return 0.0
    df = np.diff(freq) / span
    dm = np.diff(mag)
    return float(-np.sum(np.sqrt(df * df + dm * dm)))


# --- metabolic cost ----------------------------------------------------------------


class GasSample(NamedTuple):
    t: float  # s
    vo2: float  # mL/min
    vco2: float  # mL/min


def read_gas_csv(path: str | Path) -> list[GasSample]:
    """Gas CSV with header ``t_s,vo2_ml_per_min,vco2_ml_per_min``.

    Samples with ``t_s < 0`` are the standing baseline recorded before the walk.
    """
    out: list[GasSample] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"t_s", "vo2_ml_per_min", "vco2_ml_per_min"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise GasParseError(f"{path}: header must contain {sorted(need)}")
        for n, row in enumerate(reader, start=2):
            try:
                s = GasSample(float(row["t_s"]), float(row["vo2_ml_per_min"]), float(row["vco2_ml_per_min"]))
            except (TypeError, ValueError) as exc:
                raise GasParseError(f"{path}:{n}: {exc}") from exc
            if not all(math.isfinite(x) for x in s) or s.vo2 < 0 or s.vco2 < 0:
                raise GasParseError(f"{path}:{n}: values must be finite and vo2, vco2 >= 0")
            if out and s.t < out[-1].t:
                raise GasParseError(f"{path}:{n}: time goes backwards")
            out.append(s)
    return out


def write_gas_csv(samples: Iterable[GasSample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "vo2_ml_per_min", "vco2_ml_per_min"])
        for s in samples:
            w.writerow([repr(float(s.t)), repr(float(s.vo2)), repr(float(s.vco2))])


def metabolic_power(vo2: float, vco2: float, k1: float = PERONNET_K1, k2: float = PERONNET_K2) -> float:
    """Instantaneous power (W) from flows in mL/min."""
    return (k1 * vo2 + k2 * vco2) / 60.0


def _mean_power(gas: Sequence[GasSample], k1: float, k2: float) -> float:
    vo2 = np.array([s.vo2 for s in gas], dtype=float)
    vco2 = np.array([s.vco2 for s in gas], dtype=float)
    return float(np.mean((k1 * vo2 + k2 * vco2) / 60.0))


def baseline_power(
    gas: Sequence[GasSample], k1: float = PERONNET_K1, k2: float = PERONNET_K2, min_window: float = 60.0
) -> float:
    """Mean metabolic power (W) over a quiet-standing window of >= ``min_window`` s."""
    if len(gas) < 2 or gas[-1].t - gas[0].t < min_window:
        raise WindowTooShort(f"standing window must span >= {min_window} s")
    return _mean_power(gas, k1, k2)


def cost_of_transport(
    gas: Sequence[GasSample],
    standing_baseline_power: float,
    mass: float,
    distance: float,
    duration: float,
    k1: float = PERONNET_K1,
    k2: float = PERONNET_K2,
) -> float:
    """Net metabolic power over body weight times mean speed (dimensionless)."""
    if not duration > 0:
        raise ValueError("duration must be > 0")
    if not distance > 0:
        raise ValueError("distance must be > 0")
    if not mass > 0:
        raise ValueError("mass must be > 0")
    if not gas:
        raise ValueError("no gas samples in the walking window")
    net = _mean_power(gas, k1, k2) - standing_baseline_power
    if net < 0:
        warnings.warn(f"net metabolic power {net:.3f} W is negative", NegativeNetPowerWarning, stacklevel=2)
    return net / (mass * G * (distance / duration))


def split_gas(gas: Sequence[GasSample]) -> tuple[list[GasSample], list[GasSample]]:
    """(standing samples with t < 0, walking samples with t >= 0)."""
    return [s for s in gas if s.t < 0], [s for s in gas if s.t >= 0]


def window(gas: Sequence[GasSample], t_start: float, t_end: float) -> list[GasSample]:
    return [s for s in gas if t_start <= s.t < t_end]


def segment_cost_of_transport(
    gas: Sequence[GasSample],
    segments: Sequence[Mapping],
    standing_baseline_power: float,
    mass: float,
    k1: float = PERONNET_K1,
    k2: float = PERONNET_K2,
) -> dict[str, float]:
    """CoT per terrain, pooling all path segments of the same terrain.

    ``segments`` carry ``terrain``, ``t_start``, ``t_end`` and ``distance_m``
    (the run manifest's segment windows).  Pooled power is the time-weighted
    mean over the terrain's windows.
    """
    energy: dict[str, float] = defaultdict(float)
    time: dict[str, float] = defaultdict(float)
    dist: dict[str, float] = defaultdict(float)
    for seg in segments:
        t0, t1 = float(seg["t_start"]), float(seg["t_end"])
        samples = window(gas, t0, t1)
        if not samples or not t1 > t0:
            continue
        key = str(seg["terrain"])
        energy[key] += _mean_power(samples, k1, k2) * (t1 - t0)
        time[key] += t1 - t0
        dist[key] += float(seg["distance_m"])
    out = {}
    for key in (c.value for c in TERRAINS):
        if time[key] > 0:
            net = energy[key] / time[key] - standing_baseline_power
            if net < 0:
                warnings.warn(f"{key}: net metabolic power {net:.3f} W is negative", NegativeNetPowerWarning, stacklevel=2)
            out[key] = net / (mass * G * (dist[key] / time[key]))
    return out


def relative_saving(reference: float, other: float) -> float:
    """(other - reference) / reference; negative means ``other`` is cheaper."""
    return (other - reference) / reference


def mean_se(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(n)); SE is 0 for a single value."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
