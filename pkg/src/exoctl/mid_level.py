"""Per-step ranked vote over classifier confidence and the terrain-gated
assistance reference."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .classifier import Prediction
from .domain import DS, IS, LG, Condition, ControllerConfig, TerrainClass


class StepVote(NamedTuple):
    c_is: float = 0.0
    c_lg: float = 0.0
    c_ds: float = 0.0
    n_is: int = 0
    n_lg: int = 0
    n_ds: int = 0

    @property
    def counters(self) -> tuple[float, float, float]:
        return (self.c_is, self.c_lg, self.c_ds)


EMPTY_VOTE = StepVote()


def accumulate_vote(vote: StepVote, p: Prediction) -> StepVote:
    if not 0.0 < p.confidence <= 1.0:
        raise ValueError(f"confidence {p.confidence} outside (0, 1]")
    if p.terrain is IS:
        return vote._replace(c_is=vote.c_is + p.confidence, n_is=vote.n_is + 1)
    if p.terrain is LG:
        return vote._replace(c_lg=vote.c_lg + p.confidence, n_lg=vote.n_lg + 1)
    return vote._replace(c_ds=vote.c_ds + p.confidence, n_ds=vote.n_ds + 1)


def latch_class(vote: StepVote, prev: TerrainClass) -> TerrainClass:
    """Class with the largest summed confidence; ties and empty votes keep ``prev``."""
    counters = vote.counters
    best = max(counters)
    winners = [c for c, v in zip((IS, LG, DS), counters) if v == best]
    if best <= 0.0 or len(winners) > 1:
        return prev
    return winners[0]


class ActiveAssistance(NamedTuple):
    latched_class: TerrainClass
    amplitude: float
    since_step: float = 0.0


def select_amplitude(terrain: TerrainClass, condition: Condition, cfg: ControllerConfig) -> float:
    if condition is Condition.EXO_OFF:
        return 0.0
    if condition is Condition.VISION_OFF:
        return cfg.m_lg
    return cfg.amplitude(terrain)


def reference_point(phase: float, active: ActiveAssistance, condition: Condition, clamp: bool = True) -> float:
    """Assistance motor position for the current gait phase.

    ``amplitude * sin(phase - pi)``; with ``clamp`` the negative half (cable
    payout, not deliverable by a pulling tendon) is cut to zero.
    """
    if condition is Condition.EXO_OFF:
        return 0.0
    value = active.amplitude * math.sin(phase - math.pi)
    if clamp and value < 0.0:
        return 0.0
    return value


def smooth_reference(times: Sequence[float], values: Sequence[float], query: Sequence[float] | float) -> np.ndarray:
    """Resample mid-level reference knots with a C2 cubic spline.

    Not-a-knot end conditions, so knots lying on one cubic are reproduced
    exactly.  Needs at least four knots.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 4:
        raise ValueError("cubic interpolation needs at least 4 knots")
    return CubicSpline(times, values, bc_type="not-a-knot")(np.asarray(query, dtype=float))


class ReferenceInterpolator:
    """Causal C1 cubic (Hermite, finite-difference slopes) between the two
    most recent complete knot intervals, for a low-level loop running
    ``substeps`` times faster than the mid-level.

    Introduces a one-knot delay when ``substeps > 1``; with ``substeps == 1``
    the newest knot is returned as-is.
    """

    def __init__(self, substeps: int):
        self.substeps = substeps
        self.knots: list[float] = []

    def push(self, value: float) -> list[float]:
        """Add a knot and return the ``substeps`` low-level samples for this tick."""
        if self.substeps == 1:
            return [value]
        k = self.knots
        k.append(value)
        if len(k) > 4:
            del k[0]
        if len(k) < 3:
            return [k[-1]] * self.substeps
        # interval [k[-3], k[-2]] with slopes from centred differences
        p0 = k[-4] if len(k) == 4 else k[-3]
        p1, p2, p3 = k[-3], k[-2], k[-1]
        m1 = 0.5 * (p2 - p0)
        m2 = 0.5 * (p3 - p1)
        out = []
        for i in range(1, self.substeps + 1):
            s = i / self.substeps
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            out.append(h00 * p1 + h10 * m1 + h01 * p2 + h11 * m2)
        return out


class MidLevel:
    """One leg's vote, latched class and reference generator."""

    def __init__(self, cfg: ControllerConfig, condition: Condition, initial: TerrainClass = LG):
        self.cfg = cfg
        self.condition = condition
        self.vote = EMPTY_VOTE
        self.active = ActiveAssistance(initial, select_amplitude(initial, condition, cfg))

    def observe(self, p: Prediction) -> None:
        self.vote = accumulate_vote(self.vote, p)

    def on_step_event(self) -> tuple[StepVote, ActiveAssistance]:
        """Latch the class for the coming step and reset the vote.

        Returns the vote that was consumed and the new active assistance.
        """
        consumed = self.vote
        latched = latch_class(consumed, self.active.latched_class)
        self.active = ActiveAssistance(latched, select_amplitude(latched, self.condition, self.cfg))
        self.vote = EMPTY_VOTE
        return consumed, self.active

    def reference(self, phase: float, step_event: bool) -> float:
        # the step boundary is the zero-torque switching instant by definition
        if step_event:
            phase = 0.0
        return reference_point(phase, self.active, self.condition, self.cfg.clamp_reference)
