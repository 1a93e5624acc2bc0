"""Synthetic closed loop: terrain-dependent hip kinematics along a walking
path, a noisy angle sensor, and the fixed-step dual-rate scheduler that runs
estimator, vote, reference and motor loop for both legs.

A *step* here is one hip-angle cycle of a leg, starting at maximum hip
extension.  The path is a list of segments; each segment is a number of steps
on one terrain at a given cadence (cycles/s) and stride (m per step).
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .adaptive_oscillator import GaitPhaseEstimator, NonFiniteInput
from .classifier import (
    ConfusionSpec,
    Prediction,
    PredictionSource,
    SimulatedClassifier,
    VisionContext,
    paper_fig_c,
)
from .domain import DS, IS, LG, TWO_PI, Condition, ControllerConfig, TerrainClass, boundary_label
from .low_level import LowLevel
from .mid_level import MidLevel, ReferenceInterpolator


class ScenarioError(ValueError):
    pass


class SimulationDiverged(RuntimeError):
    pass


# --- kinematics ---------------------------------------------------------------


@dataclass(frozen=True)
class GaitProfile:
    """Hip flexion over one cycle as an offset plus three harmonics.

    ``theta(chi) = a0 + sum_n a[n] sin((n+1) chi + phase_offsets[n])`` with
    ``chi = 0`` at maximum extension.
    """

    terrain: TerrainClass
    a0: float
    a: tuple[float, float, float]
    phase_offsets: tuple[float, float, float]

    def angle(self, chi: float) -> float:
        a, p = self.a, self.phase_offsets
        return (
            self.a0
            + a[0] * math.sin(chi + p[0])
            + a[1] * math.sin(2.0 * chi + p[1])
            + a[2] * math.sin(3.0 * chi + p[2])
        )

    def slope(self, chi: float) -> float:
        """d theta / d chi."""
        a, p = self.a, self.phase_offsets
        return (
            a[0] * math.cos(chi + p[0])
            + 2.0 * a[1] * math.cos(2.0 * chi + p[1])
            + 3.0 * a[2] * math.cos(3.0 * chi + p[2])
        )

    def peak_flexion(self, n: int = 4096) -> float:
        chi = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return float(max(self.angle(float(c)) for c in chi))


# Synthesized shapes, not measured data: one extension minimum at chi = 0, a
# single flexion peak, and peak flexion ordered IS > LG > DS (about 64, 33 and
# 27 deg).  Sharing the harmonic phases keeps the three shapes alike.
_PHASES = (4.1673, 5.4549, 0.6337)
_r = math.radians
PROFILE_PRESETS: dict[TerrainClass, GaitProfile] = {
    LG: GaitProfile(LG, _r(10.0), (_r(20.0), _r(5.0), _r(1.5)), _PHASES),
    IS: GaitProfile(IS, _r(27.0), (_r(32.0), _r(8.0), _r(2.4)), _PHASES),
    DS: GaitProfile(DS, _r(9.0), (_r(15.0), _r(3.75), _r(1.1)), _PHASES),
}


def synth_hip_angle(profile: GaitProfile, cycle_phase: float, noise_sigma: float = 0.0, rng=None) -> float:
    """Profile value at ``cycle_phase`` plus zero-mean Gaussian sensor noise (rad)."""
    value = profile.angle(cycle_phase)
    if noise_sigma > 0.0:
        value += noise_sigma * float(rng.standard_normal())
    return value


# --- scenario -------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    terrain: TerrainClass
    n_steps: int
    cadence: float  # cycles/s
    stride: float  # m per step

    @property
    def distance(self) -> float:
        return self.n_steps * self.stride


DEFAULT_CADENCE = {LG: 0.9, IS: 0.75, DS: 0.85}
DEFAULT_STRIDE = {LG: 1.3, IS: 0.26, DS: 0.26}
LEGS = ("right", "left")
LEG_OFFSET = {"right": 0.0, "left": 0.5}


def segment(terrain: TerrainClass | str, *, steps: int | None = None, meters: float | None = None,
            cadence: float | None = None, stride: float | None = None) -> Segment:
    terrain = TerrainClass.parse(terrain)
    cadence = DEFAULT_CADENCE[terrain] if cadence is None else float(cadence)
    stride = DEFAULT_STRIDE[terrain] if stride is None else float(stride)
    if (steps is None) == (meters is None):
        raise ScenarioError("give exactly one of steps or meters for a segment")
    if meters is not None:
        if not meters > 0:
            raise ScenarioError("segment extent must be > 0")
        steps = max(1, round(meters / stride))
    return Segment(terrain, int(steps), cadence, stride)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    segments: tuple[Segment, ...]
    condition: Condition = Condition.VISION_ON
    subject_mass: float = 60.9  # kg, cohort mean weight of the walking trials
    seed: int = 0
    noise_sigma: float = math.radians(0.5)
    classifier: ConfusionSpec = field(default_factory=paper_fig_c, compare=False)
    legs: tuple[str, ...] = LEGS

    def validate(self, cfg: ControllerConfig) -> ScenarioSpec:
        if not self.segments:
            raise ScenarioError("scenario has no segments")
        lo, hi = (w / TWO_PI for w in cfg.omega_bounds)
        for i, seg in enumerate(self.segments):
            if seg.n_steps < 2 and 0 < i < len(self.segments) - 1:
                raise ScenarioError(f"segment {i}: interior segments need >= 2 steps")
            if seg.n_steps < 1:
                raise ScenarioError(f"segment {i}: extent must be > 0")
            if not lo < seg.cadence < hi:
                raise ScenarioError(f"segment {i}: cadence {seg.cadence} outside ({lo:.3f}, {hi:.3f}) Hz")
            if not seg.stride > 0:
                raise ScenarioError(f"segment {i}: stride must be > 0")
        if not self.subject_mass > 0:
            raise ScenarioError("subject_mass must be > 0")
        if not self.noise_sigma >= 0:
            raise ScenarioError("noise_sigma must be >= 0")
        if not self.legs or any(leg not in LEGS for leg in self.legs) or len(set(self.legs)) != len(self.legs):
            raise ScenarioError(f"legs must be a non-empty subset of {LEGS}")
        return self

    @property
    def n_steps(self) -> int:
        return sum(s.n_steps for s in self.segments)

    @property
    def distance(self) -> float:
        return sum(s.distance for s in self.segments)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "condition": self.condition.value,
            "subject_mass_kg": self.subject_mass,
            "seed": self.seed,
            "noise_sigma_deg": math.degrees(self.noise_sigma),
            "legs": list(self.legs),
            "segments": [
                {"terrain": s.terrain.value, "extent_steps": s.n_steps, "cadence_hz": s.cadence, "stride_m": s.stride}
                for s in self.segments
            ],
            "classifier": self.classifier.to_dict(),
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def paper_path(condition: Condition = Condition.VISION_ON, seed: int = 0) -> ScenarioSpec:
    """Level-ground lead-in, 88 stairs up, 150 m level ground, 88 stairs down, lead-out."""
    return ScenarioSpec(
        name="paper-path",
        segments=(
            segment(LG, meters=20.0),
            segment(IS, steps=88),
            segment(LG, meters=150.0),
            segment(DS, steps=88),
            segment(LG, meters=20.0),
        ),
        condition=condition,
        seed=seed,
    )


def level_ground(seconds: float = 10.0, condition: Condition = Condition.VISION_ON, seed: int = 0) -> ScenarioSpec:
    steps = max(2, math.ceil(seconds * DEFAULT_CADENCE[LG]))
    return ScenarioSpec("level-ground", (segment(LG, steps=steps),), condition=condition, seed=seed)


def calibration_path(blocks: int = 501, condition: Condition = Condition.VISION_ON, seed: int = 0,
                     cadence: float = 1.25) -> ScenarioSpec:
    """Repeated LG/IS/LG/DS blocks of 3/8/3/6 steps (20 per block).

    Every boundary kind occurs once per block.  Each segment's first and last
    step are transition steps, leaving steady-state steps IS:DS:LG = 6:4:2,
    weighted towards the classes whose accuracy estimate is noisiest.
    Single (reference) leg and a brisk cadence keep the 10^4-step run short;
    the default leaves a small margin over 10^4 logged steps after warm-up.
    """
    pattern = [(LG, 3), (IS, 8), (LG, 3), (DS, 6)]
    segs = [segment(t, steps=n, cadence=cadence) for _ in range(blocks) for t, n in pattern]
    segs.append(segment(LG, steps=3, cadence=cadence))
    return ScenarioSpec("calibration", tuple(segs), condition=condition, seed=seed, legs=("right",))


SCENARIO_PRESETS = {
    "paper-path": paper_path,
    "level-ground": level_ground,
    "calibration": calibration_path,
}


def scenario_from_dict(raw: Mapping[str, Any]) -> ScenarioSpec:
    raw = dict(raw)
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in SCENARIO_PRESETS:
            raise ScenarioError(f"unknown scenario preset {preset!r}")
        base = SCENARIO_PRESETS[preset]()
    else:
        base = None
    try:
        if "segments" in raw:
            segs = []
            for i, s in enumerate(raw.pop("segments")):
                s = dict(s)
                segs.append(
                    segment(
                        s.pop("terrain"),
                        steps=s.pop("extent_steps", None),
                        meters=s.pop("extent_m", None),
                        cadence=s.pop("cadence_hz", None),
                        stride=s.pop("stride_m", None),
                    )
                )
                if s:
                    raise ScenarioError(f"segment {i}: unknown keys {sorted(s)}")
            segs = tuple(segs)
        elif base is not None:
            segs = base.segments
        else:
            raise ScenarioError("scenario needs segments or a preset")
        kwargs: dict[str, Any] = {"segments": segs}
        kwargs["name"] = str(raw.pop("name", base.name if base else "scenario"))
        if "condition" in raw:
            kwargs["condition"] = Condition.parse(raw.pop("condition"))
        if "subject_mass_kg" in raw:
            kwargs["subject_mass"] = float(raw.pop("subject_mass_kg"))
        if "seed" in raw:
            kwargs["seed"] = int(raw.pop("seed"))
        if "noise_sigma_deg" in raw:
            kwargs["noise_sigma"] = math.radians(float(raw.pop("noise_sigma_deg")))
        if "noise_sigma_rad" in raw:
            kwargs["noise_sigma"] = float(raw.pop("noise_sigma_rad"))
        if "legs" in raw:
            kwargs["legs"] = tuple(raw.pop("legs"))
        if "classifier" in raw:
            kwargs["classifier"] = ConfusionSpec.from_dict(raw.pop("classifier") or {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad scenario entry: {exc}") from exc
    if raw:
        raise ScenarioError(f"unknown scenario keys: {sorted(raw)}")
    if base is not None:
        return replace(base, **kwargs)
    return ScenarioSpec(**kwargs)


def load_scenario(path_or_preset: str | Path) -> ScenarioSpec:
    """A preset name or a YAML scenario file."""
    key = str(path_or_preset)
    if key in SCENARIO_PRESETS:
        return SCENARIO_PRESETS[key]()
    path = Path(path_or_preset)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario file is not valid YAML: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise ScenarioError("scenario file must hold a mapping")
    return scenario_from_dict(raw)


# --- path schedule ----------------------------------------------------------------


class StepSchedule:
    """Per-step truth along the path: terrain, cadence, transition label.

    Boundary steps (the last step before and the first after a terrain change)
    carry the boundary label, e.g. ``"LG->IS"``.  Kinematics and cadence are
    blended linearly across those two steps.
    """

    def __init__(self, segments: Sequence[Segment]):
        self.segments = tuple(segments)
        terrain, cadence, stride, seg_idx = [], [], [], []
        for i, seg in enumerate(self.segments):
            terrain += [seg.terrain] * seg.n_steps
            cadence += [seg.cadence] * seg.n_steps
            stride += [seg.stride] * seg.n_steps
            seg_idx += [i] * seg.n_steps
        self.terrain = terrain
        self.cadence = cadence
        self.stride = stride
        self.segment_index = seg_idx
        self.n = len(terrain)
        self.transition: list[str | None] = [None] * self.n
        # (first step of new segment, label) for each change of terrain
        self.boundaries: list[tuple[int, str]] = []
        start = 0
        for a, b in zip(self.segments, self.segments[1:]):
            start += a.n_steps
            if a.terrain is b.terrain:
                continue
            label = boundary_label(a.terrain, b.terrain)
            self.boundaries.append((start, label))
            self.transition[start - 1] = label
            self.transition[start] = label
        self._blend: dict[int, int] = {}
        for b, _ in self.boundaries:
            self._blend[b - 1] = b
            self._blend[b] = b

    def step_at(self, pos: float) -> int:
        return min(max(int(math.floor(pos)), 0), self.n - 1)

    def mix(self, pos: float) -> tuple[TerrainClass, TerrainClass, float]:
        """(from terrain, to terrain, weight of 'to') at path position ``pos``."""
        k = self.step_at(pos)
        b = self._blend.get(k)
        if b is None:
            t = self.terrain[k]
            return t, t, 0.0
        w = min(max((pos - (b - 1)) / 2.0, 0.0), 1.0)
        return self.terrain[b - 1], self.terrain[b], w

    def cadence_at(self, pos: float) -> float:
        k = self.step_at(pos)
        b = self._blend.get(k)
        if b is None:
            return self.cadence[k]
        w = min(max((pos - (b - 1)) / 2.0, 0.0), 1.0)
        return (1.0 - w) * self.cadence[b - 1] + w * self.cadence[b]


def _rate_ratio(control_rate: float, vision_rate: float) -> tuple[int, int]:
    r = Fraction(vision_rate).limit_denominator(10**6) / Fraction(control_rate).limit_denominator(10**6)
    return r.numerator, r.denominator


def vision_tick_due(i: int, control_rate: float, vision_rate: float) -> bool:
    """True if control tick ``i`` (i >= 1, time i/control_rate) carries a vision frame.

    Frames sit on the exact vision-rate grid t = m/vision_rate and each is
    handled at the first control tick at or after it; frame 0 (t = 0) goes to
    tick 1, the first tick of the run.
    """
    if i < 1:
        return False
    p, q = _rate_ratio(control_rate, vision_rate)
    return i == 1 or (i * p) // q > ((i - 1) * p) // q


# --- run ---------------------------------------------------------------------------

TICK_COLUMNS = (
    "tick", "t", "leg", "gait_pos", "true_terrain", "theta_meas", "hip_velocity", "theta_hat", "omega",
    "phi_gait", "step_event", "theta_r", "theta_ref", "theta_m", "error", "omega_cmd", "active_class",
)
STEP_COLUMNS = (
    "leg", "step_idx", "t_start", "t_latch", "c_is", "c_lg", "c_ds", "n_is", "n_lg", "n_ds",
    "latched_class", "amplitude", "path_step", "true_terrain", "transition",
)
PREDICTION_COLUMNS = ("t", "class", "confidence", "true_terrain", "path_step", "transition")


@dataclass
class RunArtifact:
    scenario: ScenarioSpec
    config: ControllerConfig
    ticks: dict[str, list] | None
    steps: list[dict]
    predictions: list[dict]
    segments: list[dict]
    duration: float
    n_ticks: int
    n_vision: int

    @property
    def distance(self) -> float:
        return self.scenario.distance

    def tick_array(self, column: str, leg: str | None = None) -> np.ndarray:
        if self.ticks is None:
            raise ValueError("run was made without tick recording")
        col = np.asarray(self.ticks[column])
        if leg is None:
            return col
        return col[np.asarray(self.ticks["leg"]) == leg]


class _Leg:
    def __init__(self, name: str, cfg: ControllerConfig, condition: Condition, theta0: float):
        self.name = name
        self.offset = LEG_OFFSET[name]
        # first measurement arrives on tick 1
        self.estimator = GaitPhaseEstimator(cfg, theta0, t0=cfg.dt)
        self.mid = MidLevel(cfg, condition)
        self.low = LowLevel(cfg.pid, cfg.motor_tau)
        self.interp = ReferenceInterpolator(cfg.low_level_substeps)
        self.n_events = 0
        self.last_event_t: float | None = None
        self.last_event_pos: float | None = None


def run_scenario(
    spec: ScenarioSpec,
    cfg: ControllerConfig,
    classifier: PredictionSource | None = None,
    record_ticks: bool = True,
) -> RunArtifact:
    """Run the closed loop over the whole path.

    Every control tick: advance the gait clock, synthesize each leg's hip
    angle, run the estimator, latch the class on step events, build the
    reference and step the motor loop.  Every vision tick the classifier sees
    the terrain that was under the camera ``latency`` seconds earlier.
    """
    spec.validate(cfg)
    schedule = StepSchedule(spec.segments)
    dt = cfg.dt
    seeds = np.random.SeedSequence([int(spec.seed), int(spec.classifier.seed)]).spawn(2)
    noise_rng = np.random.default_rng(seeds[0])
    if classifier is None:
        classifier = SimulatedClassifier(replace(spec.classifier, seed=int(seeds[1].generate_state(1)[0])))
    latency = spec.classifier.latency

    profiles = PROFILE_PRESETS
    first = profiles[schedule.terrain[0]]
    legs = [_Leg(name, cfg, spec.condition, first.angle(TWO_PI * ((-LEG_OFFSET[name]) % 1.0))) for name in spec.legs]

    ticks: dict[str, list] | None = {c: [] for c in TICK_COLUMNS} if record_ticks else None
    steps: list[dict] = []
    predictions: list[dict] = []
    pos = 0.0
    i = 0
    n_vision = 0
    end = float(schedule.n)
    substeps = cfg.low_level_substeps
    sub_dt = dt / substeps
    noise = spec.noise_sigma
    lat_ticks = int(round(latency / dt))
    # path position lat_ticks ticks ago is pos_delay[0]; before the start it is 0
    pos_delay: deque[float] = deque([0.0] * (lat_ticks + 1), maxlen=lat_ticks + 1)
    vp, vq = _rate_ratio(cfg.control_rate, cfg.vision_rate)
    seg_bounds: list[list[float]] = [[math.nan, math.nan] for _ in schedule.segments]

    while pos < end:
        i += 1
        t = i * dt
        pos += dt * schedule.cadence_at(pos)
        pos_delay.append(pos)
        k_now = schedule.step_at(pos)
        seg_i = schedule.segment_index[k_now]
        if math.isnan(seg_bounds[seg_i][0]):
            seg_bounds[seg_i][0] = t - dt
        seg_bounds[seg_i][1] = t

        # vision task: the frame shows the path as it was `latency` seconds ago
        new_preds: list[Prediction] = []
        if i == 1 or (i * vp) // vq > ((i - 1) * vp) // vq:
            k = schedule.step_at(pos_delay[0])
            ctx = VisionContext(t, schedule.terrain[k], schedule.transition[k], k)
            new_preds = classifier.on_vision_tick(ctx)
            n_vision += 1
            for p in new_preds:
                predictions.append({
                    "t": p.t, "class": p.terrain.value, "confidence": p.confidence,
                    "true_terrain": schedule.terrain[k].value, "path_step": k,
                    "transition": schedule.transition[k] or "",
                })

        # control task
        ta, tb, w = schedule.mix(pos)
        pa, pb = profiles[ta], profiles[tb]
        cad = schedule.cadence_at(pos)
        for leg in legs:
            leg_pos = pos - leg.offset
            chi = TWO_PI * (leg_pos % 1.0)
            if w == 0.0:
                clean = pa.angle(chi)
                vel = TWO_PI * cad * pa.slope(chi)
            else:
                clean = (1.0 - w) * pa.angle(chi) + w * pb.angle(chi)
                slope = (1.0 - w) * pa.slope(chi) + w * pb.slope(chi)
                vel = TWO_PI * cad * slope + (pb.angle(chi) - pa.angle(chi)) * cad / 2.0
            theta = clean + noise * noise_rng.standard_normal() if noise > 0 else clean
            try:
                sample = leg.estimator.update(theta, dt)
            except NonFiniteInput as exc:
                raise SimulationDiverged(f"non-finite hip angle on {leg.name} leg at t={t:.3f}: {exc}") from exc
            except (ValueError, OverflowError) as exc:
                # math.sin/cos of an infinite phase: the oscillator has blown up
                raise SimulationDiverged(f"estimator diverged on {leg.name} leg at t={t:.3f}: {exc}") from exc
            mid = leg.mid
            for p in new_preds:
                mid.observe(p)
            if sample.step_event:
                consumed, active = mid.on_step_event()
                row = {
                    "leg": leg.name, "step_idx": leg.n_events,
                    "t_start": leg.last_event_t if leg.last_event_t is not None else math.nan,
                    "t_latch": t,
                    "c_is": consumed.c_is, "c_lg": consumed.c_lg, "c_ds": consumed.c_ds,
                    "n_is": consumed.n_is, "n_lg": consumed.n_lg, "n_ds": consumed.n_ds,
                    "latched_class": active.latched_class.value, "amplitude": active.amplitude,
                    "path_step": -1, "true_terrain": "", "transition": "",
                }
                if leg.last_event_pos is not None:
                    # the step that just ended, attributed by its start
                    j = round(leg.last_event_pos)
                    if 0 <= j < schedule.n:
                        row["path_step"] = j
                        row["true_terrain"] = schedule.terrain[j].value
                        row["transition"] = schedule.transition[j] or ""
                steps.append(row)
                leg.n_events += 1
                leg.last_event_t = t
                leg.last_event_pos = leg_pos
            theta_r = mid.reference(sample.phi_gait, sample.step_event)
            error = cmd = 0.0
            ref = theta_r
            for ref in leg.interp.push(theta_r):
                error, cmd = leg.low.step(ref, sub_dt)
            theta_m = leg.low.motor.theta_m
            if not (math.isfinite(sample.omega) and math.isfinite(theta_m) and math.isfinite(sample.phi_gait)):
                raise SimulationDiverged(f"NaN in control loop on {leg.name} leg at t={t:.3f}")
            if ticks is not None:
                ticks["tick"].append(i)
                ticks["t"].append(t)
                ticks["leg"].append(leg.name)
                ticks["gait_pos"].append(leg_pos)
                ticks["true_terrain"].append(schedule.terrain[schedule.step_at(leg_pos)].value)
                ticks["theta_meas"].append(theta)
                ticks["hip_velocity"].append(vel)
                ticks["theta_hat"].append(sample.theta_hat)
                ticks["omega"].append(sample.omega)
                ticks["phi_gait"].append(sample.phi_gait)
                ticks["step_event"].append(int(sample.step_event))
                ticks["theta_r"].append(theta_r)
                ticks["theta_ref"].append(ref)
                ticks["theta_m"].append(theta_m)
                ticks["error"].append(error)
                ticks["omega_cmd"].append(cmd)
                ticks["active_class"].append(mid.active.latched_class.value)

    segments = [
        {
            "index": n, "terrain": s.terrain.value, "n_steps": s.n_steps, "distance_m": s.distance,
            "t_start": seg_bounds[n][0], "t_end": seg_bounds[n][1],
        }
        for n, s in enumerate(schedule.segments)
    ]
    return RunArtifact(
        scenario=spec, config=cfg, ticks=ticks, steps=steps, predictions=predictions,
        segments=segments, duration=i * dt, n_ticks=i, n_vision=n_vision,
    )
