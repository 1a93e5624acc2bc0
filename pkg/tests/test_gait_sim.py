import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from exoctl.classifier import CLASSIFIER_PRESETS, PAPER_DIAGONAL, Prediction, ReplayClassifier, VisionContext
from exoctl.domain import DS, IS, LG, TERRAINS, TWO_PI, Condition, ControllerConfig
from exoctl.gait_sim import (
    DEFAULT_CADENCE,
    PROFILE_PRESETS,
    GaitProfile,
    ScenarioError,
    ScenarioSpec,
    SimulationDiverged,
    StepSchedule,
    calibration_path,
    level_ground,
    load_scenario,
    paper_path,
    run_scenario,
    scenario_from_dict,
    segment,
    synth_hip_angle,
    vision_tick_due,
)
from exoctl.io import step_records
from exoctl.metrics import recall_per_class

CFG = ControllerConfig()


# --- kinematics -----------------------------------------------------------------------


def test_synth_examples():
    prof = GaitProfile(LG, 0.0, (0.5, 0.0, 0.0), (0.0, 0.0, 0.0))
    assert synth_hip_angle(prof, 0.0) == 0.0
    assert synth_hip_angle(prof, math.pi / 2) == pytest.approx(0.5)


def test_sensor_noise_std():
    prof = PROFILE_PRESETS[LG]
    rng = np.random.default_rng(0)
    sigma = math.radians(0.5)
    x = np.array([synth_hip_angle(prof, 1.0, sigma, rng) for _ in range(100_000)])
    assert x.std() == pytest.approx(sigma, rel=0.05)
    assert x.mean() == pytest.approx(prof.angle(1.0), abs=3 * sigma / math.sqrt(len(x)) * 2)


@pytest.mark.parametrize("terrain", TERRAINS)
def test_profiles_periodic_c1_with_single_extension_minimum(terrain):
    prof = PROFILE_PRESETS[terrain]
    assert prof.angle(0.0) == pytest.approx(prof.angle(TWO_PI), abs=1e-12)
    assert prof.slope(0.0) == pytest.approx(prof.slope(TWO_PI), abs=1e-12)
    chi = np.linspace(0, TWO_PI, 3600, endpoint=False)
    th = np.array([prof.angle(c) for c in chi])
    # analytic slope agrees with finite differences
    fd = np.gradient(th, chi)
    assert np.abs(fd[1:-1] - np.array([prof.slope(c) for c in chi])[1:-1]).max() < 1e-3
    k = int(np.argmin(th))
    assert min(chi[k], TWO_PI - chi[k]) < 0.05
    minima = [i for i in range(len(th)) if th[i] < th[i - 1] and th[i] <= th[(i + 1) % len(th)]]
    assert len(minima) == 1


def test_peak_flexion_ordering():
    peaks = {t: PROFILE_PRESETS[t].peak_flexion() for t in TERRAINS}
    assert peaks[IS] > peaks[LG] > peaks[DS]


# --- scenarios ------------------------------------------------------------------------


def test_paper_path_preset():
    spec = paper_path()
    terr = [s.terrain for s in spec.segments]
    assert terr == [LG, IS, LG, DS, LG]
    assert spec.segments[1].n_steps == 88 and spec.segments[3].n_steps == 88
    assert spec.segments[2].distance == pytest.approx(150.0, abs=spec.segments[2].stride)
    assert [s.cadence for s in spec.segments[:2]] == [DEFAULT_CADENCE[LG], DEFAULT_CADENCE[IS]]


@pytest.mark.parametrize(
    "segments",
    [
        (),
        (segment(LG, steps=5, cadence=2.0),),
        (segment(LG, steps=5, cadence=0.1),),
        (segment(LG, steps=5), segment(IS, steps=1), segment(LG, steps=5)),
    ],
)
def test_invalid_scenarios(segments):
    with pytest.raises(ScenarioError):
        ScenarioSpec("bad", tuple(segments)).validate(CFG)


def test_segment_extent_rules():
    with pytest.raises(ScenarioError):
        segment(LG, meters=0.0)
    with pytest.raises(ScenarioError):
        segment(LG, steps=3, meters=3.0)
    assert segment(LG, meters=13.0).n_steps == 10


def test_scenario_yaml(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text(
        "name: short\ncondition: vision-off\nseed: 4\nsubject_mass_kg: 61\n"
        "segments:\n  - {terrain: LG, extent_m: 13}\n  - {terrain: IS, extent_steps: 10, cadence_hz: 0.7}\n"
        "classifier: {preset: perfect, latency_s: 0.05}\n"
    )
    spec = load_scenario(f)
    assert spec.condition is Condition.VISION_OFF and spec.seed == 4 and spec.subject_mass == 61
    assert [(s.terrain, s.n_steps) for s in spec.segments] == [(LG, 10), (IS, 10)]
    assert spec.segments[1].cadence == 0.7 and spec.classifier.latency == 0.05
    assert load_scenario("paper-path").name == "paper-path"
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.yaml")
    with pytest.raises(ScenarioError):
        scenario_from_dict({"segments": [{"terrain": "LG", "extent_steps": 3, "speed": 1}]})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"preset": "nope"})


def test_schedule_transition_labels():
    sch = StepSchedule([segment(LG, steps=3), segment(IS, steps=4), segment(IS, steps=2), segment(LG, steps=3)])
    assert sch.transition == [None, None, "LG->IS", "LG->IS", None, None, None, None, "IS->LG", "IS->LG", None, None]
    assert sch.mix(2.0) == (LG, IS, 0.0)
    assert sch.mix(3.0)[2] == pytest.approx(0.5)
    assert sch.mix(5.0) == (IS, IS, 0.0)


def test_vision_ticks_on_thirty_hertz_grid():
    due = [i for i in range(1, 301) if vision_tick_due(i, 100.0, 30.0)]
    assert due[:5] == [1, 4, 7, 10, 14]
    for w in range(1, 30):
        assert sum(1 for i in due if 10 * w < i <= 10 * (w + 1)) == 3
    # frame m at m/30 s is taken at the first tick at or after it
    for m, i in enumerate(due[1:], start=1):
        assert (i - 1) / 100 < m / 30 <= i / 100 + 1e-12


# --- closed loop ----------------------------------------------------------------------


def _ticks(art, column, leg="right"):
    return art.tick_array(column, leg)


def test_level_ground_perfect_classifier():
    spec = replace(level_ground(10.0), classifier=CLASSIFIER_PRESETS["perfect"]())
    art = run_scenario(spec, CFG)
    assert art.steps and all(r["latched_class"] == "LG" for r in art.steps)
    assert all(r["amplitude"] == CFG.m_lg for r in art.steps)
    # after convergence the reference peaks at the LG amplitude each step
    t = _ticks(art, "t")
    ref = _ticks(art, "theta_r")
    late = ref[t > 5.0]
    assert late.max() == pytest.approx(CFG.m_lg, abs=0.01)


def test_exo_off_reference_zero_but_estimator_runs(exo_off_run):
    art = exo_off_run
    assert np.all(art.tick_array("theta_r") == 0.0)
    assert np.all(art.tick_array("theta_m") == 0.0)
    omega = art.tick_array("omega")
    assert np.all(np.isfinite(omega)) and np.ptp(art.tick_array("phi_gait")) > 6.0
    assert art.tick_array("step_event").sum() > 600


def test_scheduler_counts(paper_run):
    art = paper_run
    assert art.n_ticks == round(art.duration * CFG.control_rate)
    assert abs(art.n_vision - CFG.vision_rate * art.duration) <= 1
    assert len(art.predictions) == art.n_vision


def test_leg_symmetry_and_truth_bookkeeping(paper_run):
    counts = Counter(r["leg"] for r in paper_run.steps)
    assert abs(counts["right"] - counts["left"]) <= 1
    n_boundaries = sum(1 for a, b in zip(paper_run.scenario.segments, paper_run.scenario.segments[1:])
                       if a.terrain is not b.terrain)
    for leg in ("right", "left"):
        rows = [r for r in paper_run.steps if r["leg"] == leg]
        assert sum(1 for r in rows if r["transition"]) == 2 * n_boundaries
        steps = [r["path_step"] for r in rows if r["path_step"] >= 0]
        assert steps == list(range(steps[0], steps[0] + len(steps)))


def test_vision_sees_terrain_one_latency_ago(paper_run):
    art = paper_run
    t = art.tick_array("t", "right")
    truth = art.tick_array("true_terrain", "right")
    lag = round(art.scenario.classifier.latency * CFG.control_rate)
    for p in art.predictions[::7]:
        i = round(p["t"] * CFG.control_rate)
        if i - lag >= 1:
            assert p["true_terrain"] == truth[i - lag - 1]
    assert t[0] == pytest.approx(CFG.dt)


def test_paper_path_recall_near_configured(paper_run):
    recs = step_records(paper_run.steps, None, "right")
    steady = [s for s in recs if not s.is_transition]
    recall = recall_per_class(steady)
    for c, d in zip(TERRAINS, PAPER_DIAGONAL):
        n = sum(1 for s in steady if s.true_terrain is c)
        # a single path has ~86 stair steps, so the band is the 3-sigma binomial one
        band = max(0.02, 3 * math.sqrt(d * (1 - d) / n))
        assert abs(recall[c] - d) <= band


def test_deterministic_repeat():
    spec = replace(level_ground(15.0), seed=7)
    a = run_scenario(spec, CFG)
    b = run_scenario(spec, CFG)
    assert a.ticks == b.ticks and a.steps == b.steps and a.predictions == b.predictions
    c = run_scenario(replace(spec, seed=8), CFG)
    assert c.ticks["theta_meas"] != a.ticks["theta_meas"]


def test_replay_classifier_in_loop():
    preds = [Prediction(k / 30, IS, 0.9) for k in range(0, 300)]
    art = run_scenario(level_ground(10.0), CFG, classifier=ReplayClassifier(preds))
    later = [r for r in art.steps if r["t_latch"] > 2.0]
    assert later and all(r["latched_class"] == "IS" for r in later)


def test_record_ticks_off():
    art = run_scenario(level_ground(5.0), CFG, record_ticks=False)
    assert art.ticks is None and art.steps
    with pytest.raises(ValueError):
        art.tick_array("t")


def test_nan_abort():
    with pytest.raises(SimulationDiverged):
        run_scenario(level_ground(5.0), ControllerConfig(eta=1e5))
    with pytest.raises(SimulationDiverged):
        run_scenario(level_ground(5.0), ControllerConfig(eta=300.0, nu_phi=1e4))


class _NaNSource:
    def on_vision_tick(self, ctx: VisionContext):
        return [Prediction(ctx.t, LG, math.nan)]


def test_bad_classifier_output_propagates():
    with pytest.raises(ValueError):
        run_scenario(level_ground(3.0), CFG, classifier=_NaNSource())


def test_calibration_preset_shape():
    spec = calibration_path(blocks=2)
    assert [s.terrain for s in spec.segments] == [LG, IS, LG, DS, LG, IS, LG, DS, LG]
    assert spec.n_steps == 43 and spec.legs == ("right",)
