"""Run artifacts on disk: three CSV logs plus a JSON manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .domain import TerrainClass, config_to_dict
from .gait_sim import PREDICTION_COLUMNS, STEP_COLUMNS, TICK_COLUMNS, RunArtifact
from .metrics import StepRecord, swing_peak_velocity

TICK_FILE = "tick_trace.csv"
STEP_FILE = "step_log.csv"
PREDICTION_FILE = "prediction_log.csv"
MANIFEST_FILE = "manifest.json"


class ArtifactError(ValueError):
    pass


def _fmt(value: Any) -> str:
    # repr round-trips floats exactly, so reruns give byte-identical files
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write_rows(path: Path, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run(art: RunArtifact, out_dir: str | Path, classifier: str = "sim", wall_clock: float | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if art.ticks is not None:
        _write_rows(out / TICK_FILE, TICK_COLUMNS, zip(*(art.ticks[c] for c in TICK_COLUMNS)))
        files["tick_trace"] = TICK_FILE
    _write_rows(out / STEP_FILE, STEP_COLUMNS, ([r[c] for c in STEP_COLUMNS] for r in art.steps))
    files["step_log"] = STEP_FILE
    _write_rows(out / PREDICTION_FILE, PREDICTION_COLUMNS, ([r[c] for c in PREDICTION_COLUMNS] for r in art.predictions))
    files["prediction_log"] = PREDICTION_FILE
    spec = art.scenario
    manifest = {
        "tool": "exoctl",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scenario": spec.name,
        "scenario_hash": spec.digest(),
        "scenario_spec": spec.to_dict(),
        "config_hash": art.config.digest(),
        "config": config_to_dict(art.config),
        "condition": spec.condition.value,
        "seed": spec.seed,
        "subject_mass_kg": spec.subject_mass,
        "classifier": classifier,
        "distance_m": art.distance,
        "duration_s": art.duration,
        "n_ticks": art.n_ticks,
        "n_vision_ticks": art.n_vision,
        "segments": art.segments,
        "files": {k: {"path": v, "sha256": sha256_file(out / v)} for k, v in files.items()},
        "wall_clock_s": wall_clock,
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _read_csv(path: Path, columns: Sequence[str]) -> list[dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or list(reader.fieldnames) != list(columns):
                raise ArtifactError(f"{path}: unexpected header {reader.fieldnames}")
            return list(reader)
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        raise ArtifactError(f"{path}: {exc}") from exc


@dataclass
class LoadedRun:
    path: Path
    manifest: dict
    steps: list[dict]
    predictions: list[dict]
    ticks: dict[str, np.ndarray] | None

    @property
    def condition(self) -> str:
        return self.manifest["condition"]


_STR_TICK_COLS = {"leg", "true_terrain", "active_class"}


def load_run(run_dir: str | Path, with_ticks: bool = True) -> LoadedRun:
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / MANIFEST_FILE).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{run_dir}: bad or missing manifest: {exc}") from exc
    for key in ("condition", "seed", "distance_m", "duration_s", "segments", "subject_mass_kg", "files"):
        if key not in manifest:
            raise ArtifactError(f"{run_dir}: manifest lacks {key!r}")
    try:
        steps = []
        for r in _read_csv(run_dir / STEP_FILE, STEP_COLUMNS):
            steps.append({
                "leg": r["leg"], "step_idx": int(r["step_idx"]),
                "t_start": float(r["t_start"]), "t_latch": float(r["t_latch"]),
                "c_is": float(r["c_is"]), "c_lg": float(r["c_lg"]), "c_ds": float(r["c_ds"]),
                "n_is": int(r["n_is"]), "n_lg": int(r["n_lg"]), "n_ds": int(r["n_ds"]),
                "latched_class": TerrainClass.parse(r["latched_class"]),
                "amplitude": float(r["amplitude"]), "path_step": int(r["path_step"]),
                "true_terrain": TerrainClass.parse(r["true_terrain"]) if r["true_terrain"] else None,
                "transition": r["transition"],
            })
        predictions = _read_csv(run_dir / PREDICTION_FILE, PREDICTION_COLUMNS)
        ticks = None
        if with_ticks and (run_dir / TICK_FILE).exists():
            rows = _read_csv(run_dir / TICK_FILE, TICK_COLUMNS)
            ticks = {}
            for c in TICK_COLUMNS:
                col = [r[c] for r in rows]
                ticks[c] = np.array(col) if c in _STR_TICK_COLS else np.array(col, dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ArtifactError):
            raise
        raise ArtifactError(f"{run_dir}: {exc}") from exc
    return LoadedRun(run_dir, manifest, steps, predictions, ticks)


def step_records(steps: Sequence[dict], ticks: dict[str, np.ndarray] | None = None, leg: str | None = "right",
                 control_rate: float = 100.0) -> list[StepRecord]:
    """StepRecords for one leg (or all legs with ``leg=None``).

    Only complete steps with known truth are returned.  With ``ticks`` the hip
    velocity of each step is the trace over ``(t_start, t_latch]``.
    """
    out = []
    per_leg: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for r in steps:
        if leg is not None and r["leg"] != leg:
            continue
        truth = r["true_terrain"]
        if truth is None or (isinstance(truth, str) and not truth) or math.isnan(r["t_start"]):
            continue
        rec = StepRecord(
            step_idx=r["step_idx"],
            true_terrain=TerrainClass.parse(truth),
            latched_class=TerrainClass.parse(r["latched_class"]),
            is_transition=bool(r["transition"]),
            duration=r["t_latch"] - r["t_start"],
            transition=r["transition"],
        )
        if ticks is not None:
            if r["leg"] not in per_leg:
                mask = np.asarray(ticks["leg"]) == r["leg"]
                per_leg[r["leg"]] = (np.asarray(ticks["t"], dtype=float)[mask],
                                     np.asarray(ticks["hip_velocity"], dtype=float)[mask])
            t, v = per_leg[r["leg"]]
            i0 = int(round(r["t_start"] * control_rate))
            i1 = int(round(r["t_latch"] * control_rate))
            # ticks of one leg are consecutive from tick 1
            rec.hip_velocity_series = v[i0:i1]
            if rec.hip_velocity_series.size:
                rec.peak_swing_velocity = swing_peak_velocity(rec)
        out.append(rec)
    return out


PHASE_TRACE_COLUMNS = ("t", "theta_meas", "theta_hat", "omega", "phi_gait", "step_event")


def write_phase_trace(path: str | Path, theta_meas: Sequence[float], samples: Sequence) -> None:
    """Estimator trace, one row per tick, from the inputs and their PhaseSamples."""
    if len(theta_meas) != len(samples):
        raise ValueError("one measurement per sample expected")
    _write_rows(
        Path(path),
        PHASE_TRACE_COLUMNS,
        ((s.t, float(th), s.theta_hat, s.omega, s.phi_gait, int(s.step_event)) for th, s in zip(theta_meas, samples)),
    )
