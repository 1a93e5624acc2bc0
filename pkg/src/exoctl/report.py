"""Aggregate run artifacts (and optional gas traces) into the evaluation report."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .domain import TERRAINS, Condition
from .io import LoadedRun, step_records
from .metrics import (
    PERONNET_K1,
    PERONNET_K2,
    GasSample,
    SeriesTooShort,
    accuracy_per_class,
    baseline_power,
    cost_of_transport,
    mean_se,
    recall_per_class,
    relative_saving,
    segment_cost_of_transport,
    sparc,
    split_gas,
    transition_accuracy,
    window,
)

CONDITION_ORDER = [c.value for c in Condition]
SEGMENTS = [c.value for c in TERRAINS]


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _ms(values) -> list | None:
    values = [v for v in values if v is not None and math.isfinite(v)]
    if not values:
        return None
    m, se = mean_se(values)
    return [m, se]


def run_metrics(run: LoadedRun, gas: Sequence[GasSample] | None = None,
                k1: float = PERONNET_K1, k2: float = PERONNET_K2) -> dict:
    """Per-run accuracy, kinematic and (with gas) CoT figures."""
    rate = float(run.manifest.get("config", {}).get("control_rate_hz", 100.0))
    ref = step_records(run.steps, None, leg="right")
    steady = [s for s in ref if not s.is_transition]
    out: dict = {
        "dir": str(run.path),
        "condition": run.condition,
        "seed": run.manifest["seed"],
        "n_steps": len(ref),
        "accuracy": {c.value: v for c, v in accuracy_per_class(steady).items()},
        "recall": {c.value: v for c, v in recall_per_class(steady).items()},
        "transition_accuracy": transition_accuracy(ref),
    }
    kin: dict = {}
    rows: list[dict] = []
    if run.ticks is not None:
        recs = step_records(run.steps, run.ticks, leg=None, control_rate=rate)
        for leg_rec in recs:
            if leg_rec.hip_velocity_series.size == 0:
                continue
            try:
                sm = sparc(leg_rec.hip_velocity_series, rate)
            except SeriesTooShort:
                sm = math.nan
            rows.append({"terrain": leg_rec.true_terrain.value, "step_idx": leg_rec.step_idx,
                         "transition": leg_rec.transition, "peak_swing_velocity": leg_rec.peak_swing_velocity,
                         "sparc": sm})
        for seg in SEGMENTS:
            sel = [r for r in rows if r["terrain"] == seg and not r["transition"]]
            if sel:
                kin[seg] = {
                    "swing_peak_velocity": sum(r["peak_swing_velocity"] for r in sel) / len(sel),
                    "sparc": _clean(sum(r["sparc"] for r in sel) / len(sel)),
                    "n_steps": len(sel),
                }
    out["kinematics"] = kin
    out["_step_rows"] = rows
    if gas is not None:
        standing, walking = split_gas(gas)
        base = baseline_power(standing, k1, k2)
        duration = float(run.manifest["duration_s"])
        mass = float(run.manifest["subject_mass_kg"])
        walk = window(walking, 0.0, duration + 1e-9)
        cot = {"overall": cost_of_transport(walk, base, mass, float(run.manifest["distance_m"]), duration, k1, k2)}
        cot.update(segment_cost_of_transport(walking, run.manifest["segments"], base, mass, k1, k2))
        out["baseline_power_w"] = base
        out["cot"] = cot
    return out


def build_report(runs: Sequence[LoadedRun], gas: Sequence[Sequence[GasSample]] | None = None,
                 k1: float = PERONNET_K1, k2: float = PERONNET_K2, step_rows: list | None = None) -> dict:
    """Per-condition aggregates; ``step_rows``, if given, collects tidy per-step kinematics."""
    if gas is not None and len(gas) != len(runs):
        raise ValueError("need one gas trace per run")
    per_run = [run_metrics(r, gas[i] if gas is not None else None, k1, k2) for i, r in enumerate(runs)]
    if step_rows is not None:
        for i, m in enumerate(per_run):
            step_rows.extend({"run": i, "condition": m["condition"], **row} for row in m["_step_rows"])
    by_cond: dict[str, list[dict]] = defaultdict(list)
    for m in per_run:
        by_cond[m["condition"]].append(m)
    conditions = {}
    for cond in [c for c in CONDITION_ORDER if c in by_cond]:
        ms = by_cond[cond]
        block: dict = {"n_runs": len(ms)}
        block["accuracy"] = {c: _ms([m["accuracy"][c] for m in ms]) for c in SEGMENTS}
        block["recall"] = {c: _ms([m["recall"][c] for m in ms]) for c in SEGMENTS}
        kinds = sorted({k for m in ms for k in m["transition_accuracy"]})
        block["transition_accuracy"] = {k: _ms([m["transition_accuracy"].get(k) for m in ms]) for k in kinds}
        block["kinematics"] = {
            seg: {q: _ms([m["kinematics"][seg][q] for m in ms if seg in m["kinematics"]])
                  for q in ("swing_peak_velocity", "sparc")}
            for seg in SEGMENTS if any(seg in m["kinematics"] for m in ms)
        }
        if gas is not None:
            keys = ["overall"] + SEGMENTS
            block["cot"] = {k: _ms([m["cot"].get(k) for m in ms]) for k in keys}
        conditions[cond] = block
    report: dict = {
        "runs": [{k: v for k, v in m.items() if not k.startswith("_")} for m in per_run],
        "conditions": conditions,
    }
    if gas is not None:
        report["metabolic_coefficients"] = {"k1_j_per_ml_o2": k1, "k2_j_per_ml_co2": k2}
        savings = {}
        base_runs = by_cond.get(Condition.EXO_OFF.value, [])
        if base_runs:
            for cond in CONDITION_ORDER[1:]:
                if cond not in by_cond:
                    continue
                # pair the i-th run of each condition with the i-th Exo Off run
                pairs = list(zip(base_runs, by_cond[cond]))
                savings[cond] = {
                    k: _ms([relative_saving(a["cot"][k], b["cot"][k]) for a, b in pairs
                            if k in a["cot"] and k in b["cot"]])
                    for k in ["overall"] + SEGMENTS
                }
        report["savings_vs_exo_off"] = savings
    return report


def _pct(ms) -> str:
    if ms is None:
        return "n/a"
    return f"{100 * ms[0]:+.2f}% ± {100 * ms[1]:.2f}"


def _num(ms, fmt="{:.4f}") -> str:
    if ms is None:
        return "n/a"
    return (fmt + " ± " + fmt).format(ms[0], ms[1])


def format_report(report: dict) -> str:
    lines = ["exoctl report", ""]
    lines.append("runs:")
    for r in report["runs"]:
        lines.append(f"  {r['condition']:<11} seed={r['seed']}  {r['dir']}")
    for cond, block in report["conditions"].items():
        lines += ["", f"[{cond}]  runs={block['n_runs']}  (mean ± SE)"]
        lines.append("  per-class accuracy TP/(TP+FP), steady steps:")
        for c in SEGMENTS:
            lines.append(f"    {c}: {_num(block['accuracy'][c])}")
        lines.append("  transition accuracy:")
        for k, v in block["transition_accuracy"].items():
            lines.append(f"    {k}: {_num(v)}")
        if block["kinematics"]:
            lines.append("  kinematics (steady steps, both legs):")
            for seg, q in block["kinematics"].items():
                lines.append(f"    {seg}: swing peak velocity {_num(q['swing_peak_velocity'], '{:.3f}')} rad/s,"
                             f" SPARC {_num(q['sparc'], '{:.3f}')}")
        if "cot" in block:
            lines.append("  cost of transport:")
            for k, v in block["cot"].items():
                lines.append(f"    {k}: {_num(v)}")
    if "metabolic_coefficients" in report:
        co = report["metabolic_coefficients"]
        lines += ["", f"metabolic power = ({co['k1_j_per_ml_o2']} * VO2 + {co['k2_j_per_ml_co2']} * VCO2) / 60 W"
                      " (flows in mL/min)"]
        if report["savings_vs_exo_off"]:
            lines.append("CoT saving vs exo-off:")
            for cond, sv in report["savings_vs_exo_off"].items():
                for k, v in sv.items():
                    lines.append(f"  saving {cond} {k}: {_pct(v)}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, out_dir: str | Path, step_rows: Sequence[dict] | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "report.txt"]
    paths[0].write_text(json.dumps(report, indent=2, sort_keys=True, default=_clean) + "\n")
    paths[1].write_text(format_report(report))
    if step_rows is not None:
        p = out / "step_kinematics.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "condition", "terrain", "step_idx", "transition", "peak_swing_velocity", "sparc"])
            for r in step_rows:
                w.writerow([r["run"], r["condition"], r["terrain"], r["step_idx"], r["transition"],
                            repr(r["peak_swing_velocity"]), repr(r["sparc"])])
        paths.append(p)
    return paths


def report_runs(runs: Sequence[LoadedRun], gas=None, k1: float = PERONNET_K1, k2: float = PERONNET_K2):
    """(report dict, tidy per-step kinematics rows) for a set of loaded runs."""
    rows: list[dict] = []
    return build_report(runs, gas, k1, k2, step_rows=rows), rows
