"""exoctl command line: validate-config, run, report.

Exit codes: 0 ok, 2 config error, 3 scenario error, 4 simulation aborted
(non-finite value in the loop), 5 artifact or trace parse error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .classifier import ClassifierConfigError, ParseError, ReplayClassifier
from .domain import Condition, ConfigError, load_config
from .gait_sim import ScenarioError, SimulationDiverged, load_scenario, run_scenario
from .io import ArtifactError, load_run, write_run
from .metrics import GasParseError, WindowTooShort, read_gas_csv
from .report import report_runs, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_DIVERGED = 4
EXIT_PARSE = 5

log = logging.getLogger("exoctl")


def _setup_logging() -> None:
    level = os.environ.get("EXOCTL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _fail(code: int, msg: str) -> int:
    print(f"exoctl: error: {msg}", file=sys.stderr)
    return code


def cmd_validate_config(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        return _fail(EXIT_CONFIG, f"config: {exc}")
    print(f"config ok ({cfg.digest()})")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        return _fail(EXIT_CONFIG, f"config: {exc}")
    try:
        spec = load_scenario(args.scenario)
        changes = {}
        if args.condition is not None:
            changes["condition"] = Condition.parse(args.condition)
        if args.seed is not None:
            changes["seed"] = args.seed
        spec = replace(spec, **changes).validate(cfg)
    except (ScenarioError, ClassifierConfigError, ValueError) as exc:
        return _fail(EXIT_SCENARIO, f"scenario: {exc}")
    classifier = None
    source = "sim"
    if args.classifier != "sim":
        if not args.classifier.startswith("replay:"):
            return _fail(EXIT_SCENARIO, f"--classifier must be 'sim' or 'replay:<file>', got {args.classifier!r}")
        trace = args.classifier[len("replay:"):]
        try:
            classifier = ReplayClassifier.from_file(trace)
        except ParseError as exc:
            return _fail(EXIT_PARSE, f"classifier trace {trace}: {exc}")
        except OSError as exc:
            return _fail(EXIT_PARSE, f"classifier trace {trace}: {exc}")
        source = f"replay:{Path(trace).name}"
    log.info("running %s (%s, seed %d)", spec.name, spec.condition.value, spec.seed)
    t0 = time.perf_counter()
    try:
        art = run_scenario(spec, cfg, classifier, record_ticks=True)
    except SimulationDiverged as exc:
        return _fail(EXIT_DIVERGED, f"simulation aborted: {exc}")
    wall = time.perf_counter() - t0
    manifest = write_run(art, args.out, classifier=source, wall_clock=round(wall, 3))
    log.info("wrote %s in %.2f s", args.out, wall)
    print(f"{spec.name} {spec.condition.value} seed={spec.seed}: {art.n_ticks} ticks, "
          f"{len(art.steps)} steps -> {args.out}")
    for name, meta in sorted(manifest["files"].items()):
        log.debug("%s sha256=%s", meta["path"], meta["sha256"])
    return EXIT_OK


def cmd_report(args) -> int:
    if args.gas and len(args.gas) != len(args.runs):
        return _fail(EXIT_CONFIG, f"got {len(args.gas)} --gas files for {len(args.runs)} runs; pass one per run")
    try:
        runs = [load_run(d) for d in args.runs]
        gas = [read_gas_csv(g) for g in args.gas] if args.gas else None
    except (ArtifactError, GasParseError, OSError) as exc:
        return _fail(EXIT_PARSE, str(exc))
    try:
        report, rows = report_runs(runs, gas)
    except WindowTooShort as exc:
        return _fail(EXIT_PARSE, f"gas trace: {exc}")
    paths = write_report(report, args.out, rows)
    sys.stdout.write((Path(args.out) / "report.txt").read_text())
    log.info("wrote %s", ", ".join(str(p) for p in paths))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exoctl", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"exoctl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate-config", help="check a controller config file")
    v.add_argument("--config", required=True, help="YAML controller config")
    v.set_defaults(func=cmd_validate_config)

    r = sub.add_parser("run", help="simulate a scenario and write run artifacts")
    r.add_argument("--scenario", default="paper-path",
                   help="preset name (paper-path, level-ground, calibration) or YAML scenario file")
    r.add_argument("--config", default=None, help="YAML controller config (defaults if omitted)")
    r.add_argument("--condition", choices=[c.value for c in Condition], default=None,
                   help="override the scenario's condition")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--out", required=True, help="output directory for the run artifacts")
    r.add_argument("--classifier", default="sim", help="'sim' (confusion-matrix model) or 'replay:<file>'")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="aggregate run directories into a report")
    rep.add_argument("runs", nargs="+", help="run directories written by 'exoctl run'")
    rep.add_argument("--gas", action="append", default=[],
                     help="gas CSV (t_s,vo2_ml_per_min,vco2_ml_per_min); repeat once per run, same order")
    rep.add_argument("--out", required=True, help="output directory for report.json, report.txt and plot data")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
