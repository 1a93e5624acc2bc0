"""Vision-gated assistance controller for a hip exosuit, with a synthetic
closed-loop simulator and the evaluation metrics used to score it."""

__version__ = "0.1.0"

from .domain import (  # noqa: E402
    Condition,
    ConfigError,
    ControllerConfig,
    PidGains,
    TerrainClass,
    load_config,
    validate_config,
)
from .adaptive_oscillator import GaitPhaseEstimator, ao_step  # noqa: E402
from .classifier import ConfusionSpec, Prediction, ReplayClassifier, SimulatedClassifier, replay_classifier  # noqa: E402
from .mid_level import MidLevel, latch_class, reference_point, smooth_reference  # noqa: E402
from .low_level import LowLevel, pid_step, plant_step  # noqa: E402
from .gait_sim import ScenarioSpec, load_scenario, paper_path, run_scenario, synth_hip_angle  # noqa: E402

__all__ = [
    "Condition", "ConfigError", "ControllerConfig", "PidGains", "TerrainClass", "load_config",
    "validate_config", "GaitPhaseEstimator", "ao_step", "ConfusionSpec", "Prediction",
    "ReplayClassifier", "SimulatedClassifier", "replay_classifier", "MidLevel", "latch_class",
    "reference_point", "smooth_reference", "LowLevel", "pid_step", "plant_step", "ScenarioSpec",
    "load_scenario", "paper_path", "run_scenario", "synth_hip_angle",
]
