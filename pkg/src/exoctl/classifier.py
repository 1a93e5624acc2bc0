"""Terrain prediction sources: a seeded stochastic stand-in for the CNN and a
recorded-trace replay.

Both produce :class:`Prediction` values (class + confidence) that the mid-level
vote consumes.  The simulator draws the predicted class from a confusion-matrix
row picked by the true terrain and, around terrain changes, from a separate
transition matrix for that kind of boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple, Protocol, Sequence

import numpy as np

from .domain import DS, IS, LG, TERRAINS, TerrainClass

ROW_SUM_TOL = 1e-9


class Prediction(NamedTuple):
    t: float
    terrain: TerrainClass
    confidence: float


class ClassifierConfigError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class NonMonotonicTimestamp(ParseError):
    def __init__(self, line: int, reason: str = "timestamp does not increase"):
        super().__init__(line, reason)


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.shape != (3, 3):
        raise ClassifierConfigError(f"{name}: expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ClassifierConfigError(f"{name}: entries must be finite and >= 0")
    if np.any(np.abs(m.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise ClassifierConfigError(f"{name}: rows must sum to 1 (got {m.sum(axis=1)})")
    return m


def even_split_matrix(diagonal: Sequence[float]) -> np.ndarray:
    """Row-stochastic matrix with the given diagonal; each row's remaining mass is
    split evenly over the two wrong classes."""
    d = np.asarray(diagonal, dtype=float)
    m = np.empty((3, 3))
    for i in range(3):
        m[i, :] = (1.0 - d[i]) / 2.0
        m[i, i] = d[i]
    return m


@dataclass
class ConfusionSpec:
    """Configuration of the simulated classifier.

    ``matrix[i, j]`` is P(predict class j | true class i) in IS/LG/DS order.
    ``transition_matrices`` maps boundary labels (``"LG->IS"`` ...) to the
    matrix used on the step before and after that boundary; boundaries without
    an entry use ``transition_matrix``.

    ``persistence`` selects how errors are correlated in time: ``"frame"``
    draws every prediction independently, ``"step"`` draws one class per gait
    step (the ``episode`` passed to :meth:`SimulatedClassifier.classify`) and
    repeats it for every frame of that step, so step-level accuracy follows
    the matrix rather than being amplified by the vote.
    """

    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))
    transition_matrix: np.ndarray | None = None
    transition_matrices: dict[str, np.ndarray] = field(default_factory=dict)
    confidence_mean: np.ndarray | None = None
    confidence_spread: np.ndarray | None = None
    latency: float = 0.1
    seed: int = 0
    persistence: str = "frame"

    def __post_init__(self):
        self.matrix = _as_matrix(self.matrix, "matrix")
        if self.transition_matrix is None:
            self.transition_matrix = self.matrix.copy()
        self.transition_matrix = _as_matrix(self.transition_matrix, "transition_matrix")
        self.transition_matrices = {
            str(k): _as_matrix(v, f"transition_matrices[{k}]") for k, v in self.transition_matrices.items()
        }
        if self.confidence_mean is None:
            self.confidence_mean = np.where(np.eye(3, dtype=bool), 0.85, 0.55)
        if self.confidence_spread is None:
            self.confidence_spread = np.full((3, 3), 0.08)
        self.confidence_mean = np.broadcast_to(np.asarray(self.confidence_mean, float), (3, 3)).copy()
        self.confidence_spread = np.broadcast_to(np.asarray(self.confidence_spread, float), (3, 3)).copy()
        mean, spread = self.confidence_mean, self.confidence_spread
        if np.any(mean <= 0) or np.any(mean > 1):
            raise ClassifierConfigError("confidence_mean must lie in (0, 1]")
        if np.any(spread < 0) or np.any((spread > 0) & (spread**2 >= mean * (1 - mean))):
            raise ClassifierConfigError("confidence_spread too large for a bounded distribution")
        if not (math.isfinite(self.latency) and self.latency >= 0):
            raise ClassifierConfigError("latency must be >= 0")
        if self.persistence not in ("frame", "step"):
            raise ClassifierConfigError("persistence must be 'frame' or 'step'")

    def matrix_for(self, transition: str | bool | None) -> np.ndarray:
        if not transition:
            return self.matrix
        if isinstance(transition, str) and transition in self.transition_matrices:
            return self.transition_matrices[transition]
        return self.transition_matrix

    # -- (de)serialisation for scenario files ---------------------------------

    def to_dict(self) -> dict:
        out = {
            "matrix": self.matrix.tolist(),
            "transition_matrix": self.transition_matrix.tolist(),
            "confidence_mean": self.confidence_mean.tolist(),
            "confidence_spread": self.confidence_spread.tolist(),
            "latency_s": self.latency,
            "seed": self.seed,
            "persistence": self.persistence,
        }
        if self.transition_matrices:
            out["transition_matrices"] = {k: v.tolist() for k, v in self.transition_matrices.items()}
        return out

    @classmethod
    def from_dict(cls, raw: Mapping) -> ConfusionSpec:
        raw = dict(raw)
        preset = raw.pop("preset", None)
        base = CLASSIFIER_PRESETS[preset]().to_dict() if preset else {}
        base.update(raw)
        if "diagonal" in base:
            base["matrix"] = even_split_matrix(base.pop("diagonal"))
        if "transition_diagonal" in base:
            base["transition_matrix"] = even_split_matrix(base.pop("transition_diagonal"))
        known = {"matrix", "transition_matrix", "transition_matrices", "confidence_mean",
                 "confidence_spread", "latency_s", "seed", "persistence"}
        unknown = set(base) - known
        if unknown:
            raise ClassifierConfigError(f"unknown classifier keys: {sorted(unknown)}")
        return cls(
            matrix=base.get("matrix", np.eye(3)),
            transition_matrix=base.get("transition_matrix"),
            transition_matrices=base.get("transition_matrices", {}) or {},
            confidence_mean=base.get("confidence_mean"),
            confidence_spread=base.get("confidence_spread"),
            latency=float(base.get("latency_s", 0.1)),
            seed=int(base.get("seed", 0)),
            persistence=base.get("persistence", "frame"),
        )


# Per-class accuracies reported for the real classifier (IS, LG, DS) and the
# accuracy around each boundary kind.  The per-cell split of errors is only
# shown graphically, so the wrong-class mass is divided evenly.
PAPER_DIAGONAL = (0.8556, 0.9757, 0.9114)
PAPER_TRANSITION_ACCURACY = {
    "LG->IS": 0.4643,
    "IS->LG": 0.5714,
    "LG->DS": 0.6786,
    "DS->LG": 0.5714,
}


def paper_fig_c() -> ConfusionSpec:
    transition = {k: even_split_matrix([acc] * 3) for k, acc in PAPER_TRANSITION_ACCURACY.items()}
    return ConfusionSpec(
        matrix=even_split_matrix(PAPER_DIAGONAL),
        transition_matrix=even_split_matrix([float(np.mean(list(PAPER_TRANSITION_ACCURACY.values())))] * 3),
        transition_matrices=transition,
        persistence="step",
    )


def perfect() -> ConfusionSpec:
    return ConfusionSpec()


def constant(terrain: TerrainClass) -> ConfusionSpec:
    """Classifier that always answers ``terrain`` whatever it sees."""
    m = np.zeros((3, 3))
    m[:, terrain.index] = 1.0
    return ConfusionSpec(matrix=m, transition_matrix=m)


CLASSIFIER_PRESETS = {
    "paper-fig-c": paper_fig_c,
    "perfect": perfect,
    "always-IS": lambda: constant(IS),
    "always-LG": lambda: constant(LG),
    "always-DS": lambda: constant(DS),
}


class VisionContext(NamedTuple):
    """What the camera is looking at when a frame is taken."""

    t: float
    true_terrain: TerrainClass
    transition: str | None = None
    episode: int | None = None


class PredictionSource(Protocol):
    def on_vision_tick(self, ctx: VisionContext) -> list[Prediction]: ...


class SimulatedClassifier:
    """Seeded stochastic classifier driven by a :class:`ConfusionSpec`."""

    def __init__(self, spec: ConfusionSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self._episode_draws: dict[tuple[int, str | None], int] = {}

    def _draw_class(self, row: np.ndarray) -> int:
        u = self.rng.random()
        c = np.cumsum(row)
        return int(min(np.searchsorted(c, u, side="right"), 2))

    def _draw_confidence(self, true_idx: int, pred_idx: int) -> float:
        m = float(self.spec.confidence_mean[true_idx, pred_idx])
        s = float(self.spec.confidence_spread[true_idx, pred_idx])
        if s == 0.0:
            return m
        k = m * (1.0 - m) / (s * s) - 1.0
        x = float(self.rng.beta(m * k, (1.0 - m) * k))
        return min(max(x, 1e-6), 1.0)

    def classify(
        self,
        true_terrain: TerrainClass,
        t: float,
        transition: str | bool | None = None,
        episode: int | None = None,
    ) -> Prediction:
        """One prediction for a frame taken at ``t`` of ``true_terrain``.

        With step persistence and an ``episode`` key, the class drawn for the
        first frame of an episode is reused for the rest of it.
        """
        i = true_terrain.index
        row = self.spec.matrix_for(transition)[i]
        if self.spec.persistence == "step" and episode is not None:
            key = (episode, transition if isinstance(transition, str) else None)
            j = self._episode_draws.get(key)
            if j is None:
                j = self._draw_class(row)
                self._episode_draws[key] = j
                if len(self._episode_draws) > 64:
                    del self._episode_draws[next(iter(self._episode_draws))]
        else:
            j = self._draw_class(row)
        return Prediction(float(t), TERRAINS[j], self._draw_confidence(i, j))

    def on_vision_tick(self, ctx: VisionContext) -> list[Prediction]:
        return [self.classify(ctx.true_terrain, ctx.t, ctx.transition, ctx.episode)]


# --- trace replay -------------------------------------------------------------

TRACE_HEADER = ("t_s", "class", "confidence")


def replay_classifier(trace_file: str | Path) -> Iterator[Prediction]:
    """Yield the predictions recorded in a ``t_s,class,confidence`` CSV.

    A header row is optional.  Raises ParseError on malformed rows and
    NonMonotonicTimestamp when time does not strictly increase.
    """
    last_t = -math.inf
    with open(trace_file, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if lineno == 1 and row[0].strip() == TRACE_HEADER[0]:
                continue
            if len(row) != 3:
                raise ParseError(lineno, f"expected 3 fields, got {len(row)}")
            try:
                t = float(row[0])
                conf = float(row[2])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            try:
                terrain = TerrainClass.parse(row[1])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if not math.isfinite(t):
                raise ParseError(lineno, "timestamp must be finite")
            if not (0.0 < conf <= 1.0):
                raise ParseError(lineno, f"confidence {conf} outside (0, 1]")
            if t <= last_t:
                raise NonMonotonicTimestamp(lineno)
            last_t = t
            yield Prediction(t, terrain, conf)


def write_trace(predictions: Sequence[Prediction], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for p in predictions:
            w.writerow([repr(p.t), p.terrain.value, repr(p.confidence)])


class ReplayClassifier:
    """Feeds recorded predictions into the loop as their timestamps come due."""

    def __init__(self, predictions: Sequence[Prediction] | Iterator[Prediction]):
        self._it = iter(predictions)
        self._pending: Prediction | None = next(self._it, None)

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayClassifier:
        # parse eagerly so format errors surface before the run starts
        return cls(list(replay_classifier(path)))

    @property
    def exhausted(self) -> bool:
        return self._pending is None

    def on_vision_tick(self, ctx: VisionContext) -> list[Prediction]:
        out = []
        while self._pending is not None and self._pending.t <= ctx.t + 1e-12:
            out.append(self._pending)
            self._pending = next(self._it, None)
        return out


def empirical_confusion(true: Sequence[TerrainClass], predicted: Sequence[TerrainClass]) -> np.ndarray:
    """Row-normalized confusion matrix (rows = truth); empty rows stay zero."""
    counts = np.zeros((3, 3))
    for a, b in zip(true, predicted):
        counts[a.index, b.index] += 1
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
