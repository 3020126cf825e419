"""Count accumulation and the max-count signal-window decision."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detector import GateContext, click_probability
from .scheduler import ConfigurationError, ScanPlan


class Outcome(str, enum.Enum):
    CORRECT_SINGLE = "CorrectSingle"
    CORRECT_ADJACENT = "CorrectAdjacent"
    ERRONEOUS = "Erroneous"
    MISS = "Miss"

    @property
    def is_correct(self) -> bool:
        return self in (Outcome.CORRECT_SINGLE, Outcome.CORRECT_ADJACENT)


OUTCOMES = tuple(Outcome)


def adjacent(i: int, j: int, window_count: int) -> bool:
    """Neighbours on the circular frame (the last window touches the first)."""
    return (i - j) % window_count in (1, window_count - 1)


@dataclass(frozen=True, eq=False)
class CountsArray:
    counts: np.ndarray
    samples_per_window: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 2:
            raise ValueError("counts must be a 1-d array over at least two windows")
        if counts.min() < 0 or counts.max() > self.samples_per_window:
            raise ValueError(f"counts must lie in [0, {self.samples_per_window}]")
        object.__setattr__(self, "counts", counts)

    @property
    def window_count(self) -> int:
        return int(self.counts.size)

    def to_csv(self, path=None) -> str | None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "count"])
        writer.writerows(enumerate(self.counts.tolist()))
        if path is None:
            return buf.getvalue()
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
        return None


@dataclass(frozen=True)
class GroundTruth:
    """Window(s) holding the sync pulse, with the energy fraction in each."""

    windows: tuple[int, ...]
    fractions: tuple[float, ...]
    window_count: int

    def __post_init__(self):
        if len(self.windows) not in (1, 2) or len(self.fractions) != len(self.windows):
            raise ValueError("ground truth is one window or an adjacent pair")
        if any(not 0 <= w < self.window_count for w in self.windows):
            raise ValueError(f"signal windows must lie in [0, {self.window_count})")
        if len(self.windows) == 2 and self.windows[1] != (self.windows[0] + 1) % self.window_count:
            raise ValueError("a split pulse occupies (k, k+1 mod N_w)")

    @classmethod
    def single(cls, window: int, window_count: int) -> GroundTruth:
        return cls((window,), (1.0,), window_count)

    @classmethod
    def pair(cls, first: int, window_count: int,
             fractions: tuple[float, float] = (0.5, 0.5)) -> GroundTruth:
        return cls((first, (first + 1) % window_count), tuple(fractions), window_count)

    @property
    def is_pair(self) -> bool:
        return len(self.windows) == 2


@dataclass(frozen=True)
class Decision:
    """Chosen window, or ``None`` for no detection; ``ties`` is the argmax set."""

    window: int | None
    ties: tuple[int, ...]
    max_count: int

    @property
    def detected(self) -> bool:
        return self.window is not None


def decide(counts: CountsArray | np.ndarray) -> Decision:
    c = counts.counts if isinstance(counts, CountsArray) else np.asarray(counts)
    top = int(c.max())
    ties = tuple(int(k) for k in np.flatnonzero(c == top))
    if top == 0:
        return Decision(None, ties, 0)
    if len(ties) == 1:
        return Decision(ties[0], ties, top)
    if len(ties) == 2 and adjacent(ties[0], ties[1], c.size):
        # either member is acceptable; keep the lower index for reproducibility
        return Decision(ties[0], ties, top)
    return Decision(None, ties, top)


def classify(decision: Decision, truth: GroundTruth) -> Outcome:
    if not decision.detected:
        return Outcome.MISS
    if truth.is_pair:
        if set(decision.ties) <= set(truth.windows):
            return Outcome.CORRECT_ADJACENT
        return Outcome.ERRONEOUS
    # a noise window tied with the signal window is never a correct detection
    if decision.ties == truth.windows:
        return Outcome.CORRECT_SINGLE
    return Outcome.ERRONEOUS


def window_click_probabilities(truth: GroundTruth, mean_pe: float, dark_rate_hz: float,
                               gate_width_ns: float) -> np.ndarray:
    """Per-window click probability for a pulse placed according to ``truth``."""
    probs = np.full(truth.window_count,
                    click_probability(GateContext(0.0, dark_rate_hz, gate_width_ns)))
    for w, frac in zip(truth.windows, truth.fractions):
        probs[w] = click_probability(GateContext(mean_pe * frac, dark_rate_hz, gate_width_ns))
    return probs


def accumulate(plan: ScanPlan, truth: GroundTruth,
               contexts: Sequence[GateContext] | np.ndarray,
               rng: np.random.Generator) -> CountsArray:
    """Run every gate of ``plan`` once and count clicks per window.

    ``contexts`` holds one :class:`GateContext` per window, or the per-window
    click probabilities directly.
    """
    n_w = plan.grid.window_count
    if truth.window_count != n_w:
        raise ConfigurationError(
            f"ground truth has {truth.window_count} windows, plan grid has {n_w}")
    if len(contexts) != n_w:
        raise ConfigurationError(f"need {n_w} window contexts, got {len(contexts)}")
    if isinstance(contexts, np.ndarray):
        probs = np.asarray(contexts, dtype=float)
    else:
        probs = np.array([click_probability(ctx) for ctx in contexts])
    counts = np.zeros(n_w, dtype=np.int64)
    for chunk in plan.iter_chunks():
        clicked = rng.random(chunk.size) < probs[chunk["window"]]
        counts += np.bincount(chunk["window"][clicked], minlength=n_w)
    return CountsArray(counts, plan.samples_per_window)
