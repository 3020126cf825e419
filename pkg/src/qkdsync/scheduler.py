"""Frame/window grid and the gated scan schedule.

Gate ``A`` (1-based, within a frame) of pulse ``B`` (1-based) opens after the
delay ``(T_s / G) * (A - 1) + tau_w * (B - 1)`` with ``G`` gates per frame
(``G = 4`` by default). Successive pulses therefore slide every gate by one
window, and after ``N * N_w / G`` pulses each window has been sampled ``N``
times.

On the absolute timeline a gate opens at ``(B - 1) * T_s + delay``. Delays are
not reduced modulo ``T_s`` there, so the gaps between consecutive gates are
``T_s / G`` inside a frame and ``T_s / G + tau_w`` across frames.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .phys import SpadParams

DEFAULT_MAX_WINDOW_COUNT = 2 ** 26
DEFAULT_GATES_PER_FRAME = 4

ACTIVATION_DTYPE = np.dtype([
    ("frame", np.int64),
    ("gate", np.int64),
    ("window", np.int64),
    ("start_ns", np.float64),
    ("time_ns", np.float64),
])


class ConfigurationError(ValueError):
    pass


class SchedulingError(ValueError):
    pass


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FrameGrid:
    window_width_ns: float
    window_count: int

    def __post_init__(self):
        if self.window_width_ns <= 0:
            raise ConfigurationError(f"window_width_ns must be > 0, got {self.window_width_ns}")
        if self.window_count < 2 or not is_power_of_two(self.window_count):
            raise ConfigurationError(
                f"window_count must be a power of two >= 2, got {self.window_count}")

    @property
    def frame_period_ns(self) -> float:
        return self.window_count * self.window_width_ns

    @property
    def repetition_frequency_hz(self) -> float:
        return 1e9 / self.frame_period_ns


def build_frame_grid(min_period_ns: float, window_width_ns: float,
                     max_window_count: int = DEFAULT_MAX_WINDOW_COUNT) -> FrameGrid:
    """Smallest power-of-two grid whose frame is at least ``min_period_ns`` long."""
    if min_period_ns <= 0:
        raise ConfigurationError(f"min_period_ns must be > 0, got {min_period_ns}")
    if window_width_ns <= 0:
        raise ConfigurationError(f"window_width_ns must be > 0, got {window_width_ns}")
    ratio = min_period_ns / window_width_ns
    nearest = round(ratio)
    # 1e6 / 2 style ratios must not round up because of float noise
    needed = nearest if abs(ratio - nearest) <= 1e-9 * max(ratio, 1.0) else math.ceil(ratio)
    count = max(2, 1 << max(needed - 1, 0).bit_length())
    if count > max_window_count:
        raise ConfigurationError(
            f"window_count {count} exceeds the cap {max_window_count}; "
            f"widen the window or shorten the frame")
    return FrameGrid(window_width_ns, count)


def window_width_from_pulse(pulse_width_ns: float, factor: float = 2.0) -> float:
    if not 2.0 <= factor <= 4.0:
        raise ValueError(f"window/pulse factor must lie in [2, 4], got {factor}")
    return factor * pulse_width_ns


def gate_delay(gate: int, frame: int, grid: FrameGrid,
               gates_per_frame: int = DEFAULT_GATES_PER_FRAME) -> float:
    """Delay in ns between sending pulse ``frame`` and opening gate ``gate``."""
    if gate < 1 or frame < 1:
        raise ValueError(f"gate and frame numbers are 1-based, got ({gate}, {frame})")
    if gate > gates_per_frame:
        raise ValueError(f"gate {gate} exceeds gates_per_frame={gates_per_frame}")
    return grid.frame_period_ns / gates_per_frame * (gate - 1) + grid.window_width_ns * (frame - 1)


@dataclass(frozen=True)
class SpacingViolation:
    position: int
    previous: tuple[int, int]
    current: tuple[int, int]
    gap_ns: float
    required_ns: float

    def __str__(self):
        return (f"gate {self.current[1]} of frame {self.current[0]} opens {self.gap_ns:g} ns "
                f"after gate {self.previous[1]} of frame {self.previous[0]}; "
                f"needs >= {self.required_ns:g} ns")


@dataclass(frozen=True, eq=False)
class ScanPlan:
    """Ordered gate activations of a full scan.

    Generated plans are not materialized: the full-scale scan holds 2**27
    activations. Use :meth:`activations` with a frame range, or
    :meth:`iter_chunks`.
    """

    grid: FrameGrid
    gates_per_frame: int
    samples_per_window: int
    frame_count: int
    explicit: np.ndarray | None = None

    @classmethod
    def from_activations(cls, grid: FrameGrid, activations, samples_per_window: int = 1):
        arr = np.asarray(activations, dtype=ACTIVATION_DTYPE)
        arr = arr[np.argsort(arr["time_ns"], kind="stable")]
        frames = int(arr["frame"].max()) if arr.size else 0
        gates = int(arr["gate"].max()) if arr.size else 0
        return cls(grid, gates, samples_per_window, frames, explicit=arr)

    @property
    def total_duration_ns(self) -> float:
        return self.frame_count * self.grid.frame_period_ns

    @property
    def activation_count(self) -> int:
        if self.explicit is not None:
            return int(self.explicit.size)
        return self.frame_count * self.gates_per_frame

    def activations(self, first_frame: int = 1, last_frame: int | None = None) -> np.ndarray:
        """Activations of frames ``first_frame..last_frame`` (inclusive) in time order."""
        last = self.frame_count if last_frame is None else min(last_frame, self.frame_count)
        if self.explicit is not None:
            sel = (self.explicit["frame"] >= first_frame) & (self.explicit["frame"] <= last)
            return self.explicit[sel]
        if last < first_frame:
            return np.zeros(0, dtype=ACTIVATION_DTYPE)
        g = self.gates_per_frame
        n_w = self.grid.window_count
        tau = self.grid.window_width_ns
        frames = np.repeat(np.arange(first_frame, last + 1, dtype=np.int64), g)
        gates = np.tile(np.arange(1, g + 1, dtype=np.int64), last - first_frame + 1)
        quarter = n_w // g
        steps = (gates - 1) * quarter + (frames - 1)
        out = np.empty(frames.size, dtype=ACTIVATION_DTYPE)
        out["frame"] = frames
        out["gate"] = gates
        out["window"] = steps % n_w
        out["start_ns"] = out["window"] * tau
        out["time_ns"] = (frames - 1) * self.grid.frame_period_ns + steps * tau
        return out

    def iter_chunks(self, frames_per_chunk: int = 1 << 18) -> Iterator[np.ndarray]:
        for first in range(1, self.frame_count + 1, frames_per_chunk):
            yield self.activations(first, first + frames_per_chunk - 1)

    def window_coverage(self) -> np.ndarray:
        cover = np.zeros(self.grid.window_count, dtype=np.int64)
        for chunk in self.iter_chunks():
            cover += np.bincount(chunk["window"], minlength=self.grid.window_count)
        return cover

    def to_csv(self, path=None) -> str | None:
        """Write ``frame,gate,window,start_ns`` rows; returns the text if no path."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["frame", "gate", "window", "start_ns"])
        for chunk in self.iter_chunks():
            for row in chunk:
                writer.writerow([int(row["frame"]), int(row["gate"]), int(row["window"]),
                                 repr(float(row["start_ns"]))])
        if path is None:
            return buf.getvalue()
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
        return None


def build_scan_plan(grid: FrameGrid, spad: SpadParams,
                    gates_per_frame: int = DEFAULT_GATES_PER_FRAME,
                    samples_per_window: int = 256, check: bool = True) -> ScanPlan:
    """Plan a scan sampling every window ``samples_per_window`` times.

    With ``check=False`` an infeasible spacing is not raised, so the plan can
    be passed to :func:`validate_spacing` for a report.
    """
    if gates_per_frame < 1 or grid.window_count % gates_per_frame:
        raise SchedulingError(
            f"gates_per_frame={gates_per_frame} must divide window_count={grid.window_count}")
    if samples_per_window < 1:
        raise SchedulingError(f"samples_per_window must be >= 1, got {samples_per_window}")
    spacing = grid.frame_period_ns / gates_per_frame
    if check and gates_per_frame > 1 and spacing < spad.min_gate_spacing_ns:
        gap = "recovery_gap_ns" if spad.recovery_gap_ns >= spad.dead_time_ns else "dead_time_ns"
        raise SchedulingError(
            f"{gates_per_frame} gates per {grid.frame_period_ns:g} ns frame are {spacing:g} ns "
            f"apart, below {gap}={spad.min_gate_spacing_ns:g} ns")
    frame_count = samples_per_window * grid.window_count // gates_per_frame
    return ScanPlan(grid, gates_per_frame, samples_per_window, frame_count)


def validate_spacing(plan: ScanPlan, spad: SpadParams) -> list[SpacingViolation]:
    required = spad.min_gate_spacing_ns
    if plan.explicit is not None:
        acts = plan.explicit
    else:
        # gaps of a generated plan repeat every frame; two frames expose all of them
        acts = plan.activations(1, 2)
    if acts.size < 2:
        return []
    gaps = np.diff(acts["time_ns"])
    bad = np.flatnonzero(gaps < required)
    return [
        SpacingViolation(
            position=int(i + 1),
            previous=(int(acts["frame"][i]), int(acts["gate"][i])),
            current=(int(acts["frame"][i + 1]), int(acts["gate"][i + 1])),
            gap_ns=float(gaps[i]),
            required_ns=required,
        )
        for i in bad
    ]
