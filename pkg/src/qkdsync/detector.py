"""Click statistics of a gated SPAD.

A gate registers at most one click: the first photoelectron or dark pulse
arriving while it is armed. With signal and dark arrivals both Poisson the
click probability is ``1 - exp(-(mu_pe + f_dcp * tau_w))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GateContext:
    signal_mean_pe: float = 0.0
    dark_rate_hz: float = 0.0
    gate_width_ns: float = 2.0

    def __post_init__(self):
        if self.signal_mean_pe < 0 or self.dark_rate_hz < 0:
            raise ValueError("signal_mean_pe and dark_rate_hz must be >= 0")
        if self.gate_width_ns <= 0:
            raise ValueError(f"gate_width_ns must be > 0, got {self.gate_width_ns}")

    @property
    def dark_mean(self) -> float:
        return self.dark_rate_hz * self.gate_width_ns * 1e-9

    @property
    def total_mean(self) -> float:
        return self.signal_mean_pe + self.dark_mean


@dataclass(frozen=True)
class PulsePlacement:
    offset_ns: float = 0.0
    pulse_width_ns: float = 1.0

    def __post_init__(self):
        if self.pulse_width_ns <= 0:
            raise ValueError(f"pulse_width_ns must be > 0, got {self.pulse_width_ns}")


def window_split(placement: PulsePlacement, gate_width_ns: float) -> tuple[float, float]:
    """Energy fractions of a rectangular pulse in its leading-edge window and the next."""
    if not 0 <= placement.offset_ns < gate_width_ns:
        raise ValueError(
            f"offset_ns must lie in [0, {gate_width_ns}), got {placement.offset_ns}")
    if placement.pulse_width_ns > gate_width_ns:
        raise ValueError("pulse wider than the gate can spread over more than two windows")
    inside = min(placement.pulse_width_ns, gate_width_ns - placement.offset_ns)
    first = inside / placement.pulse_width_ns
    return first, 1.0 - first


def click_probability(ctx: GateContext) -> float:
    return -math.expm1(-ctx.total_mean)


def sample_gate(ctx: GateContext, rng: np.random.Generator) -> bool:
    return bool(rng.random() < click_probability(ctx))


def sample_gates(ctx: GateContext, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent gates of the same context."""
    return rng.random(size) < click_probability(ctx)
