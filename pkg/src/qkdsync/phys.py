"""Fiber channel, pulse source and SPAD parameters.

Lengths are in km, speeds in km/s, times in ns and rates in Hz. Keys and
field names carry the unit so that configuration files stay unambiguous.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

C_VACUUM_KM_S = 299792.458

#: upper bound on the mean photon number of an attenuated sync pulse
SINGLE_PHOTON_MU_LIMIT = 0.5


@dataclass(frozen=True)
class FiberChannel:
    length_km: float = 100.0
    refractive_index: float = 1.4670
    attenuation_db_per_km: float = 0.2

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError(f"length_km must be >= 0, got {self.length_km}")
        if self.refractive_index <= 1:
            raise ValueError(f"refractive_index must be > 1, got {self.refractive_index}")
        if self.attenuation_db_per_km < 0:
            raise ValueError(
                f"attenuation_db_per_km must be >= 0, got {self.attenuation_db_per_km}")


@dataclass(frozen=True)
class PulseSource:
    pulse_width_ns: float = 1.0
    mean_photons: float = 0.5
    repetition_period_ns: float = 1048576.0

    def __post_init__(self):
        if self.pulse_width_ns <= 0:
            raise ValueError(f"pulse_width_ns must be > 0, got {self.pulse_width_ns}")
        if self.mean_photons < 0:
            raise ValueError(f"mean_photons must be >= 0, got {self.mean_photons}")
        if self.repetition_period_ns < self.pulse_width_ns:
            raise ValueError("repetition_period_ns must be >= pulse_width_ns")
        if self.mean_photons > SINGLE_PHOTON_MU_LIMIT:
            warnings.warn(
                f"mean_photons={self.mean_photons} exceeds the single-photon sync limit "
                f"{SINGLE_PHOTON_MU_LIMIT}; the sync pulse is tappable",
                stacklevel=3,
            )


@dataclass(frozen=True)
class SpadParams:
    quantum_efficiency: float = 1.0
    dark_count_rate_hz: float = 100.0
    dead_time_ns: float = 50.0
    gate_width_ns: float = 2.0
    recovery_gap_ns: float = 100_000.0

    def __post_init__(self):
        if not 0 <= self.quantum_efficiency <= 1:
            raise ValueError(
                f"quantum_efficiency must lie in [0, 1], got {self.quantum_efficiency}")
        if self.dark_count_rate_hz < 0:
            raise ValueError(
                f"dark_count_rate_hz must be >= 0, got {self.dark_count_rate_hz}")
        if self.dead_time_ns < 0:
            raise ValueError(f"dead_time_ns must be >= 0, got {self.dead_time_ns}")
        if self.gate_width_ns <= 0:
            raise ValueError(f"gate_width_ns must be > 0, got {self.gate_width_ns}")
        if self.recovery_gap_ns < self.dead_time_ns:
            raise ValueError(
                f"recovery_gap_ns ({self.recovery_gap_ns}) must be >= dead_time_ns "
                f"({self.dead_time_ns})")

    @property
    def min_gate_spacing_ns(self) -> float:
        return max(self.dead_time_ns, self.recovery_gap_ns)


def propagation_speed(c_vacuum_km_s: float = C_VACUUM_KM_S,
                      refractive_index: float = 1.4670) -> float:
    """Group speed of light in the fiber core, ``c / n`` in km/s."""
    if c_vacuum_km_s <= 0:
        raise ValueError(f"c_vacuum_km_s must be > 0, got {c_vacuum_km_s}")
    if refractive_index < 1:
        raise ValueError(f"refractive_index must be >= 1, got {refractive_index}")
    return c_vacuum_km_s / refractive_index


def min_repetition_period(length_km: float, speed_km_s: float) -> float:
    """Round-trip time of the line in ns.

    A two-way self-compensating system must not emit the next pulse before
    the previous one has come back, so this is the shortest usable frame.
    """
    if length_km < 0:
        raise ValueError(f"length_km must be >= 0, got {length_km}")
    if speed_km_s <= 0:
        raise ValueError(f"speed_km_s must be > 0, got {speed_km_s}")
    return 2.0 * length_km / speed_km_s * 1e9


def transmittance(channel: FiberChannel) -> float:
    return 10.0 ** (-channel.length_km * channel.attenuation_db_per_km / 10.0)


def mean_photoelectrons(source: PulseSource, channel: FiberChannel,
                        spad: SpadParams) -> float:
    """Poisson mean of photoelectrons per pulse at the detector."""
    return source.mean_photons * transmittance(channel) * spad.quantum_efficiency


def loss_db(channel: FiberChannel) -> float:
    return channel.length_km * channel.attenuation_db_per_km


__all__ = [
    "C_VACUUM_KM_S", "SINGLE_PHOTON_MU_LIMIT", "FiberChannel", "PulseSource", "SpadParams",
    "propagation_speed", "min_repetition_period", "transmittance", "mean_photoelectrons",
    "loss_db",
]
