"""Experiment files: YAML with the unit in every key name.

Example::

    name: default
    channel: {length_km: 100, refractive_index: 1.467,
              attenuation_db_per_km: 0.2, c_vacuum_km_s: 300000}
    source: {pulse_width_ns: 1, mean_photons: 0.5}
    spad: {quantum_efficiency: 1, dark_count_rate_hz: 100,
           dead_time_ns: 50, recovery_gap_ns: 100000}
    grid: {window_factor: 2, min_period_ns: null, window_count: null}
    scan: {gates_per_frame: 4, samples_per_window: 256}
    placement: {offset_ns: 0, true_signal_window: 0}
    mean_pe_override: null
    sweep: {dark_hz: [25, 50, 100, 200, 400], N: [32, 64, 128]}
    trials: 10000
    seed: 0
    output: null

``grid.window_count`` fixes ``N_w`` directly (a power of two). Otherwise
``N_w`` is the smallest power of two covering ``grid.min_period_ns``, which
defaults to the round-trip time of the line.
"""
from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass, field
from typing import Any

import yaml

from . import phys
from .detector import PulsePlacement
from .engine import FIGURE_SAMPLE_SCOPES, SWEEP_AXES, SystemConfig
from .scheduler import (DEFAULT_MAX_WINDOW_COUNT, ConfigurationError, FrameGrid,
                        build_frame_grid, window_width_from_pulse)


class ConfigError(ValueError):
    """Invalid experiment file; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


DEFAULTS: dict[str, Any] = {
    "name": "default",
    "channel": {"length_km": 100.0, "refractive_index": 1.467,
                "attenuation_db_per_km": 0.2, "c_vacuum_km_s": 300000.0},
    "source": {"pulse_width_ns": 1.0, "mean_photons": 0.5},
    "spad": {"quantum_efficiency": 1.0, "dark_count_rate_hz": 100.0,
             "dead_time_ns": 50.0, "recovery_gap_ns": 100000.0},
    "grid": {"window_factor": 2.0, "min_period_ns": None, "window_count": None,
             "max_window_count": DEFAULT_MAX_WINDOW_COUNT},
    "scan": {"gates_per_frame": 4, "samples_per_window": 256},
    "placement": {"offset_ns": 0.0, "true_signal_window": 0},
    "mean_pe_override": None,
    "sweep": {},
    "trials": 10000,
    "seed": 0,
    "output": None,
}

#: short names accepted by ``--set`` and as sweep axes
ALIASES = {
    "dark_hz": "spad.dark_count_rate_hz",
    "mean_pe": "mean_pe_override",
    "N": "scan.samples_per_window",
}

FIGURE_DARK_RATES_HZ = (25.0, 50.0, 100.0, 200.0, 400.0)
FIGURE_MEAN_PE = {2: 0.01, 3: 0.5, 4: 0.01, 5: 0.5}


@dataclass(frozen=True)
class ExperimentFile:
    name: str
    config: SystemConfig
    raw: dict = field(compare=False, repr=False)
    sweep: dict = field(default_factory=dict)
    trials: int = 10000
    seed: int = 0
    output: str | None = None

    @property
    def c_vacuum_km_s(self) -> float:
        return float(self.raw["channel"]["c_vacuum_km_s"])

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict) and key != "sweep":
            if not isinstance(value, dict):
                raise ConfigError(where, "expected a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _number(raw: dict, dotted: str, *, integer: bool = False, optional: bool = False):
    node = raw
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node[p]
    value = node[leaf]
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(dotted, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(dotted, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _build(raw: dict) -> ExperimentFile:
    def section(name, factory, **kwargs):
        try:
            return factory(**kwargs)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigError(name, str(exc)) from None

    channel = section("channel", phys.FiberChannel,
                      length_km=_number(raw, "channel.length_km"),
                      refractive_index=_number(raw, "channel.refractive_index"),
                      attenuation_db_per_km=_number(raw, "channel.attenuation_db_per_km"))
    c = _number(raw, "channel.c_vacuum_km_s")
    if c <= 0:
        raise ConfigError("channel.c_vacuum_km_s", "must be > 0")
    pulse = _number(raw, "source.pulse_width_ns")
    if pulse <= 0:
        raise ConfigError("source.pulse_width_ns", f"must be > 0, got {pulse}")
    factor = _number(raw, "grid.window_factor")
    try:
        width = window_width_from_pulse(pulse, factor)
    except ValueError as exc:
        raise ConfigError("grid.window_factor", str(exc)) from None

    count = _number(raw, "grid.window_count", integer=True, optional=True)
    cap = _number(raw, "grid.max_window_count", integer=True)
    if count is not None:
        grid = section("grid.window_count", FrameGrid, window_width_ns=width, window_count=count)
    else:
        min_period = _number(raw, "grid.min_period_ns", optional=True)
        if min_period is None:
            min_period = phys.min_repetition_period(
                channel.length_km, phys.propagation_speed(c, channel.refractive_index))
        grid = section("grid.min_period_ns", build_frame_grid, min_period_ns=min_period,
                       window_width_ns=width, max_window_count=cap)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        source = section("source", phys.PulseSource, pulse_width_ns=pulse,
                         mean_photons=_number(raw, "source.mean_photons"),
                         repetition_period_ns=grid.frame_period_ns)
    spad = section("spad", phys.SpadParams,
                   quantum_efficiency=_number(raw, "spad.quantum_efficiency"),
                   dark_count_rate_hz=_number(raw, "spad.dark_count_rate_hz"),
                   dead_time_ns=_number(raw, "spad.dead_time_ns"),
                   gate_width_ns=width,
                   recovery_gap_ns=_number(raw, "spad.recovery_gap_ns"))
    placement = section("placement", PulsePlacement,
                        offset_ns=_number(raw, "placement.offset_ns"), pulse_width_ns=pulse)
    if not 0 <= placement.offset_ns < width:
        raise ConfigError("placement.offset_ns", f"must lie in [0, {width:g})")
    gates = _number(raw, "scan.gates_per_frame", integer=True)
    if gates < 1:
        raise ConfigError("scan.gates_per_frame", "must be >= 1")
    samples = _number(raw, "scan.samples_per_window", integer=True)
    if samples < 1:
        raise ConfigError("scan.samples_per_window", "must be >= 1")
    override = _number(raw, "mean_pe_override", optional=True)
    config = section("config", SystemConfig, channel=channel, source=source, spad=spad, grid=grid,
                     samples_per_window=samples, pulse_placement=placement,
                     true_signal_window=_number(raw, "placement.true_signal_window",
                                                integer=True),
                     mean_pe_override=override, gates_per_frame=gates)

    sweep = raw["sweep"] or {}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "expected a mapping of axis -> list of values")
    for axis, values in sweep.items():
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.{axis}", f"unknown axis; use one of {SWEEP_AXES}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{axis}", "expected a non-empty list")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"sweep.{axis}", f"invalid value {v!r}")
            if axis == "N" and (int(v) != v or v < 1):
                raise ConfigError("sweep.N", f"sample scopes are positive integers, got {v!r}")
    trials = _number(raw, "trials", integer=True)
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    output = raw["output"]
    if output is not None and not isinstance(output, str):
        raise ConfigError("output", "expected a path or null")
    return ExperimentFile(str(raw["name"]), config, raw, dict(sweep), trials,
                          _number(raw, "seed", integer=True), output)


def parse_config(data: dict | None) -> ExperimentFile:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    return _build(_merge(DEFAULTS, data))


def loads(text: str) -> ExperimentFile:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"YAML parse error: {exc}") from None
    return parse_config(data)


def load(path) -> ExperimentFile:
    with open(path) as fh:
        return loads(fh.read())


def apply_overrides(exp: ExperimentFile, assignments: list[str]) -> ExperimentFile:
    """Apply ``key=value`` overrides; short axis names collapse that sweep axis."""
    raw = copy.deepcopy(exp.raw)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, text = item.split("=", 1)
        key = key.strip()
        value = yaml.safe_load(text)
        if key in ALIASES:
            raw["sweep"].pop(key, None)
            dotted = ALIASES[key]
        else:
            dotted = key
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            if not isinstance(node.get(p), dict):
                raise ConfigError(dotted, "unknown key")
            node = node[p]
        if leaf not in node:
            raise ConfigError(dotted, "unknown key")
        node[leaf] = value
    return _build(raw)


def figure_experiment(figure: int, trials: int, seed: int) -> ExperimentFile:
    """Full-scale grid swept over dark rate and sample scope for a figure."""
    if figure not in FIGURE_MEAN_PE:
        raise ConfigError("figure", f"unknown figure {figure}; choose from 2, 3, 4, 5")
    return parse_config({
        "name": f"figure-{figure}",
        "grid": {"window_count": 524288},
        "mean_pe_override": FIGURE_MEAN_PE[figure],
        "sweep": {"dark_hz": list(FIGURE_DARK_RATES_HZ), "N": list(FIGURE_SAMPLE_SCOPES)},
        "trials": trials,
        "seed": seed,
    })
