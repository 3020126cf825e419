"""Counter-based random numbers keyed by (seed, trial, draw).

Every uniform is a pure function of its key, so trials can be evaluated in
any order, batch size or worker count and still see the same numbers.
The mixer is the SplitMix64 finalizer applied twice.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

#: uniforms reserved per trial
DRAWS_PER_TRIAL = 16


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def seed_key(seed: int) -> np.uint64:
    with np.errstate(over="ignore"):
        z = np.array([(int(seed) & _MASK64)], dtype=np.uint64) * _GOLDEN + _GOLDEN
        return _mix(_mix(z))[0]


def counter_bits(seed: int, trials: np.ndarray, draw: int) -> np.ndarray:
    if not 0 <= draw < DRAWS_PER_TRIAL:
        raise ValueError(f"draw index must lie in [0, {DRAWS_PER_TRIAL})")
    key = seed_key(seed)
    counters = np.asarray(trials, dtype=np.uint64) * np.uint64(DRAWS_PER_TRIAL) + np.uint64(draw)
    with np.errstate(over="ignore"):
        return _mix(key ^ _mix((counters + np.uint64(1)) * _GOLDEN))


def counter_uniforms(seed: int, trials: np.ndarray, draw: int) -> np.ndarray:
    """Uniforms in [0, 1) with 53 random bits, one per trial index."""
    bits = counter_bits(seed, trials, draw) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / (1 << 53))


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """A full numpy Generator for one trial, for gate-level simulation."""
    return np.random.Generator(np.random.Philox(key=[int(seed_key(seed)), int(trial)]))
