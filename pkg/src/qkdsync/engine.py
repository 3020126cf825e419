"""Monte Carlo and exact outcome probabilities of the sync search.

A trial is reduced to a :class:`TrialModel`: the click probability of each
signal window, the click probability of a noise window, the number of windows
and the sample scope ``N``. Window counts are then independent binomials.

The default ``aggregate`` sampler never materializes the noise windows. It
draws the noise maximum from ``P(max <= m) = F(m) ** n``, then the number of
windows at that maximum from a zero-truncated binomial, and finally the
positions of those windows when the decision depends on them. The ``naive``
sampler builds every count and runs :func:`~qkdsync.decision.decide`.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import stats

from . import phys
from .decision import (OUTCOMES, GroundTruth, Outcome, accumulate, classify, decide,
                       window_click_probabilities)
from .detector import GateContext, PulsePlacement, click_probability, window_split
from .rng import counter_uniforms, trial_generator
from .scheduler import FrameGrid, ScanPlan, build_scan_plan

#: sizes ``exact_probability`` accepts unless told otherwise
EXACT_MAX_WINDOWS = 8
EXACT_MAX_SAMPLES = 16

#: trials per independent block; blocks are the unit of parallel work
BLOCK_TRIALS = 8192

_Z95 = 1.959963984540054


# -- models -----------------------------------------------------------------

@dataclass(frozen=True)
class TrialModel:
    """Sufficient statistics of one trial.

    Signal windows sit at ``0`` (and ``1`` for a split pulse); noise windows
    fill the rest of the circular frame.
    """

    window_count: int
    samples_per_window: int
    signal_probs: tuple[float, ...]
    noise_prob: float

    def __post_init__(self):
        if len(self.signal_probs) not in (1, 2):
            raise ValueError("one or two signal windows")
        if self.window_count < 2:
            raise ValueError("need at least two windows")
        if self.samples_per_window < 1:
            raise ValueError("samples_per_window must be >= 1")
        if not all(0 <= p <= 1 for p in self.signal_probs):
            raise ValueError("signal click probabilities must lie in [0, 1]")
        if not 0 <= self.noise_prob < 1:
            raise ValueError("noise click probability must lie in [0, 1)")

    @property
    def noise_windows(self) -> int:
        return self.window_count - len(self.signal_probs)

    def truth(self) -> GroundTruth:
        if len(self.signal_probs) == 1:
            return GroundTruth.single(0, self.window_count)
        return GroundTruth.pair(0, self.window_count)

    def window_probs(self) -> np.ndarray:
        probs = np.full(self.window_count, float(self.noise_prob))
        probs[:len(self.signal_probs)] = self.signal_probs
        return probs


@dataclass(frozen=True)
class SystemConfig:
    channel: phys.FiberChannel = field(default_factory=phys.FiberChannel)
    source: phys.PulseSource = field(default_factory=phys.PulseSource)
    spad: phys.SpadParams = field(default_factory=phys.SpadParams)
    grid: FrameGrid = field(default_factory=lambda: FrameGrid(2.0, 524288))
    samples_per_window: int = 256
    pulse_placement: PulsePlacement = field(default_factory=PulsePlacement)
    true_signal_window: int = 0
    mean_pe_override: float | None = None
    gates_per_frame: int = 4

    def __post_init__(self):
        if not 0 <= self.true_signal_window < self.grid.window_count:
            raise ValueError(
                f"true_signal_window must lie in [0, {self.grid.window_count})")
        if self.samples_per_window < 1:
            raise ValueError("samples_per_window must be >= 1")
        if self.mean_pe_override is not None and self.mean_pe_override < 0:
            raise ValueError("mean_pe_override must be >= 0")

    @property
    def mean_pe(self) -> float:
        if self.mean_pe_override is not None:
            return self.mean_pe_override
        return phys.mean_photoelectrons(self.source, self.channel, self.spad)

    def truth(self) -> GroundTruth:
        first, second = window_split(self.pulse_placement, self.grid.window_width_ns)
        k, n_w = self.true_signal_window, self.grid.window_count
        if second == 0.0:
            return GroundTruth.single(k, n_w)
        return GroundTruth.pair(k, n_w, (first, second))

    def trial_model(self) -> TrialModel:
        truth = self.truth()
        tau = self.grid.window_width_ns
        dark = self.spad.dark_count_rate_hz
        signal = tuple(click_probability(GateContext(self.mean_pe * f, dark, tau))
                       for f in truth.fractions)
        noise = click_probability(GateContext(0.0, dark, tau))
        return TrialModel(self.grid.window_count, self.samples_per_window, signal, noise)

    def plan(self) -> ScanPlan:
        return build_scan_plan(self.grid, self.spad, self.gates_per_frame,
                               self.samples_per_window)


# -- estimates --------------------------------------------------------------

def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


@dataclass(frozen=True)
class ProbabilityEstimate:
    outcome: Outcome | str
    p_hat: float
    trials: int
    ci_low: float
    ci_high: float
    count: int

    @classmethod
    def from_count(cls, outcome, count: int, trials: int) -> ProbabilityEstimate:
        lo, hi = wilson_interval(count, trials)
        return cls(outcome, count / trials, trials, lo, hi, count)

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``p_hat``."""
        return math.sqrt(self.p_hat * (1 - self.p_hat) / self.trials)


def estimates_from_counts(counts: Mapping[Outcome, int], trials: int) -> dict:
    return {o: ProbabilityEstimate.from_count(o, int(counts.get(o, 0)), trials)
            for o in OUTCOMES}


def correct_estimate(estimates: Mapping[Outcome, ProbabilityEstimate]) -> ProbabilityEstimate:
    trials = next(iter(estimates.values())).trials
    count = sum(estimates[o].count for o in OUTCOMES if o.is_correct)
    return ProbabilityEstimate.from_count("Correct", count, trials)


# -- binomial helpers -------------------------------------------------------

def _binom_cdf_table(n: int, p: float) -> np.ndarray:
    return stats.binom.cdf(np.arange(n + 1), n, p)


def _inverse_cdf(table: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(table, u, side="right"), table.size - 1)


class _NoiseTables:
    """Per-model tables for the aggregate noise-maximum sampler."""

    def __init__(self, windows: int, samples: int, p: float):
        self.windows = windows
        values = np.arange(samples + 1)
        with np.errstate(divide="ignore"):
            log_cdf = np.log1p(-stats.binom.sf(values, samples, p))
        self.max_cdf = np.exp(windows * log_cdf)
        pmf = stats.binom.pmf(values, samples, p)
        cdf = np.exp(log_cdf)
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(cdf > 0, pmf / cdf, 0.0)
        # probability a window sits at the maximum, given max == m
        self.share = np.clip(share, 0.0, 1.0)

    def sample(self, u_max: np.ndarray, u_mult: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        top = _inverse_cdf(self.max_cdf, u_max)
        r = self.share[top]
        mult = np.full(top.shape, self.windows, dtype=np.int64)
        partial = r < 1.0
        if partial.any():
            rp = r[partial]
            tail = stats.binom.sf(0, self.windows, rp)
            k = stats.binom.isf(u_mult[partial] * tail, self.windows, rp)
            k = np.nan_to_num(k, nan=1.0)
            mult[partial] = np.clip(k, 1, self.windows).astype(np.int64)
        return top, mult


class NoiseMax(NamedTuple):
    max_count: int
    multiplicity: int
    window_count: int

    def positions(self, rng: np.random.Generator) -> np.ndarray:
        """Indices of the windows at the maximum, drawn on demand."""
        return np.sort(rng.choice(self.window_count, self.multiplicity, replace=False))


def fast_noise_max_sample(window_count: int, samples: int, noise_prob: float,
                          rng: np.random.Generator, size: int | None = None):
    """Maximum of ``window_count`` i.i.d. Binomial(samples, noise_prob) counts.

    Returns a :class:`NoiseMax`, or for ``size`` given, arrays
    ``(max_count, multiplicity)``.
    """
    if not 0 <= noise_prob < 1:
        raise ValueError("noise_prob must lie in [0, 1)")
    tables = _NoiseTables(window_count, samples, noise_prob)
    n = 1 if size is None else size
    top, mult = tables.sample(rng.random(n), rng.random(n))
    if size is None:
        return NoiseMax(int(top[0]), int(mult[0]), window_count)
    return top, mult


# -- aggregate sampler ------------------------------------------------------

_DRAW_SIGNAL = (0, 1)
_DRAW_NOISE_MAX = 2
_DRAW_NOISE_MULT = 3
_DRAW_POS = (4, 5)


def _aggregate_block(model: TrialModel, seed: int, start: int, stop: int) -> np.ndarray:
    """Outcome counts (ordered as ``OUTCOMES``) for trials ``start..stop-1``."""
    trials = np.arange(start, stop, dtype=np.int64)
    n_sig = len(model.signal_probs)
    N = model.samples_per_window
    sig = np.stack([
        _inverse_cdf(_binom_cdf_table(N, p), counter_uniforms(seed, trials, _DRAW_SIGNAL[i]))
        for i, p in enumerate(model.signal_probs)
    ])
    n = model.noise_windows
    smax = sig.max(axis=0)
    if n_sig == 1:
        achievers = np.ones(trials.size, dtype=np.int64)
        only_first = np.ones(trials.size, dtype=bool)
    else:
        achievers = (sig[0] == smax).astype(np.int64) + (sig[1] == smax)
        only_first = (sig[0] == smax) & (sig[1] < smax)
    outcome = np.full(trials.size, OUTCOMES.index(Outcome.MISS), dtype=np.int64)
    correct_code = OUTCOMES.index(Outcome.CORRECT_SINGLE if n_sig == 1
                                  else Outcome.CORRECT_ADJACENT)
    err_code = OUTCOMES.index(Outcome.ERRONEOUS)

    if n == 0:
        outcome[smax > 0] = correct_code
        return np.bincount(outcome, minlength=len(OUTCOMES))

    tables = _NoiseTables(n, N, model.noise_prob)
    nmax, mult = tables.sample(counter_uniforms(seed, trials, _DRAW_NOISE_MAX),
                               counter_uniforms(seed, trials, _DRAW_NOISE_MULT))
    # noise windows form a path 0..n-1; node 0 touches the last signal
    # window, node n-1 touches the first one
    j1 = np.minimum((counter_uniforms(seed, trials, _DRAW_POS[0]) * n).astype(np.int64), n - 1)
    j2 = np.minimum((counter_uniforms(seed, trials, _DRAW_POS[1]) * max(n - 1, 1))
                    .astype(np.int64), max(n - 2, 0))
    j2 = j2 + (j2 >= j1)

    signal_wins = smax > nmax
    outcome[signal_wins] = correct_code

    noise_wins = nmax > smax
    noise_decided = noise_wins & ((mult == 1) | ((mult == 2) & (np.abs(j1 - j2) == 1)))
    outcome[noise_decided] = err_code

    tie = (nmax == smax) & (smax > 0) & (achievers == 1) & (mult == 1)
    if n_sig == 1:
        touching = (j1 == 0) | (j1 == n - 1)
    else:
        touching = np.where(only_first, j1 == n - 1, j1 == 0)
    outcome[tie & touching] = err_code
    return np.bincount(outcome, minlength=len(OUTCOMES))


def _naive_model_block(model: TrialModel, seed: int, start: int, stop: int) -> np.ndarray:
    probs = model.window_probs()
    truth = model.truth()
    out = np.zeros(len(OUTCOMES), dtype=np.int64)
    for t in range(start, stop):
        rng = trial_generator(seed, t)
        counts = rng.binomial(model.samples_per_window, probs)
        out[OUTCOMES.index(classify(decide(counts), truth))] += 1
    return out


def _naive_gate_block(config: SystemConfig, seed: int, start: int, stop: int) -> np.ndarray:
    plan = config.plan()
    truth = config.truth()
    probs = window_click_probabilities(truth, config.mean_pe, config.spad.dark_count_rate_hz,
                                       config.grid.window_width_ns)
    out = np.zeros(len(OUTCOMES), dtype=np.int64)
    for t in range(start, stop):
        counts = accumulate(plan, truth, probs, trial_generator(seed, t))
        out[OUTCOMES.index(classify(decide(counts), truth))] += 1
    return out


def _run_block(args) -> np.ndarray:
    method, target, seed, start, stop = args
    if method == "aggregate":
        return _aggregate_block(target, seed, start, stop)
    if method == "naive":
        return _naive_model_block(target, seed, start, stop)
    return _naive_gate_block(target, seed, start, stop)


def run_trials(config: SystemConfig | TrialModel, trials: int, seed: int = 0, *,
               method: str = "aggregate", workers: int = 1) -> dict:
    """Estimate the outcome distribution over ``trials`` independent scans.

    ``method`` is ``"aggregate"`` (default), ``"naive"`` (all window counts
    drawn, then decided) or ``"gates"`` (every gate of the scan plan sampled;
    only practical for small grids, needs a :class:`SystemConfig`). Results
    depend only on ``(config, trials, seed, method)``.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if method not in ("aggregate", "naive", "gates"):
        raise ValueError(f"unknown method {method!r}")
    if method == "gates":
        if not isinstance(config, SystemConfig):
            raise TypeError("gate-level simulation needs a SystemConfig")
        config.plan()
        target = config
    else:
        if isinstance(config, SystemConfig):
            config.plan()  # surfaces infeasible schedules
            target = config.trial_model()
        else:
            target = config
    block = BLOCK_TRIALS if method == "aggregate" else 512
    jobs = [(method, target, seed, s, min(s + block, trials)) for s in range(0, trials, block)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    else:
        parts = [_run_block(job) for job in jobs]
    total = np.sum(parts, axis=0)
    return estimates_from_counts(dict(zip(OUTCOMES, total.tolist())), trials)


# -- exact distribution -----------------------------------------------------

def exact_probability(model: TrialModel, *, enforce_limits: bool = True) -> dict:
    """Exact outcome distribution of ``model``.

    The noise counts enter only through their maximum ``m`` and the set of
    windows attaining it, and the decision only asks whether that set is one
    window (touching a signal window or not), one adjacent pair, or larger.
    Each case has a product form in the binomial pmf/cdf, so the cost is
    ``O(N**2)`` whatever the number of windows. By default the size is capped
    at 8 windows and ``N = 16``; pass ``enforce_limits=False`` for full-scale
    grids.
    """
    N, n_w = model.samples_per_window, model.window_count
    if enforce_limits and (n_w > EXACT_MAX_WINDOWS or N > EXACT_MAX_SAMPLES):
        raise ValueError(
            f"exact enumeration is limited to {EXACT_MAX_WINDOWS} windows and "
            f"N <= {EXACT_MAX_SAMPLES}; got {n_w} windows, N = {N}")
    values = np.arange(N + 1)
    n = model.noise_windows
    n_sig = len(model.signal_probs)

    # signal side: P(smax = v, achiever pattern)
    pmfs = [stats.binom.pmf(values, N, p) for p in model.signal_probs]
    cdfs = [stats.binom.cdf(values, N, p) for p in model.signal_probs]
    if n_sig == 1:
        lone = [pmfs[0]]
        both = np.zeros(N + 1)
    else:
        below = [np.concatenate(([0.0], c[:-1])) for c in cdfs]
        lone = [pmfs[0] * below[1], pmfs[1] * below[0]]
        both = pmfs[0] * pmfs[1]
    smax_pmf = sum(lone) + both

    correct = Outcome.CORRECT_SINGLE if n_sig == 1 else Outcome.CORRECT_ADJACENT
    out = dict.fromkeys(OUTCOMES, 0.0)
    if n == 0:
        out[correct] = float(smax_pmf[1:].sum())
        out[Outcome.MISS] = float(smax_pmf[0])
        return out

    p = model.noise_prob
    with np.errstate(divide="ignore"):
        log_cdf = np.log1p(-stats.binom.sf(values, N, p))
    log_below = np.concatenate(([-np.inf], log_cdf[:-1]))
    q = stats.binom.pmf(values, N, p)
    max_cdf = np.exp(n * log_cdf)
    max_below = np.exp(n * log_below)
    max_pmf = max_cdf - max_below
    # P(max == m and the argmax set is one given window / one given pair)
    one = q * np.exp((n - 1) * log_below) if n > 1 else q.copy()
    two = q * q * np.exp((n - 2) * log_below) if n > 2 else (q * q if n == 2 else np.zeros(N + 1))
    noise_decided = n * one + (n - 1) * two
    # sum over m > v
    decided_above = np.concatenate((np.cumsum(noise_decided[::-1])[::-1][1:], [0.0]))
    max_above = 1.0 - max_cdf

    # v = 0: the signal never clicked
    out[Outcome.ERRONEOUS] += smax_pmf[0] * decided_above[0]
    out[Outcome.MISS] += smax_pmf[0] * (1.0 - decided_above[0])

    v = values[1:]
    out[correct] += float(np.sum(smax_pmf[v] * max_below[v]))
    out[Outcome.ERRONEOUS] += float(np.sum(smax_pmf[v] * decided_above[v]))
    out[Outcome.MISS] += float(np.sum(smax_pmf[v] * (max_above[v] - decided_above[v])))
    # noise maximum ties the signal maximum
    if n_sig == 1:
        touch = [1 if n == 1 else 2]
    else:
        touch = [1, 1]
    tie_err = sum(t * lone_i[v] for t, lone_i in zip(touch, lone)) * one[v]
    out[Outcome.ERRONEOUS] += float(np.sum(tie_err))
    out[Outcome.MISS] += float(np.sum(smax_pmf[v] * max_pmf[v] - tie_err))
    return {o: float(val) for o, val in out.items()}


def brute_force_probability(model: TrialModel) -> dict:
    """Enumerate every count array; only for tiny grids."""
    N, n_w = model.samples_per_window, model.window_count
    if (N + 1) ** n_w > 2_000_000:
        raise ValueError("too many count arrays to enumerate")
    probs = model.window_probs()
    pmf = np.stack([stats.binom.pmf(np.arange(N + 1), N, p) for p in probs])
    truth = model.truth()
    out = dict.fromkeys(OUTCOMES, 0.0)
    for counts in itertools.product(range(N + 1), repeat=n_w):
        weight = float(np.prod(pmf[np.arange(n_w), counts]))
        if weight:
            out[classify(decide(np.array(counts)), truth)] += weight
    return out


# -- sweeps -----------------------------------------------------------------

SWEEP_AXES = ("mean_pe", "dark_hz", "N")
FIGURE_SAMPLE_SCOPES = (32, 64, 128, 256, 512, 1024, 2048)
CSV_COLUMNS = ("mean_pe", "dark_hz", "N", "trials", "p_correct", "ci_low", "ci_high",
               "p_erroneous", "p_miss", "seed")


def with_point(base: SystemConfig, mean_pe=None, dark_hz=None, N=None) -> SystemConfig:
    cfg = base
    if mean_pe is not None:
        cfg = replace(cfg, mean_pe_override=float(mean_pe))
    if dark_hz is not None:
        cfg = replace(cfg, spad=replace(cfg.spad, dark_count_rate_hz=float(dark_hz)))
    if N is not None:
        cfg = replace(cfg, samples_per_window=int(N))
    return cfg


@dataclass(frozen=True)
class SweepRow:
    mean_pe: float
    dark_hz: float
    N: int
    trials: int
    p_correct: float
    ci_low: float
    ci_high: float
    p_erroneous: float
    p_miss: float
    seed: int

    def as_tuple(self):
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def sweep(base: SystemConfig, axes: Mapping[str, Sequence], trials: int, seed: int = 0, *,
          workers: int = 1, method: str = "aggregate") -> list[SweepRow]:
    """One row per point of the Cartesian product of ``axes``.

    Every point runs with the same seed, so rows do not depend on each other
    or on their order, and neighbouring points share random numbers.
    """
    unknown = set(axes) - set(SWEEP_AXES)
    if unknown:
        raise ValueError(f"unknown sweep axes {sorted(unknown)}; use {SWEEP_AXES}")
    grid = [list(axes.get(name, [None])) for name in SWEEP_AXES]
    rows = []
    for mean_pe, dark_hz, N in itertools.product(*grid):
        cfg = with_point(base, mean_pe, dark_hz, N)
        est = run_trials(cfg, trials, seed, method=method, workers=workers)
        corr = correct_estimate(est)
        rows.append(SweepRow(cfg.mean_pe, cfg.spad.dark_count_rate_hz, cfg.samples_per_window,
                             trials, corr.p_hat, corr.ci_low, corr.ci_high,
                             est[Outcome.ERRONEOUS].p_hat, est[Outcome.MISS].p_hat, seed))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in row.as_tuple()])
    return buf.getvalue()


# -- tap scenario -----------------------------------------------------------

def apply_tap(config: SystemConfig, tap_ratio: float) -> tuple[SystemConfig, float]:
    """Divert ``tap_ratio`` of the pulse energy before it reaches the receiver.

    The tap sits where the configured mean is defined: at the detector when
    ``mean_pe_override`` is set, at the source output otherwise. Returns the
    legitimate configuration and the eavesdropper's mean photons per pulse.
    """
    if not 0 <= tap_ratio < 1:
        raise ValueError(f"tap_ratio must lie in [0, 1), got {tap_ratio}")
    keep = 1.0 - tap_ratio
    if config.mean_pe_override is not None:
        at_tap = config.mean_pe_override
        legit = replace(config, mean_pe_override=at_tap * keep)
    else:
        at_tap = config.source.mean_photons
        legit = replace(config, source=replace(config.source, mean_photons=at_tap * keep))
    return legit, tap_ratio * at_tap


@dataclass(frozen=True)
class TapImpact:
    delta_p_correct: float
    delta_sigma: float
    eavesdropper_click_rate: float
    eavesdropper_mean_photons: float
    p_correct_untapped: ProbabilityEstimate
    p_correct_tapped: ProbabilityEstimate


def tap_impact(config: SystemConfig, tap_ratio: float, trials: int, seed: int = 0, *,
               workers: int = 1) -> TapImpact:
    """Loss of correct-detection probability caused by a tap.

    Both runs share ``seed``; the eavesdropper click rate assumes an ideal
    unit-efficiency detector on the tapped arm.
    """
    tapped, eve_mu = apply_tap(config, tap_ratio)
    before = correct_estimate(run_trials(config, trials, seed, workers=workers))
    after = correct_estimate(run_trials(tapped, trials, seed, workers=workers))
    sigma = math.hypot(before.sigma, after.sigma)
    return TapImpact(before.p_hat - after.p_hat, sigma, -math.expm1(-eve_mu), eve_mu,
                     before, after)
