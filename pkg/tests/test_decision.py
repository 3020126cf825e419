import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdsync.decision import (CountsArray, Decision, GroundTruth, Outcome, accumulate,
                              adjacent, classify, decide, window_click_probabilities)
from qkdsync.detector import GateContext
from qkdsync.phys import SpadParams
from qkdsync.scheduler import ConfigurationError, FrameGrid, build_scan_plan

IDEAL = SpadParams(dead_time_ns=0, recovery_gap_ns=0)


def test_decide_examples():
    assert decide(CountsArray(np.array([0, 3, 1, 0]), 3)) == Decision(1, (1,), 3)
    d = decide(np.array([2, 2, 0, 0]))
    assert d.window == 0 and d.ties == (0, 1)
    assert decide(np.array([2, 0, 2, 0])).window is None
    assert decide(np.array([0, 0, 0, 0])).window is None
    wrap = decide(np.array([3, 0, 0, 3]))
    assert wrap.window == 0 and wrap.ties == (0, 3)


def test_classify_examples():
    assert classify(Decision(7, (7,), 2), GroundTruth.single(7, 16)) is Outcome.CORRECT_SINGLE
    assert classify(Decision(4, (4, 5), 2), GroundTruth.pair(4, 16)) is Outcome.CORRECT_ADJACENT
    assert classify(Decision(3, (3,), 2), GroundTruth.single(7, 16)) is Outcome.ERRONEOUS
    assert classify(Decision(None, (1, 5), 2), GroundTruth.single(1, 16)) is Outcome.MISS
    # a noise neighbour tying the signal window is not a correct single detection
    assert classify(Decision(6, (6, 7), 2), GroundTruth.single(6, 16)) is Outcome.ERRONEOUS


def test_counts_bounds():
    with pytest.raises(ValueError):
        CountsArray(np.array([0, 4]), 3)
    with pytest.raises(ValueError):
        CountsArray(np.array([-1, 0]), 3)


def test_counts_csv():
    assert CountsArray(np.array([1, 0, 2]), 2).to_csv() == "window,count\n0,1\n1,0\n2,2\n"


def test_ground_truth_adjacency():
    assert GroundTruth.pair(7, 8).windows == (7, 0)
    with pytest.raises(ValueError):
        GroundTruth((1, 3), (0.5, 0.5), 8)
    assert adjacent(0, 7, 8) and adjacent(3, 4, 8) and not adjacent(2, 4, 8)
    assert adjacent(0, 1, 2)


def _argmax_rule(counts):
    top = max(counts)
    tops = [k for k, c in enumerate(counts) if c == top]
    if top == 0:
        return None
    if len(tops) == 1:
        return tops[0]
    n = len(counts)
    if len(tops) == 2 and (tops[1] - tops[0]) % n in (1, n - 1):
        return tops[0]
    return None


@pytest.mark.parametrize("n_w", [2, 3, 4])
@pytest.mark.parametrize("samples", [1, 2, 3])
def test_decide_matches_rule_exhaustively(n_w, samples):
    for counts in itertools.product(range(samples + 1), repeat=n_w):
        assert decide(np.array(counts)).window == _argmax_rule(counts)


def test_accumulate_zero_probabilities():
    grid = FrameGrid(2.0, 8)
    plan = build_scan_plan(grid, IDEAL, 4, 5)
    truth = GroundTruth.single(3, 8)
    counts = accumulate(plan, truth, np.zeros(8), np.random.default_rng(0))
    assert (counts.counts == 0).all()


def test_accumulate_saturated_window():
    grid = FrameGrid(2.0, 8)
    plan = build_scan_plan(grid, IDEAL, 4, 5)
    truth = GroundTruth.single(3, 8)
    ctxs = [GateContext(50.0 if k == 3 else 0.0, 0.0, 2.0) for k in range(8)]
    counts = accumulate(plan, truth, ctxs, np.random.default_rng(0))
    assert counts.counts[3] == 5
    assert counts.counts.sum() == 5


def test_accumulate_mean_count():
    grid = FrameGrid(2.0, 8)
    plan = build_scan_plan(grid, IDEAL, 4, 256)
    truth = GroundTruth.single(2, 8)
    probs = window_click_probabilities(truth, 0.5, 100.0, 2.0)
    assert probs[2] == pytest.approx(-np.expm1(-0.5000002))
    rng = np.random.default_rng(11)
    sig = np.array([accumulate(plan, truth, probs, rng).counts[2] for _ in range(400)])
    mean = 256 * probs[2]
    assert mean == pytest.approx(100.7, abs=0.05)
    sd = np.sqrt(256 * probs[2] * (1 - probs[2]) / sig.size)
    assert abs(sig.mean() - mean) < 3 * sd


def test_accumulate_grid_mismatch():
    plan = build_scan_plan(FrameGrid(2.0, 8), IDEAL, 4, 1)
    with pytest.raises(ConfigurationError):
        accumulate(plan, GroundTruth.single(0, 16), np.zeros(16), np.random.default_rng(0))


count_arrays = st.integers(3, 8).flatmap(
    lambda n: st.lists(st.integers(0, 6), min_size=n, max_size=n))


@given(count_arrays, st.data())
def test_noise_permutation_does_not_change_outcome(counts, data):
    n = len(counts)
    truth = GroundTruth.single(0, n)
    base = classify(decide(np.array(counts)), truth)
    noise = counts[1:]
    perm = data.draw(st.permutations(noise))
    shuffled = np.array([counts[0], *perm])
    after = classify(decide(shuffled), truth)
    if base.is_correct:
        assert after is base
    else:
        assert not after.is_correct


@given(count_arrays, st.booleans())
def test_more_signal_never_hurts(counts, pair):
    n = len(counts)
    truth = GroundTruth.pair(0, n) if pair else GroundTruth.single(0, n)
    before = classify(decide(np.array(counts)), truth)
    bumped = list(counts)
    bumped[0] += 1
    after = classify(decide(np.array(bumped)), truth)
    if before.is_correct:
        assert after.is_correct
