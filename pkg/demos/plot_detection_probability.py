"""
Probability of locking onto the right window
============================================

Estimate the chance that the max-count rule picks the true window, first
with the aggregate Monte Carlo sampler and then with the closed-form
result, over the dark-count rates and sample scopes of a typical sweep.
"""

import numpy as np

from qkdsync import exact_probability, run_trials
from qkdsync.config import FIGURE_DARK_RATES_HZ, figure_experiment
from qkdsync.decision import Outcome
from qkdsync.engine import FIGURE_SAMPLE_SCOPES, correct_estimate, with_point

# a weak pulse: 0.01 photoelectrons per frame at the receiver
base = figure_experiment(2, trials=10_000, seed=1).config
point = with_point(base, mean_pe=0.01, dark_hz=100.0, N=512)
est = correct_estimate(run_trials(point, 10_000, seed=1))
print(f"MC    P = {est.p_hat:.4f}  [{est.ci_low:.4f}, {est.ci_high:.4f}]")

# the exact value needs no sampling, even at full scale
exact = exact_probability(point.trial_model(), enforce_limits=False)
print(f"exact P = {exact[Outcome.CORRECT_SINGLE]:.5f}")

# the full grid, exact values only
table = np.array([[exact_probability(with_point(base, 0.01, d, n).trial_model(),
                                     enforce_limits=False)[Outcome.CORRECT_SINGLE]
                   for n in FIGURE_SAMPLE_SCOPES] for d in FIGURE_DARK_RATES_HZ])
print("dark \\ N " + "".join(f"{n:>8}" for n in FIGURE_SAMPLE_SCOPES))
for d, row in zip(FIGURE_DARK_RATES_HZ, table):
    print(f"{d:>8.0f} " + "".join(f"{p:8.4f}" for p in row))
