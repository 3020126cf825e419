"""
Tapping the sync pulse
======================

Divert part of the sync light and compare the damage to the legitimate
lock with what the eavesdropper gets to see.
"""

import warnings
from dataclasses import replace

from qkdsync import PulseSource, apply_tap, tap_impact
from qkdsync.config import figure_experiment
from qkdsync.engine import with_point

base = with_point(figure_experiment(2, 1, 0).config, mean_pe=0.01, dark_hz=100.0, N=256)
for tap in (0.1, 0.5):
    impact = tap_impact(base, tap, trials=10_000, seed=3)
    print(f"tap {tap}: P {impact.p_correct_untapped.p_hat:.4f} -> {impact.p_correct_tapped.p_hat:.4f}, "
          f"eavesdropper clicks with probability {impact.eavesdropper_click_rate:.4f}")

# a bright sync pulse hands the eavesdropper plenty of light for a tiny loss
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    bright = replace(base, source=PulseSource(mean_photons=1000.0), mean_pe_override=None)
    legit, eve = apply_tap(bright, 0.01)
print(f"mu = 1000: eavesdropper gets {eve:g} photons/pulse, "
      f"legit keeps {legit.source.mean_photons:g}")
