"""
Four gates per frame
====================

Build the gate schedule for the default grid, confirm every window is
visited N times and that consecutive gates leave the detector time to
recover.
"""

import numpy as np

from qkdsync import FrameGrid, SpadParams, build_scan_plan, gate_delay, validate_spacing

grid = FrameGrid(window_width_ns=2.0, window_count=524288)
spad = SpadParams(dead_time_ns=50.0, recovery_gap_ns=100_000.0)
plan = build_scan_plan(grid, spad, gates_per_frame=4, samples_per_window=256)
print(f"{plan.frame_count} frames, {plan.activation_count} gate openings, "
      f"{plan.total_duration_ns / 1e9:.1f} s of scanning")

# the first few delays: quarter-frame offsets plus one window per frame
for frame in (1, 2, 3):
    print(frame, [gate_delay(g, frame, grid) for g in range(1, 5)])

# gaps repeat frame to frame, so two frames settle the spacing question
print("spacing violations:", validate_spacing(plan, spad))

# a small grid is cheap enough to enumerate outright
small = build_scan_plan(FrameGrid(2.0, 16), SpadParams(dead_time_ns=0.0, recovery_gap_ns=0.0),
                        gates_per_frame=4, samples_per_window=3)
print("coverage:", np.bincount(small.activations()["window"], minlength=16))
