"""
From fiber length to frame grid
===============================

Walk a 100 km line through to the scan grid: propagation speed, the
round-trip floor on the repetition period, the power-of-two window count
and the mean photoelectron number at the receiver.
"""

from qkdsync import (FiberChannel, PulseSource, SpadParams, build_frame_grid,
                     mean_photoelectrons, min_repetition_period, propagation_speed,
                     transmittance, window_width_from_pulse)

# 300000 km/s keeps the round numbers (about 978 us round trip)
line = FiberChannel(length_km=100.0, refractive_index=1.467, attenuation_db_per_km=0.2)
speed = propagation_speed(300000.0, line.refractive_index)
t_min = min_repetition_period(line.length_km, speed)
print(f"speed in fiber  {speed:.0f} km/s")
print(f"round trip      {t_min / 1e3:.1f} us")

# windows are twice the pulse width; their count is rounded up to a power of two
tau_w = window_width_from_pulse(1.0, factor=2.0)
grid = build_frame_grid(t_min, tau_w)
print(f"N_w = {grid.window_count}, T_s = {grid.frame_period_ns:.0f} ns, "
      f"f_s = {grid.repetition_frequency_hz:.1f} Hz")

# 20 dB of loss leaves 1% of the light
source = PulseSource(pulse_width_ns=1.0, mean_photons=0.5)
mu_pe = mean_photoelectrons(source, line, SpadParams(quantum_efficiency=1.0))
print(f"transmittance {transmittance(line):.3f}, mu_pe {mu_pe:.4f}")
