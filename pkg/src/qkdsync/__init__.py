"""Single-photon synchronization of fiber QKD systems: scan scheduling,
gated SPAD statistics, the max-count decision and its success probability."""
from .decision import (CountsArray, Decision, GroundTruth, Outcome, accumulate, adjacent,
                       classify, decide)
from .detector import GateContext, PulsePlacement, click_probability, sample_gate, window_split
from .engine import (ProbabilityEstimate, SystemConfig, TrialModel, apply_tap,
                     brute_force_probability, exact_probability, fast_noise_max_sample,
                     run_trials, sweep, tap_impact)
from .phys import (FiberChannel, PulseSource, SpadParams, mean_photoelectrons,
                   min_repetition_period, propagation_speed, transmittance)
from .scheduler import (FrameGrid, ScanPlan, build_frame_grid, build_scan_plan, gate_delay,
                        validate_spacing, window_width_from_pulse)

__version__ = "0.1.0"
