import math

import pytest

from qkdsync.detector import PulsePlacement
from qkdsync.engine import SystemConfig
from qkdsync.phys import SpadParams
from qkdsync.scheduler import FrameGrid


def dark_rate_for(p: float, gate_ns: float = 2.0) -> float:
    """Dark count rate giving click probability ``p`` in an empty gate."""
    return -math.log1p(-p) / (gate_ns * 1e-9)


@pytest.fixture
def small_config():
    return SystemConfig(
        grid=FrameGrid(2.0, 8),
        spad=SpadParams(dark_count_rate_hz=dark_rate_for(0.05), dead_time_ns=0,
                        recovery_gap_ns=0),
        samples_per_window=4,
        mean_pe_override=0.4,
        true_signal_window=5,
    )


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
