import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pilotqkd.config import ScenarioConfig

settings.register_profile(
    "pilotqkd", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("pilotqkd")

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record and print one pass/fail line, then assert the outcome."""

    def report(number, title, passed, detail):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cfg():
    """Default link at 2.5 GS/s with a short frame."""
    return ScenarioConfig(sample_rate=2.5e9, symbols_per_frame=20_000)


@pytest.fixture
def ideal_cfg():
    """Short frame with every impairment and noise source switched off."""
    return ScenarioConfig(
        sample_rate=2.5e9,
        symbols_per_frame=20_000,
        fiber_length_km=0.0,
        tx_linewidth=0.0,
        lo_linewidth=0.0,
        lo_frequency_offset=0.0,
        electronic_noise=0.0,
        receiver_efficiency=1.0,
        shot_noise=False,
        adc_bits=0,
        per_tx_db=float("inf"),
        per_rx_db=float("inf"),
        carrier_suppression_db=float("inf"),
        sideband_suppression_db=float("inf"),
        filter_bandwidth=300e6,
        edge_discard=16,
    )
