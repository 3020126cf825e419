import math

import pytest
from hypothesis import given, strategies as st

from qkdsync.phys import (FiberChannel, PulseSource, SpadParams, mean_photoelectrons,
                          min_repetition_period, propagation_speed, transmittance)


def test_propagation_speed_values():
    assert propagation_speed(300000, 1.0) == 300000
    assert propagation_speed(300000, 1.4670) == pytest.approx(204498.977505, rel=1e-9)
    assert abs(propagation_speed(300000, 1.4670) - 205000) < 600
    assert propagation_speed(300000, 1.49) == pytest.approx(201342.2818791946, rel=1e-12)


def test_propagation_speed_rejects_sub_vacuum_index():
    with pytest.raises(ValueError):
        propagation_speed(300000, 0.9)


def test_min_repetition_period():
    assert min_repetition_period(0, 205000) == 0
    assert min_repetition_period(100, 204499) == pytest.approx(978_000, rel=5e-3)
    assert min_repetition_period(100, 201000) == pytest.approx(995_024.875, rel=1e-9)


def test_transmittance_examples():
    assert transmittance(FiberChannel(0.0, 1.467, 0.2)) == 1.0
    assert transmittance(FiberChannel(100.0, 1.467, 0.2)) == pytest.approx(0.01, rel=1e-12)
    assert transmittance(FiberChannel(50.0, 1.467, 0.2)) == pytest.approx(0.1, rel=1e-12)


def test_mean_photoelectrons_examples():
    line = FiberChannel(100.0, 1.467, 0.2)
    assert mean_photoelectrons(PulseSource(mean_photons=0.5), line, SpadParams()) == \
        pytest.approx(0.005, rel=1e-12)
    assert mean_photoelectrons(PulseSource(mean_photons=0.0), line, SpadParams()) == 0
    spad = SpadParams(quantum_efficiency=0.1)
    assert mean_photoelectrons(PulseSource(mean_photons=0.5), line, spad) == \
        pytest.approx(5e-4, rel=1e-12)


def test_parameter_validation():
    with pytest.raises(ValueError):
        FiberChannel(-1.0)
    with pytest.raises(ValueError):
        SpadParams(quantum_efficiency=1.5)
    with pytest.raises(ValueError):
        SpadParams(dead_time_ns=50, recovery_gap_ns=10)
    with pytest.raises(ValueError):
        PulseSource(pulse_width_ns=2.0, repetition_period_ns=1.0)
    with pytest.warns(UserWarning, match="single-photon"):
        PulseSource(mean_photons=1000)


lengths = st.floats(0, 300, allow_nan=False)
alphas = st.floats(0, 1, allow_nan=False)


@given(lengths, lengths, alphas)
def test_transmittance_is_multiplicative(l1, l2, a):
    joint = transmittance(FiberChannel(l1 + l2, 1.467, a))
    split = transmittance(FiberChannel(l1, 1.467, a)) * transmittance(FiberChannel(l2, 1.467, a))
    assert joint == pytest.approx(split, rel=1e-12, abs=1e-300)
    assert 0 < joint <= 1


@pytest.mark.filterwarnings("ignore:mean_photons")
@given(st.floats(0, 0.5), st.floats(0, 1), st.floats(0.01, 2))
def test_mean_pe_linear(mu, eta, k):
    line = FiberChannel(100.0, 1.467, 0.2)
    base = mean_photoelectrons(PulseSource(mean_photons=mu), line, SpadParams(quantum_efficiency=eta))
    scaled_mu = mean_photoelectrons(PulseSource(mean_photons=mu * k), line,
                                    SpadParams(quantum_efficiency=eta))
    assert scaled_mu == pytest.approx(base * k, rel=1e-12, abs=1e-300)
    half_eta = mean_photoelectrons(PulseSource(mean_photons=mu), line,
                                   SpadParams(quantum_efficiency=eta / 2))
    assert half_eta == pytest.approx(base / 2, rel=1e-12, abs=1e-300)


@given(st.floats(0, 200), st.floats(0, 200), st.floats(1e4, 3e5))
def test_min_period_monotone(l1, l2, v):
    lo, hi = sorted((l1, l2))
    assert min_repetition_period(lo, v) <= min_repetition_period(hi, v)
    assert min_repetition_period(hi, v) >= min_repetition_period(hi, v * 1.5)


def test_speed_below_vacuum():
    assert propagation_speed(refractive_index=FiberChannel().refractive_index) < 299792.458
    assert math.isfinite(propagation_speed())
