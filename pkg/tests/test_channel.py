import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import signal

from pilotqkd.channel import (
    ChannelState,
    calibrate_crosstalk,
    crosstalk_density_from_load,
    jones_rotation,
    propagate,
    transmittance_from_length,
)
from pilotqkd.pipeline import simulate_link, transmit


@pytest.fixture(scope="module")
def frame():
    from pilotqkd.config import ScenarioConfig

    cfg = ScenarioConfig(sample_rate=5e9, symbols_per_frame=20_000, per_tx_db=np.inf)
    return transmit(cfg, 4)[2]


class TestTransmittance:
    @pytest.mark.parametrize("length, expected, tol", [
        (0.0, 1.0, 0.0),
        (13.2, 0.5445, 1e-4),
        (28.4, 0.2704, 1e-4),
    ])
    def test_examples(self, length, expected, tol):
        assert transmittance_from_length(length, 0.2) == pytest.approx(expected, abs=tol)

    def test_closed_form(self):
        assert transmittance_from_length(13.2) == pytest.approx(10 ** (-0.264), rel=1e-15)

    def test_negative_length(self):
        with pytest.raises(ValueError):
            transmittance_from_length(-1.0)


class TestChannelState:
    @pytest.mark.parametrize("t", [0.0, 1.5, -0.1])
    def test_transmittance_bounds(self, t):
        with pytest.raises(ValueError):
            ChannelState(transmittance=t)

    def test_non_unitary_jones(self):
        with pytest.raises(ValueError):
            ChannelState(jones=np.array([[1.0, 0.1], [0.0, 1.0]]))

    @given(st.floats(-np.pi, np.pi))
    def test_rotation_is_unitary(self, angle):
        u = jones_rotation(angle)
        assert np.linalg.norm(u.conj().T @ u - np.eye(2)) < 1e-12

    def test_default_is_identity(self):
        assert ChannelState().is_identity


class TestPropagate:
    def test_identity_returns_input(self, frame):
        assert propagate(frame, ChannelState(), seed=1) is frame

    def test_loss_scales_photons(self, frame):
        out = propagate(frame, ChannelState(transmittance=0.5445), seed=1)
        assert frame.mean_photons() == pytest.approx(4.0, rel=1e-9)
        assert out.mean_photons() == pytest.approx(2.178, rel=1e-2)
        assert out.mean_photons() == pytest.approx(0.5445 * frame.mean_photons(), rel=1e-12)

    @given(st.floats(-np.pi, np.pi))
    def test_rotation_preserves_total_power(self, frame, angle):
        out = propagate(frame, ChannelState(jones=jones_rotation(angle)), seed=1)
        before = frame.mean_photons("te") + frame.mean_photons("tm")
        after = out.mean_photons("te") + out.mean_photons("tm")
        assert after == pytest.approx(before, rel=1e-12)

    def test_frequency_offset_moves_pilot(self, frame):
        fft_size = 1 << 14
        out = propagate(frame, ChannelState(frequency_offset=10e6), seed=1)
        peaks = []
        for f in (frame, out):
            freqs, psd = signal.welch(f.tm_samples, fs=f.sample_rate, nperseg=fft_size,
                                      return_onesided=False, detrend=False)
            peaks.append(freqs[np.argmax(psd)])
        assert abs(peaks[0] - 1e9) <= frame.sample_rate / fft_size
        assert abs(peaks[1] - peaks[0] - 10e6) <= frame.sample_rate / fft_size

    def test_phase_path_length_checked(self, frame):
        with pytest.raises(ValueError):
            propagate(frame, ChannelState(phase_path=np.ones(10)), seed=1)

    def test_crosstalk_noise_variance(self, frame):
        density = 0.02
        out = propagate(frame, ChannelState(crosstalk_density=density), seed=3)
        noise = np.asarray(out.te_samples) - np.asarray(frame.te_samples)
        # field variance per real component is density * sps / 4
        expected = density * frame.samples_per_symbol / 4
        assert np.var(noise.real) == pytest.approx(expected, rel=0.01)
        assert np.var(noise.imag) == pytest.approx(expected, rel=0.01)

    def test_same_seed_same_noise(self, frame):
        state = ChannelState(crosstalk_density=0.01)
        a = propagate(frame, state, seed=9)
        b = propagate(frame, state, seed=9)
        assert np.array_equal(a.te_samples, b.te_samples)


class TestCrosstalkLoad:
    def test_zero_channels(self):
        assert crosstalk_density_from_load(0, 0.01) == 0.0

    @given(st.integers(0, 40), st.floats(0, 0.1))
    def test_linear_in_channel_count(self, n, d):
        assert crosstalk_density_from_load(n, d) == pytest.approx(n * d)

    def test_negative(self):
        with pytest.raises(ValueError):
            crosstalk_density_from_load(-1, 0.01)


@pytest.mark.slow
class TestCrosstalkInEstimate:
    @pytest.fixture
    def cfg(self, small_cfg):
        return small_cfg.replace(n_classical_channels=1, symbols_per_frame=40_000)

    def test_xi_trusted_monotone_in_density(self, cfg):
        grid = [0.0, 0.005, 0.01, 0.02, 0.04]
        xi = [simulate_link(cfg.replace(crosstalk_noise_density=d), 5).estimation.xi_trusted_raw for d in grid]
        assert np.all(np.diff(xi) >= 0)

    def test_zero_target(self, cfg):
        assert calibrate_crosstalk(0.0, cfg) == (0.0, 0.0)

    def test_needs_classical_channel(self, cfg):
        with pytest.raises(ValueError):
            calibrate_crosstalk(0.001, cfg.replace(n_classical_channels=0))

    def test_root_reproduces_target(self, cfg):
        target = 0.00399
        density, achieved = calibrate_crosstalk(target, cfg, seed=2)
        assert density > 0
        # solver tolerance 1e-3 %SNU
        assert achieved == pytest.approx(target, abs=1e-5)
