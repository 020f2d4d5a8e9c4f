import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pilotqkd.core import gen_qpsk_symbols, stage_rng, wiener_phase_path
from pilotqkd.dsp import (
    DspConfig,
    PilotCarrierRecovery,
    RecoveredFrame,
    SymbolSampler,
    apply_cpr,
    estimate_frequency_offset,
    filter_and_sample,
    max_phase_slew,
    quantum_spectrum,
    receive_filter,
    search_timing,
    timing_grid,
    timing_snr,
    track_pilot_phase,
)
from pilotqkd.errors import LockError, UnwrapError
from pilotqkd.pipeline import front_end, simulate_link
from pilotqkd.rxsim import QuadratureRecord
from pilotqkd.txsim import PulseShaper, pulse_shape

FS = 2.5e9
PILOT = 1e9


def record(z, plane="pilot", symbol_rate=500e6):
    return QuadratureRecord.from_complex(z, FS, plane, symbol_rate=symbol_rate)


def pilot_tone(n, offset=0.0, phase=0.0, noise_var=0.0, seed=0):
    t = np.arange(n) / FS
    z = np.exp(1j * (2 * np.pi * (PILOT + offset) * t + phase))
    if noise_var:
        rng = stage_rng(seed, "test-pilot-noise")
        z = z + np.sqrt(noise_var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return record(z)


def welch_peak_oracle(z, fs, nperseg, centre, half_span, step):
    """Brute-force maximizer of the Hann-window Welch periodogram on a fine grid."""
    segs = z[: (z.size // nperseg) * nperseg].reshape(-1, nperseg)
    w = np.hanning(nperseg + 1)[:-1]  # periodic Hann, as scipy's "hann"
    n = np.arange(nperseg)
    best_f, best_p = None, -np.inf
    for f in np.arange(centre - half_span, centre + half_span + step / 2, step):
        kernel = w * np.exp(-2j * np.pi * f * n / fs)
        p = np.mean(np.abs(segs @ kernel) ** 2)
        if p > best_p:
            best_f, best_p = f, p
    return best_f


class TestDspConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(fft_size=1000),
        dict(filter_kind="gaussian"),
        dict(filter_bandwidth=0.0),
        dict(phase_smoothing_window=0),
        dict(edge_discard=-1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DspConfig(**kwargs)

    def test_from_config(self, small_cfg):
        cfg = DspConfig.from_config(small_cfg)
        assert cfg.filter_bandwidth == small_cfg.filter_bandwidth
        assert cfg.signal_bandwidth == pytest.approx(300e6)


class TestFrequencyOffset:
    N = 1 << 18

    def test_zero_offset(self):
        cfg = DspConfig()
        est = estimate_frequency_offset(pilot_tone(self.N, 0.0, noise_var=1.0), PILOT, cfg)
        assert abs(est) <= FS / cfg.fft_size / 2

    @pytest.mark.parametrize("offset", [-10e6, 10e6])
    def test_ten_megahertz(self, offset):
        cfg = DspConfig()
        est = estimate_frequency_offset(pilot_tone(self.N, offset, noise_var=1.0), PILOT, cfg)
        assert abs(est - offset) <= FS / cfg.fft_size

    def test_matches_grid_search_oracle(self):
        cfg = DspConfig(foe_min_snr_db=20.0)
        rec = pilot_tone(self.N, 3.7e6, noise_var=10.0, seed=2)
        est = estimate_frequency_offset(rec, PILOT, cfg)
        bin_width = FS / cfg.fft_size
        coarse = welch_peak_oracle(rec.complex, FS, cfg.fft_size, PILOT + 3.7e6, 2 * bin_width, 1e3)
        fine = welch_peak_oracle(rec.complex, FS, cfg.fft_size, coarse, 1e3, 50.0)
        assert abs((PILOT + est) - fine) < 10e3

    def test_lock_failure_without_pilot(self):
        rng = np.random.default_rng(1)
        noise = record(rng.standard_normal(self.N) + 1j * rng.standard_normal(self.N))
        with pytest.raises(LockError):
            estimate_frequency_offset(noise, PILOT, DspConfig())

    def test_record_shorter_than_fft(self):
        with pytest.raises(ValueError):
            estimate_frequency_offset(pilot_tone(1000), PILOT, DspConfig())


class TestPhaseTracking:
    def test_constant_phase(self):
        traj = track_pilot_phase(pilot_tone(1 << 16, phase=0.7), PILOT, 0.0, DspConfig())
        assert np.max(np.abs(traj - 0.7)) < 1e-6

    def test_sinusoidal_phase_injection(self):
        n = 1 << 18
        t = np.arange(n) / FS
        injected = 0.1 * np.sin(2 * np.pi * 1e6 * t)
        rec = record(np.exp(1j * (2 * np.pi * PILOT * t + injected)))
        traj = track_pilot_phase(rec, PILOT, 0.0, DspConfig())
        basis = np.column_stack([np.sin(2 * np.pi * 1e6 * t), np.cos(2 * np.pi * 1e6 * t), np.ones(n)])
        coef, *_ = np.linalg.lstsq(basis, traj, rcond=None)
        assert np.hypot(coef[0], coef[1]) == pytest.approx(0.1, rel=0.05)

    def test_slip_detected(self):
        n = 4096
        t = np.arange(n) / FS
        phase = np.where(t < t[n // 2], 0.0, np.pi)
        rec = record(np.exp(1j * (2 * np.pi * PILOT * t + phase)))
        with pytest.raises(UnwrapError):
            track_pilot_phase(rec, PILOT, 0.0, DspConfig(phase_smoothing_window=1))

    def test_max_phase_slew(self):
        n = 25_000
        traj = 1.75e6 * np.arange(n) / FS
        assert max_phase_slew(traj, FS) == pytest.approx(1.75e6, rel=1e-9)

    def test_paper_scenario_slew_order_of_magnitude(self, small_cfg):
        front = front_end(small_cfg.replace(symbols_per_frame=100_000), 1)
        # same order as the reported 1.75 rad/us
        assert 0.175e6 < front.max_phase_slew < 17.5e6


class TestCarrierCorrection:
    def test_zero_is_identity(self):
        rec = record(np.exp(1j * np.linspace(0, 3, 100)), "quantum")
        out = apply_cpr(rec, 0.0, np.zeros(100))
        assert np.array_equal(out.complex, rec.complex)

    def test_ground_truth_trajectory(self):
        n = 100_000
        sym = np.repeat(gen_qpsk_symbols(n // 5, 3).symbols, 5)
        t = np.arange(n) / FS
        phi = wiener_phase_path(20e3, n, FS, 7)
        rec = record(sym * np.exp(1j * (2 * np.pi * 7e6 * t + phi)), "quantum")
        out = apply_cpr(rec, 7e6, phi).complex
        assert np.max(np.abs(np.angle(out * np.conj(sym)))) < 1e-3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            apply_cpr(record(np.ones(10), "quantum"), 0.0, np.zeros(5))

    @settings(max_examples=8)
    @given(st.floats(-10e6, 10e6))
    def test_foe_and_cpr_leave_under_one_kilohertz(self, offset):
        n = 1 << 18
        pilot = pilot_tone(n, offset, noise_var=1.0, seed=5)
        t = np.arange(n) / FS
        quantum = record(np.exp(2j * np.pi * offset * t), "quantum")
        out = PilotCarrierRecovery().fit(pilot).transform(quantum)
        residual = np.unwrap(np.angle(out.complex))
        slope = np.polyfit(t, residual, 1)[0] / (2 * np.pi)
        assert abs(slope) < 1e3

    @pytest.mark.slow
    def test_recovered_constellation_has_four_clusters(self, small_cfg):
        res = simulate_link(small_cfg.replace(symbols_per_frame=100_000), 2)
        y = res.calibration.to_snu(res.recovered.symbols) * np.exp(-1j * res.estimation.phase)
        states = gen_qpsk_symbols(100_000, 2).state_indices()[res.recovered.edge_discard:][: y.size]
        centroids = np.array([y[states == k].mean() for k in range(4)])
        expected = np.pi / 4 + np.pi / 2 * np.arange(4)
        assert np.allclose(np.angle(centroids * np.exp(-1j * expected)), 0, atol=0.05)
        sigma = np.sqrt(res.estimation.conditional_variance)
        gaps = np.abs(centroids - np.roll(centroids, 1))
        assert np.all(gaps > 2 * sigma)


class TestFilterAndSample:
    def test_noiseless_nyquist_chain_is_identity(self, ideal_cfg):
        res = simulate_link(ideal_cfg, 3)
        x = res.recovered.align(res.tx)
        y = res.recovered.symbols
        g = np.vdot(x, y) / np.vdot(x, x)
        assert np.max(np.abs(y / g - x)) < 1e-6
        assert len(y) == ideal_cfg.symbols_per_frame - 2 * ideal_cfg.edge_discard

    def test_timing_search_is_grid_optimal(self, small_cfg):
        front = front_end(small_cfg, 4)
        cfg = DspConfig.from_config(small_cfg)
        filtered = receive_filter(front.corrected, cfg)
        sps = small_cfg.samples_per_symbol
        best, scores = search_timing(filtered, front.tx.symbols, sps, cfg)
        grid = timing_grid(cfg.timing_search_grid)
        again = [timing_snr(filtered, front.tx.symbols, sps, tau, cfg.edge_discard, 1 << 14) for tau in grid]
        assert np.allclose(again, scores)
        assert best == grid[np.argmax(again)]

    def test_empty_timing_grid(self, small_cfg):
        with pytest.raises(ValueError):
            timing_grid(0)
        front = front_end(small_cfg, 4)
        cfg = DspConfig.from_config(small_cfg)
        from dataclasses import replace

        with pytest.raises(ValueError):
            filter_and_sample(front.corrected, front.shaper, replace(cfg, timing_search_grid=0), front.tx)

    def test_timing_grid_contains_zero(self):
        grid = timing_grid(64)
        assert 0.0 in grid
        assert grid.min() == -0.5 and grid.max() < 0.5

    def test_symbol_sampler_estimator(self, small_cfg):
        front = front_end(small_cfg, 4)
        sampler = SymbolSampler.from_config(small_cfg, front.shaper)
        frame = sampler.fit_transform(front.corrected, front.tx)
        direct = filter_and_sample(front.corrected, front.shaper, DspConfig.from_config(small_cfg), front.tx)
        assert np.array_equal(frame.symbols, direct.symbols)
        assert clone(sampler).get_params()["filter_bandwidth"] == small_cfg.filter_bandwidth

    def test_unfitted_estimators(self):
        with pytest.raises(NotFittedError):
            PilotCarrierRecovery().transform(record(np.ones(4), "quantum"))
        with pytest.raises(NotFittedError):
            SymbolSampler().transform(record(np.ones(4), "quantum"))

    def test_align(self):
        frame = RecoveredFrame(np.ones(6), 0.0, None, 0.0, edge_discard=2)
        assert np.array_equal(frame.align(np.arange(10)), np.arange(2, 8))
        with pytest.raises(ValueError):
            frame.align(np.arange(9))


class TestSpectrum:
    def test_nyquist_power_in_band(self):
        sym = gen_qpsk_symbols(1 << 16, 1, symbol_rate=500e6)
        x = pulse_shape(sym, PulseShaper("nyquist", 5, rolloff=0.2))
        freqs, psd = quantum_spectrum(record(x, "quantum"))
        inside = np.abs(freqs) <= 1.2 * 500e6 / 2
        assert psd[inside].sum() / psd.sum() >= 0.99

    def test_flat_noise(self, rng):
        n = 1 << 20
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        freqs, psd = quantum_spectrum(record(z, "quantum"))
        assert np.std(psd) / np.mean(psd) < 0.1
        assert np.mean(psd[freqs > 0]) / np.mean(psd[freqs < 0]) == pytest.approx(1.0, abs=0.02)
