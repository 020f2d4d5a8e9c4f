"""Offline receiver DSP: pilot-aided frequency and phase recovery, filtering, decision sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import ndimage, signal
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_positive, frozen
from .errors import EmptyFrameError, LockError, UnwrapError
from .rxsim import QuadratureRecord, fft_frequencies, single_pole_response

FILTER_KINDS = ("brickwall", "raised-cosine")
TIMING_SUBSET = 1 << 14  # symbols used to score the timing grid


@dataclass(frozen=True)
class DspConfig:
    """Settings of the offline DSP stack.

    ``signal_bandwidth`` is the one-sided band of the quantum signal; the
    detector response is equalized only inside it.  ``filter_rolloff`` sets
    the taper of the raised-cosine filter kind beyond ``filter_bandwidth``.
    """

    fft_size: int = 65536
    filter_bandwidth: float = 300e6
    filter_kind: str = "brickwall"
    phase_smoothing_window: int = 64
    timing_search_grid: int = 64
    edge_discard: int = 128
    compensate_detector: bool = True
    foe_min_snr_db: float = 10.0
    signal_bandwidth: float | None = None
    filter_rolloff: float = 0.2

    def __post_init__(self):
        n = check_count(self.fft_size, "fft_size", minimum=16)
        if n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        check_positive(self.filter_bandwidth, "filter_bandwidth")
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(f"filter_kind must be one of {FILTER_KINDS}, got {self.filter_kind!r}")
        check_count(self.phase_smoothing_window, "phase_smoothing_window")
        check_count(self.edge_discard, "edge_discard", minimum=0)
        if self.signal_bandwidth is not None:
            check_positive(self.signal_bandwidth, "signal_bandwidth")

    @classmethod
    def from_config(cls, cfg):
        return cls(
            fft_size=cfg.fft_size,
            filter_bandwidth=cfg.filter_bandwidth,
            filter_kind=cfg.filter_kind,
            phase_smoothing_window=cfg.phase_smoothing_window,
            timing_search_grid=cfg.timing_search_grid,
            edge_discard=cfg.edge_discard,
            compensate_detector=cfg.compensate_detector,
            foe_min_snr_db=cfg.foe_min_snr_db,
            signal_bandwidth=cfg.signal_bandwidth(),
            filter_rolloff=cfg.rolloff,
        )


@dataclass(frozen=True)
class RecoveredFrame:
    """Decision-point samples of the quantum plane, one per symbol."""

    symbols: np.ndarray
    frequency_offset_estimate: float
    phase_trajectory: np.ndarray | None
    timing_offset: float
    edge_discard: int = 0
    symbol_rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", frozen(np.asarray(self.symbols, dtype=np.complex128)))
        if self.phase_trajectory is not None:
            object.__setattr__(self, "phase_trajectory", frozen(np.asarray(self.phase_trajectory, dtype=float)))

    def __len__(self):
        return self.symbols.size

    def align(self, tx_symbols):
        """Slice transmitted symbols to match this frame after edge discard."""
        tx = np.asarray(getattr(tx_symbols, "symbols", tx_symbols))
        e = self.edge_discard
        out = tx[e: tx.size - e] if e else tx
        if out.size != self.symbols.size:
            raise ValueError(f"cannot align {tx.size} transmitted symbols with {self.symbols.size} recovered")
        return out


def _periodogram(x, sample_rate, fft_size):
    nperseg = min(fft_size, x.size)
    freqs, psd = signal.welch(
        x, fs=sample_rate, window="hann", nperseg=nperseg, noverlap=0,
        detrend=False, return_onesided=False, scaling="spectrum",
    )
    return freqs, psd


def _parabolic_peak(power, k):
    """Fractional bin offset of a peak from the log power of three bins."""
    a, b, c = np.log(np.maximum(power[[k - 1, k, k + 1]], np.finfo(float).tiny))
    denom = a - 2 * b + c
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def estimate_frequency_offset(pilot, pilot_frequency, cfg, *, search_span=None):
    """Offset of the received pilot tone from its nominal frequency.

    Welch-averaged periodogram (Hann window, ``cfg.fft_size`` points),
    maximum within ``search_span`` of ``pilot_frequency``, then parabolic
    interpolation on the log power of the three bins around it.

    Raises
    ------
    LockError
        If the peak stands less than ``cfg.foe_min_snr_db`` above the median
        level of the searched band.
    """
    z = pilot.complex if isinstance(pilot, QuadratureRecord) else np.asarray(pilot)
    fs = pilot.sample_rate
    if z.size < cfg.fft_size:
        raise ValueError(f"pilot record ({z.size} samples) shorter than fft_size ({cfg.fft_size})")
    freqs, psd = _periodogram(z, fs, cfg.fft_size)
    order = np.argsort(freqs)
    freqs, psd = freqs[order], psd[order]
    span = 0.25 * pilot_frequency if search_span is None else search_span
    band = np.flatnonzero(np.abs(freqs - pilot_frequency) <= span)
    if band.size < 3:
        raise LockError("search band holds fewer than three bins")
    k = band[np.argmax(psd[band])]
    if k in (0, freqs.size - 1):
        raise LockError("pilot peak at the edge of the spectrum")
    floor = np.median(psd[band])
    snr_db = 10 * np.log10(psd[k] / floor) if floor > 0 else np.inf
    if snr_db < cfg.foe_min_snr_db:
        raise LockError(f"pilot peak {snr_db:.1f} dB above floor, need {cfg.foe_min_snr_db:g} dB")
    bin_width = fs / cfg.fft_size
    peak = freqs[k] + _parabolic_peak(psd, k) * bin_width
    return float(peak - pilot_frequency)


def _moving_average(x, window):
    if window <= 1:
        return x
    return ndimage.uniform_filter1d(x, size=window, mode="nearest")


def track_pilot_phase(pilot, pilot_frequency, frequency_offset, cfg):
    """Instantaneous pilot phase after removing ``pilot_frequency + frequency_offset``.

    The complex baseband is averaged over ``cfg.phase_smoothing_window``
    samples before its argument is taken and unwrapped; averaging the
    phasor rather than the phase keeps additive noise from producing
    cycle slips when the per-sample pilot SNR is low.

    Returns
    -------
    ndarray
        Unwrapped trajectory, one value per sample.

    Raises
    ------
    UnwrapError
        If the smoothed phase steps by more than pi/2 between samples,
        which indicates a slip.
    """
    z = pilot.complex
    t = np.arange(z.size) / pilot.sample_rate
    base = z * np.exp(-2j * np.pi * (pilot_frequency + frequency_offset) * t)
    w = cfg.phase_smoothing_window
    if w > 1:
        base = _moving_average(base.real, w) + 1j * _moving_average(base.imag, w)
    smooth = np.unwrap(np.angle(base))
    if smooth.size > 1 and np.max(np.abs(np.diff(smooth))) > np.pi / 2:
        raise UnwrapError("pilot phase steps by more than pi/2 between samples")
    return smooth


def max_phase_slew(trajectory, sample_rate, interval=1e-6):
    """Largest phase change per ``interval`` seconds (rad/s) over the record."""
    step = max(1, int(round(interval * sample_rate)))
    pts = np.asarray(trajectory)[::step]
    if pts.size < 2:
        raise ValueError("trajectory shorter than one interval")
    return float(np.max(np.abs(np.diff(pts))) * sample_rate / step)


def apply_cpr(quantum, frequency_offset, trajectory):
    """Rotate the quantum record by ``exp(-i (2 pi df t + phi(t)))``."""
    z = quantum.complex
    if trajectory is None:
        trajectory = np.zeros(z.size)
    trajectory = np.asarray(trajectory)
    if trajectory.size != z.size:
        raise ValueError(f"phase trajectory covers {trajectory.size} samples, record has {z.size}")
    t = np.arange(z.size) / quantum.sample_rate
    rot = np.exp(-1j * (2 * np.pi * frequency_offset * t + trajectory))
    shift = quantum.meta.get("cpr_frequency", 0.0) + frequency_offset
    return quantum.with_samples(
        z * rot,
        meta={**quantum.meta, "cpr_frequency": shift, "phase_trajectory": trajectory},
    )


def shift_frequency(record, frequency_offset):
    """Frequency translation only, as :func:`apply_cpr` with a zero trajectory."""
    return apply_cpr(record, frequency_offset, None)


def band_response(freqs, cfg):
    """Magnitude response of the digital receive filter."""
    f = np.abs(freqs)
    b = cfg.filter_bandwidth
    if cfg.filter_kind == "brickwall" or cfg.filter_rolloff == 0:
        return (f <= b).astype(float)
    edge = b * (1 + cfg.filter_rolloff)
    out = np.ones_like(f)
    taper = (f > b) & (f <= edge)
    out[taper] = 0.5 * (1 + np.cos(np.pi * (f[taper] - b) / (edge - b)))
    out[f > edge] = 0.0
    return out


def receive_filter_spectrum(record, cfg):
    """Spectrum of the record after :func:`receive_filter`."""
    z = record.complex
    freqs = fft_frequencies(z.size, record.sample_rate)
    spec = sfft.fft(z)
    h = band_response(freqs, cfg)
    if cfg.compensate_detector and record.bandwidth not in (None, np.inf):
        shift = record.meta.get("cpr_frequency", 0.0)
        band = cfg.signal_bandwidth if cfg.signal_bandwidth is not None else cfg.filter_bandwidth
        inband = np.abs(freqs) <= band
        det = single_pole_response(freqs[inband] + shift, record.bandwidth)
        h = h.astype(np.complex128)
        h[inband] /= det
    spec *= h
    return spec


def receive_filter(record, cfg):
    """Detector equalization inside the signal band followed by the band filter.

    The detector sits in the frame before carrier recovery; the shift
    recorded by :func:`apply_cpr` relocates its response accordingly.
    Noise outside the signal band keeps the detector roll-off.
    """
    return sfft.ifft(receive_filter_spectrum(record, cfg), overwrite_x=True)


def decimate_spectrum(spec, sps, offset=0.0):
    """One sample per symbol at ``(k + offset) * sps`` from a full-rate spectrum."""
    return _fractional_decimate(spec, sps, offset)


def _fractional_decimate(spec, sps, offset):
    """Samples at ``(k + offset) * sps`` from the spectrum of a block (circular)."""
    n = spec.size
    if offset:
        k = sfft.fftfreq(n, 1.0 / n)
        spec = spec * np.exp(2j * np.pi * k * offset * sps / n)
    folded = spec.reshape(sps, n // sps).sum(axis=0)
    return sfft.ifft(folded) / sps


def timing_grid(n_points):
    """Centred fractional offsets in ``[-0.5, 0.5)`` including zero."""
    if n_points < 1:
        raise ValueError("timing search grid is empty")
    return (np.arange(n_points) - n_points // 2) / n_points


def decision_snr(y, x):
    """Data-aided SNR: ``|g|^2 Var(x) / Var(y - g x)`` after removing means."""
    y = y - y.mean()
    x = x - x.mean()
    g = np.vdot(x, y) / np.vdot(x, x)
    resid = y - g * x
    return float(np.abs(g) ** 2 * np.mean(np.abs(x) ** 2) / np.mean(np.abs(resid) ** 2))


def timing_snr(filtered, tx_symbols, sps, offset, edge_discard=0, subset=None):
    """Decision SNR of a filtered record sampled at ``offset`` symbol periods."""
    filtered = np.asarray(filtered)
    tx = np.asarray(tx_symbols)
    n_sym = filtered.size // sps
    e = max(edge_discard, 8)
    if subset is not None and n_sym - 2 * e > subset:
        start = (n_sym - subset) // 2
        block = filtered[start * sps: (start + subset) * sps]
        y = _fractional_decimate(sfft.fft(block), sps, offset)[8:-8]
        x = tx[start + 8: start + subset - 8]
    else:
        y = _fractional_decimate(sfft.fft(filtered), sps, offset)[e: n_sym - e]
        x = tx[e: n_sym - e]
    return decision_snr(y, x)


def search_timing(filtered, tx_symbols, sps, cfg):
    """Grid offset (in symbol periods) maximizing the data-aided decision SNR."""
    grid = timing_grid(cfg.timing_search_grid)
    scores = np.array([
        timing_snr(filtered, tx_symbols, sps, tau, cfg.edge_discard, TIMING_SUBSET) for tau in grid
    ])
    best = int(np.argmax(scores))
    return float(grid[best]), scores


def filter_and_sample(quantum, shaper, cfg, tx_symbols=None, *, timing_offset=None):
    """Receive filter, timing search and decimation to one sample per symbol.

    Parameters
    ----------
    quantum : QuadratureRecord
        Quantum plane after :func:`apply_cpr`.
    shaper : PulseShaper
        Transmit pulse; its occupied band bounds detector equalization when
        ``cfg.signal_bandwidth`` is unset.
    cfg : DspConfig
    tx_symbols : array_like, optional
        Transmitted symbols, which drive the data-aided timing search.
        Without them the offset with the largest decision power is chosen.
    timing_offset : float, optional
        Skip the search and sample at this offset.

    Returns
    -------
    RecoveredFrame
    """
    if cfg.timing_search_grid < 1:
        raise ValueError("timing search grid is empty")
    if cfg.signal_bandwidth is None and shaper is not None and quantum.symbol_rate is not None:
        cfg = _with_band(cfg, shaper.occupied_bandwidth(quantum.symbol_rate))
    sps = quantum.samples_per_symbol
    n_sym = len(quantum) // sps
    if n_sym <= 2 * cfg.edge_discard:
        raise EmptyFrameError("record shorter than twice the edge discard")
    spec = receive_filter_spectrum(quantum, cfg)
    if timing_offset is None:
        if tx_symbols is not None:
            tx = np.asarray(getattr(tx_symbols, "symbols", tx_symbols))
            timing_offset, _ = search_timing(sfft.ifft(spec), tx, sps, cfg)
        else:
            grid = timing_grid(cfg.timing_search_grid)
            power = [np.mean(np.abs(_fractional_decimate(spec, sps, tau)) ** 2) for tau in grid]
            timing_offset = float(grid[int(np.argmax(power))])
    y = _fractional_decimate(spec, sps, timing_offset)
    e = cfg.edge_discard
    symbols = y[e: n_sym - e] if e else y
    return RecoveredFrame(
        symbols,
        float(quantum.meta.get("cpr_frequency", 0.0)),
        quantum.meta.get("phase_trajectory"),
        float(timing_offset),
        edge_discard=e,
        symbol_rate=quantum.symbol_rate,
    )


def _with_band(cfg, band):
    from dataclasses import replace

    return replace(cfg, signal_bandwidth=band)


def quantum_spectrum(record, nperseg=4096):
    """Welch power spectral density (two-sided, fftshifted) of a record.

    Returns ``(freqs, psd)`` with ``psd`` in units of samples squared per Hz.
    """
    z = record.complex if isinstance(record, QuadratureRecord) else np.asarray(record)
    fs = record.sample_rate
    nperseg = min(nperseg, z.size)
    freqs, psd = signal.welch(
        z, fs=fs, window="hann", nperseg=nperseg, detrend=False, return_onesided=False
    )
    order = np.argsort(freqs)
    return freqs[order], psd[order]


class PilotCarrierRecovery(TransformerMixin, BaseEstimator):
    """Learn frequency offset and phase from the pilot plane, undo them on the quantum plane.

    Parameters
    ----------
    pilot_frequency : float
        Nominal pilot offset from the carrier (Hz).
    fft_size : int
    phase_smoothing_window : int
    foe_min_snr_db : float

    Attributes
    ----------
    frequency_offset_ : float
    phase_trajectory_ : ndarray
    """

    def __init__(self, pilot_frequency=1e9, fft_size=65536, phase_smoothing_window=64, foe_min_snr_db=10.0):
        self.pilot_frequency = pilot_frequency
        self.fft_size = fft_size
        self.phase_smoothing_window = phase_smoothing_window
        self.foe_min_snr_db = foe_min_snr_db

    def _cfg(self):
        return DspConfig(
            fft_size=self.fft_size,
            phase_smoothing_window=self.phase_smoothing_window,
            foe_min_snr_db=self.foe_min_snr_db,
        )

    def fit(self, pilot, y=None):
        cfg = self._cfg()
        self.frequency_offset_ = estimate_frequency_offset(pilot, self.pilot_frequency, cfg)
        self.phase_trajectory_ = track_pilot_phase(pilot, self.pilot_frequency, self.frequency_offset_, cfg)
        self.n_samples_ = len(pilot)
        return self

    def transform(self, quantum):
        check_is_fitted(self, "phase_trajectory_")
        return apply_cpr(quantum, self.frequency_offset_, self.phase_trajectory_)


class SymbolSampler(BaseEstimator):
    """Receive filter plus timing search, as an estimator.

    ``fit(record, tx)`` picks the timing offset; ``transform(record)``
    returns the :class:`RecoveredFrame` at that offset.
    """

    def __init__(self, pulse_shaper=None, filter_bandwidth=300e6, filter_kind="brickwall",
                 timing_search_grid=64, edge_discard=128, compensate_detector=True,
                 signal_bandwidth=None, filter_rolloff=0.2):
        self.pulse_shaper = pulse_shaper
        self.filter_bandwidth = filter_bandwidth
        self.filter_kind = filter_kind
        self.timing_search_grid = timing_search_grid
        self.edge_discard = edge_discard
        self.compensate_detector = compensate_detector
        self.signal_bandwidth = signal_bandwidth
        self.filter_rolloff = filter_rolloff

    @classmethod
    def from_config(cls, cfg, shaper):
        d = DspConfig.from_config(cfg)
        return cls(shaper, d.filter_bandwidth, d.filter_kind, d.timing_search_grid, d.edge_discard,
                   d.compensate_detector, d.signal_bandwidth, d.filter_rolloff)

    def _cfg(self):
        return DspConfig(
            filter_bandwidth=self.filter_bandwidth,
            filter_kind=self.filter_kind,
            timing_search_grid=self.timing_search_grid,
            edge_discard=self.edge_discard,
            compensate_detector=self.compensate_detector,
            signal_bandwidth=self.signal_bandwidth,
            filter_rolloff=self.filter_rolloff,
        )

    def fit(self, record, tx_symbols):
        cfg = self._cfg()
        if cfg.signal_bandwidth is None and self.pulse_shaper is not None:
            cfg = _with_band(cfg, self.pulse_shaper.occupied_bandwidth(record.symbol_rate))
        filtered = receive_filter(record, cfg)
        tx = np.asarray(getattr(tx_symbols, "symbols", tx_symbols))
        self.timing_offset_, self.timing_scores_ = search_timing(filtered, tx, record.samples_per_symbol, cfg)
        self.timing_grid_ = timing_grid(cfg.timing_search_grid)
        return self

    def transform(self, record):
        check_is_fitted(self, "timing_offset_")
        return filter_and_sample(record, self.pulse_shaper, self._cfg(), timing_offset=self.timing_offset_)

    def fit_transform(self, record, tx_symbols):
        return self.fit(record, tx_symbols).transform(record)
