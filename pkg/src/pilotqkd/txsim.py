"""Transmitter: pulse-shaped QPSK, carving, oCS-SSB pilot and PDM composite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from ._validation import check_complex_1d, check_count, check_positive, frozen
from .core import (
    DualPolFrame,
    SymbolFrame,
    db_to_field_ratio,
    dbm_to_photons_per_symbol,
    samples_per_symbol,
)
from .errors import AliasingError, EmptyFrameError

GAUSSIAN_SPAN = 4  # truncation at +/- this many symbol periods


@dataclass(frozen=True)
class PulseShaper:
    """Pulse shaping filter.

    Parameters
    ----------
    kind : {"nyquist", "gaussian"}
        Raised-cosine spectrum (zero ISI) or truncated Gaussian pulse.
    samples_per_symbol : int
    rolloff : float
        Raised-cosine roll-off in [0, 1]; used for ``kind="nyquist"``.
    bt_product : float
        Gaussian 3-dB bandwidth times symbol period; used for ``kind="gaussian"``.
    """

    kind: str
    samples_per_symbol: int
    rolloff: float = 0.2
    bt_product: float = 0.5

    def __post_init__(self):
        if self.kind not in ("nyquist", "gaussian"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        check_count(self.samples_per_symbol, "samples_per_symbol")
        if not 0 <= self.rolloff <= 1:
            raise ValueError(f"rolloff must lie in [0, 1], got {self.rolloff!r}")
        if not self.bt_product > 0:
            raise ValueError(f"bt_product must be > 0, got {self.bt_product!r}")
        if self.kind == "nyquist" and self.samples_per_symbol <= 1 + self.rolloff:
            raise AliasingError("raised-cosine band exceeds the sampling bandwidth")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.pulse_shape, cfg.samples_per_symbol, cfg.rolloff, cfg.bt_product)

    def occupied_bandwidth(self, symbol_rate):
        """One-sided bandwidth holding the pulse energy (all of it for Nyquist)."""
        if self.kind == "nyquist":
            return (1 + self.rolloff) * symbol_rate / 2
        return symbol_rate

    def frequency_response(self, freqs, symbol_rate):
        """Pulse spectrum at ``freqs`` normalized to unit DC gain.

        ``freqs`` in Hz; the time-domain pulse then has unit peak.
        """
        f = np.abs(np.asarray(freqs, dtype=float)) / symbol_rate
        if self.kind == "nyquist":
            r = self.rolloff
            out = np.zeros_like(f)
            f1, f2 = (1 - r) / 2, (1 + r) / 2
            out[f <= f1] = 1.0
            if r > 0:
                band = (f > f1) & (f <= f2)
                out[band] = 0.5 * (1 + np.cos(np.pi / r * (f[band] - f1)))
            return out
        sigma = self._gaussian_sigma()
        return np.exp(-2 * (np.pi * sigma * f) ** 2)

    def _gaussian_sigma(self):
        # time-domain std in symbol periods for a 3-dB bandwidth B = bt / T
        return np.sqrt(np.log(2)) / (2 * np.pi * self.bt_product)

    def gaussian_taps(self):
        sps = self.samples_per_symbol
        t = np.arange(-GAUSSIAN_SPAN * sps, GAUSSIAN_SPAN * sps + 1) / sps
        return np.exp(-(t**2) / (2 * self._gaussian_sigma() ** 2))

    def impulse_response(self, n_symbols=16):
        """Sampled pulse normalized to unit energy per symbol."""
        sps = self.samples_per_symbol
        if self.kind == "gaussian":
            h = self.gaussian_taps()
        else:
            n = n_symbols * sps
            freqs = sfft.fftfreq(n, 1.0 / sps)
            h = np.real(sfft.ifft(self.frequency_response(freqs, 1.0))) * sps
            h = np.roll(h, n // 2)
        return h / np.sqrt(np.sum(h**2) / sps)


def _transfer(shaper, n, symbol_rate):
    sps = shaper.samples_per_symbol
    if shaper.kind == "nyquist":
        freqs = sfft.fftfreq(n, 1.0 / (sps * symbol_rate))
        return sps * shaper.frequency_response(freqs, symbol_rate)
    taps = shaper.gaussian_taps()
    half = taps.size // 2
    h = np.zeros(n)
    h[: half + 1] = taps[half:]
    h[-half:] = taps[:half]
    return sfft.fft(h)


def pulse_shape(symbols, shaper):
    """Upsample and filter a symbol frame into complex baseband samples.

    Symbol ``k`` peaks at sample ``k * samples_per_symbol``.  Filtering is
    circular, so the frame is treated as one period of a periodic sequence
    and Nyquist shaping is exactly ISI-free at the symbol instants.
    """
    if isinstance(symbols, SymbolFrame):
        sym, rate = symbols.symbols, symbols.symbol_rate
    else:
        sym, rate = check_complex_1d(symbols, "symbols", min_length=0), 1.0
    if sym.size == 0:
        raise EmptyFrameError("no symbols to shape")
    sps = shaper.samples_per_symbol
    n = sym.size * sps
    # the spectrum of a zero-stuffed sequence is the symbol spectrum repeated sps times
    spec = np.tile(sfft.fft(sym), sps)
    spec *= _transfer(shaper, n, rate)
    return sfft.ifft(spec, overwrite_x=True)


def carving_envelope(duty, samples_per_symbol):
    """Raised-cosine RZ field envelope over one slot, centred on the symbol.

    The envelope has a full width at half maximum of ``duty`` symbol
    periods; ``duty = 1`` is flat.
    """
    if not 0 < duty <= 1:
        raise ValueError(f"duty must lie in (0, 1], got {duty!r}")
    sps = samples_per_symbol
    # sample 0 of each slot is the symbol instant; later samples wrap to
    # negative time offsets
    j = np.arange(sps)
    tau = np.where(j < sps / 2, j, j - sps) / sps
    a = np.abs(tau)
    if duty >= 0.5:
        flat = duty - 0.5
        ramp = 1 - duty
        env = np.ones(sps)
        if ramp > 0:
            sel = a > flat
            env[sel] = 0.5 * (1 + np.cos(np.pi * (a[sel] - flat) / ramp))
    else:
        env = np.where(a <= duty, 0.5 * (1 + np.cos(np.pi * a / duty)), 0.0)
    return env


def carving_power_factor(duty):
    """Mean-square of the carving envelope over a slot (closed form)."""
    if duty >= 0.5:
        return 1.25 * duty - 0.25
    return 0.75 * duty


def pulse_carve(samples, duty, samples_per_symbol):
    """Multiply every symbol slot by the raised-cosine RZ envelope."""
    if duty <= 0:
        raise ValueError(f"duty must be > 0, got {duty!r}")
    x = check_complex_1d(samples, "samples")
    if duty == 1:
        return x.copy()
    env = carving_envelope(duty, samples_per_symbol)
    if x.size % samples_per_symbol:
        raise ValueError("sample count is not a whole number of symbol slots")
    return (x.reshape(-1, samples_per_symbol) * env).reshape(-1)


@dataclass(frozen=True)
class PilotSpec:
    """Single-sideband pilot tone with residual carrier and mirror sideband."""

    frequency: float
    amplitude: float = 1.0
    carrier_leak: float = 0.0
    mirror_sideband_leak: float = 0.0

    def __post_init__(self):
        check_positive(self.frequency, "frequency")
        check_positive(self.amplitude, "amplitude", allow_zero=True)
        for name in ("carrier_leak", "mirror_sideband_leak"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")

    @classmethod
    def from_suppression(cls, frequency, carrier_suppression_db, sideband_suppression_db, amplitude=1.0):
        return cls(
            frequency,
            amplitude,
            db_to_field_ratio(carrier_suppression_db),
            db_to_field_ratio(sideband_suppression_db),
        )

    @property
    def total_power(self):
        return self.amplitude**2 * (1 + self.mirror_sideband_leak**2 + self.carrier_leak**2)


def synth_pilot(spec, n_samples, sample_rate):
    """Pilot field ``A (exp(i w t) + eps_sb exp(-i w t) + eps_c)``."""
    if spec.frequency >= sample_rate / 2:
        raise AliasingError(
            f"pilot at {spec.frequency:g} Hz aliases at sample rate {sample_rate:g} Hz"
        )
    n_samples = check_count(n_samples, "n_samples")
    t = np.arange(n_samples) / sample_rate
    rot = np.exp(2j * np.pi * spec.frequency * t)
    return spec.amplitude * (rot + spec.mirror_sideband_leak * np.conj(rot) + spec.carrier_leak)


def pol_mux(quantum, pilot, per_tx, *, sample_rate, symbol_rate, seed=None):
    """Combine quantum (TE) and pilot (TM) tributaries with finite extinction.

    Each tributary leaks into the other port with field ratio
    ``10**(-per_tx/20)``.
    """
    q = check_complex_1d(quantum, "quantum")
    p = check_complex_1d(pilot, "pilot")
    if q.size != p.size:
        raise ValueError(f"tributary lengths differ ({q.size} != {p.size})")
    eps = db_to_field_ratio(per_tx)
    te = q + eps * p if eps else q.copy()
    tm = p + eps * q if eps else p.copy()
    sps = samples_per_symbol(sample_rate, symbol_rate)
    return DualPolFrame(te, tm, sample_rate, symbol_rate, q.size // sps, origin_seed=seed)


def set_launch(frame, photons_per_symbol, pilot_launch_dbm, photon_energy=None):
    """Scale TE to ``photons_per_symbol`` and TM to the pilot launch power."""
    check_positive(photons_per_symbol, "photons_per_symbol")
    target_pilot = dbm_to_photons_per_symbol(pilot_launch_dbm, frame.symbol_rate, photon_energy)
    te_power = frame.mean_photons("te")
    tm_power = frame.mean_photons("tm")
    if te_power == 0 or tm_power == 0:
        raise ValueError("cannot set launch power of a zero-power tributary")
    te_gain = np.sqrt(photons_per_symbol / te_power)
    tm_gain = np.sqrt(target_pilot / tm_power)
    te = frame.te_samples if te_gain == 1 else frame.te_samples * te_gain
    tm = frame.tm_samples if tm_gain == 1 else frame.tm_samples * tm_gain
    return frame.replace(te_samples=te, tm_samples=tm)


@dataclass(frozen=True)
class MonitorData:
    """Transmitter monitor traces for plotting."""

    eye_time: np.ndarray  # symbol-fraction axis, two symbol periods
    eye_traces: np.ndarray  # (n_traces, len(eye_time)) intensity of TE
    pilot_freqs: np.ndarray
    pilot_spectrum: np.ndarray  # power per bin, sums to mean TM power

    def eye_width(self, tolerance=0.1):
        """Sampling window width in symbol periods with a settled eye.

        The width is the span around the sampling instant where the spread
        of the normalized intensity traces stays below ``tolerance``.
        """
        return eye_width(self.eye_traces, tolerance)


def eye_width(traces, tolerance=0.1):
    sps = traces.shape[1] // 2
    norm = traces / np.mean(traces[:, sps])
    spread = norm.max(axis=0) - norm.min(axis=0)
    centre = sps
    right = centre
    while right + 1 < traces.shape[1] and spread[right + 1] <= tolerance:
        right += 1
    left = centre
    while left - 1 >= 0 and spread[left - 1] <= tolerance:
        left -= 1
    if spread[centre] > tolerance:
        return 0.0
    return (right - left) / sps


def tx_monitors(frame, n_traces=512, *, quantum=None):
    """Eye diagram of the quantum intensity (qMon) and pilot spectrum (piMon).

    Parameters
    ----------
    frame : DualPolFrame
    n_traces : int
        Number of two-symbol eye traces.
    quantum : array_like, optional
        Quantum tributary at the monitor tap, before polarization
        multiplexing.  The TE port is used otherwise; there the leaked
        pilot dominates the intensity of a few-photon signal.
    """
    sps = frame.samples_per_symbol
    source = frame.te_samples if quantum is None else quantum
    intensity = np.abs(np.asarray(source)) ** 2
    n_traces = min(n_traces, frame.symbols_per_frame - 2)
    # window spans [-1, 1) symbol around each symbol instant
    starts = (np.arange(1, n_traces + 1) * sps) - sps
    idx = starts[:, None] + np.arange(2 * sps)[None, :]
    traces = intensity[idx]
    eye_time = np.arange(2 * sps) / sps - 1.0
    spec = np.abs(sfft.fft(np.asarray(frame.tm_samples))) ** 2 / frame.n_samples**2
    freqs = sfft.fftfreq(frame.n_samples, 1.0 / frame.sample_rate)
    order = np.argsort(freqs)
    return MonitorData(frozen(eye_time), frozen(traces), frozen(freqs[order]), frozen(spec[order]))
