"""Dual-plane intradyne receiver with shot-noise-unit calibration.

Raw detector samples are expressed so that, at the nominal LO power
(``lo_power = 1``), one sample of LO shot noise has unit variance per
quadrature.  A signal field ``E`` in photon units contributes
``sqrt(2 * eta / sps) * E``, i.e. heterodyne detection with half of the
signal variance in each quadrature.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from ._validation import check_fraction, check_positive, check_real_1d, frozen
from .core import db_to_field_ratio, derive_seed, stage_rng, wiener_phase_path
from .errors import CalibrationError


class QuadratureRecord:
    """In-phase and quadrature samples of one receiver plane.

    Samples are held as one complex array; ``i_samples`` and
    ``q_samples`` are read-only views of its real and imaginary parts.
    """

    __slots__ = ("_z", "sample_rate", "plane", "symbol_rate", "bandwidth", "meta")

    def __init__(self, i_samples, q_samples, sample_rate, plane, symbol_rate=None, bandwidth=None, meta=None):
        i = check_real_1d(i_samples, "i_samples")
        q = check_real_1d(q_samples, "q_samples")
        if i.size != q.size:
            raise ValueError("i_samples and q_samples must have equal length")
        z = np.empty(i.size, dtype=np.complex128)
        z.real = i
        z.imag = q
        self._init(z, sample_rate, plane, symbol_rate, bandwidth, meta)

    def _init(self, z, sample_rate, plane, symbol_rate, bandwidth, meta):
        if plane not in ("quantum", "pilot"):
            raise ValueError(f"plane must be 'quantum' or 'pilot', got {plane!r}")
        self._z = frozen(z)
        self.sample_rate = float(sample_rate)
        self.plane = plane
        self.symbol_rate = None if symbol_rate is None else float(symbol_rate)
        self.bandwidth = bandwidth
        self.meta = {} if meta is None else dict(meta)

    @classmethod
    def from_complex(cls, z, sample_rate, plane, symbol_rate=None, bandwidth=None, meta=None):
        z = np.asarray(z)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if z.dtype != np.complex128:
            z = z.astype(np.complex128)
        obj = cls.__new__(cls)
        obj._init(z, sample_rate, plane, symbol_rate, bandwidth, meta)
        return obj

    @property
    def i_samples(self):
        return self._z.real

    @property
    def q_samples(self):
        return self._z.imag

    @property
    def complex(self):
        """Read-only complex samples ``I + iQ``."""
        return self._z

    @property
    def samples_per_symbol(self):
        if self.symbol_rate is None:
            raise ValueError("record carries no symbol rate")
        return int(round(self.sample_rate / self.symbol_rate))

    def __len__(self):
        return self._z.size

    def __repr__(self):
        return (f"QuadratureRecord(plane={self.plane!r}, n={len(self)}, "
                f"sample_rate={self.sample_rate:g}, bandwidth={self.bandwidth!r})")

    def with_samples(self, z, **changes):
        kwargs = dict(
            sample_rate=self.sample_rate,
            plane=self.plane,
            symbol_rate=self.symbol_rate,
            bandwidth=self.bandwidth,
            meta=dict(self.meta),
        )
        kwargs.update(changes)
        return QuadratureRecord.from_complex(z, **kwargs)

    def quadrature_variance(self):
        """Per-quadrature variance (mean of the I and Q variances)."""
        return 0.5 * (np.var(self.i_samples) + np.var(self.q_samples))


@dataclass(frozen=True)
class CalibrationRecord:
    """Variances (raw units squared, per quadrature) defining one SNU.

    ``shot_variance`` comes from the LO-on / signal-off capture, which also
    holds electronic noise; ``electronic_variance`` from the LO-off capture.
    """

    shot_variance: float
    electronic_variance: float
    n_samples: int = 0

    def __post_init__(self):
        if not self.snu_scale > 0:
            raise CalibrationError(
                f"non-positive SNU scale (shot {self.shot_variance:g}, "
                f"electronic {self.electronic_variance:g}); check receiver settings"
            )
        if self.electronic_variance < 0:
            raise CalibrationError("negative electronic variance")

    @property
    def snu_scale(self):
        return self.shot_variance - self.electronic_variance

    @property
    def electronic_noise_snu(self):
        return self.electronic_variance / self.snu_scale

    def to_snu(self, z):
        return np.asarray(z) / np.sqrt(self.snu_scale)


@functools.lru_cache(maxsize=4)
def fft_frequencies(n, sample_rate):
    """Read-only ``fftfreq`` axis, cached because every stage reuses it."""
    return frozen(sfft.fftfreq(n, 1.0 / sample_rate))


def single_pole_response(freqs, bandwidth):
    """Causal first-order low-pass ``1 / (1 + j f / f_3dB)``."""
    freqs = np.asarray(freqs, dtype=float)
    if bandwidth == np.inf:
        return np.ones_like(freqs, dtype=np.complex128)
    x = freqs / bandwidth
    out = np.empty(freqs.shape, dtype=np.complex128)
    out.real = 1.0 / (1.0 + x * x)
    out.imag = -x * out.real
    return out


def apply_response(z, sample_rate, response):
    """Filter complex samples with a frequency response callable (circular)."""
    spec = sfft.fft(z)
    spec *= response(fft_frequencies(len(z), sample_rate))
    return sfft.ifft(spec, overwrite_x=True)


def intradyne_detect(frame, lo_linewidth, seed, per_rx=np.inf):
    """Mix both polarization tributaries with a free-running LO.

    Returns ``(quantum, pilot)`` noiseless quadrature records in field
    units.  The quantum plane takes TE plus the TM leak set by ``per_rx``
    (the pilot crosstalk tone), the pilot plane takes TM plus the TE leak.
    """
    te = np.asarray(frame.te_samples)
    tm = np.asarray(frame.tm_samples)
    eps = db_to_field_ratio(per_rx)
    quantum = te + eps * tm if eps else te
    pilot = tm + eps * te if eps else tm
    if lo_linewidth > 0:
        lo_phase = wiener_phase_path(
            lo_linewidth, frame.n_samples, frame.sample_rate, derive_seed(seed, "lo-laser")
        )
        lo = np.exp(-1j * lo_phase)
        quantum = quantum * lo
        pilot = pilot * lo
    common = dict(sample_rate=frame.sample_rate, symbol_rate=frame.symbol_rate)
    return (
        QuadratureRecord.from_complex(quantum, plane="quantum", **common),
        QuadratureRecord.from_complex(pilot, plane="pilot", **common),
    )


def _complex_normal(rng, n):
    """Complex samples with independent unit-variance real and imaginary parts."""
    return rng.standard_normal(2 * n).view(np.complex128)


def balanced_detect(record, bandwidth, eta, v_el, seed, *, lo_power=1.0, shot_noise=True):
    """Photodetection of one plane: efficiency, shot and electronic noise, low-pass.

    Parameters
    ----------
    record : QuadratureRecord
        Noiseless field-unit quadratures from :func:`intradyne_detect`.
    bandwidth : float
        3-dB bandwidth of the single-pole detector response (``inf`` for none).
    eta : float
        Detection efficiency in (0, 1].
    v_el : float
        Electronic noise in SNU at the nominal LO power.
    seed : int
    lo_power : float
        LO power relative to nominal; shot noise and signal scale with it,
        electronic noise does not.
    shot_noise : bool
        Draw LO shot noise; disabling it leaves a noiseless detector for
        DSP identity checks.

    Returns
    -------
    QuadratureRecord
        Raw detector output.
    """
    bandwidth = check_positive(bandwidth, "bandwidth", allow_inf=True)
    eta = check_fraction(eta, "eta")
    check_positive(v_el, "v_el", allow_zero=True)
    check_positive(lo_power, "lo_power")
    n = len(record)
    sps = record.sample_rate / record.symbol_rate
    z = record.complex * np.sqrt(2 * eta / sps)
    if shot_noise:
        z += _complex_normal(stage_rng(seed, f"detector-{record.plane}"), n)
    if lo_power != 1:
        z *= np.sqrt(lo_power)
    if v_el > 0:
        z += np.sqrt(v_el) * _complex_normal(stage_rng(seed, f"electronics-{record.plane}"), n)
    if bandwidth != np.inf:
        z = apply_response(z, record.sample_rate, lambda f: single_pole_response(f, bandwidth))
    return record.with_samples(z, bandwidth=bandwidth, meta={**record.meta, "eta": eta, "lo_power": lo_power})


@dataclass(frozen=True)
class AdcResult:
    record: QuadratureRecord
    clipped: int
    lsb: float


def adc_quantize(record, bits, full_scale):
    """Uniform mid-rise quantizer on I and Q with clipping at ``+/- full_scale``.

    Returns an :class:`AdcResult`; a warning is issued if any sample clipped.
    """
    if full_scale <= 0:
        raise ValueError(f"full_scale must be > 0, got {full_scale!r}")
    if bits < 2:
        raise ValueError(f"bits must be >= 2, got {bits!r}")
    lsb = 2.0 * full_scale / 2**bits
    top = full_scale - lsb / 2
    # I and Q interleaved as one real array
    y = record.complex.view(np.float64) / lsb
    np.floor(y, out=y)
    y += 0.5
    y *= lsb
    clipped = int(np.count_nonzero(np.abs(y) > top))
    np.clip(y, -top, top, out=y)
    if clipped:
        warnings.warn(f"ADC clipped {clipped} samples (full scale {full_scale:g})", RuntimeWarning, stacklevel=2)
    rec = record.with_samples(y.view(np.complex128), meta={**record.meta, "adc_clipped": clipped, "adc_lsb": lsb})
    return AdcResult(rec, clipped, lsb)


def adc_full_scale(cfg):
    """Full scale set at a multiple of the expected shot-noise RMS per sample."""
    rms = np.sqrt(cfg.lo_power + cfg.electronic_noise)
    return cfg.adc_full_scale_rms * rms


def detect_plane(field_record, cfg, seed, *, bandwidth, lo_power=None, v_el=None, digitize=True):
    """Balanced detection followed by the ADC, as configured."""
    lo_power = cfg.lo_power if lo_power is None else lo_power
    v_el = cfg.electronic_noise if v_el is None else v_el
    rec = balanced_detect(
        field_record, bandwidth, cfg.receiver_efficiency, v_el, seed,
        lo_power=lo_power, shot_noise=cfg.shot_noise,
    )
    if digitize and cfg.adc_bits:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec = adc_quantize(rec, cfg.adc_bits, adc_full_scale(cfg)).record
    return rec


def dark_capture(cfg, seed, *, lo_on, lo_power=None, n_samples=None):
    """Signal-off capture of the quantum plane (LO on or off).

    With no signal the detector input is white noise of per-quadrature
    variance ``lo_power + v_el`` (LO on) or ``v_el`` (LO off), so it is
    drawn directly in the frequency domain, shaped by the detector
    response and digitized like the data.
    """
    n = cfg.symbols_per_frame * cfg.samples_per_symbol if n_samples is None else n_samples
    lo_power = cfg.lo_power if lo_power is None else lo_power
    variance = cfg.electronic_noise + (lo_power if lo_on else 0.0)
    label = "lo-on" if lo_on else "lo-off"
    # the DFT of n white samples is white with variance n per component
    spec = _complex_normal(stage_rng(seed, f"dark-{label}"), n)
    spec *= np.sqrt(n * variance)
    if cfg.quantum_rx_bandwidth != np.inf:
        spec *= single_pole_response(fft_frequencies(n, cfg.sample_rate), cfg.quantum_rx_bandwidth)
    rec = QuadratureRecord.from_complex(
        sfft.ifft(spec, overwrite_x=True), cfg.sample_rate, "quantum",
        symbol_rate=cfg.symbol_rate, bandwidth=cfg.quantum_rx_bandwidth,
        meta={"lo_power": lo_power, "capture": label},
    )
    if cfg.adc_bits:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec = adc_quantize(rec, cfg.adc_bits, adc_full_scale(cfg)).record
    return rec


def calibrate_snu(scenario, seed, *, lo_power=None, n_samples=None, frequency_offset=0.0):
    """Two-capture SNU calibration through the full quantum receive chain.

    Both captures pass the detector, the ADC and the DSP receive filter and
    are sampled once per symbol, so the resulting unit applies at the
    decision point.  ``frequency_offset`` repeats the frequency correction
    applied to the data, which moves the detector roll-off against the
    receive filter.
    """
    from .dsp import DspConfig, decimate_spectrum, receive_filter_spectrum, shift_frequency

    dsp_cfg = DspConfig.from_config(scenario)
    variances = []
    for label, lo_on in (("lo-on", True), ("lo-off", False)):
        if not lo_on and scenario.electronic_noise == 0:
            # a noiseless LO-off capture is identically zero
            variances.append(0.0)
            continue
        rec = dark_capture(scenario, derive_seed(seed, f"calibration-{label}"), lo_on=lo_on,
                           lo_power=lo_power, n_samples=n_samples)
        if frequency_offset:
            rec = shift_frequency(rec, frequency_offset)
        z = decimate_spectrum(receive_filter_spectrum(rec, dsp_cfg), rec.samples_per_symbol)
        variances.append(0.5 * (np.var(z.real) + np.var(z.imag)))
    shot, electronic = variances
    return CalibrationRecord(float(shot), float(electronic), len(z))
