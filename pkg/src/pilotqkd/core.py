"""Signal containers, random processes and unit conversions.

Field amplitudes are kept in photon units: the mean of ``|field|**2`` over
one symbol slot equals the mean photon number per symbol.  Quadratures in
shot-noise units (SNU) follow ``x = 2 Re(alpha)``, so vacuum has unit
variance and a coherent-state ensemble with ``<n>`` photons per symbol has
modulation variance ``2 <n>`` per quadrature.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from ._validation import (
    check_count,
    check_complex_1d,
    check_positive,
    frozen,
)
from .errors import EmptyFrameError

QPSK_POINTS = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
DEFAULT_WAVELENGTH = 1532.9e-9


def stage_rng(seed, stage):
    """Independent generator for one named stage of the chain.

    Streams for different stages never overlap, so toggling one impairment
    leaves the random draws of every other stage untouched.
    """
    return np.random.default_rng([int(seed), zlib.crc32(stage.encode())])


def derive_seed(seed, label):
    """Deterministic child seed for a labelled sub-process (e.g. one laser)."""
    seq = np.random.SeedSequence([int(seed), zlib.crc32(label.encode())])
    return int(seq.generate_state(1)[0])


def photon_energy(wavelength=DEFAULT_WAVELENGTH):
    return constants.h * constants.c / wavelength


def dbm_to_watts(dbm):
    return 1e-3 * 10.0 ** (dbm / 10.0)


def dbm_to_photons_per_symbol(dbm, symbol_rate, energy=None):
    """Convert an optical power in dBm to mean photons per symbol slot."""
    energy = photon_energy() if energy is None else energy
    return dbm_to_watts(dbm) / energy / symbol_rate


def db_to_field_ratio(db):
    """Field (amplitude) ratio for a power suppression of ``db`` decibels."""
    if db == np.inf:
        return 0.0
    return 10.0 ** (-db / 20.0)


@dataclass(frozen=True)
class SymbolFrame:
    """Transmitted constellation points at one sample per symbol."""

    symbols: np.ndarray
    symbol_rate: float
    alphabet: str = "QPSK4"

    def __post_init__(self):
        if self.alphabet != "QPSK4":
            raise ValueError(f"unsupported alphabet {self.alphabet!r}")
        object.__setattr__(self, "symbols", frozen(check_complex_1d(self.symbols, "symbols")))
        check_positive(self.symbol_rate, "symbol_rate")

    def __len__(self):
        return self.symbols.size

    def state_indices(self):
        """Index 0..3 of the nearest QPSK point for every symbol."""
        angle = np.angle(self.symbols * np.exp(-1j * np.pi / 4))
        return np.mod(np.rint(angle / (np.pi / 2)), 4).astype(int)


@dataclass(frozen=True)
class DualPolFrame:
    """Sampled TE/TM baseband field at a common sample rate.

    TE houses the quantum tributary and TM the pilot tributary.
    """

    te_samples: np.ndarray
    tm_samples: np.ndarray
    sample_rate: float
    symbol_rate: float
    symbols_per_frame: int
    origin_seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        te = check_complex_1d(self.te_samples, "te_samples")
        tm = check_complex_1d(self.tm_samples, "tm_samples")
        if te.size != tm.size:
            raise ValueError("te_samples and tm_samples must have identical length")
        sps = samples_per_symbol(self.sample_rate, self.symbol_rate)
        if te.size != self.symbols_per_frame * sps:
            raise ValueError(
                f"frame length {te.size} != symbols_per_frame ({self.symbols_per_frame}) "
                f"x samples_per_symbol ({sps})"
            )
        object.__setattr__(self, "te_samples", frozen(te))
        object.__setattr__(self, "tm_samples", frozen(tm))

    @property
    def samples_per_symbol(self):
        return samples_per_symbol(self.sample_rate, self.symbol_rate)

    @property
    def n_samples(self):
        return self.te_samples.size

    def time_axis(self):
        return np.arange(self.n_samples) / self.sample_rate

    def mean_photons(self, plane="te"):
        """Mean ``|field|**2`` of one plane, i.e. photons per symbol."""
        samples = self.te_samples if plane == "te" else self.tm_samples
        return float(np.mean(np.abs(samples) ** 2))

    def replace(self, **changes):
        kwargs = dict(
            te_samples=self.te_samples,
            tm_samples=self.tm_samples,
            sample_rate=self.sample_rate,
            symbol_rate=self.symbol_rate,
            symbols_per_frame=self.symbols_per_frame,
            origin_seed=self.origin_seed,
            meta=dict(self.meta),
        )
        kwargs.update(changes)
        return DualPolFrame(**kwargs)


def samples_per_symbol(sample_rate, symbol_rate):
    ratio = sample_rate / symbol_rate
    sps = int(round(ratio))
    if sps < 1 or abs(ratio - sps) > 1e-9 * ratio:
        raise ValueError(
            f"sample_rate / symbol_rate must be a positive integer, got {ratio!r}"
        )
    return sps


def gen_qpsk_symbols(n, seed, symbol_rate=500e6):
    """Draw ``n`` i.i.d. uniform QPSK symbols from the unit-energy alphabet.

    Parameters
    ----------
    n : int
        Number of symbols, at least one.
    seed : int
        Generator seed; identical ``(n, seed)`` give identical frames.
    symbol_rate : float
        Symbol rate in Hz carried along with the frame.
    """
    if isinstance(n, (int, np.integer)) and n == 0:
        raise EmptyFrameError("cannot generate an empty symbol frame")
    n = check_count(n, "n")
    idx = stage_rng(seed, "symbols").integers(0, 4, size=n)
    return SymbolFrame(QPSK_POINTS[idx], symbol_rate)


def photons_to_modulation_variance(photons_per_symbol):
    """Modulation variance in SNU, ``V_mod = 2 <n>``."""
    photons = float(photons_per_symbol)
    if not np.isfinite(photons) or photons < 0:
        raise ValueError(f"photons_per_symbol must be >= 0, got {photons_per_symbol!r}")
    return 2.0 * photons


def wiener_phase_path(linewidth, n_samples, sample_rate, seed):
    """Laser phase as a Wiener process (Lorentzian line of FWHM ``linewidth``).

    Increments are zero-mean Gaussian with variance
    ``2 * pi * linewidth / sample_rate`` and the path starts at zero.
    """
    linewidth = check_positive(linewidth, "linewidth", allow_zero=True)
    n_samples = check_count(n_samples, "n_samples")
    sample_rate = check_positive(sample_rate, "sample_rate")
    if linewidth == 0:
        return np.zeros(n_samples)
    sigma = np.sqrt(2 * np.pi * linewidth / sample_rate)
    steps = stage_rng(seed, "wiener").normal(0.0, sigma, n_samples - 1)
    phase = np.empty(n_samples)
    phase[0] = 0.0
    np.cumsum(steps, out=phase[1:])
    return phase
