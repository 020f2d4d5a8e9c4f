"""Fiber channel: loss, laser phase and frequency offset, polarization, co-existence noise."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._validation import check_positive, frozen
from .core import derive_seed, stage_rng, wiener_phase_path
from .errors import BracketError

logger = logging.getLogger(__name__)


def jones_rotation(angle_rad):
    """Real rotation between the TE and TM axes."""
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


@dataclass(frozen=True)
class ChannelState:
    """Impairments applied by :func:`propagate`.

    ``phase_path`` is the transmitter laser phase (rad, one value per
    sample) or ``None`` for a noiseless laser.  ``crosstalk_density`` is the
    co-existence noise in SNU per quadrature referred to the channel output.
    """

    transmittance: float = 1.0
    frequency_offset: float = 0.0
    phase_path: np.ndarray | None = None
    jones: np.ndarray = None
    crosstalk_density: float = 0.0

    def __post_init__(self):
        if not 0 < self.transmittance <= 1:
            raise ValueError(f"transmittance must lie in (0, 1], got {self.transmittance!r}")
        check_positive(self.crosstalk_density, "crosstalk_density", allow_zero=True)
        jones = np.eye(2, dtype=np.complex128) if self.jones is None else np.asarray(self.jones, dtype=np.complex128)
        if jones.shape != (2, 2):
            raise ValueError("jones rotation must be 2x2")
        if np.linalg.norm(jones.conj().T @ jones - np.eye(2)) > 1e-12:
            raise ValueError("jones rotation must be unitary")
        object.__setattr__(self, "jones", frozen(jones))
        if self.phase_path is not None:
            object.__setattr__(self, "phase_path", frozen(np.asarray(self.phase_path, dtype=float)))

    @property
    def is_identity(self):
        return (
            self.transmittance == 1
            and self.frequency_offset == 0
            and (self.phase_path is None or not np.any(self.phase_path))
            and np.array_equal(self.jones, np.eye(2))
            and self.crosstalk_density == 0
        )

    @classmethod
    def from_config(cls, cfg, n_samples, seed):
        phase = None
        if cfg.tx_linewidth > 0:
            phase = wiener_phase_path(
                cfg.tx_linewidth, n_samples, cfg.sample_rate, derive_seed(seed, "tx-laser")
            )
        return cls(
            transmittance=cfg.transmittance,
            frequency_offset=cfg.lo_frequency_offset,
            phase_path=phase,
            jones=jones_rotation(np.deg2rad(cfg.polarization_angle_deg)),
            crosstalk_density=cfg.crosstalk_density,
        )


def transmittance_from_length(length_km, attenuation_db_per_km=0.2):
    """Power transmittance ``10**(-alpha L / 10)`` of a fiber span."""
    if length_km < 0:
        raise ValueError(f"length must be >= 0, got {length_km!r}")
    check_positive(attenuation_db_per_km, "attenuation", allow_zero=True)
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def crosstalk_density_from_load(n_channels, per_channel_density):
    """Total co-existence noise for independent classical channels (adds linearly)."""
    if n_channels < 0:
        raise ValueError(f"n_channels must be >= 0, got {n_channels!r}")
    check_positive(per_channel_density, "per_channel_density", allow_zero=True)
    return n_channels * per_channel_density


def propagate(frame, state, seed):
    """Send a dual-polarization frame through the channel.

    The field is attenuated by ``sqrt(T)``, rotated by the Jones matrix,
    given the laser phase and LO frequency offset, and receives white
    complex Gaussian co-existence noise.  Vacuum noise from loss is not
    added here; it enters at detection.
    """
    if state.is_identity:
        return frame
    n = frame.n_samples
    if state.phase_path is not None and state.phase_path.size != n:
        raise ValueError(f"phase path length {state.phase_path.size} != frame length {n}")
    te = np.asarray(frame.te_samples)
    tm = np.asarray(frame.tm_samples)
    u = state.jones
    if not np.array_equal(u, np.eye(2)):
        te, tm = u[0, 0] * te + u[0, 1] * tm, u[1, 0] * te + u[1, 1] * tm
    amp = np.sqrt(state.transmittance)
    if amp != 1:
        te = te * amp
        tm = tm * amp
    phase = None
    if state.frequency_offset:
        phase = 2 * np.pi * state.frequency_offset * frame.time_axis()
    if state.phase_path is not None:
        phase = state.phase_path if phase is None else phase + state.phase_path
    if phase is not None:
        rot = np.exp(1j * phase)
        te = te * rot
        tm = tm * rot
    if state.crosstalk_density > 0:
        # per-quadrature SNU variance d in a symbol-matched band -> field
        # variance per sample of d * sps / 4 per real component
        sigma = np.sqrt(state.crosstalk_density * frame.samples_per_symbol / 4)
        rng = stage_rng(seed, "crosstalk")
        for pol in ("te", "tm"):
            noise = rng.standard_normal((2, n))
            noise = sigma * (noise[0] + 1j * noise[1])
            if pol == "te":
                te = te + noise
            else:
                tm = tm + noise
    return frame.replace(te_samples=te, tm_samples=tm)


MONOTONE_TOLERANCE = 1e-5  # SNU; ADC rounding makes xi_S ripple below this scale


def calibrate_crosstalk(target_xi_delta, scenario, *, seed=None, xtol=1e-8, max_density=None):
    """Per-channel co-existence density that raises the estimated xi_S by
    ``target_xi_delta`` (SNU) over the same scenario without classical load.

    Every evaluation reruns the full chain with the same seed, so the
    noise realizations are shared between trial densities and the
    response is smooth up to quantization ripple well below
    ``MONOTONE_TOLERANCE``.  ``scenario.n_classical_channels`` must be
    positive.  Returns ``(density, achieved_delta)``.
    """
    from .pipeline import simulate_link

    if target_xi_delta < 0:
        raise ValueError("target_xi_delta must be >= 0")
    if target_xi_delta == 0:
        return 0.0, 0.0
    n_ch = scenario.n_classical_channels
    if n_ch <= 0:
        raise ValueError("scenario must carry at least one classical channel")
    seed = scenario.seed if seed is None else seed
    baseline = simulate_link(scenario.replace(crosstalk_noise_density=0.0), seed).estimation.xi_trusted_raw
    history = []

    def delta(density):
        est = simulate_link(scenario.replace(crosstalk_noise_density=density), seed).estimation
        value = est.xi_trusted_raw - baseline
        for d_prev, v_prev in history:
            if (density - d_prev) * (value - v_prev) < 0 and abs(value - v_prev) > MONOTONE_TOLERANCE:
                raise BracketError(
                    f"xi_S not monotone in crosstalk density ({d_prev:g} -> {v_prev:g}, "
                    f"{density:g} -> {value:g})"
                )
        history.append((density, value))
        logger.debug("crosstalk density %.6g -> delta xi %.6g", density, value)
        return value - target_xi_delta

    # delta(xi_S) ~ d_total / T for input reference, ~ d_total for output
    hi = max_density if max_density is not None else 4 * target_xi_delta / n_ch
    f_hi = delta(hi)
    tries = 0
    while f_hi < 0 and max_density is None and tries < 8:
        hi *= 4
        f_hi = delta(hi)
        tries += 1
    if f_hi < 0:
        raise BracketError(f"target {target_xi_delta:g} not reached up to density {hi:g}")
    density = optimize.brentq(delta, 0.0, hi, xtol=xtol, rtol=1e-12)
    achieved = delta(density) + target_xi_delta
    return density, achieved
