"""Parameter estimation from aligned transmitted / received symbols in SNU."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..errors import ConditioningError, EmptyFrameError


@dataclass(frozen=True)
class EstimationResult:
    """Estimated link parameters.

    Excess noise values are in SNU and referred to ``xi_reference``.
    ``xi_total`` treats every noise term above shot noise as channel
    noise on a channel of transmittance ``eta T``; ``xi_trusted`` removes
    the calibrated electronic noise and refers the remainder through the
    trusted efficiency ``eta``.  Negative estimates are clamped to zero
    in ``xi_total`` / ``xi_trusted`` and kept in the ``*_raw`` fields.
    """

    transmittance_estimate: float
    snr: float
    xi_total: float
    xi_trusted: float
    n_symbols_used: int
    xi_total_raw: float
    xi_trusted_raw: float
    xi_total_std_error: float
    xi_trusted_std_error: float
    conditional_variance: float
    gain: float
    phase: float
    electronic_noise: float
    receiver_efficiency: float
    modulation_variance: float
    xi_reference: str
    clamped: bool

    def to_dict(self):
        return dataclasses.asdict(self)


def _as_symbols(x, name):
    arr = np.asarray(getattr(x, "symbols", x), dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def estimate_parameters(tx, rx, cal, scenario=None, *, modulation_variance=None,
                        receiver_efficiency=None, xi_reference=None):
    """Estimate T, SNR, xi and xi_S from symbol pairs.

    Parameters
    ----------
    tx : SymbolFrame or array_like
        Transmitted unit-energy symbols, either the full frame or already
        aligned with ``rx``.
    rx : RecoveredFrame or array_like
        Decision-point samples in raw receiver units.
    cal : CalibrationRecord
        Defines the shot-noise unit and the electronic noise.
    scenario : ScenarioConfig, optional
        Supplies ``V_mod``, ``eta`` and the xi reference unless given
        explicitly.

    Returns
    -------
    EstimationResult
    """
    if scenario is not None:
        modulation_variance = scenario.modulation_variance if modulation_variance is None else modulation_variance
        receiver_efficiency = scenario.receiver_efficiency if receiver_efficiency is None else receiver_efficiency
        xi_reference = scenario.xi_reference if xi_reference is None else xi_reference
    if modulation_variance is None or receiver_efficiency is None:
        raise ValueError("modulation_variance and receiver_efficiency are required")
    xi_reference = xi_reference or "channel-output"

    y = _as_symbols(rx, "rx")
    x = _as_symbols(tx, "tx")
    if hasattr(rx, "align") and x.size != y.size:
        x = rx.align(x)
    if x.size != y.size:
        raise ValueError(f"tx ({x.size}) and rx ({y.size}) are not aligned")
    n = y.size
    if n < 2:
        raise EmptyFrameError("need at least two symbols to estimate parameters")

    y = cal.to_snu(y)
    y = y - y.mean()
    x = x - x.mean()
    power_x = np.vdot(x, x).real / n
    if power_x <= 0:
        raise ConditioningError("transmitted symbols have zero variance")
    g = np.vdot(x, y) / (n * power_x)
    resid = y - g * x
    # per-quadrature samples of the residual, two per symbol
    r2 = np.concatenate([resid.real**2, resid.imag**2])
    v_cond = float(r2.mean()) * n / (n - 1)
    se_v = float(r2.std(ddof=1) / np.sqrt(r2.size))
    if cal.n_samples:
        rel_cal = np.hypot(cal.shot_variance, cal.electronic_variance) / cal.snu_scale / np.sqrt(cal.n_samples)
        se_v = float(np.hypot(se_v, v_cond * rel_cal))

    gain2 = float(abs(g) ** 2)
    eta = float(receiver_efficiency)
    v_el = cal.electronic_noise_snu
    t_hat = gain2 / (eta * modulation_variance)
    snr = gain2 * power_x / (2 * v_cond)

    xi_tot = 2 * (v_cond - 1)
    xi_s = 2 * (v_cond - 1 - v_el) / eta
    se_tot = 2 * se_v
    se_s = 2 * se_v / eta
    if xi_reference == "channel-input":
        eve_t = gain2 / modulation_variance  # eta * T
        xi_tot, se_tot = xi_tot / eve_t, se_tot / eve_t
        xi_s, se_s = xi_s / t_hat, se_s / t_hat
    elif xi_reference != "channel-output":
        raise ValueError(f"unknown xi_reference {xi_reference!r}")

    clamped = xi_tot < 0 or xi_s < 0
    return EstimationResult(
        transmittance_estimate=float(t_hat),
        snr=float(snr),
        xi_total=max(float(xi_tot), 0.0),
        xi_trusted=max(float(xi_s), 0.0),
        n_symbols_used=int(n),
        xi_total_raw=float(xi_tot),
        xi_trusted_raw=float(xi_s),
        xi_total_std_error=float(se_tot),
        xi_trusted_std_error=float(se_s),
        conditional_variance=v_cond,
        gain=float(abs(g)),
        phase=float(np.angle(g)),
        electronic_noise=float(v_el),
        receiver_efficiency=eta,
        modulation_variance=float(modulation_variance),
        xi_reference=xi_reference,
        clamped=bool(clamped),
    )


class ExcessNoiseEstimator(BaseEstimator):
    """Estimator wrapper around :func:`estimate_parameters`.

    Parameters
    ----------
    calibration : CalibrationRecord
    modulation_variance : float
    receiver_efficiency : float
    xi_reference : {"channel-output", "channel-input"}

    Attributes
    ----------
    result_ : EstimationResult
    transmittance_, snr_, xi_total_, xi_trusted_ : float
    """

    def __init__(self, calibration=None, modulation_variance=8.0, receiver_efficiency=0.6,
                 xi_reference="channel-output"):
        self.calibration = calibration
        self.modulation_variance = modulation_variance
        self.receiver_efficiency = receiver_efficiency
        self.xi_reference = xi_reference

    def fit(self, tx, rx):
        if self.calibration is None:
            raise ValueError("a CalibrationRecord is required")
        self.result_ = estimate_parameters(
            tx, rx, self.calibration,
            modulation_variance=self.modulation_variance,
            receiver_efficiency=self.receiver_efficiency,
            xi_reference=self.xi_reference,
        )
        self.transmittance_ = self.result_.transmittance_estimate
        self.snr_ = self.result_.snr
        self.xi_total_ = self.result_.xi_total
        self.xi_trusted_ = self.result_.xi_trusted
        return self

    def predict(self, tx):
        """Expected decision-point samples (SNU, mean removed) for ``tx``."""
        check_is_fitted(self, "result_")
        x = _as_symbols(tx, "tx")
        g = self.result_.gain * np.exp(1j * self.result_.phase)
        return g * (x - x.mean())
