"""Asymptotic secure key rate under Gaussian-modulation equivalence."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .._validation import check_finite, check_fraction, check_positive
from ..errors import BracketError
from .gaussian import (
    covariance_matrix,
    entropy,
    g_von_neumann,
    heterodyne_condition,
    trusted_detector_state,
)

XI_REFERENCES = ("channel-output", "channel-input")


@dataclass(frozen=True)
class KeyRateParams:
    """Channel and receiver parameters entering the key-rate bound.

    Parameters
    ----------
    V_mod : float
        Modulation variance in SNU.
    T : float
        Channel transmittance.
    xi : float
        Excess noise in SNU, referred to ``xi_reference``.  With a trusted
        receiver this is the channel excess noise; with an untrusted one it
        is the total noise above shot noise and is attributed to a channel
        of transmittance ``eta * T``.
    eta : float
        Receiver efficiency.
    v_el : float
        Electronic noise in SNU per quadrature at the decision point.
    beta : float
        Reconciliation efficiency in (0, 1].
    detection : str
        Only ``"heterodyne"``.
    trusted_receiver : bool
    xi_reference : {"channel-output", "channel-input"}
    disclosure_fraction : float
        Fraction of symbols published for parameter estimation.
    """

    V_mod: float
    T: float
    xi: float
    eta: float = 1.0
    v_el: float = 0.0
    beta: float = 0.95
    detection: str = "heterodyne"
    trusted_receiver: bool = True
    xi_reference: str = "channel-output"
    disclosure_fraction: float = 0.0

    def __post_init__(self):
        check_positive(self.V_mod, "V_mod")
        check_fraction(self.T, "T")
        check_positive(self.xi, "xi", allow_zero=True)
        check_fraction(self.eta, "eta")
        check_positive(self.v_el, "v_el", allow_zero=True)
        check_fraction(self.beta, "beta", allow_zero=True)
        if self.detection != "heterodyne":
            raise ValueError(f"unsupported detection {self.detection!r}")
        if self.xi_reference not in XI_REFERENCES:
            raise ValueError(f"xi_reference must be one of {XI_REFERENCES}, got {self.xi_reference!r}")
        disclosure = check_finite(self.disclosure_fraction, "disclosure_fraction")
        if not 0 <= disclosure < 1:
            raise ValueError("disclosure_fraction must lie in [0, 1)")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def eve_channel(self):
        """``(transmittance, input-referred excess noise)`` of the channel Eve controls."""
        t = self.T if self.trusted_receiver else self.eta * self.T
        xi_in = self.xi if self.xi_reference == "channel-input" else self.xi / t
        return t, xi_in

    def model_snr(self):
        """Per-quadrature SNR implied by the parameters."""
        t, xi_in = self.eve_channel()
        if self.trusted_receiver:
            signal = self.eta * self.T * self.V_mod
            return signal / (2 * (1 + self.v_el) + self.eta * self.T * xi_in)
        return t * self.V_mod / (2 + t * xi_in)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class KeyRateReport:
    mutual_information: float
    holevo_bound: float
    key_fraction: float
    key_rate: float
    symbol_rate: float
    snr: float
    assumptions: dict

    def to_dict(self):
        return dataclasses.asdict(self)


def mutual_information_heterodyne(snr):
    """Alice-Bob mutual information ``log2(1 + snr)`` in bits per symbol."""
    snr = check_positive(snr, "snr", allow_zero=True)
    return math.log2(1.0 + snr)


def holevo_bound(params):
    """Eve's information on Bob's heterodyne data (bits per symbol).

    Computed by numerically conditioning the purified Gaussian state:
    ``S(AB) - S(rest | y_B)``.  With a trusted receiver the detector's
    loss and electronic noise are modelled by an extra EPR mode that Eve
    cannot access.
    """
    cov = covariance_matrix(params)
    s_e = entropy(cov)
    if params.trusted_receiver and (params.eta < 1 or params.v_el > 0):
        full = trusted_detector_state(cov, params.eta, params.v_el)
        cond = heterodyne_condition(full, 1)
    else:
        cond = heterodyne_condition(cov, 1)
    chi = s_e - entropy(cond)
    return max(float(chi), 0.0)


def holevo_bound_closed_form(params):
    """Closed-form heterodyne bound for a trusted detector (cross-check).

    Untrusted parameters reduce to ``eta = 1`` and ``v_el = 0`` on Eve's
    channel.
    """
    t, xi_in = params.eve_channel()
    if params.trusted_receiver:
        eta, v_el = params.eta, params.v_el
    else:
        eta, v_el = 1.0, 0.0
    v = params.V_mod + 1
    chi_line = 1 / t - 1 + xi_in
    chi_het = (2 - eta + 2 * v_el) / eta
    chi_tot = chi_line + chi_het / t
    a = v * v * (1 - 2 * t) + 2 * t + t * t * (v + chi_line) ** 2
    b = t * t * (v * chi_line + 1) ** 2
    c = (a * chi_het**2 + b + 1 + 2 * chi_het * (v * math.sqrt(b) + t * (v + chi_line))
         + 2 * t * (v * v - 1)) / (t * (v + chi_tot)) ** 2
    d = ((v + math.sqrt(b) * chi_het) / (t * (v + chi_tot))) ** 2

    def pair(s, p):
        root = math.sqrt(max(s * s - 4 * p, 0.0))
        hi = (s + root) / 2
        lo = p / hi if hi > 0 else 0.0
        return math.sqrt(hi), math.sqrt(max(lo, 1.0))

    l1, l2 = pair(a, b)
    l3, l4 = pair(c, d)
    chi = g_von_neumann(l1) + g_von_neumann(l2) - g_von_neumann(l3) - g_von_neumann(l4)
    return max(float(chi), 0.0)


def secure_key_rate(params, snr=None, symbol_rate=500e6):
    """Asymptotic key rate ``(1 - f_PE) max(0, beta I_AB - chi_BE) R_q``.

    Parameters
    ----------
    params : KeyRateParams
    snr : float, optional
        Measured per-quadrature SNR; the model SNR of ``params`` if omitted.
    symbol_rate : float
        ``R_q`` in symbols per second.

    Returns
    -------
    KeyRateReport
    """
    symbol_rate = check_positive(symbol_rate, "symbol_rate")
    snr = params.model_snr() if snr is None else check_positive(snr, "snr", allow_zero=True)
    i_ab = mutual_information_heterodyne(snr)
    chi = holevo_bound(params)
    fraction = (1.0 - params.disclosure_fraction) * max(0.0, params.beta * i_ab - chi)
    assumptions = {
        "detection": params.detection,
        "trusted_receiver": params.trusted_receiver,
        "xi_reference": params.xi_reference,
        "modulation": "gaussian-equivalent",
        "regime": "asymptotic",
        "beta": params.beta,
        "disclosure_fraction": params.disclosure_fraction,
    }
    return KeyRateReport(i_ab, chi, fraction, fraction * symbol_rate, symbol_rate, snr, assumptions)


def infer_receiver_efficiency(target_snr, params, xtol=1e-14):
    """Receiver efficiency that makes ``params.model_snr()`` equal ``target_snr``.

    Bisection on ``eta`` in (0, 1]; the SNR must grow monotonically with
    ``eta``, which is checked on a grid before solving.

    Raises
    ------
    BracketError
        If the target exceeds the SNR reachable at ``eta = 1``.
    """
    target_snr = check_positive(target_snr, "target_snr")

    def snr_at(eta):
        return params.replace(eta=eta).model_snr()

    grid = np.linspace(1e-6, 1.0, 65)
    values = np.array([snr_at(e) for e in grid])
    if np.any(np.diff(values) <= 0):
        raise BracketError("model SNR is not monotone in the receiver efficiency")
    top = values[-1]
    if target_snr > top * (1 + 1e-12):
        raise BracketError(f"target SNR {target_snr:g} exceeds {top:g} reachable with eta = 1")
    if target_snr >= top:
        return 1.0
    return float(optimize.bisect(lambda e: snr_at(e) - target_snr, 1e-12, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps))


def params_from_measurement(snr, xi_total, xi_trusted, *, V_mod, T, beta=0.95,
                            xi_reference="channel-output", trusted_receiver=True):
    """Key-rate parameters from a reported (SNR, xi, xi_S) triple.

    The receiver efficiency follows from the SNR with the total noise
    ``1 + eta T xi_total,in / 2`` of an untrusted-receiver channel
    ``eta T``; the electronic noise is the part of the total excess not
    explained by ``xi_S``.  With ``trusted_receiver=False`` the total
    excess noise is attributed to Eve.
    """
    check_positive(snr, "snr")
    if xi_reference == "channel-output":
        # N = 1 + xi_tot / 2 does not depend on eta
        noise = 1 + xi_total / 2
        eta = 2 * snr * noise / (T * V_mod)
        xi_s_in = xi_trusted / T
    elif xi_reference == "channel-input":
        eta = 2 * snr / (T * (V_mod - snr * xi_total))
        noise = 1 + eta * T * xi_total / 2
        xi_s_in = xi_trusted
    else:
        raise ValueError(f"unknown xi_reference {xi_reference!r}")
    if not 0 < eta <= 1:
        raise BracketError(f"reported values imply receiver efficiency {eta:g} outside (0, 1]")
    v_el = noise - 1 - eta * T * xi_s_in / 2
    if v_el < 0:
        raise BracketError(f"reported values imply negative electronic noise {v_el:g}")
    xi = xi_trusted if trusted_receiver else xi_total
    return KeyRateParams(
        V_mod=V_mod, T=T, xi=xi, eta=eta, v_el=v_el, beta=beta,
        trusted_receiver=trusted_receiver, xi_reference=xi_reference,
    )
