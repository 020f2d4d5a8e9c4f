"""Gaussian-state tools: entropy function, covariance matrices, symplectic spectra."""

from __future__ import annotations

import numpy as np

from ..errors import ConditioningError, UnphysicalStateError

NU_TOLERANCE = 1e-6  # below 1 - tol an eigenvalue is rejected as unphysical
PHYSICALITY_TOLERANCE = 1e-9


def g_von_neumann(nu):
    """Entropy (bits) of a thermal mode with symplectic eigenvalue ``nu``.

    ``g(nu) = (nu+1)/2 log2((nu+1)/2) - (nu-1)/2 log2((nu-1)/2)`` with
    ``g(1) = 0``.  Values in ``[1 - 1e-6, 1)`` are clamped to one.

    Raises
    ------
    UnphysicalStateError
        If any ``nu < 1 - 1e-6``.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 1 - NU_TOLERANCE) or np.any(~np.isfinite(nu)):
        raise UnphysicalStateError(f"symplectic eigenvalue below 1: {np.min(nu)!r}")
    nu = np.maximum(nu, 1.0)
    plus = (nu + 1) / 2
    minus = (nu - 1) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(minus > 0, minus * np.log2(np.where(minus > 0, minus, 1.0)), 0.0)
    out = plus * np.log2(plus) - tail
    return float(out) if out.ndim == 0 else out


def symplectic_form(n_modes):
    """``Omega = diag(J, ..., J)`` with ``J = [[0, 1], [-1, 0]]``."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def check_physical(cov, tol=PHYSICALITY_TOLERANCE):
    """Raise :class:`UnphysicalStateError` unless ``cov + i Omega >= 0``."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise ValueError(f"covariance must be square with even dimension, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance matrix is not symmetric")
    low = np.linalg.eigvalsh(cov + 1j * symplectic_form(cov.shape[0] // 2)).min()
    if low < -tol * max(1.0, np.abs(cov).max()):
        raise UnphysicalStateError(f"covariance violates the uncertainty principle (min eigenvalue {low:.3g})")
    return cov


def epr_covariance(modulation_variance, transmittance, xi_input):
    """Alice-Bob covariance of the entanglement-based picture.

    Parameters
    ----------
    modulation_variance : float
        ``V_mod`` in SNU; ``V = V_mod + 1``.
    transmittance : float
        Channel transmittance ``T``.
    xi_input : float
        Excess noise referred to the channel input (SNU).

    Returns
    -------
    ndarray, shape (4, 4)
        ``[[V I, c Z], [c Z, b I]]`` with ``b = T(V-1) + 1 + T xi`` and
        ``c = sqrt(T (V^2 - 1))``.
    """
    v = modulation_variance + 1.0
    a = v
    b = transmittance * (v - 1) + 1 + transmittance * xi_input
    c = np.sqrt(transmittance * (v * v - 1))
    eye = np.eye(2)
    z = np.diag([1.0, -1.0])
    return np.block([[a * eye, c * z], [c * z, b * eye]])


def covariance_matrix(params):
    """Physical Alice-Bob covariance for :class:`KeyRateParams`.

    The channel is Eve's channel: ``T`` with the trusted receiver, ``eta T``
    with an untrusted one (see :meth:`KeyRateParams.eve_channel`).
    """
    t, xi_in = params.eve_channel()
    cov = epr_covariance(params.V_mod, t, xi_in)
    return check_physical(cov)


def symplectic_eigenvalues(cov, tol=1e-9):
    """Closed-form symplectic eigenvalues of a two-mode covariance.

    ``nu^2 = (Delta +/- sqrt(Delta^2 - 4 D)) / 2`` with
    ``Delta = det A + det B + 2 det C`` and ``D = det(cov)``.

    Returns
    -------
    tuple of float
        ``(nu_1, nu_2)`` with ``nu_1 >= nu_2``.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4):
        raise ValueError(f"expected a 4x4 covariance, got {cov.shape}")
    a, b, c = cov[:2, :2], cov[2:, 2:], cov[:2, 2:]
    delta = np.linalg.det(a) + np.linalg.det(b) + 2 * np.linalg.det(c)
    d = np.linalg.det(cov)
    disc = delta * delta - 4 * d
    scale = max(1.0, delta * delta)
    if disc < -tol * scale:
        raise ConditioningError(f"negative discriminant {disc:.3g} in symplectic spectrum")
    root = np.sqrt(max(disc, 0.0))
    hi = (delta + root) / 2
    lo = (delta - root) / 2
    if lo < 0:
        # cancellation when D << Delta^2; D = nu1^2 nu2^2 is better conditioned
        lo = d / hi if hi > 0 else 0.0
    elif root > 0:
        lo = d / hi
    return float(np.sqrt(hi)), float(np.sqrt(max(lo, 0.0)))


def symplectic_eigenvalues_numeric(cov):
    """Symplectic spectrum from ``|eig(i Omega cov)|`` for any number of modes.

    Eigenvalues come in +/- pairs; one of each pair is returned, sorted
    descending.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    ev = np.sort(np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov)))[::-1]
    return ev[::2]


def entropy(cov):
    """Von Neumann entropy (bits) of a Gaussian state."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape == (4, 4):
        nus = symplectic_eigenvalues(cov)
    elif cov.shape == (2, 2):
        nus = (float(np.sqrt(max(np.linalg.det(cov), 0.0))),)
    else:
        nus = symplectic_eigenvalues_numeric(cov)
    return float(np.sum(g_von_neumann(np.asarray(nus))))


def heterodyne_condition(cov, measured):
    """Covariance of the other modes after heterodyning mode ``measured``.

    Uses ``X - C (B + I)^-1 C^T`` where ``B`` is the measured mode's block.
    """
    cov = np.asarray(cov, dtype=float)
    idx = [2 * measured, 2 * measured + 1]
    rest = [i for i in range(cov.shape[0]) if i not in idx]
    x = cov[np.ix_(rest, rest)]
    c = cov[np.ix_(rest, idx)]
    b = cov[np.ix_(idx, idx)]
    return x - c @ np.linalg.solve(b + np.eye(2), c.T)


def trusted_detector_state(cov_ab, eta, v_el):
    """Append the trusted detector's noise mode and apply its loss.

    Bob's mode passes a beam splitter of transmittance ``eta`` whose other
    port carries one arm of an EPR pair of variance
    ``nu_el = 1 + 2 v_el / (1 - eta)`` (heterodyne normalization).
    Returns the 8x8 covariance over modes (A, B', F, G).
    """
    if eta >= 1:
        nu_el = 1.0
    else:
        nu_el = 1.0 + 2.0 * v_el / (1.0 - eta)
    eye = np.eye(2)
    z = np.diag([1.0, -1.0])
    cn = np.sqrt(max(nu_el * nu_el - 1.0, 0.0))
    full = np.zeros((8, 8))
    full[:4, :4] = cov_ab
    full[4:, 4:] = np.block([[nu_el * eye, cn * z], [cn * z, nu_el * eye]])
    s = np.eye(8)
    t, r = np.sqrt(eta), np.sqrt(1.0 - eta)
    s[2:4, 2:4] = t * eye
    s[2:4, 4:6] = r * eye
    s[4:6, 2:4] = -r * eye
    s[4:6, 4:6] = t * eye
    return s @ full @ s.T
