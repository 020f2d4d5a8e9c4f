"""Excess-noise dependence on the digital reception bandwidth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyFrameError


def trend_statistics(x, y):
    """Monotone-trend summary of a sampled curve.

    Parameters
    ----------
    x, y : array_like
        Grid coordinates (any order) and values.

    Returns
    -------
    dict
        ``argmin`` (index into the sorted grid), ``x_at_min``,
        ``increasing_beyond_min`` (strictly increasing after the minimum,
        ``False`` when the minimum is the last point), ``slopes`` and
        ``max_slope`` of the finite differences.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ValueError("x and y must be equal-length, non-empty 1-D arrays")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]
    k = int(np.argmin(y))
    slopes = np.diff(y) / np.diff(x) if x.size > 1 else np.empty(0)
    tail = np.diff(y[k:])
    return {
        "argmin": k,
        "x_at_min": float(x[k]),
        "increasing_beyond_min": bool(tail.size > 0 and np.all(tail > 0)),
        "slopes": [float(v) for v in slopes],
        "max_slope": float(slopes.max()) if slopes.size else float("nan"),
    }


@dataclass(frozen=True)
class BandwidthCurve:
    """Estimated excess noise against ``B_fil / R_q``.

    Excess noise values are the unclamped estimates in SNU.
    """

    relative_bandwidth: np.ndarray
    xi_total: np.ndarray
    xi_trusted: np.ndarray
    xi_total_std_error: np.ndarray
    snr: np.ndarray
    recalibrated: bool
    estimates: tuple = ()
    key_rates: tuple = ()

    def __len__(self):
        return self.relative_bandwidth.size

    def trend(self, metric="xi_total"):
        return trend_statistics(self.relative_bandwidth, getattr(self, metric))


def sweep_bandwidth(scenario, grid, seed=None, *, recalibrate=False, reference_bandwidth=None):
    """Estimate excess noise for a set of digital filter bandwidths.

    Every grid point sees the same transmitted frame, channel and noise
    realization (fixed seed); only the receive filter changes, so the
    front end runs once.  By default the shot-noise unit is calibrated
    once and reused for every point: one SNU is the vacuum variance of a
    single temporal mode per symbol, i.e. the noise in the Nyquist band
    ``R_q / 2``.  Noise admitted by a wider filter then shows up as
    excess noise.  With ``recalibrate=True`` each point is calibrated at
    its own bandwidth, which normalizes white noise away.

    Parameters
    ----------
    scenario : ScenarioConfig
    grid : array_like
        ``B_fil / R_q`` values; output is sorted by this coordinate.
    seed : int, optional
    recalibrate : bool
    reference_bandwidth : float, optional
        Filter bandwidth (Hz) of the shared calibration; ``R_q / 2`` if
        omitted.  Ignored with ``recalibrate=True``.

    Returns
    -------
    BandwidthCurve
    """
    from ..pipeline import back_end, front_end
    from ..rxsim import calibrate_snu

    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    if grid.size == 0:
        raise EmptyFrameError("bandwidth grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise ValueError("relative bandwidths must be positive and finite")
    seed = scenario.seed if seed is None else int(seed)
    front = front_end(scenario, seed)
    reference = None
    if not recalibrate:
        ref_bw = scenario.symbol_rate / 2 if reference_bandwidth is None else float(reference_bandwidth)
        reference = calibrate_snu(scenario.replace(filter_bandwidth=ref_bw), seed,
                                  frequency_offset=front.frequency_offset_estimate)
    results = []
    for rel in grid:
        cfg = scenario.replace(filter_bandwidth=float(rel * scenario.symbol_rate))
        results.append(back_end(front, cfg, seed, calibration=reference))
    ests = tuple(r.estimation for r in results)
    return BandwidthCurve(
        grid,
        np.array([e.xi_total_raw for e in ests]),
        np.array([e.xi_trusted_raw for e in ests]),
        np.array([e.xi_total_std_error for e in ests]),
        np.array([e.snr for e in ests]),
        recalibrated=bool(recalibrate),
        estimates=ests,
        key_rates=tuple(r.key_rate for r in results),
    )
