"""End-to-end link simulation: transmitter, fiber, receiver, DSP, security."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import io
from .channel import ChannelState, propagate
from .core import derive_seed, gen_qpsk_symbols
from .dsp import (
    DspConfig,
    _with_band,
    apply_cpr,
    estimate_frequency_offset,
    filter_and_sample,
    max_phase_slew,
    quantum_spectrum,
    receive_filter_spectrum,
    search_timing,
    timing_snr,
    track_pilot_phase,
)
from .errors import ConfigError, EmptyFrameError, PilotQKDError, StageError
from .rxsim import calibrate_snu, detect_plane, intradyne_detect
from .security.estimation import estimate_parameters
from .security.keyrate import KeyRateParams, secure_key_rate
from .txsim import (
    PilotSpec,
    PulseShaper,
    pol_mux,
    pulse_carve,
    pulse_shape,
    set_launch,
    synth_pilot,
    tx_monitors,
)

logger = logging.getLogger(__name__)


@dataclass
class LinkResult:
    """Outputs of one simulated frame.

    ``artifacts`` holds plot data (eye, spectra, constellation) when
    requested.
    """

    scenario: object
    seed: int
    tx: object
    recovered: object
    calibration: object
    estimation: object
    key_rate: object
    key_params: object
    frequency_offset_estimate: float
    max_phase_slew: float
    artifacts: dict = field(default_factory=dict)


class _Stage:
    """Context manager that tags errors with the failing stage."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        logger.debug("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, (PilotQKDError, ValueError, ArithmeticError, np.linalg.LinAlgError)):
            raise StageError(self.name, exc) from exc
        return False


def tributaries(cfg, seed):
    """Symbols, pulse shaper and the (carved) quantum and pilot tributaries."""
    tx = gen_qpsk_symbols(cfg.symbols_per_frame, seed, cfg.symbol_rate)
    shaper = PulseShaper.from_config(cfg)
    quantum = pulse_shape(tx, shaper)
    pilot = synth_pilot(
        PilotSpec.from_suppression(cfg.pilot_frequency, cfg.carrier_suppression_db, cfg.sideband_suppression_db),
        quantum.size, cfg.sample_rate,
    )
    if cfg.carving == "applied":
        quantum = pulse_carve(quantum, cfg.carving_duty, cfg.samples_per_symbol)
        pilot = pulse_carve(pilot, cfg.carving_duty, cfg.samples_per_symbol)
    return tx, shaper, quantum, pilot


def transmit(cfg, seed, *, monitors=False):
    """Symbols and launched dual-polarization frame.

    Returns ``(tx, shaper, frame)``, plus :class:`MonitorData` when
    ``monitors`` is set.
    """
    tx, shaper, quantum, pilot = tributaries(cfg, seed)
    frame = pol_mux(quantum, pilot, cfg.per_tx_db, sample_rate=cfg.sample_rate,
                    symbol_rate=cfg.symbol_rate, seed=seed)
    frame = set_launch(frame, cfg.photons_per_symbol, cfg.pilot_launch_power_dbm, cfg.photon_energy)
    if not monitors:
        return tx, shaper, frame
    return tx, shaper, frame, tx_monitors(frame, quantum=quantum)


def receive(frame, cfg, seed):
    """Intradyne front end and digitized quantum / pilot records."""
    quantum_f, pilot_f = intradyne_detect(frame, cfg.lo_linewidth, seed, cfg.per_rx_db)
    quantum = detect_plane(quantum_f, cfg, derive_seed(seed, "rx-quantum"), bandwidth=cfg.quantum_rx_bandwidth)
    del quantum_f
    pilot = detect_plane(pilot_f, cfg, derive_seed(seed, "rx-pilot"), bandwidth=cfg.pilot_rx_bandwidth)
    return quantum, pilot


def key_params_from_estimate(est, cfg):
    """Key-rate parameters from an estimate, with the estimated transmittance."""
    t_hat = float(np.clip(est.transmittance_estimate, 1e-12, 1.0))
    trusted = cfg.trusted_receiver
    return KeyRateParams(
        V_mod=cfg.modulation_variance,
        T=t_hat,
        xi=est.xi_trusted if trusted else est.xi_total,
        eta=cfg.receiver_efficiency,
        v_el=est.electronic_noise,
        beta=cfg.reconciliation_efficiency,
        trusted_receiver=trusted,
        xi_reference=cfg.xi_reference,
        disclosure_fraction=cfg.disclosure_fraction,
    )


@dataclass
class FrontEnd:
    """Carrier-recovered quantum record and the data needed downstream."""

    tx: object
    shaper: object
    corrected: object
    frequency_offset_estimate: float
    max_phase_slew: float
    artifacts: dict = field(default_factory=dict)


def front_end(cfg, seed, *, artifacts=False):
    """Transmitter, channel, receiver and carrier recovery for one frame."""
    extra = {}
    with _Stage("tx"):
        if artifacts:
            tx, shaper, frame, mon = transmit(cfg, seed, monitors=True)
            extra["eye"] = (mon.eye_time, mon.eye_traces)
            extra["eye_width"] = mon.eye_width()
        else:
            tx, shaper, frame = transmit(cfg, seed)
    with _Stage("channel"):
        state = ChannelState.from_config(cfg, frame.n_samples, seed)
        frame = propagate(frame, state, seed)
        del state
    with _Stage("rx"):
        quantum, pilot = receive(frame, cfg, seed)
        del frame
    dsp_cfg = DspConfig.from_config(cfg)
    with _Stage("dsp"):
        df_hat = estimate_frequency_offset(pilot, cfg.pilot_frequency, dsp_cfg)
        trajectory = track_pilot_phase(pilot, cfg.pilot_frequency, df_hat, dsp_cfg)
        if artifacts:
            extra["quantum_spectrum"] = quantum_spectrum(quantum)
            extra["pilot_spectrum"] = quantum_spectrum(pilot)
        del pilot
        slew = max_phase_slew(trajectory, cfg.sample_rate)
        corrected = apply_cpr(quantum, df_hat, trajectory)
    return FrontEnd(tx, shaper, corrected, df_hat, slew, extra)


def back_end(front, cfg, seed, *, calibration=None, artifacts=False):
    """Matched filtering, calibration, estimation and key rate.

    ``cfg`` may differ from the scenario that produced ``front`` in its
    DSP and security settings only.
    """
    dsp_cfg = DspConfig.from_config(cfg)
    tx = front.tx
    with _Stage("dsp"):
        recovered = filter_and_sample(front.corrected, front.shaper, dsp_cfg, tx)
    with _Stage("calibration"):
        if calibration is None:
            calibration = calibrate_snu(cfg, seed, frequency_offset=front.frequency_offset_estimate)
    with _Stage("estimation"):
        est = estimate_parameters(tx, recovered, calibration, cfg)
    with _Stage("security"):
        params = key_params_from_estimate(est, cfg)
        report = secure_key_rate(params, est.snr, cfg.symbol_rate)
    extra = dict(front.artifacts)
    if artifacts:
        x = recovered.align(tx)
        n_show = min(4096, len(recovered))
        y = calibration.to_snu(recovered.symbols[:n_show])
        extra["constellation"] = (y * np.exp(-1j * est.phase), x[:n_show])
    return LinkResult(
        scenario=cfg,
        seed=seed,
        tx=tx,
        recovered=recovered,
        calibration=calibration,
        estimation=est,
        key_rate=report,
        key_params=params,
        frequency_offset_estimate=front.frequency_offset_estimate,
        max_phase_slew=front.max_phase_slew,
        artifacts=extra,
    )


def simulate_link(cfg, seed=None, *, calibration=None, artifacts=False):
    """Run one frame through the full chain.

    Parameters
    ----------
    cfg : ScenarioConfig
    seed : int, optional
        Defaults to ``cfg.seed``.
    calibration : CalibrationRecord, optional
        Reuse a shot-noise calibration instead of measuring one for this run.
    artifacts : bool
        Collect plot data.

    Returns
    -------
    LinkResult
    """
    seed = cfg.seed if seed is None else int(seed)
    front = front_end(cfg, seed, artifacts=artifacts)
    return back_end(front, cfg, seed, calibration=calibration, artifacts=artifacts)


def timing_sensitivity(cfg, seed=None, offsets=(-0.05, 0.05)):
    """Decision-point SNR loss for fixed timing errors.

    The frame is recovered once; the timing search picks the optimum and
    the SNR is re-measured at ``optimum + offset`` for each offset
    (fractions of a symbol period).

    Returns
    -------
    dict
        ``timing_offset`` (optimum), ``snr_optimum``, ``snr`` per offset and
        ``loss_db`` per offset (positive means the SNR dropped).
    """
    seed = cfg.seed if seed is None else int(seed)
    front = front_end(cfg, seed)
    dsp_cfg = DspConfig.from_config(cfg)
    record = front.corrected
    if dsp_cfg.signal_bandwidth is None:
        dsp_cfg = _with_band(dsp_cfg, front.shaper.occupied_bandwidth(cfg.symbol_rate))
    filtered = sfft.ifft(receive_filter_spectrum(record, dsp_cfg))
    tx = front.tx.symbols
    sps = record.samples_per_symbol
    best, _ = search_timing(filtered, tx, sps, dsp_cfg)
    ref = timing_snr(filtered, tx, sps, best, dsp_cfg.edge_discard)
    snrs = [timing_snr(filtered, tx, sps, best + d, dsp_cfg.edge_discard) for d in offsets]
    return {
        "timing_offset": best,
        "snr_optimum": ref,
        "offsets": [float(d) for d in offsets],
        "snr": snrs,
        "loss_db": [float(10 * np.log10(ref / s)) for s in snrs],
    }


def _check(preset, metrics):
    rows = {}
    for name, exp in preset.expected.items():
        measured = metrics.get(name)
        rows[name] = {**exp.to_dict(), "measured": measured, "pass": exp.check(measured)}
    return rows


def build_report(result, preset=None):
    """Plain-data report of a :class:`LinkResult`.

    Keys are in a fixed order and nothing depends on wall-clock time, so
    the same configuration and seed give the same report.
    """
    est = result.estimation
    cal = result.calibration
    report = {
        "preset": preset.name if preset is not None else None,
        "seed": result.seed,
        "config": result.scenario.to_dict(),
        "estimation": est.to_dict(),
        "key_rate": result.key_rate.to_dict(),
        "key_params": result.key_params.to_dict(),
        "calibration": {
            "shot_variance": cal.shot_variance,
            "electronic_variance": cal.electronic_variance,
            "electronic_noise_snu": cal.electronic_noise_snu,
            "n_samples": cal.n_samples,
        },
        "dsp": {
            "frequency_offset_estimate": result.frequency_offset_estimate,
            "max_phase_slew": result.max_phase_slew,
            "timing_offset": result.recovered.timing_offset,
            "n_symbols": len(result.recovered),
            "eye_width": result.artifacts.get("eye_width"),
        },
    }
    if preset is not None:
        metrics = {
            "snr": est.snr,
            "xi_total": est.xi_total,
            "xi_trusted": est.xi_trusted,
            "key_rate": result.key_rate.key_rate,
        }
        checks = _check(preset, metrics)
        flags = [c["pass"] for c in checks.values() if c["pass"] is not None]
        report["check"] = {"metrics": checks, "passed": all(flags)}
        if {"eta", "v_el", "xi_trusted"} <= set(preset.measured):
            report["calculator"] = {
                "inputs": dict(preset.measured),
                "key_rate": preset.calculator_report().to_dict(),
            }
    return report


def write_artifacts(result, out_dir):
    """CSV plot data for a run with ``artifacts=True``."""
    out = Path(out_dir)
    art = result.artifacts
    written = []
    if "eye" in art:
        written.append(io.write_eye(out / "eye.csv", *art["eye"]))
    for key in ("quantum_spectrum", "pilot_spectrum"):
        if key in art:
            written.append(io.write_spectrum(out / f"{key}.csv", *art[key]))
    if "constellation" in art:
        written.append(io.write_constellation(out / "constellation.csv", *art["constellation"]))
    written.append(io.write_symbols(out / "recovered.csv", result.recovered.symbols, result.recovered.edge_discard))
    return written


def run_scenario(cfg, seed=None, out_dir=None, *, preset=None):
    """Simulate one frame and optionally write ``report.json`` and CSV files.

    Parameters
    ----------
    cfg : ScenarioConfig
    seed : int, optional
    out_dir : path-like, optional
        Created if missing.
    preset : ScenarioPreset, optional
        Adds the expected-value comparison to the report.

    Returns
    -------
    dict
        The report.
    """
    result = simulate_link(cfg, seed, artifacts=out_dir is not None)
    report = build_report(result, preset)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "report.json", report)
        write_artifacts(result, out)
    return report


# sweep parameter -> config field (None: handled by sweep_bandwidth)
SWEEP_PARAMETERS = {
    "relative_filter_bandwidth": None,
    "filter_bandwidth": "filter_bandwidth",
    "fiber_length_km": "fiber_length_km",
    "n_classical_channels": "n_classical_channels",
    "photons_per_symbol": "photons_per_symbol",
}
SWEEP_ALIASES = {
    "b_fil": "relative_filter_bandwidth",
    "b_fil_rel": "relative_filter_bandwidth",
    "fiber_length": "fiber_length_km",
}


def sweep_parameter(name):
    """Canonical sweep parameter name.

    Raises
    ------
    ConfigError
        For a parameter that cannot be swept.
    """
    key = SWEEP_ALIASES.get(name.lower(), name.lower())
    if key not in SWEEP_PARAMETERS:
        raise ConfigError(f"cannot sweep {name!r}; choose one of {', '.join(SWEEP_PARAMETERS)}", field=name)
    return key


def _point(args):
    cfg, seed = args
    res = simulate_link(cfg, seed)
    return res.estimation, res.key_rate


def _row(param, value, est, rate):
    return {param: value, **est.to_dict(), "key_rate": rate.key_rate, "key_fraction": rate.key_fraction}


def run_sweep(cfg, param, grid, seed=None, out_dir=None, *, workers=1):
    """Evaluate the chain over a one-parameter grid.

    All points share the seed, so they differ only in the swept value.
    ``relative_filter_bandwidth`` (``B_fil / R_q``) reuses one front end
    and one shot-noise calibration (see :func:`sweep_bandwidth`); other
    parameters run the whole chain per point, optionally in a process pool.
    Rows are sorted by the grid value whatever the completion order.

    Returns
    -------
    rows : list of dict
    summary : dict
    """
    from .security.sweep import sweep_bandwidth, trend_statistics

    param = sweep_parameter(param)
    seed = cfg.seed if seed is None else int(seed)
    values = sorted(float(v) for v in np.atleast_1d(grid))
    if not values:
        raise EmptyFrameError("sweep grid is empty")
    if param == "relative_filter_bandwidth":
        curve = sweep_bandwidth(cfg, values, seed)
        pairs = list(zip(curve.estimates, curve.key_rates))
    else:
        field_name = SWEEP_PARAMETERS[param]
        is_int = field_name == "n_classical_channels"
        configs = []
        for v in values:
            if is_int and not float(v).is_integer():
                raise ConfigError(f"grid value {v} is not an integer", field=param)
            configs.append(cfg.replace(**{field_name: int(v) if is_int else v}))
        jobs = [(c, seed) for c in configs]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                pairs = list(pool.map(_point, jobs))
        else:
            pairs = [_point(j) for j in jobs]
    rows = [_row(param, v, est, rate) for v, (est, rate) in zip(values, pairs)]
    x = [r[param] for r in rows]
    summary = {
        "parameter": param,
        "grid": values,
        "seed": seed,
        "config": cfg.to_dict(),
        "trend": {
            metric: trend_statistics(x, [r[metric] for r in rows])
            for metric in ("xi_total_raw", "xi_trusted_raw", "key_rate")
        },
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = list(rows[0])
        numeric = [h for h in header if not isinstance(rows[0][h], str)]
        io.write_csv(out / "sweep.csv", numeric, [[r[h] for r in rows] for h in numeric])
        io.write_json(out / "summary.json", summary)
    return rows, summary
