"""Scenario configuration: one flat, validated parameter set per simulated link.

Files use ``section.key = value`` lines; ``#`` starts a comment.  Every key
is optional and unknown keys are rejected::

    tx.symbol_rate = 500e6
    tx.pulse_shape = nyquist
    channel.fiber_length_km = 13.2
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import dbm_to_photons_per_symbol, photon_energy, samples_per_symbol
from .errors import ConfigError

PULSE_SHAPES = ("gaussian", "nyquist")
CARVING = ("none", "applied")
FILTER_KINDS = ("brickwall", "raised-cosine")
XI_REFERENCES = ("channel-output", "channel-input")


def _opt(section, default, units="", choices=None):
    return field(default=default, metadata={"section": section, "units": units, "choices": choices})


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and DSP parameter set for one link."""

    # transmitter
    symbol_rate: float = _opt("tx", 500e6, "Hz")
    pulse_shape: str = _opt("tx", "nyquist", choices=PULSE_SHAPES)
    rolloff: float = _opt("tx", 0.2)
    bt_product: float = _opt("tx", 0.5)
    carving: str = _opt("tx", "none", choices=CARVING)
    carving_duty: float = _opt("tx", 0.5)
    pilot_frequency: float = _opt("tx", 1e9, "Hz")
    pilot_launch_power_dbm: float = _opt("tx", -46.0, "dBm")
    photons_per_symbol: float = _opt("tx", 4.0)
    per_tx_db: float = _opt("tx", 20.0, "dB")
    carrier_suppression_db: float = _opt("tx", 23.0, "dB")
    sideband_suppression_db: float = _opt("tx", 14.0, "dB")
    wavelength_nm: float = _opt("tx", 1532.9, "nm")
    tx_linewidth: float = _opt("tx", 10e3, "Hz")
    # channel
    fiber_length_km: float = _opt("channel", 13.2, "km")
    attenuation_db_per_km: float = _opt("channel", 0.2, "dB/km")
    lo_frequency_offset: float = _opt("channel", 10e6, "Hz")
    n_classical_channels: int = _opt("channel", 0)
    classical_launch_power_dbm: float = _opt("channel", 5.2, "dBm")
    crosstalk_noise_density: float = _opt("channel", 0.0, "SNU per channel")
    polarization_angle_deg: float = _opt("channel", 0.0, "deg")
    # receiver
    lo_linewidth: float = _opt("rx", 10e3, "Hz")
    per_rx_db: float = _opt("rx", 20.0, "dB")
    quantum_rx_bandwidth: float = _opt("rx", 315e6, "Hz")
    pilot_rx_bandwidth: float = _opt("rx", 10e9, "Hz")
    electronic_noise: float = _opt("rx", 0.01, "SNU")
    receiver_efficiency: float = _opt("rx", 0.6)
    lo_power: float = _opt("rx", 1.0, "raw")
    adc_bits: int = _opt("rx", 10)
    adc_full_scale_rms: float = _opt("rx", 6.0)
    # offline dsp
    fft_size: int = _opt("dsp", 65536)
    filter_bandwidth: float = _opt("dsp", 300e6, "Hz")
    filter_kind: str = _opt("dsp", "brickwall", choices=FILTER_KINDS)
    phase_smoothing_window: int = _opt("dsp", 64, "samples")
    timing_search_grid: int = _opt("dsp", 64)
    edge_discard: int = _opt("dsp", 128, "symbols")
    compensate_detector: bool = _opt("dsp", True)
    foe_min_snr_db: float = _opt("dsp", 10.0, "dB")
    # security
    reconciliation_efficiency: float = _opt("security", 0.95)
    trusted_receiver: bool = _opt("security", True)
    xi_reference: str = _opt("security", "channel-output", choices=XI_REFERENCES)
    disclosure_fraction: float = _opt("security", 0.0)
    # simulation
    sample_rate: float = _opt("sim", 5e9, "Hz")
    symbols_per_frame: int = _opt("sim", 1_000_000)
    seed: int = _opt("sim", 1)
    shot_noise: bool = _opt("sim", True)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type in ("float",) and isinstance(value, int) and not isinstance(value, bool):
                object.__setattr__(self, f.name, float(value))
        self.validate()

    # derived quantities
    @property
    def samples_per_symbol(self):
        return samples_per_symbol(self.sample_rate, self.symbol_rate)

    @property
    def transmittance(self):
        return 10.0 ** (-self.attenuation_db_per_km * self.fiber_length_km / 10.0)

    @property
    def modulation_variance(self):
        return 2.0 * self.photons_per_symbol

    @property
    def photon_energy(self):
        return photon_energy(self.wavelength_nm * 1e-9)

    @property
    def pilot_photons_per_symbol(self):
        return dbm_to_photons_per_symbol(
            self.pilot_launch_power_dbm, self.symbol_rate, self.photon_energy
        )

    @property
    def crosstalk_density(self):
        """Total co-existence noise in SNU referred to the channel output."""
        return self.n_classical_channels * self.crosstalk_noise_density

    @property
    def relative_filter_bandwidth(self):
        return self.filter_bandwidth / self.symbol_rate

    def signal_bandwidth(self):
        """One-sided band that holds the quantum signal."""
        if self.pulse_shape == "nyquist":
            return (1 + self.rolloff) * self.symbol_rate / 2
        return self.symbol_rate

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        def bad(name, why):
            raise ConfigError(why, field=name)

        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            choices = f.metadata.get("choices")
            if choices is not None and value not in choices:
                bad(f.name, f"must be one of {', '.join(choices)}; got {value!r}")
            if isinstance(value, float) and not math.isfinite(value):
                if not (f.name.endswith("_db") and value == math.inf):
                    bad(f.name, "must be finite")

        positive = (
            "symbol_rate", "pilot_frequency", "sample_rate", "quantum_rx_bandwidth",
            "pilot_rx_bandwidth", "filter_bandwidth", "wavelength_nm", "lo_power",
            "adc_full_scale_rms", "bt_product",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                bad(name, "must be > 0")
        non_negative = (
            "photons_per_symbol", "per_tx_db", "per_rx_db", "carrier_suppression_db",
            "sideband_suppression_db", "fiber_length_km", "attenuation_db_per_km",
            "tx_linewidth", "lo_linewidth", "crosstalk_noise_density", "electronic_noise",
            "n_classical_channels", "edge_discard", "disclosure_fraction",
        )
        for name in non_negative:
            if getattr(self, name) < 0:
                bad(name, "must be >= 0")
        if not 0 < self.reconciliation_efficiency <= 1:
            bad("reconciliation_efficiency", "must lie in (0, 1]")
        if not 0 < self.receiver_efficiency <= 1:
            bad("receiver_efficiency", "must lie in (0, 1]")
        if not 0 <= self.rolloff <= 1:
            bad("rolloff", "must lie in [0, 1]")
        if not 0 < self.carving_duty <= 1:
            bad("carving_duty", "must lie in (0, 1]")
        if self.disclosure_fraction >= 1:
            bad("disclosure_fraction", "must be < 1")
        if self.pilot_frequency <= self.symbol_rate:
            bad("pilot_frequency", "pilot must lie out of band (pilot_frequency > symbol_rate)")
        if self.pilot_frequency + abs(self.lo_frequency_offset) >= self.sample_rate / 2:
            bad("pilot_frequency", "pilot aliases at this sample_rate")
        try:
            samples_per_symbol(self.sample_rate, self.symbol_rate)
        except ValueError as exc:
            bad("sample_rate", str(exc))
        if self.adc_bits < 2 and self.adc_bits != 0:
            bad("adc_bits", "must be >= 2 (or 0 to disable digitization)")
        if self.fft_size < 16 or self.fft_size & (self.fft_size - 1):
            bad("fft_size", "must be a power of two >= 16")
        if self.phase_smoothing_window < 1:
            bad("phase_smoothing_window", "must be >= 1")
        if self.timing_search_grid < 1:
            bad("timing_search_grid", "must be >= 1")
        if self.symbols_per_frame <= 2 * self.edge_discard:
            bad("symbols_per_frame", "frame shorter than twice the edge discard")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_text(self):
        """Serialize to the flat ``section.key = value`` format."""
        lines = []
        section = None
        for f in dataclasses.fields(self):
            sec = f.metadata["section"]
            if sec != section:
                if section is not None:
                    lines.append("")
                lines.append(f"# {sec}")
                section = sec
            lines.append(f"{sec}.{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _parse_value(raw, f, lineno):
    kind = f.type
    text = raw.strip()
    try:
        if kind == "bool":
            lowered = text.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind == "int":
            as_float = float(text)
            if not as_float.is_integer():
                raise ValueError(f"not an integer: {text!r}")
            return int(as_float)
        if kind == "float":
            return float(text)
        return text.lower()
    except ValueError as exc:
        raise ConfigError(str(exc), field=f.name, line=lineno) from None


def parse_config_text(text, base=None):
    """Parse flat config text on top of ``base`` (defaults if omitted)."""
    values = {}
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'section.key = value', got {stripped!r}", line=lineno)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
        else:
            section, name = None, key
        f = _FIELDS.get(name)
        if f is None:
            raise ConfigError("unknown key", field=key, line=lineno)
        if section is not None and section != f.metadata["section"]:
            raise ConfigError(
                f"key belongs to section '{f.metadata['section']}'", field=key, line=lineno
            )
        if name in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[name]})", field=key, line=lineno)
        seen[name] = lineno
        values[name] = _parse_value(raw, f, lineno)
    base = ScenarioConfig() if base is None else base
    try:
        return dataclasses.replace(base, **values)
    except ConfigError as exc:
        if exc.field in seen and exc.line is None:
            raise ConfigError(str(exc).split("] ", 1)[-1], field=exc.field, line=seen[exc.field]) from None
        raise


def load_config(path):
    """Read and validate a scenario file; missing keys take their defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)
