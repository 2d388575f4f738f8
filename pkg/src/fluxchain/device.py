"""Device parameters, flux-bias points, and piecewise-linear bias schedules.

The JSON config format has four sections ("qubit", "qfp", "resonator",
"calibration") whose keys match the DeviceParams field names. SI units
throughout except fluxes, which are dimensionless in Phi0 units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from .errors import ConfigError
from .units import PHI0

# field name -> (config section, required)
_SCHEMA = {
    "ic_x_qub": ("qubit", True),
    "d_asym": ("qubit", False),
    "ic_z_qub": ("qubit", True),
    "c_shunt_qub": ("qubit", False),
    "l_z_qub": ("qubit", True),
    "ip_qub": ("qubit", True),
    "t1_avg": ("qubit", False),
    "ic_x_qfp": ("qfp", True),
    "l_qfp": ("qfp", True),
    "m_qub_qfp": ("qfp", True),
    "m_qfp_tres": ("qfp", True),
    "ic_tres": ("resonator", True),
    "l_tres": ("resonator", True),
    "q_total": ("resonator", True),
    "q_external": ("resonator", False),
    "f_res_max": ("resonator", False),
    "flux_offset_z": ("calibration", False),
    "flux_offset_x": ("calibration", False),
}

_POSITIVE_FIELDS = (
    "ic_x_qub", "ic_z_qub", "c_shunt_qub", "l_z_qub", "ip_qub",
    "ic_x_qfp", "l_qfp", "m_qub_qfp", "m_qfp_tres",
    "ic_tres", "l_tres", "q_total", "f_res_max", "t1_avg",
)

CONTROL_LINES = ("phi_z_qub", "phi_x_qub", "phi_z_qfp", "phi_x_qfp", "phi_z_tres")


@dataclass(frozen=True)
class DeviceParams:
    """All circuit constants plus calibration offsets.

    Immutable; safe to share across threads. Fluxes are in Phi0 units,
    everything else SI.
    """

    ic_x_qub: float            # qubit x-loop junction critical current (A)
    ic_z_qub: float            # qubit z-loop junction critical current (A)
    l_z_qub: float             # qubit z-loop linear inductance (H)
    ip_qub: float              # qubit persistent-current magnitude (A)
    ic_x_qfp: float            # QFP x-loop junction critical current (A)
    l_qfp: float               # QFP z-loop linear inductance (H)
    m_qub_qfp: float           # qubit <-> QFP mutual inductance (H)
    m_qfp_tres: float          # QFP <-> tunable-resonator mutual inductance (H)
    ic_tres: float             # resonator RF-SQUID junction critical current (A)
    l_tres: float              # resonator RF-SQUID loop inductance (H)
    q_total: float             # resonator total quality factor
    d_asym: float = 0.0        # qubit x-loop junction asymmetry
    c_shunt_qub: float = 70e-15
    t1_avg: float = 1.77e-6    # background qubit lifetime (s)
    q_external: float | None = None
    f_res_max: float = 6.46e9  # resonator upper sweet-spot frequency (Hz)
    flux_offset_z: float = 0.0  # trapped-flux offset on the qubit z line (Phi0)
    flux_offset_x: float = 0.0  # trapped-flux offset on the qubit x line (Phi0)
    phi0: float = field(default=PHI0, init=False)

    def __post_init__(self):
        for name in _POSITIVE_FIELDS:
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"field {name} must be strictly positive")
        if not 0.0 <= self.d_asym < 1.0:
            raise ConfigError("field d_asym must satisfy 0 <= d_asym < 1")
        if self.q_external is not None:
            if self.q_external <= 0.0:
                raise ConfigError("field q_external must be strictly positive")
            if 1.0 / self.q_total - 1.0 / self.q_external < 0.0:
                raise ConfigError(
                    "field q_external implies negative internal loss "
                    "(1/q_total - 1/q_external < 0)")
        for name in ("flux_offset_z", "flux_offset_x"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"field {name} must be finite")


@dataclass(frozen=True)
class FluxBias:
    """One point in control-flux space (all values in Phi0 units)."""

    phi_z_qub: float = 0.0
    phi_x_qub: float = 0.0
    phi_z_qfp: float = 0.0
    phi_x_qfp: float = 0.0
    phi_z_tres: float = 0.0

    def __post_init__(self):
        for name in CONTROL_LINES:
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"flux {name} must be finite")


class BiasSchedule:
    """Piecewise-linear flux waveform per control line.

    Values before the first breakpoint clamp to the first value, after the
    last to the last value. Lines not present evaluate to 0.
    """

    def __init__(self, lines):
        self.lines = {}
        for name, points in lines.items():
            if name not in CONTROL_LINES:
                raise ConfigError(f"unknown control line {name!r}")
            pts = [(float(t), float(v)) for t, v in points]
            if not pts:
                raise ConfigError(f"line {name!r} has no breakpoints")
            times = np.array([t for t, _ in pts])
            if np.any(np.diff(times) <= 0.0):
                raise ConfigError(f"line {name!r} breakpoint times must be strictly increasing")
            self.lines[name] = (times, np.array([v for _, v in pts]))

    @property
    def duration(self):
        """Largest breakpoint time over all lines (s)."""
        return max(float(t[-1]) for t, _ in self.lines.values())

    def value(self, line, t):
        """Evaluate one control line at time(s) ``t`` (linear interpolation)."""
        if line not in self.lines:
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        times, values = self.lines[line]
        return np.interp(t, times, values)

    def with_offset(self, line, delta):
        """Return a copy with a constant offset added to one line."""
        lines = {name: list(zip(t, v)) for name, (t, v) in self.lines.items()}
        if line in lines:
            lines[line] = [(t, v + delta) for t, v in lines[line]]
        else:
            lines[line] = [(0.0, delta)]
        return BiasSchedule(lines)

    def to_json(self):
        return json.dumps(
            [{"line": name, "points": [[t, v] for t, v in zip(times.tolist(), values.tolist())]}
             for name, (times, values) in self.lines.items()],
            indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"schedule is not valid JSON: {exc}") from exc
        if not isinstance(raw, list):
            raise ConfigError("schedule JSON must be a list of line objects")
        lines = {}
        for entry in raw:
            try:
                lines[entry["line"]] = entry["points"]
            except (TypeError, KeyError) as exc:
                raise ConfigError("schedule entries need 'line' and 'points'") from exc
        return cls(lines)


def eval_schedule(schedule, t):
    """Evaluate every control line of ``schedule`` at time ``t`` -> FluxBias."""
    return FluxBias(**{name: float(schedule.value(name, t)) for name in CONTROL_LINES})


def load_device(config_text):
    """Parse a JSON device config into a validated DeviceParams.

    Raises ConfigError on malformed JSON, missing required fields, unknown
    keys, or invariant violations (each message names the offending field).
    """
    try:
        raw = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"device config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("device config must be a JSON object")

    kwargs = {}
    for name, (section, required) in _SCHEMA.items():
        sec = raw.get(section, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"section {section!r} must be a JSON object")
        if name in sec:
            value = sec[name]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"field {name} must be a number")
            kwargs[name] = float(value)
        elif required:
            raise ConfigError(f"missing field {name}")

    known = {section: set() for section, _ in _SCHEMA.values()}
    for name, (section, _) in _SCHEMA.items():
        known[section].add(name)
    for section, sec in raw.items():
        if section not in known:
            raise ConfigError(f"unknown section {section!r}")
        extra = set(sec) - known[section]
        if extra:
            raise ConfigError(f"unknown field {sorted(extra)[0]} in section {section!r}")

    return DeviceParams(**kwargs)


def serialize_device(p):
    """Serialize DeviceParams to config JSON; load_device inverts bit-exactly."""
    out = {"qubit": {}, "qfp": {}, "resonator": {}, "calibration": {}}
    for name, (section, _) in _SCHEMA.items():
        value = getattr(p, name)
        if value is not None:
            out[section][name] = value
    return json.dumps(out, indent=2)


def device_dict(p):
    """DeviceParams as a plain dict (including the fixed phi0 constant)."""
    return {f.name: getattr(p, f.name) for f in fields(p)}


def default_device():
    """The packaged device: extracted values preferred over designed ones."""
    text = resources.files("fluxchain.data").joinpath("device_default.json").read_text()
    return load_device(text)


def default_schedule_json():
    """The packaged anneal-and-latch control sequence (JSON text)."""
    return resources.files("fluxchain.data").joinpath("schedule_default.json").read_text()
