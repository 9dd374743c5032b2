"""Experiment configuration: one TOML document per run.

Numbers carry explicit unit suffixes ("10 cm", "133.33 MHz", "4 us");
frequencies are plain Hz at this boundary and are converted to angular
units when the library objects are built.  Unknown keys anywhere in the
document are rejected, as are unit strings of the wrong dimension.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy.constants import c

from . import atoms, pumping
from .atoms import TWO_PI, D1
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_UNIT_SCALES = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9,
             "ps": 1e-12},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6,
               "nm": 1e-9},
    "velocity": {"m/s": 1.0},
}


def parse_quantity(text, dimension, key=""):
    """Parse "value unit" into SI float for the given dimension."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        raise ConfigError(
            f"{key}: bare number {text!r}; give an explicit unit "
            f"({'/'.join(_UNIT_SCALES[dimension])})"
            if dimension != "temperature" else f"{key}: give 'K' or 'C'"
        )
    if not isinstance(text, str):
        raise ConfigError(f"{key}: expected a quantity string, got {text!r}")
    parts = text.split()
    if len(parts) != 2:
        raise ConfigError(f"{key}: malformed quantity {text!r}")
    value_s, unit = parts
    try:
        value = float(value_s)
    except ValueError:
        raise ConfigError(f"{key}: bad number in {text!r}") from None
    if dimension == "temperature":
        if unit == "K":
            return value
        if unit == "C":
            return value + 273.15
        raise ConfigError(f"{key}: temperature unit must be K or C, got {unit!r}")
    scales = _UNIT_SCALES.get(dimension)
    if scales is None or unit not in scales:
        allowed = "/".join(scales) if scales else "?"
        raise ConfigError(f"{key}: unit {unit!r} is not a {dimension} ({allowed})")
    return value * scales[unit]


# --- schema ----------------------------------------------------------------
# leaf validators: (kind, required_type) where kind names a parser


def _q(dimension):
    return ("quantity", dimension)

_SCHEMA = {
    "experiment": {"name": ("str",), "seed": ("int",)},
    "cell": {
        "length": _q("length"),
        "temperature": _q("temperature"),
        "density": ("float",),            # 1/m^3; omit for vapour pressure
    },
    "comb": {
        "pair": ("int_list",),
        "divisor": ("int",),
        "classes": ("int_list",),
        "center_velocity": _q("velocity"),
    },
    "pump": {
        "power": _q("power"),
        "beam_radius": _q("length"),
        "linewidth": _q("frequency"),
        "duration": _q("time"),
    },
    "pump_back": {
        "power": _q("power"),
        "beam_radius": _q("length"),
        "linewidth": _q("frequency"),
        "duration": _q("time"),
        "rf": ("rf",),                    # "auto" or a frequency quantity
        "sideband_sigma": ("float",),
        "sideband_alpha": ("float",),
        "detuning": _q("frequency"),
    },
    "preparation": {
        "ideal_pump": ("bool",),
        "concurrent": ("bool",),
    },
    "velocity_grid": {
        "sigmas": ("float",),
        "points": ("int",),
    },
    "probe": {"span": _q("frequency"), "points": ("int",)},
    "pulse": {
        "bandwidth": _q("frequency"),
        "detuning": _q("frequency"),
        "window": _q("time"),
        "time_step": _q("time"),
        "points": ("int",),
        "max_order": ("int",),
        "reference_amplitude": ("float",),
        "second": {
            "delay": _q("time"),
            "bandwidth": _q("frequency"),
            "window": _q("time"),
        },
    },
    "scan": {
        "start": _q("frequency"),
        "stop": _q("frequency"),
        "steps": ("int",),
        "reference_amplitude": ("float",),
        "fit": ("bool",),
    },
    "metrics": {"input": ("str",)},
    "fit": {
        "mode": ("str",),                 # thermal | afc
        "measured": ("str",),
        "n_starts": ("int",),
        "velocity_window": ("float",),
        "velocity_resolution": ("float",),
        "free": ("free_params",),
        "fixed": ("fixed_params",),
    },
}

_FIT_PARAM_DIMENSIONS = {
    "class_velocity": "velocity",
    "velocity_spacing": "velocity",
    "power": "power",
    "linewidth": "frequency",
    "duration": "time",
    "sideband_sigma": None,
    "sideband_alpha": None,
    "residual_fraction": None,
    "temperature": "temperature",
}


def _check_leaf(kind, value, path):
    k = kind[0]
    if k == "quantity":
        return parse_quantity(value, kind[1], path)
    if k == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string")
        return value
    if k == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected integer")
        return value
    if k == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number")
        return float(value)
    if k == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if k == "int_list":
        if (not isinstance(value, list) or not value
                or not all(isinstance(x, int) for x in value)):
            raise ConfigError(f"{path}: expected a list of integers")
        return value
    if k == "rf":
        if value == "auto":
            return value
        return parse_quantity(value, "frequency", path)
    if k == "free_params":
        return _check_fit_params(value, path, with_bounds=True)
    if k == "fixed_params":
        return _check_fit_params(value, path, with_bounds=False)
    raise AssertionError(f"unknown schema kind {k}")


def _parse_fit_value(name, value, path):
    dim = _FIT_PARAM_DIMENSIONS[name]
    if dim is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number")
        return float(value)
    return parse_quantity(value, dim, path)


def _check_fit_params(table, path, with_bounds):
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: expected a table")
    out = {}
    for name, spec in table.items():
        if name not in _FIT_PARAM_DIMENSIONS:
            raise ConfigError(f"{path}.{name}: unknown fit parameter")
        if with_bounds:
            if not isinstance(spec, dict) or set(spec) - {"bounds", "start"}:
                raise ConfigError(
                    f"{path}.{name}: expected 'bounds' (and optional 'start')")
            bounds = spec.get("bounds")
            if not isinstance(bounds, list) or len(bounds) != 2:
                raise ConfigError(f"{path}.{name}.bounds: expected [low, high]")
            lo = _parse_fit_value(name, bounds[0], f"{path}.{name}.bounds")
            hi = _parse_fit_value(name, bounds[1], f"{path}.{name}.bounds")
            entry = {"bounds": (lo, hi)}
            if "start" in spec:
                entry["start"] = _parse_fit_value(name, spec["start"],
                                                  f"{path}.{name}.start")
            out[name] = entry
        else:
            out[name] = _parse_fit_value(name, spec, f"{path}.{name}")
    return out


def _validate(table, schema, path=""):
    out = {}
    for key, value in table.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {here!r}")
        spec = schema[key]
        if isinstance(spec, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a table")
            out[key] = _validate(value, spec, here)
        else:
            out[key] = _check_leaf(spec, value, here)
    return out


class ExperimentConfig:
    """Validated experiment description with library-object builders."""

    def __init__(self, parsed, raw_text="", base_dir=None):
        self.data = parsed
        self.raw_text = raw_text
        self.base_dir = Path(base_dir) if base_dir is not None else Path(".")
        self.scheme = atoms.rb87_level_scheme()

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path, "rb") as fh:
            raw = fh.read()
        try:
            parsed = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls(_validate(parsed, _SCHEMA), raw_text=raw.decode("utf-8"),
                   base_dir=path.resolve().parent)

    def get(self, *keys, default=None):
        node = self.data
        for key in keys:
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    def require(self, *keys):
        value = self.get(*keys)
        if value is None:
            raise ConfigError(f"missing required key {'.'.join(keys)!r}")
        return value

    # --- builders ---------------------------------------------------------

    @property
    def seed(self):
        return self.get("experiment", "seed", default=0)

    @property
    def temperature(self):
        return self.require("cell", "temperature")

    @property
    def cell_length(self):
        return self.require("cell", "length")

    def comb_design(self):
        pair = tuple(self.get("comb", "pair", default=[2, 3]))
        divisor = self.get("comb", "divisor", default=1)
        classes = self.get("comb", "classes", default=[-1, 0, 1])
        center = self.get("comb", "center_velocity", default=0.0)
        return atoms.design_comb(self.scheme, pair, divisor,
                                 sideband_indices=tuple(classes),
                                 center_velocity=center)

    def velocity_grid(self):
        if self.get("velocity_grid") is None:
            return None
        return pumping.velocity_grid(
            self.scheme, self.temperature,
            sigmas=self.get("velocity_grid", "sigmas", default=4.0),
            points=self.get("velocity_grid", "points", default=801),
        )

    def pump_mode(self):
        if self.get("pump") is None:
            return None, 0.0
        t = atoms.transition(self.scheme, D1, 2, 2)
        mode = pumping.OpticalMode(
            center_frequency=t.resonant_frequency,
            power=self.require("pump", "power"),
            beam_radius=self.require("pump", "beam_radius"),
            linewidth=TWO_PI * self.require("pump", "linewidth"),
            role="pump",
        )
        return mode, self.require("pump", "duration")

    def pump_back_mode(self, design):
        if self.get("pump_back") is None:
            return None, 0.0
        t = atoms.transition(self.scheme, D1, 1, 2)
        classes = self.get("comb", "classes", default=[-1, 0, 1])
        rf_conf = self.get("pump_back", "rf", default="auto")
        if rf_conf == "auto":
            rf = pumping.pump_back_rf(self.scheme, design)
        else:
            rf = TWO_PI * rf_conf
        sidebands = None
        if len(classes) > 1:
            sidebands = pumping.SidebandSpec(
                rf_frequency=rf,
                index_range=(min(classes), max(classes)),
                width_sigma=self.get("pump_back", "sideband_sigma", default=100.0),
                skew_alpha=self.get("pump_back", "sideband_alpha", default=0.0),
            )
        center_velocity = self.get("comb", "center_velocity", default=0.0)
        detuning = self.get("pump_back", "detuning", default=0.0)
        mode = pumping.OpticalMode(
            center_frequency=t.resonant_frequency * (1 + center_velocity / c)
            + TWO_PI * detuning,
            power=self.require("pump_back", "power"),
            beam_radius=self.require("pump_back", "beam_radius"),
            linewidth=TWO_PI * self.require("pump_back", "linewidth"),
            role="pump_back",
            sidebands=sidebands,
        )
        return mode, self.require("pump_back", "duration")

    def schedule(self, pump_duration, pump_back_duration):
        return pumping.PumpSchedule(
            pump_duration=pump_duration,
            pump_back_duration=pump_back_duration,
            ideal_pump=self.get("preparation", "ideal_pump", default=True),
            concurrent=self.get("preparation", "concurrent", default=False),
        )

    def prepared_state(self):
        """Run the configured preparation; thermal state if no pump-back."""
        grid = self.velocity_grid()
        if self.get("pump_back") is None:
            return pumping.thermal_state(
                self.scheme, self.temperature, grid=grid,
                total_density=self.get("cell", "density"),
            )
        design = self.comb_design()
        pump, pump_dur = self.pump_mode()
        back, back_dur = self.pump_back_mode(design)
        schedule = self.schedule(pump_dur, back_dur)
        return pumping.prepare_afc(
            self.scheme, design, pump, back, schedule,
            temperature=self.temperature, grid=grid,
            total_density=self.get("cell", "density"),
        )

    def probe_grid(self):
        span = TWO_PI * self.get("probe", "span", default=3.0e9)
        points = self.get("probe", "points", default=2**14)
        return np.linspace(-span / 2, span / 2, points)
