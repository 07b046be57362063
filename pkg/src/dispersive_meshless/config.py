"""Experiment configuration: INI text in, validated frozen dataclass out.

Every key lives in a fixed section; unknown sections or keys are errors.
Lengths are in metres, times in seconds, frequencies in Hz and rates in rad/s.
Points are written ``x y`` and point lists ``x y; x y``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .constants import C0
from .errors import ConfigParseError, ConfigValidationError


def _point(text):
    parts = text.split()
    if len(parts) != 2:
        raise ValueError(f"expected 'x y', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _points(text):
    return tuple(_point(p) for p in text.split(";") if p.strip())


def _region(text):
    if text.strip().lower() in ("", "none"):
        return None
    parts = text.split()
    if len(parts) != 4:
        raise ValueError(f"expected 'x_min x_max y_min y_max' or 'none', got {text!r}")
    return tuple(float(p) for p in parts)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _auto_float(text):
    return None if text.strip().lower() in ("auto", "none") else float(text)


def _opt_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_fmt(v) for v in value)
        return " ".join(_fmt(v) for v in value)
    return str(value)


# (section, key) -> parser; dataclass field name is f"{section}_{key}" except where noted
_SCHEMA = {
    "cavity": {"width": float, "height": float, "spacing": float},
    "plasma": {"region": _region, "omega_ep": float, "gamma_e": float, "omega_mp": float, "gamma_m": float},
    "kernel": {"shape_parameter": float, "support_factor": float},
    "time": {"dt": _auto_float, "safety": float, "duration": float, "n_steps": _opt_int},
    "source": {"position": _point, "amplitude": float, "f0": float, "t0": float, "tau": float, "direction": _point},
    "solver": {"basis_mode": str, "probes": _points, "record_every": int, "hardwire_vacuum": _bool},
    "diagnostics": {
        "window": str,
        "zero_pad": int,
        "floor_db": float,
        "spurious_band": _floats,
        "spurious_floor_db": float,
        "charge_times": _floats,
        "charge_source": _point,
        "concentration_radius": float,
        "oracle": _bool,
        "oracle_band": _floats,
        "oracle_grid": int,
    },
    "output": {"directory": str},
}


@dataclass(frozen=True)
class ExperimentConfig:
    cavity_width: float = 5e-3
    cavity_height: float = 5e-3
    cavity_spacing: float = 0.5e-3
    plasma_region: tuple | None = (0.0, 2.5e-3, 0.0, 5e-3)
    plasma_omega_ep: float = 1e11
    plasma_gamma_e: float = 0.0
    plasma_omega_mp: float = 0.0
    plasma_gamma_m: float = 0.0
    kernel_shape_parameter: float = 3.0
    kernel_support_factor: float = 2.6
    time_dt: float | None = None
    time_safety: float = 0.1
    time_duration: float = 2e-9
    time_n_steps: int | None = None
    source_position: tuple = (3.5e-3, 2.5e-3)
    source_amplitude: float = 1.0
    source_f0: float = 100e9
    source_t0: float = 15e-12
    source_tau: float = 5e-12
    source_direction: tuple = (0.0, 1.0)
    solver_basis_mode: str = "vector"
    solver_probes: tuple = ((1.25e-3, 1.25e-3),)
    solver_record_every: int = 1
    solver_hardwire_vacuum: bool = False
    diagnostics_window: str = "hann"
    diagnostics_zero_pad: int = 4
    diagnostics_floor_db: float = -40.0
    diagnostics_spurious_band: tuple = (10e9, 60e9)
    diagnostics_spurious_floor_db: float = -30.0
    diagnostics_charge_times: tuple = (2e-12,)
    diagnostics_charge_source: tuple = (2.5e-3, 2.5e-3)
    diagnostics_concentration_radius: float = 2.0  # in units of the spacing
    diagnostics_oracle: bool = True
    diagnostics_oracle_band: tuple = (140e9, 175e9)
    diagnostics_oracle_grid: int = 128
    output_directory: str = "out"

    @property
    def plasma_present(self) -> bool:
        return self.plasma_region is not None and (self.plasma_omega_ep > 0 or self.plasma_omega_mp > 0)

    @property
    def dt(self) -> float:
        if self.time_dt is not None:
            return self.time_dt
        return self.time_safety * self.cavity_spacing / (C0 * np.sqrt(2.0))

    @property
    def n_steps(self) -> int:
        if self.time_n_steps is not None:
            return self.time_n_steps
        return int(round(self.time_duration / self.dt))


def _validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigValidationError(msg)

    need(cfg.cavity_width > 0 and cfg.cavity_height > 0, "cavity width and height must be positive")
    need(cfg.cavity_spacing > 0, "spacing must be positive")
    for k in ("width", "height"):
        n = getattr(cfg, f"cavity_{k}") / cfg.cavity_spacing
        need(abs(n - round(n)) <= 1e-9 * max(n, 1.0), f"spacing must tile the cavity {k}")
    if cfg.plasma_region is not None:
        x0, x1, y0, y1 = cfg.plasma_region
        need(x1 > x0 and y1 > y0, "plasma region must have positive area")
        need(x0 >= 0 and y0 >= 0 and x1 <= cfg.cavity_width and y1 <= cfg.cavity_height, "plasma region must lie inside the cavity")
    for k in ("omega_ep", "gamma_e", "omega_mp", "gamma_m"):
        need(getattr(cfg, f"plasma_{k}") >= 0, f"{k} must be non-negative")
    need(cfg.kernel_shape_parameter > 0, "shape_parameter must be positive")
    need(cfg.kernel_support_factor > 1, "support_factor must exceed 1")
    need(cfg.time_dt is None or cfg.time_dt > 0, "dt must be positive or auto")
    need(0 < cfg.time_safety <= 1, "safety must lie in (0, 1]")
    need(cfg.time_duration > 0, "duration must be positive")
    need(cfg.time_n_steps is None or cfg.time_n_steps >= 0, "n_steps must be non-negative")
    need(cfg.source_tau > 0, "tau must be positive")
    need(abs(np.hypot(*cfg.source_direction) - 1) <= 1e-12, "source direction must be a unit vector")
    inside = lambda p: 0 <= p[0] <= cfg.cavity_width and 0 <= p[1] <= cfg.cavity_height
    need(inside(cfg.source_position), "source position must lie inside the cavity")
    need(inside(cfg.diagnostics_charge_source), "charge source must lie inside the cavity")
    need(cfg.solver_basis_mode in ("vector", "scalar"), "basis_mode must be vector or scalar")
    need(len(cfg.solver_probes) > 0, "at least one probe is required")
    need(all(inside(p) for p in cfg.solver_probes), "probes must lie inside the cavity")
    need(cfg.solver_record_every >= 1, "record_every must be at least 1")
    need(cfg.diagnostics_window in ("hann", "none"), "window must be hann or none")
    need(cfg.diagnostics_zero_pad >= 1, "zero_pad must be at least 1")
    need(
        len(cfg.diagnostics_spurious_band) == 2 and 0 <= cfg.diagnostics_spurious_band[0] < cfg.diagnostics_spurious_band[1],
        "spurious_band must be 'f_min f_max' with f_min < f_max",
    )
    need(all(t > 0 for t in cfg.diagnostics_charge_times), "charge times must be positive")
    need(cfg.diagnostics_concentration_radius > 0, "concentration_radius must be positive")
    need(
        len(cfg.diagnostics_oracle_band) == 2 and 0 < cfg.diagnostics_oracle_band[0] < cfg.diagnostics_oracle_band[1],
        "oracle_band must be 'f_lo f_hi' with 0 < f_lo < f_hi",
    )
    need(cfg.diagnostics_oracle_grid >= 64, "oracle_grid must be at least 64")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate INI text; missing keys take the dataclass defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(str(exc)) from exc
    values = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigValidationError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigValidationError(f"unknown key {key!r} in [{section}]")
            try:
                values[f"{section}_{key}"] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigParseError(f"[{section}] {key}: {exc}") from exc
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_fmt(getattr(cfg, f'{section}_{key}'))}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def bundled_config(name: str = "table1.cfg") -> ExperimentConfig:
    return parse_config(resources.files(__package__).joinpath("configs", name).read_text())


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    new = dataclasses.replace(cfg, **changes)
    _validate(new)
    return new
