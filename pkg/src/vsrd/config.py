"""Strict INI-style configuration parsing.

Unknown sections or keys are hard errors (no silent typos); every error names
the offending key and line.  Initial data accepts either a constant or a path
to a file with one nodal value per line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .assembly import ModelParams
from .errors import ConfigError
from .transient import DEFAULT_TOLERANCE, InitialData, MeshSpec, SimConfig

_SCHEMA = {
    "mesh": {"n_base": int, "refine_levels": int, "corner_grading": float},
    "params": {"alpha": float, "beta": float, "gamma": float, "lambda": float,
               "sigma": float, "xi": float, "d_L": float, "d_P": float,
               "d_l": float, "d_p": float, "chi_smoothing": float},
    "time": {"dt": float, "t_end": float, "record_every": int},
    "initial": {"L0": "initial", "P0": "initial", "l0": "initial", "p0": "initial"},
    "solver": {"tolerance": float, "lumped_mass": bool},
}

_REQUIRED = {
    "params": ("alpha", "beta", "gamma", "lambda", "sigma", "xi", "d_L", "d_P",
               "d_l", "d_p"),
    "time": ("dt", "t_end"),
}

# rates that must be strictly positive in a run configuration
_POSITIVE = {"alpha", "beta", "gamma", "lambda", "sigma", "xi", "d_L", "d_P"}
_NONNEGATIVE = {"d_l", "d_p"}


def _parse_scalar(kind, raw: str, key: str, line_no: int):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"line {line_no}: value for key '{key}' is not a valid "
            f"{kind.__name__}: {raw!r}") from None


def read_config_text(text: str, source: str = "<config>") -> dict:
    """Parse INI text into {section: {key: (value, line_no)}} with strict keys."""
    data: dict[str, dict] = {}
    section = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"{source} line {line_no}: unknown section [{section}]")
            data.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {line_no}: expected key=value, got {line!r}")
        if section is None:
            raise ConfigError(f"{source} line {line_no}: key outside any [section]")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"{source} line {line_no}: unknown key '{key}' in section [{section}]")
        if key in data[section]:
            raise ConfigError(f"{source} line {line_no}: duplicate key '{key}'")
        data[section][key] = (raw, line_no)
    return data


def _initial_value(raw: str, key: str, line_no: int, base_dir: Path):
    try:
        return float(raw)
    except ValueError:
        pass
    path = Path(raw)
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(
            f"line {line_no}: initial data for '{key}' is neither a number nor "
            f"an existing file: {raw!r}")
    try:
        return np.loadtxt(path, dtype=float).ravel()
    except Exception as exc:
        raise ConfigError(f"line {line_no}: could not read nodal data {path}: {exc}")


def config_from_dict(data: dict, base_dir: Path = Path(".")) -> SimConfig:
    """Validate a parsed key table and build a run configuration."""
    values: dict[str, dict] = {}
    for section, keys in data.items():
        values[section] = {}
        for key, (raw, line_no) in keys.items():
            kind = _SCHEMA[section][key]
            if kind == "initial":
                values[section][key] = _initial_value(raw, key, line_no, base_dir)
            else:
                v = _parse_scalar(kind, raw, key, line_no)
                if key in _POSITIVE and not v > 0.0:
                    raise ConfigError(
                        f"line {line_no}: rate '{key}' must be positive, got {v}")
                if key in _NONNEGATIVE and v < 0.0:
                    raise ConfigError(
                        f"line {line_no}: diffusion '{key}' must be >= 0, got {v}")
                values[section][key] = v

    for section, required in _REQUIRED.items():
        present = values.get(section, {})
        for key in required:
            if key not in present:
                raise ConfigError(f"missing required key '{key}' in section [{section}]")

    p = values["params"]
    # placeholder for a mollified arc indicator; only the sharp indicator is
    # implemented, so any nonzero smoothing width is rejected up front
    if p.get("chi_smoothing", 0.0) != 0.0:
        raise ConfigError(
            "params.chi_smoothing: smoothed arc indicator is not implemented; "
            "only chi_smoothing = 0 (sharp indicator) is supported")
    params = ModelParams(alpha=p["alpha"], beta=p["beta"], gamma=p["gamma"],
                         lam=p["lambda"], sigma=p["sigma"], xi=p["xi"],
                         d_L=p["d_L"], d_P=p["d_P"], d_l=p["d_l"], d_p=p["d_p"])
    meshd = values.get("mesh", {})
    mesh = MeshSpec(n_base=meshd.get("n_base", 112),
                    refine_levels=meshd.get("refine_levels", 1),
                    corner_grading=meshd.get("corner_grading", 0.25))
    initd = values.get("initial", {})
    initial = InitialData(L0=initd.get("L0", 0.8), P0=initd.get("P0", 0.6),
                          l0=initd.get("l0", 0.3), p0=initd.get("p0", 0.4))
    solver = values.get("solver", {})
    timed = values["time"]
    try:
        return SimConfig(params=params, dt=timed["dt"], t_end=timed["t_end"],
                         initial=initial,
                         record_every=timed.get("record_every", 100),
                         mesh=mesh,
                         tolerance=solver.get("tolerance", DEFAULT_TOLERANCE),
                         lumped_mass=solver.get("lumped_mass", False))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> SimConfig:
    """Load and validate a run configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    data = read_config_text(text, source=str(path))
    return config_from_dict(data, base_dir=path.parent)


def apply_overrides(data: dict, overrides) -> dict:
    """Apply --set section.key=value pairs onto a parsed key table."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        target, raw = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, key = target.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"override names unknown key '{section}.{key}'")
        data.setdefault(section, {})[key] = (raw, 0)
    return data


def config_to_dict(config: SimConfig) -> dict:
    """Plain-data view of a configuration for manifests."""
    def _init(v):
        return float(v) if np.ndim(v) == 0 else "<nodal data>"
    return {
        "mesh": {"n_base": config.mesh.n_base,
                 "refine_levels": config.mesh.refine_levels,
                 "corner_grading": config.mesh.corner_grading},
        "params": {"alpha": config.params.alpha, "beta": config.params.beta,
                   "gamma": config.params.gamma, "lambda": config.params.lam,
                   "sigma": config.params.sigma, "xi": config.params.xi,
                   "d_L": config.params.d_L, "d_P": config.params.d_P,
                   "d_l": config.params.d_l, "d_p": config.params.d_p},
        "time": {"dt": config.dt, "t_end": config.t_end,
                 "record_every": config.record_every},
        "initial": {"L0": _init(config.initial.L0), "P0": _init(config.initial.P0),
                    "l0": _init(config.initial.l0), "p0": _init(config.initial.p0)},
        "solver": {"tolerance": config.tolerance, "lumped_mass": config.lumped_mass},
    }
