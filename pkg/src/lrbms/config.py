"""Experiment configuration: an INI-style file with one section per concern,
validated as a whole (all errors collected, defaults resolved and echoed).
"""

import configparser
import difflib
import hashlib
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

__all__ = ["ExperimentConfig", "validate_config", "ConfigError"]


class ConfigError(ValueError):
    """Carries the full list of validation errors of one config file."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    # problem
    problem_type: str = "academic"
    domain: tuple = None  # defaults to the problem's own domain
    permeability_file: str = None
    permeability_layout: tuple = (100, 20)
    contrast: float = 1e3
    # grid
    coarse_dims: tuple = (1, 1)
    fine_per_coarse: tuple = (8, 8)
    ladder_levels: tuple = (0,)
    refine_coarse: bool = False
    # discretization
    k: int = 1
    sigma: float = None  # None -> 12 k^2
    theta_sym: int = 1
    # estimator
    mu: tuple = (1.0,)
    mu_bar: tuple = (1.0,)
    mu_hat: tuple = (1.0,)
    # reduction
    k_H: int = 1
    basis_variant: str = "tensor"
    delta_greedy: float = 1e-2
    n_greedy: int = 0
    training_set: tuple = ((0.1,), (1.0,))
    gs_tol: float = 1e-10
    bases_dir: str = None
    # online
    delta_online: float = None  # None -> calibration_factor * detailed ceiling
    calibration_factor: float = 1.1
    n_online: int = 10
    strategy: str = "uniform"
    theta_doerfler: float = 1.0 / 3.0
    n_age: int = 4
    theta_uniform: float = 10.0
    online_parameters: tuple = None  # None -> sample n_online_parameters
    n_online_parameters: int = 5
    seed: int = 0
    # output
    out_dir: str = "out"

    def resolved_text(self):
        """Deterministic echo of every resolved field, for manifests."""
        buf = io.StringIO()
        for f in sorted(fields(self), key=lambda f: f.name):
            buf.write(f"{f.name} = {getattr(self, f.name)!r}\n")
        return buf.getvalue()

    def digest(self):
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()[:16]


_SCHEMA = {
    "problem": {
        "type": ("problem_type", "str"),
        "domain": ("domain", "floats"),
        "permeability_file": ("permeability_file", "str"),
        "permeability_layout": ("permeability_layout", "ints"),
        "contrast": ("contrast", "float"),
    },
    "grid": {
        "coarse_dims": ("coarse_dims", "ints"),
        "fine_per_coarse": ("fine_per_coarse", "ints"),
        "ladder_levels": ("ladder_levels", "ints"),
        "refine_coarse": ("refine_coarse", "bool"),
    },
    "discretization": {
        "k": ("k", "int"),
        "sigma": ("sigma", "float_or_auto"),
        "theta_sym": ("theta_sym", "int"),
    },
    "estimator": {
        "mu": ("mu", "floats"),
        "mu_bar": ("mu_bar", "floats"),
        "mu_hat": ("mu_hat", "floats"),
    },
    "reduction": {
        "k_h": ("k_H", "int"),
        "basis": ("basis_variant", "str"),
        "delta_greedy": ("delta_greedy", "float_or_inf"),
        "n_greedy": ("n_greedy", "int"),
        "training_set": ("training_set", "params"),
        "gs_tol": ("gs_tol", "float"),
        "bases_dir": ("bases_dir", "str"),
    },
    "online": {
        "delta_online": ("delta_online", "float_or_auto"),
        "calibration_factor": ("calibration_factor", "float"),
        "n_online": ("n_online", "int"),
        "strategy": ("strategy", "str"),
        "theta_doerfler": ("theta_doerfler", "float"),
        "n_age": ("n_age", "int"),
        "theta_uniform": ("theta_uniform", "float"),
        "online_parameters": ("online_parameters", "params_or_auto"),
        "n_online_parameters": ("n_online_parameters", "int"),
        "seed": ("seed", "int"),
    },
    "output": {
        "directory": ("out_dir", "str"),
    },
}


def _convert(kind, raw):
    if kind == "str":
        return raw.strip()
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if raw.strip().lower() in ("true", "yes", "1", "on"):
            return True
        if raw.strip().lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "ints":
        return tuple(int(v) for v in raw.split())
    if kind == "floats":
        return tuple(float(v) for v in raw.split())
    if kind == "float_or_auto":
        return None if raw.strip().lower() == "auto" else float(raw)
    if kind == "float_or_inf":
        return float(raw)  # float() accepts "inf"
    if kind == "params":
        return tuple((float(v),) for v in raw.split())
    if kind == "params_or_auto":
        return None if raw.strip().lower() == "auto" else tuple((float(v),) for v in raw.split())
    raise AssertionError(kind)


def _check(cfg, errors, base_dir):
    if cfg.problem_type not in ("academic", "channel", "permeability_file"):
        errors.append(f"problem.type: unknown problem {cfg.problem_type!r} "
                      "(expected academic, channel or permeability_file)")
    if cfg.problem_type == "permeability_file":
        if not cfg.permeability_file:
            errors.append("problem.permeability_file: required for type permeability_file")
        elif not (base_dir / cfg.permeability_file).exists():
            errors.append(f"problem.permeability_file: no such file {cfg.permeability_file!r}")
    for name in ("coarse_dims", "fine_per_coarse"):
        v = getattr(cfg, name)
        if len(v) != 2 or any(c < 1 for c in v):
            errors.append(f"grid.{name}: need two positive counts, got {v}")
    if list(cfg.ladder_levels) != sorted(set(cfg.ladder_levels)) or any(l < 0 for l in cfg.ladder_levels):
        errors.append(f"grid.ladder_levels: must be strictly increasing and nonnegative, got {cfg.ladder_levels}")
    if cfg.k < 1:
        errors.append(f"discretization.k: polynomial order must be >= 1, got {cfg.k}")
    if cfg.sigma is not None and cfg.sigma < 1.0:
        errors.append(f"discretization.sigma: must be >= 1, got {cfg.sigma}")
    if cfg.theta_sym not in (-1, 0, 1):
        errors.append(f"discretization.theta_sym: must be -1, 0 or 1, got {cfg.theta_sym}")
    if cfg.basis_variant not in ("tensor", "simplicial"):
        errors.append(f"reduction.basis: unknown variant {cfg.basis_variant!r}")
    if cfg.k_H < 0:
        errors.append(f"reduction.k_h: must be nonnegative, got {cfg.k_H}")
    if cfg.n_greedy < 0:
        errors.append(f"reduction.n_greedy: must be nonnegative, got {cfg.n_greedy}")
    if cfg.delta_greedy < 0:
        errors.append(f"reduction.delta_greedy: must be nonnegative, got {cfg.delta_greedy}")
    if cfg.bases_dir and not (base_dir / cfg.bases_dir).exists():
        errors.append(f"reduction.bases_dir: no such directory {cfg.bases_dir!r}")
    if cfg.delta_online is not None and cfg.delta_online <= 0:
        errors.append(f"online.delta_online: must be positive (or auto), got {cfg.delta_online}")
    if cfg.n_online < 0:
        errors.append(f"online.n_online: must be nonnegative, got {cfg.n_online}")
    if cfg.strategy not in ("uniform", "doerfler_age", "uniform_doerfler_age"):
        errors.append(f"online.strategy: unknown strategy {cfg.strategy!r}")
    if not 0.0 < cfg.theta_doerfler <= 1.0:
        errors.append(f"online.theta_doerfler: must lie in (0, 1], got {cfg.theta_doerfler}")
    if cfg.theta_uniform <= 0:
        errors.append(f"online.theta_uniform: must be positive, got {cfg.theta_uniform}")
    if cfg.n_online_parameters < 1 and cfg.online_parameters is None:
        errors.append("online.n_online_parameters: must be positive when online_parameters is auto")


def validate_config(path):
    """Parse and validate a config file; returns the resolved ExperimentConfig.

    All problems (unknown keys with a suggestion, type mismatches, missing
    files, range violations) are collected and raised together as a
    ConfigError rather than failing at the first one.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    errors = []
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    except configparser.Error as exc:
        raise ConfigError([f"syntax error in {path}: {exc}"]) from exc

    cfg = ExperimentConfig()
    known_sections = set(_SCHEMA)
    for section in parser.sections():
        if section not in known_sections:
            hint = difflib.get_close_matches(section, known_sections, n=1, cutoff=0.5)
            suffix = f" (did you mean [{hint[0]}]?)" if hint else ""
            errors.append(f"unknown section [{section}]{suffix}")
            continue
        schema = _SCHEMA[section]
        for key, raw in parser[section].items():
            if key not in schema:
                hint = difflib.get_close_matches(key, schema, n=1, cutoff=0.5)
                suffix = f" (did you mean {hint[0]!r}?)" if hint else ""
                errors.append(f"unknown key {section}.{key}{suffix}")
                continue
            attr, kind = schema[key]
            try:
                setattr(cfg, attr, _convert(kind, raw))
            except ValueError as exc:
                errors.append(f"{section}.{key}: {exc}")

    _check(cfg, errors, path.parent)
    if errors:
        raise ConfigError(errors)
    return cfg
