"""INI-style simulation configuration.

One ``key = value`` per line, grouped in sections::

    [run]
    mode = evolve            ; optional, must match the CLI mode if given

    [oscillator]
    dim = 40
    omega = 1.0
    hbar = 1.0

    [model]
    kappa = 0.1
    lambda = 0.2

    [state]
    kind = coherent          ; coherent | fock | thermal
    alpha = 1.0              ; complex literals such as 1+0.5j are accepted
    n = 0
    nbar = 0.0

    [time]
    t_final = 10.0
    dt = 0.001
    output_stride = 100

    [trajectories]
    n_traj = 1
    seed = 1234              ; mandatory for the trajectories mode
    n_jobs = 1

    [thermal]
    t_min = 0.1
    t_max = 10.0
    n_points = 50
    spacing = linear         ; linear | log
    kB = 1.0

    [output]
    path = out.csv

Every section is optional; missing keys take the defaults below.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field

MODES = ("evolve", "moments", "trajectories", "steady-state", "thermal-scan", "verify")
STATE_KINDS = ("coherent", "fock", "thermal")

_SCHEMA = {
    "run": {"mode": str},
    "oscillator": {"dim": int, "omega": float, "hbar": float},
    "model": {"kappa": float, "lambda": float},
    "state": {"kind": str, "alpha": complex, "n": int, "nbar": float},
    "time": {"t_final": float, "dt": float, "output_stride": int},
    "trajectories": {"n_traj": int, "seed": int, "n_jobs": int},
    "thermal": {"t_min": float, "t_max": float, "n_points": int, "spacing": str, "kB": float},
    "output": {"path": str},
}

# config key -> SimConfig attribute
_ATTR = {("model", "lambda"): "lam", ("state", "kind"): "state_kind"}


class ConfigError(ValueError):
    """Parse or validation failure; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class SimConfig:
    mode: str = "evolve"
    dim: int = 40
    omega: float = 1.0
    hbar: float = 1.0
    kappa: float = 0.1
    lam: float = 0.2
    state_kind: str = "coherent"
    alpha: complex = 1.0 + 0j
    n: int = 0
    nbar: float = 0.0
    t_final: float = 10.0
    dt: float = 1e-3
    output_stride: int = 100
    n_traj: int = 1
    seed: int | None = None
    n_jobs: int = 1
    t_min: float = 0.1
    t_max: float = 10.0
    n_points: int = 50
    spacing: str = "linear"
    kB: float = 1.0
    path: str | None = None
    explicit: set = field(default_factory=set, repr=False, compare=False)

    def resolved(self):
        """Plain-dict view for the run manifest."""
        d = asdict(self)
        d.pop("explicit")
        d["alpha"] = [self.alpha.real, self.alpha.imag]
        return d


def _convert(raw, typ):
    raw = raw.strip()
    if typ is int:
        f = float(raw)
        if not f.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(f)
    if typ is complex:
        return complex(raw.replace(" ", ""))
    if typ is float:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return v
    return raw


def parse_config(text, mode=None, overrides=None):
    """Parse and validate configuration text; raises :class:`ConfigError` listing all problems.

    ``overrides`` maps :class:`SimConfig` attributes to values applied
    before validation (used for command-line flags such as ``--seed``).
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        raise ConfigError([f"parse error at line {ln}: {line.strip()!r}"
                           for ln, line in exc.errors]) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError([f"parse error at line {exc.lineno}: {exc.message}"]) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError([f"parse error at line {exc.lineno}: missing section header"]) from None

    cfg = SimConfig()
    errors = []
    for section in cp.sections():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in cp.items(section):
            typ = _SCHEMA[section].get(key)
            if typ is None:
                errors.append(f"unknown key {section}.{key}")
                continue
            try:
                value = _convert(raw, typ)
            except ValueError as exc:
                errors.append(f"{key}: {exc}")
                continue
            attr = _ATTR.get((section, key), key)
            setattr(cfg, attr, value)
            cfg.explicit.add(attr)

    if mode is not None:
        if "mode" in cfg.explicit and cfg.mode != mode:
            errors.append(f"mode: config says {cfg.mode!r} but {mode!r} was requested")
        cfg.mode = mode
    for attr, value in (overrides or {}).items():
        setattr(cfg, attr, value)
        cfg.explicit.add(attr)
    errors.extend(validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def validate(cfg):
    """Return the list of validation errors for ``cfg`` (empty if valid)."""
    errs = []

    def need(cond, name, msg):
        if not cond:
            errs.append(f"{name}: {msg}")

    need(cfg.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
    need(cfg.dim >= 2, "dim", "must be >= 2")
    need(cfg.dim * cfg.dim <= 4096 or cfg.mode != "steady-state", "dim",
         "steady-state mode requires dim <= 64")
    need(cfg.omega > 0, "omega", "must be positive")
    need(cfg.hbar > 0, "hbar", "must be positive")
    need(cfg.kappa > 0, "kappa", "must be positive")
    need(cfg.lam >= 0, "lambda", "must be >= 0")
    need(cfg.state_kind in STATE_KINDS, "kind", f"must be one of {', '.join(STATE_KINDS)}")
    need(0 <= cfg.n < cfg.dim, "n", "Fock index must satisfy 0 <= n < dim")
    need(cfg.nbar >= 0, "nbar", "must be >= 0")
    need(cfg.t_final >= 0, "t_final", "must be >= 0")
    need(cfg.dt > 0, "dt", "must be positive")
    if cfg.dt > 0 and cfg.t_final >= 0:
        steps = cfg.t_final / cfg.dt
        need(abs(steps - round(steps)) <= 1e-9 * max(1.0, steps), "t_final",
             "must be an integer multiple of dt")
    need(cfg.output_stride >= 1, "output_stride", "must be >= 1")
    need(cfg.n_traj >= 1, "n_traj", "must be >= 1")
    need(cfg.n_jobs >= 1, "n_jobs", "must be >= 1")
    if cfg.mode == "trajectories":
        need(cfg.seed is not None, "seed", "is mandatory for the trajectories mode")
    need(cfg.t_min > 0, "t_min", "must be positive")
    need(cfg.t_max >= cfg.t_min, "t_max", "must be >= t_min")
    need(cfg.n_points >= 2, "n_points", "must be >= 2")
    need(cfg.spacing in ("linear", "log"), "spacing", "must be linear or log")
    need(cfg.kB > 0, "kB", "must be positive")
    return errs
