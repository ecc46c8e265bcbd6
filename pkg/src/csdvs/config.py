"""Simulation parameters and the ``key = value`` config-file format."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path

from csdvs.errors import ConfigError

MODES = ("dvs", "csdvs", "both")
RESET_MODES = ("ladder", "snapshot")
THREADS_ENV = "CSDVS_THREADS"


@dataclass
class SimConfig:
    """All model parameters of one simulation run.

    Defaults are theta = 0.2 +/- 0.02 log units, a 100 Hz photoreceptor and
    a 10 px quasi-static surround.  ``tau_us = 2000`` gives the 2 ms
    transient surround instead; ``pr_cutoff_hz = 0`` bypasses the
    photoreceptor filter.
    """

    mode: str = "both"
    L: float = 10.0
    tau_us: float = 0.0
    theta: float = 0.2
    theta_sigma: float = 0.02
    pr_cutoff_hz: float = 100.0
    seed: int = 0
    solver_tol: float = 1e-8
    reset_mode: str = "ladder"
    input: str | None = None
    fps: float | None = None
    output: str | None = None
    event_format: str = "csv"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.reset_mode not in RESET_MODES:
            raise ConfigError(f"reset_mode must be one of {RESET_MODES}, got {self.reset_mode!r}")
        if self.event_format not in ("csv", "bin"):
            raise ConfigError(f"event_format must be csv or bin, got {self.event_format!r}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ConfigError(f"L must be positive, got {self.L}")
        if not self.tau_us >= 0:
            raise ConfigError(f"tau_us must be >= 0, got {self.tau_us}")
        if not self.theta > 0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if not self.theta_sigma >= 0:
            raise ConfigError(f"theta_sigma must be >= 0, got {self.theta_sigma}")
        if not (self.pr_cutoff_hz >= 0 and math.isfinite(self.pr_cutoff_hz)):
            raise ConfigError(f"pr_cutoff_hz must be >= 0 and finite, got {self.pr_cutoff_hz}")
        if not self.solver_tol > 0:
            raise ConfigError(f"solver_tol must be positive, got {self.solver_tol}")
        if self.fps is not None and not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must fit in u64, got {self.seed}")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(known[key], raw)
        return cls(**kwargs)


_FLOAT_KEYS = {"L", "tau_us", "theta", "theta_sigma", "pr_cutoff_hz", "solver_tol", "fps"}


def _coerce(f, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if f.name in _FLOAT_KEYS:
        if raw.lower() in ("", "none") and f.name == "fps":
            return None
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{f.name}: expected a number, got {raw!r}") from None
    if f.name == "seed":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"seed: expected an integer, got {raw!r}") from None
    if f.name in ("input", "output") and raw.lower() in ("", "none"):
        return None
    return raw


def parse_config_text(text, origin="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def load_config_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, str(path))


def format_config(cfg: SimConfig):
    """Inverse of :func:`parse_config_text` for a full config."""
    lines = []
    for key, value in cfg.to_dict().items():
        if value is None:
            value = "none"
        elif not isinstance(value, str):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def worker_count(default=1):
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {n}")
    return n
