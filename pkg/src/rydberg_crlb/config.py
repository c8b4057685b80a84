"""Experiment configuration: sectioned key/value text files with a full echo."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .quantum_model import MHZ, AtomicSystem, preset

SCHEMES = ("IDD", "ISD", "UE", "ME", "5-PF")
STRATEGIES = ("uniform", "maxslope", "explicit")

# system overrides given in MHz (angular quantities are multiplied by 2 pi)
_RATE_KEYS = ("omega_p", "omega_c", "gamma2", "gamma3", "gamma4")


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        # start:stop:step, stop inclusive
        a, b, s = (float(t) for t in text.split(":"))
        n = int(round((b - a) / s)) + 1
        return tuple(float(v) for v in np.round(a + s * np.arange(n), 12))
    return tuple(float(t) for t in text.replace(",", " ").split())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(t) for t in v)
    return str(v)


@dataclass
class ExperimentConfig:
    """Everything needed to replay a campaign.

    Field strengths are Omega_RF/2pi in MHz and probe detunings are in MHz. The
    sample budget ``n_total`` is split as ``n_periods`` x (n_total / n_periods)
    for ISD and as 2 x ``n_freq`` x (n_total / (2 n_freq)) for the splitting schemes.
    """

    preset: str = "rb85_effective"
    overrides: dict = field(default_factory=dict)
    schemes: tuple = SCHEMES
    signals: tuple = (15.0,)
    noises: tuple = (0.01,)
    n_total: int = 20
    n_periods: int = 2
    n_freq: int = 10
    strategy: str = "uniform"
    span: float = 10.0
    explicit_offsets: tuple = ()
    family: str = "template"
    isd_phase: float = 0.3
    x_lo: float | None = None
    trials: int = 10000
    seed: int = 0
    x_step: float = 0.1
    x_max: float = 25.0
    f_span: float = 30.0
    f_step: float = 0.05
    velocity_points: int = 129
    out: str = "out"

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.signals = tuple(float(s) for s in self.signals)
        self.noises = tuple(float(s) for s in self.noises)
        self.explicit_offsets = tuple(float(s) for s in self.explicit_offsets)
        self.validate()

    def validate(self) -> None:
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"unknown or empty scheme list: {bad or self.schemes}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate schemes")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.signals or not self.noises:
            raise ConfigError("signal and noise grids must be non-empty")
        if any(s < 0 for s in self.signals) or any(not np.isfinite(s) or s < 0 for s in self.noises):
            raise ConfigError("signals and noise levels must be non-negative")
        if self.n_total < 1:
            raise ConfigError("n_total must be >= 1")
        if "ISD" in self.schemes:
            if self.n_periods < 1 or self.n_total % self.n_periods:
                raise ConfigError(f"n_total={self.n_total} is not n_periods x samples-per-period")
            if self.n_total // self.n_periods < 4:
                raise ConfigError("ISD needs at least 4 samples per period")
        if {"UE", "ME", "5-PF"} & set(self.schemes):
            if self.n_freq < 1 or self.n_total % (2 * self.n_freq):
                raise ConfigError(f"n_total={self.n_total} is not 2 x n_freq x averages")
            if self.strategy == "explicit" and len(self.explicit_offsets) != self.n_freq:
                raise ConfigError("explicit_offsets must list n_freq offsets")
        if self.family not in ("template", "template-width", "gaussian"):
            raise ConfigError(f"unknown family {self.family!r}")
        for k in self.overrides:
            if k not in _RATE_KEYS + ("doppler_enabled",):
                raise ConfigError(f"unsupported system override {k!r}")

    @property
    def n_avg(self) -> int:
        """Readouts averaged per scan frequency."""
        return self.n_total // (2 * self.n_freq)

    @property
    def per_period(self) -> int:
        return self.n_total // self.n_periods

    def system(self) -> AtomicSystem:
        try:
            base = preset(self.preset)
        except KeyError as e:
            raise ConfigError(str(e)) from None
        ch = {}
        for k, v in self.overrides.items():
            ch[k] = bool(v) if k == "doppler_enabled" else float(v) * MHZ
        return base.replace(**ch) if ch else base

    def x_grid(self) -> np.ndarray:
        n = int(round(self.x_max / self.x_step)) + 1
        return np.round(self.x_step * np.arange(n), 12)

    def f_grid(self) -> np.ndarray:
        n = int(round(2 * self.f_span / self.f_step)) + 1
        return np.round(-self.f_span + self.f_step * np.arange(n), 12)

    def replace(self, **changes) -> "ExperimentConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw["overrides"] = dict(self.overrides)
        kw.update(changes)
        return ExperimentConfig(**kw)

    # ------------------------------------------------------------ text I/O

    def echo(self) -> str:
        """Fully resolved configuration in the same format ``load_config`` reads."""
        sysd = {k: self.overrides[k] for k in sorted(self.overrides)}
        sections = {
            "system": {"preset": self.preset, **sysd},
            "experiment": {"schemes": self.schemes, "signals": self.signals, "noises": self.noises,
                           "trials": self.trials, "seed": self.seed},
            "budget": {"n_total": self.n_total, "n_periods": self.n_periods, "n_freq": self.n_freq},
            "sampling": {"strategy": self.strategy, "span": self.span, "explicit_offsets": self.explicit_offsets},
            "estimator": {"family": self.family, "isd_phase": self.isd_phase,
                          "x_lo": "auto" if self.x_lo is None else self.x_lo},
            "surface": {"x_step": self.x_step, "x_max": self.x_max, "f_span": self.f_span,
                        "f_step": self.f_step, "velocity_points": self.velocity_points},
            "output": {"out": self.out},
        }
        lines = []
        for name, items in sections.items():
            lines.append(f"[{name}]")
            lines += [f"{k} = {_fmt(v)}" for k, v in items.items()]
            lines.append("")
        return "\n".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    """Build a config from sectioned key/value text; missing keys take defaults."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    kw: dict = {}
    overrides: dict = {}
    conv = {
        "schemes": lambda s: tuple(t.strip().upper() for t in s.replace(",", " ").split()),
        "signals": _floats, "noises": _floats, "explicit_offsets": _floats,
        "trials": int, "seed": int, "n_total": int, "n_periods": int, "n_freq": int, "velocity_points": int,
        "span": float, "isd_phase": float, "x_step": float, "x_max": float, "f_span": float, "f_step": float,
        "x_lo": lambda s: None if s.strip().lower() == "auto" else float(s),
        "strategy": lambda s: s.strip().lower().replace("max-slope", "maxslope"),
        "family": str.strip, "preset": str.strip, "out": str.strip,
    }
    known = {f.name for f in fields(ExperimentConfig)}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            if sec == "system" and k != "preset":
                overrides[k] = v.strip().lower() in ("1", "true", "yes", "on") if k == "doppler_enabled" else float(v)
                continue
            if k not in known or k == "overrides":
                raise ConfigError(f"unknown key {k!r} in section [{sec}]")
            try:
                kw[k] = conv[k](v)
            except (ValueError, KeyError) as e:
                raise ConfigError(f"bad value for {k!r}: {v!r} ({e})") from None
    try:
        return ExperimentConfig(overrides=overrides, **kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from None
    return parse_config(text)
