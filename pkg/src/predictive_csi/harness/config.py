"""Experiment configuration: dataclass, flat dotted-key file format, presets.

File format, one assignment per line::

    # comments start with '#'
    trials = 200
    channel.mode = gauss_markov
    sweep.axis = bits
    sweep.bits = 1..10          # inclusive integer range
    sweep.tau = 0.1, 0.5        # comma-separated list
    session.lossless_init = false

Values are parsed as int, float, bool (``true``/``false``), an inclusive
integer range ``a..b``, a comma-separated list of those, or a bare string.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass

from ..errors import ConfigError
from ..quantizer import MAX_BITS, MIN_BITS

__all__ = ["ExperimentConfig", "parse_config_text", "load_config", "preset", "PRESETS", "KEYS"]

METHODS = ("conventional", "proposed")


@dataclass(frozen=True)
class ExperimentConfig:
    n_t: int = 4
    n_r: int = 2
    subcarriers: int = 1
    trials: int = 200
    samples: int = 1000
    burn_in: int | None = None
    seed: int = 42
    channel_mode: str = "gauss_markov"
    order: int = 1
    doppler: float = 0.05
    sweep: str = "bits"
    bits: tuple = tuple(range(1, 11))
    taus: tuple = (0.1, 0.5)
    methods: tuple = METHODS
    noise_variance: float = 0.1
    tx_power: float = 1.0
    init_length: int = 20
    suppression_threshold: float = 0.0
    kappa: float = 3.0
    estimator: str = "kalman"
    lossless_init: bool = False

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in _as_tuple(self.bits)))
        object.__setattr__(self, "taus", tuple(float(t) for t in _as_tuple(self.taus)))
        methods = _as_tuple(self.methods)
        if methods == ("both",):
            methods = METHODS
        object.__setattr__(self, "methods", tuple(methods))

    @property
    def n_links(self):
        return self.n_t * self.n_r * self.subcarriers

    def violations(self):
        out = []
        for name in ("n_t", "n_r", "subcarriers", "trials", "samples"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.burn_in is not None and self.burn_in < 0:
            out.append(f"burn_in must be >= 0, got {self.burn_in}")
        if not 0 <= self.seed < 2**64:
            out.append(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.samples <= self.init_length:
            out.append(f"samples ({self.samples}) must exceed init_length ({self.init_length})")
        if self.init_length < max(1, self.order):
            out.append(f"init_length must be >= max(1, order={self.order}), got {self.init_length}")
        if self.channel_mode not in ("gauss_markov", "jakes"):
            out.append(f"channel.mode must be gauss_markov or jakes, got {self.channel_mode!r}")
        if self.channel_mode == "gauss_markov" and self.order != 1:
            out.append("gauss_markov channels have order 1")
        if self.channel_mode == "jakes" and self.sweep == "tau":
            out.append("a jakes channel fixes tau; sweep.axis must be bits")
        if self.order < 1:
            out.append(f"channel.order must be >= 1, got {self.order}")
        if self.doppler < 0:
            out.append(f"channel.doppler must be >= 0, got {self.doppler}")
        if self.sweep not in ("bits", "tau"):
            out.append(f"sweep.axis must be bits or tau, got {self.sweep!r}")
        if not self.bits:
            out.append("sweep.bits is empty")
        for b in self.bits:
            if not MIN_BITS <= b <= MAX_BITS:
                out.append(f"swept bit count {b} outside [{MIN_BITS}, {MAX_BITS}]")
        if not self.taus and self.channel_mode == "gauss_markov":
            out.append("sweep.tau is empty")
        for t in self.taus:
            if not 0.0 <= t <= 1.0:
                out.append(f"swept tau {t} outside [0, 1]")
        if not self.methods:
            out.append("methods is empty")
        for m in self.methods:
            if m not in METHODS:
                out.append(f"unknown method {m!r}")
        if not self.noise_variance >= 0:
            out.append(f"noise_variance must be >= 0, got {self.noise_variance}")
        if not self.tx_power > 0:
            out.append(f"tx_power must be > 0, got {self.tx_power}")
        if not self.suppression_threshold >= 0:
            out.append(f"session.epsilon must be >= 0, got {self.suppression_threshold}")
        if not self.kappa > 0:
            out.append(f"session.kappa must be > 0, got {self.kappa}")
        if self.estimator not in ("kalman", "raw"):
            out.append(f"session.estimator must be kalman or raw, got {self.estimator!r}")
        # Quantizer ranges are fitted on the initialization window, pooled over links.
        if self.init_length * self.n_links < 100 + self.order * self.n_links:
            out.append(
                f"init_length * links = {self.init_length * self.n_links} too small to fit quantizer ranges"
            )
        return out

    def validate(self):
        problems = self.violations()
        if problems:
            raise ConfigError(problems)
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _as_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


# file key -> (field name, expected kind)
KEYS = {
    "n_t": ("n_t", int),
    "n_r": ("n_r", int),
    "subcarriers": ("subcarriers", int),
    "trials": ("trials", int),
    "samples": ("samples", int),
    "burn_in": ("burn_in", int),
    "seed": ("seed", int),
    "channel.mode": ("channel_mode", str),
    "channel.order": ("order", int),
    "channel.doppler": ("doppler", float),
    "sweep.axis": ("sweep", str),
    "sweep.bits": ("bits", list),
    "sweep.tau": ("taus", list),
    "methods": ("methods", list),
    "noise_variance": ("noise_variance", float),
    "tx_power": ("tx_power", float),
    "session.init_length": ("init_length", int),
    "session.epsilon": ("suppression_threshold", float),
    "session.kappa": ("kappa", float),
    "session.estimator": ("estimator", str),
    "session.lossless_init": ("lossless_init", bool),
}

_RANGE = re.compile(r"^(-?\d+)\s*\.\.\s*(-?\d+)$")


def _scalar(token):
    t = token.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        return t


def _value(text):
    text = text.strip()
    m = _RANGE.match(text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return list(range(lo, hi + 1))
    if "," in text:
        items = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            m = _RANGE.match(part)
            items.extend(range(int(m.group(1)), int(m.group(2)) + 1) if m else [_scalar(part)])
        return items
    return _scalar(text)


def parse_config_text(text, base=None):
    """Parse the flat key-value format on top of ``base`` (defaults if omitted).

    Every problem (unknown key, bad value, failed validation) is collected
    and reported together in one :class:`ConfigError`.
    """
    base = ExperimentConfig() if base is None else base
    changes, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        name, kind = KEYS[key]
        parsed = _value(value)
        if kind is list:
            parsed = parsed if isinstance(parsed, list) else [parsed]
        elif kind is bool:
            if not isinstance(parsed, bool):
                problems.append(f"line {lineno}: {key} expects true/false, got {value!r}")
                continue
        elif kind is int:
            if isinstance(parsed, bool) or not isinstance(parsed, int):
                problems.append(f"line {lineno}: {key} expects an integer, got {value!r}")
                continue
        elif kind is float:
            if isinstance(parsed, bool) or not isinstance(parsed, (int, float)):
                problems.append(f"line {lineno}: {key} expects a number, got {value!r}")
                continue
            parsed = float(parsed)
        elif kind is str:
            parsed = str(value)
        changes[name] = parsed
    config = None
    if not problems:
        try:
            config = base.replace(**changes)
        except (TypeError, ValueError) as exc:
            problems.append(str(exc))
    if config is not None:
        problems.extend(config.violations())
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


PRESETS = {
    # MSE / SNR against quantization bits for two channel dynamics.
    "fig3": ExperimentConfig(sweep="bits", bits=tuple(range(1, 11)), taus=(0.1, 0.5)),
    # MSE / SNR against tau for two coarse quantizers.
    "fig4": ExperimentConfig(sweep="tau", bits=(1, 2), taus=tuple(round(0.1 * i, 1) for i in range(11))),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError([f"unknown preset {name!r}; choose from {sorted(PRESETS)}"]) from None
