"""Flat dotted-key experiment configuration.

The on-disk format is diff-friendly text, one `key = value` per line, `#`
comments ignored. Parsing fills defaults, so serialize(parse(text)) is a
canonical form and parse(serialize(parse(text))) is the identity.
"""

from __future__ import annotations

import hashlib

SCENARIOS = ("drive-1v1", "select-2v5", "scale-5v50", "track", "benchmark")

# key -> (type, default)
SCHEMA = {
    "scenario": (str, "drive-1v1"),
    "episodes": (int, 100),
    "seed_base": (int, 0),
    "workers": (int, 1),
    "out_dir": (str, "results"),
    "chi_star": (float, 0.99),
    "t_max": (float, 0.0),           # 0 = scenario default
    "t_contain": (float, 10.0),
    "save_trajectories": (bool, False),
    "policy.driving": (str, "ppo"),      # dqn | ppo | p2p
    "policy.selection": (str, "mappo"),  # dqn | mappo | p2p
    "weights.driving": (str, ""),        # "" = artifacts default
    "weights.selection": (str, ""),
    "sim.zeta": (float, 4.0),
    "sim.diffusion": (float, 3.0),
    "sim.lambda": (float, 40.0),
    "sim.beta": (float, 40.0),
    "sim.r_c": (float, 0.1),
    "sim.v_max": (float, 12.0),
    "sim.rho_0": (float, 25.0),
    "sim.rho_G": (float, 5.0),
    "sim.dt": (float, 0.01),
    "sim.n_herders": (int, 0),           # 0 = scenario default
    "sim.n_targets": (int, 0),
    "control.n_w": (int, 10),
    "control.standoff": (float, 1.0),
    "control.p_gain": (float, 10.0),
    "robustness.enabled": (bool, False),
    "robustness.magnitude": (float, 0.2),
    "sensing.n_obs": (int, 1),
    "sensing.m_obs": (int, 5),
    "goal.trajectory": (str, "static"),  # static | sigmoid
    "goal.speed_ratio": (float, 50.0),
    "goal.start_x": (float, -15.0),
    "goal.start_y": (float, -15.0),
    "goal.end_x": (float, 15.0),
    "goal.end_y": (float, 15.0),
    "goal.steepness": (float, 8.0),
    "targets.cohesive": (bool, False),
    "targets.cohesion_gain": (float, 2.0),
    "train.algorithm": (str, "ppo"),     # dqn | ppo | mappo | dqn-select
    "train.preset": (str, "desk"),       # desk | paper
    "train.episodes": (int, 0),          # 0 = preset default
    "train.seed": (int, 0),
    "train.dt": (float, 0.05),
    "train.beta": (float, 0.0),
    "train.resume": (bool, False),
    "train.driving_weights": (str, ""),
}

# free-form hyperparameter overrides, e.g. "hyper.ppo.horizon = 512"
HYPER_PREFIX = "hyper."


class ExperimentConfig:
    def __init__(self, values: dict | None = None):
        self.values = {k: d for k, (_, d) in SCHEMA.items()}
        for k, v in (values or {}).items():
            self.set(k, v)
        self.validate()

    def set(self, key: str, value):
        if key in SCHEMA:
            typ = SCHEMA[key][0]
            self.values[key] = _coerce(value, typ, key)
        elif key.startswith(HYPER_PREFIX):
            self.values[key] = _auto_type(value)
        else:
            raise KeyError(f"unknown config key {key!r}")

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def hyper_overrides(self, algorithm: str) -> dict:
        prefix = f"{HYPER_PREFIX}{algorithm}."
        return {k[len(prefix):]: v for k, v in self.values.items()
                if k.startswith(prefix)}

    def validate(self):
        if self["scenario"] not in SCENARIOS:
            raise ValueError(f"unrecognized scenario {self['scenario']!r}")
        if self["episodes"] < 1:
            raise ValueError("episodes must be >= 1")
        if self["robustness.magnitude"] < 0:
            raise ValueError("robustness.magnitude must be >= 0")
        if self["workers"] < 1:
            raise ValueError("workers must be >= 1")

    def serialize(self) -> str:
        lines = []
        for key in sorted(self.values):
            lines.append(f"{key} = {_fmt(self.values[key])}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def provenance(self, version: str) -> str:
        return f"config_sha256={self.sha256()} version={version}"

    def copy(self, **overrides) -> "ExperimentConfig":
        cfg = ExperimentConfig(dict(self.values))
        for k, v in overrides.items():
            cfg.set(k, v)
        cfg.validate()
        return cfg

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _coerce(value, typ, key):
    if isinstance(value, str):
        if typ is bool:
            low = value.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"{key}: expected a boolean, got {value!r}")
        return typ(value)
    if typ is float and isinstance(value, int):
        return float(value)
    if not isinstance(value, typ):
        raise ValueError(f"{key}: expected {typ.__name__}, got {value!r}")
    return value


def _auto_type(value):
    if not isinstance(value, str):
        return value
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
