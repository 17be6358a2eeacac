"""Experiment configuration with the default hyperparameters."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .distance import MaskPolicy
from .locloss import ScalePairing
from .net import TrainingMode, depth_scaled_rates


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class Algorithm(str, enum.Enum):
    REINFORCE = "reinforce"
    REINFORCE_V = "reinforce_v"
    PPO = "ppo"


class RateScheme(str, enum.Enum):
    UNIFORM = "uniform"
    HIDDEN_DOUBLE = "hidden_double"
    HIDDEN_HALF = "hidden_half"
    DEPTH_SCALED = "depth_scaled"


# Learning rate and iteration budget per environment when not set explicitly.
ENV_ALPHA = {"cartpole": 5e-4, "acrobot": 5e-4, "pendulum": 3e-4}
ENV_ITERATIONS = {"cartpole": 1500, "acrobot": 1500, "pendulum": 2000}


@dataclass
class TrainConfig:
    env: str = "cartpole"
    algorithm: Algorithm = Algorithm.REINFORCE
    mode: TrainingMode = TrainingMode.BP_FULL
    hidden_sizes: list[int] = field(default_factory=lambda: [128, 256])
    gamma: float = 0.99
    sigma2: float = 0.1
    alpha: float | None = None
    rate_scheme: RateScheme = RateScheme.UNIFORM
    hidden_rates: list[float] | None = None
    g_clip: float = 1.0
    w_val: float = 0.5
    buffer_size: int = 2000
    batch_size: int = 128
    epochs: int = 10
    clip_eps: float = 0.2
    w_kl: float = 0.01
    clip_value: float = 0.5
    mask_policy: MaskPolicy = MaskPolicy.KEEP_ALL
    error_fp: bool = False
    scale_pairing: ScalePairing = ScalePairing.RESPECTIVE
    iterations: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    bias: bool = True
    whiten_returns: bool = True  # standardize policy weights per episode
    ppo_local_per_minibatch: bool = True

    def __post_init__(self):
        for name, enum_type in (("algorithm", Algorithm), ("mode", TrainingMode),
                                ("rate_scheme", RateScheme), ("mask_policy", MaskPolicy),
                                ("scale_pairing", ScalePairing)):
            try:
                setattr(self, name, enum_type(getattr(self, name)))
            except ValueError:
                choices = [e.value for e in enum_type]
                raise ConfigError(name, f"{getattr(self, name)!r} is not one of {choices}") from None
        self.validate()

    def validate(self) -> None:
        from .envs import ENVIRONMENTS

        if self.env not in ENVIRONMENTS:
            raise ConfigError("env", f"unknown environment {self.env!r}")
        if not self.hidden_sizes or any(int(h) < 1 for h in self.hidden_sizes):
            raise ConfigError("hidden_sizes", "must be a nonempty list of positive widths")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha", f"learning rate must be > 0, got {self.alpha}")
        if self.hidden_rates is not None:
            if len(self.hidden_rates) != len(self.hidden_sizes):
                raise ConfigError("hidden_rates", "need one rate per hidden layer")
            if any(not r > 0 for r in self.hidden_rates):
                raise ConfigError("hidden_rates", "all rates must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma", "discount must lie in [0, 1]")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2", "action variance must be > 0")
        for name in ("g_clip", "clip_eps", "clip_value"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be > 0")
        if self.w_val < 0 or self.w_kl < 0:
            raise ConfigError("w_val" if self.w_val < 0 else "w_kl", "weights must be >= 0")
        for name in ("buffer_size", "batch_size", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.iterations is not None and self.iterations < 0:
            raise ConfigError("iterations", "must be >= 0")
        if not self.seeds:
            raise ConfigError("seeds", "need at least one seed")

    @property
    def learning_rate(self) -> float:
        return self.alpha if self.alpha is not None else ENV_ALPHA[self.env]

    @property
    def n_iterations(self) -> int:
        return self.iterations if self.iterations is not None else ENV_ITERATIONS[self.env]

    def layer_rates(self) -> tuple[float, ...]:
        """Hidden-layer learning rates after applying the rate scheme."""
        if self.hidden_rates is not None:
            return tuple(float(r) for r in self.hidden_rates)
        a, n = self.learning_rate, len(self.hidden_sizes)
        if self.rate_scheme is RateScheme.HIDDEN_DOUBLE:
            return (2 * a,) * n
        if self.rate_scheme is RateScheme.HIDDEN_HALF:
            return (a / 2,) * n
        if self.rate_scheme is RateScheme.DEPTH_SCALED:
            return depth_scaled_rates(a, n)
        return (a,) * n

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig.from_dict({**self.to_dict(), **changes})


def load_config(path) -> TrainConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return TrainConfig.from_dict(data)
