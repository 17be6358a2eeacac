"""Dense tanh networks with one Adam optimizer per layer.

Hidden layers can be trained in isolation (local losses) or jointly through
the policy/value heads with ordinary reverse-mode differentiation.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


class NumericalError(FloatingPointError):
    """A non-finite value appeared during an update."""


class TrainingMode(str, enum.Enum):
    BP_FULL = "bp_full"
    LOCAL_U = "local_u"
    LOCAL_G = "local_g"
    FROZEN_RANDOM = "frozen_random"

    @property
    def is_local(self) -> bool:
        return self in (TrainingMode.LOCAL_U, TrainingMode.LOCAL_G)


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "tanh"
    frozen: bool = False
    use_bias: bool = True

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weights
        if self.use_bias:
            z = z + self.bias
        return np.tanh(z) if self.activation == "tanh" else z

    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]


@dataclass
class AdamState:
    rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_clip: float = 1.0
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Adam rate must be positive, got {self.rate}")


def clip_by_global_norm(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads]
    return list(grads)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray],
              name: str = "layer") -> list[np.ndarray]:
    """Clip by global l2 norm, then take one bias-corrected Adam step.

    Mutates ``state`` and returns new parameter arrays; the inputs are left
    untouched.
    """
    if len(params) != len(grads):
        raise ValueError(f"{name}: {len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in {name}")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    grads = clip_by_global_norm(grads, state.grad_clip)
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g
        v = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * (g * g)
        state.first_moment[i] = m
        state.second_moment[i] = v
        out.append(p - state.rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon))
    return out


@dataclass
class NetConfig:
    in_dim: int
    policy_out: int
    hidden_sizes: tuple[int, ...] = (128, 256)
    value_head: bool = False
    mode: TrainingMode = TrainingMode.BP_FULL
    alpha: float = 3e-4
    hidden_rates: tuple[float, ...] | None = None
    value_rate: float | None = None
    grad_clip: float = 1.0
    bias: bool = True

    def __post_init__(self):
        self.mode = TrainingMode(self.mode)
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not self.hidden_sizes:
            raise ValueError("at least one hidden layer is required")
        if self.hidden_rates is not None and len(self.hidden_rates) != len(self.hidden_sizes):
            raise ValueError("hidden_rates must give one rate per hidden layer")


class LayeredNetwork:
    """Hidden tanh stack with a linear policy head and an optional value head."""

    def __init__(self, hidden: list[DenseLayer], policy: DenseLayer,
                 value: DenseLayer | None, mode: TrainingMode,
                 optimizers: dict[str, AdamState]):
        self.hidden = hidden
        self.policy = policy
        self.value = value
        self.mode = TrainingMode(mode)
        self.optimizers = optimizers
        for prev, nxt in zip(hidden, hidden[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError("hidden layer widths do not chain")

    @property
    def in_dim(self) -> int:
        return self.hidden[0].in_dim

    def layer_names(self) -> list[str]:
        names = [f"hidden{i}" for i in range(len(self.hidden))] + ["policy"]
        return names + (["value"] if self.value is not None else [])

    def layer(self, name: str) -> DenseLayer:
        if name == "policy":
            return self.policy
        if name == "value":
            if self.value is None:
                raise KeyError("network has no value head")
            return self.value
        return self.hidden[int(name.removeprefix("hidden"))]

    def forward(self, batch) -> list[np.ndarray]:
        """Activations ``[input, h1, ..., hL]`` of the hidden stack.

        Every entry is a plain array; consumers treat it as a constant.
        """
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ValueError(f"batch has {x.shape[1]} features, network expects {self.in_dim}")
        acts = [x]
        for layer in self.hidden:
            acts.append(layer(acts[-1]))
        return acts

    def heads(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        value = self.value(features)[:, 0] if self.value is not None else None
        return self.policy(features), value

    def update(self, name: str, grad_w: np.ndarray, grad_b: np.ndarray) -> None:
        """Apply one optimizer step to a single layer; frozen layers are skipped."""
        layer = self.layer(name)
        if layer.frozen:
            return
        if not layer.use_bias:
            grad_b = np.zeros_like(grad_b)
        w, b = adam_step(self.optimizers[name], layer.params(), [grad_w, grad_b], name)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericalError(f"non-finite parameters in {name}")
        layer.weights, layer.bias = w, b

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.layer_names():
            layer = self.layer(name)
            out[f"{name}.weights"] = layer.weights
            out[f"{name}.bias"] = layer.bias
        return out


def _uniform_layer(rng: np.random.Generator, n_in: int, n_out: int, activation: str,
                   bias: bool) -> DenseLayer:
    bound = 1.0 / np.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_in, n_out))
    return DenseLayer(w, np.zeros(n_out), activation=activation, use_bias=bias)


def depth_scaled_rates(alpha: float, n_hidden: int) -> tuple[float, ...]:
    """Hidden-layer rates ``alpha * d`` with d = 2 just below the head, 3 below that, ..."""
    return tuple(alpha * (1 + (n_hidden - i)) for i in range(n_hidden))


def init(config: NetConfig, seed: int | np.random.Generator) -> LayeredNetwork:
    """Weights uniform in +-1/sqrt(fan_in), zero biases; deterministic given the seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = (config.in_dim,) + config.hidden_sizes
    hidden = [_uniform_layer(rng, a, b, "tanh", config.bias) for a, b in zip(sizes, sizes[1:])]
    policy = _uniform_layer(rng, sizes[-1], config.policy_out, "linear", config.bias)
    value = _uniform_layer(rng, sizes[-1], 1, "linear", config.bias) if config.value_head else None
    if config.mode is TrainingMode.FROZEN_RANDOM:
        for layer in hidden:
            layer.frozen = True

    rates = config.hidden_rates or (config.alpha,) * len(hidden)
    optimizers = {f"hidden{i}": AdamState(rate=r, grad_clip=config.grad_clip)
                  for i, r in enumerate(rates)}
    optimizers["policy"] = AdamState(rate=config.alpha, grad_clip=config.grad_clip)
    if value is not None:
        optimizers["value"] = AdamState(rate=config.value_rate or config.alpha,
                                        grad_clip=config.grad_clip)
    return LayeredNetwork(hidden, policy, value, config.mode, optimizers)


def backprop_full(net: LayeredNetwork, batch, policy_out_grad: np.ndarray,
                  value_out_grad: np.ndarray | None = None, w_val: float = 0.5,
                  acts: list[np.ndarray] | None = None) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Reverse-mode gradients of ``L_policy + w_val * L_value`` for every layer.

    ``policy_out_grad`` is dL_policy/d(policy outputs), shape N x out;
    ``value_out_grad`` is dL_value/d(values), shape N (or N x 1).
    """
    if acts is None:
        acts = net.forward(batch)
    feats = acts[-1]
    grads: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    g_p = np.asarray(policy_out_grad, dtype=np.float64).reshape(feats.shape[0], -1)
    grads["policy"] = (feats.T @ g_p, g_p.sum(axis=0))
    g_h = g_p @ net.policy.weights.T
    if value_out_grad is not None:
        if net.value is None:
            raise ValueError("value gradient given but the network has no value head")
        g_v = w_val * np.asarray(value_out_grad, dtype=np.float64).reshape(-1, 1)
        grads["value"] = (feats.T @ g_v, g_v.sum(axis=0))
        g_h = g_h + g_v @ net.value.weights.T
    for i in range(len(net.hidden) - 1, -1, -1):
        y = acts[i + 1]
        g_z = g_h * (1.0 - y * y) if net.hidden[i].activation == "tanh" else g_h
        grads[f"hidden{i}"] = (acts[i].T @ g_z, g_z.sum(axis=0))
        if i > 0:
            g_h = g_z @ net.hidden[i].weights.T
    for name, (gw, gb) in grads.items():
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NumericalError(f"non-finite backpropagated gradient in {name}")
    return grads


def save_checkpoint(net: LayeredNetwork, path) -> None:
    """Write sizes, mode, parameters and optimizer moments to an ``.npz`` file."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "mode": net.mode.value,
        "layers": [],
    }
    arrays: dict[str, np.ndarray] = {}
    for name in net.layer_names():
        layer = net.layer(name)
        opt = net.optimizers[name]
        meta["layers"].append({
            "name": name,
            "activation": layer.activation,
            "frozen": layer.frozen,
            "use_bias": layer.use_bias,
            "adam": {"rate": opt.rate, "beta1": opt.beta1, "beta2": opt.beta2,
                     "epsilon": opt.epsilon, "grad_clip": opt.grad_clip,
                     "step_count": opt.step_count,
                     "has_moments": bool(opt.first_moment)},
        })
        arrays[f"{name}.weights"] = layer.weights
        arrays[f"{name}.bias"] = layer.bias
        for i, (m, v) in enumerate(zip(opt.first_moment, opt.second_moment)):
            arrays[f"{name}.m{i}"] = m
            arrays[f"{name}.v{i}"] = v
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> LayeredNetwork:
    with np.load(Path(path)) as data:
        meta = json.loads(data["__meta__"].tobytes().decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        layers: dict[str, DenseLayer] = {}
        optimizers: dict[str, AdamState] = {}
        for entry in meta["layers"]:
            name = entry["name"]
            layers[name] = DenseLayer(data[f"{name}.weights"].copy(), data[f"{name}.bias"].copy(),
                                      activation=entry["activation"], frozen=entry["frozen"],
                                      use_bias=entry["use_bias"])
            a = entry["adam"]
            opt = AdamState(rate=a["rate"], beta1=a["beta1"], beta2=a["beta2"],
                            epsilon=a["epsilon"], grad_clip=a["grad_clip"],
                            step_count=a["step_count"])
            if a["has_moments"]:
                opt.first_moment = [data[f"{name}.m0"].copy(), data[f"{name}.m1"].copy()]
                opt.second_moment = [data[f"{name}.v0"].copy(), data[f"{name}.v1"].copy()]
            optimizers[name] = opt
    hidden = [layers[k] for k in sorted((k for k in layers if k.startswith("hidden")),
                                        key=lambda k: int(k[6:]))]
    return LayeredNetwork(hidden, layers["policy"], layers.get("value"), meta["mode"], optimizers)
