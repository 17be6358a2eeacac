"""Central finite-difference verification of the analytic gradients.

Each suite draws random small instances from a per-instance seed so that a
failing case can be reproduced exactly.  Instances that land within 1e-4 of a
kink of the l1 distance (two points nearly equal in some output coordinate)
or of a tie for the largest distance are redrawn; the loss is not
differentiable there and finite differences are meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distance import MaskPolicy, guide, neighborhood_mask, normalize, pairwise_l1, scale_by_error
from .locloss import LocalLossSpec, LossVariant, ScalePairing, layer_loss, layer_loss_and_grad
from .net import NetConfig, TrainingMode, backprop_full, init
from .rl import PolicyHead

FD_STEP = 1e-6
KINK_MARGIN = 1e-4
SUITES = ("unsupervised", "guided", "masked", "error_fp", "backprop")


@dataclass
class SuiteResult:
    name: str
    trials: int
    worst_error: float
    worst_seed: int | None


def relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """max |a - n| over the larger of the two infinity norms (floored)."""
    a = np.concatenate([np.ravel(x) for x in analytic])
    n = np.concatenate([np.ravel(x) for x in numeric])
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), floor)
    return float(np.abs(a - n).max(initial=0.0) / scale)


def central_difference(f, params: list[np.ndarray], step: float = FD_STEP) -> list[np.ndarray]:
    """Numerical gradient of ``f()`` w.r.t. each array in ``params`` (perturbed in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = f()
            p[idx] = orig - step
            down = f()
            p[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def _near_kink(h, w, b) -> bool:
    y = np.tanh(h @ w + b)
    n = y.shape[0]
    gaps = np.abs(y[:, None, :] - y[None, :, :])[~np.eye(n, dtype=bool)]
    if gaps.size and gaps.min() < KINK_MARGIN:
        return True
    d = np.sort(pairwise_l1(y)[np.triu_indices(n, 1)])
    return d.size >= 2 and d[-1] - d[-2] < KINK_MARGIN


def local_instance(kind: str, seed: int):
    """Random (input, weights, bias, target, spec) for one local-loss check."""
    rng = np.random.default_rng(seed)
    while True:
        n, d_in, d_out = int(rng.integers(2, 9)), int(rng.integers(1, 7)), int(rng.integers(1, 9))
        h = rng.normal(size=(n, d_in))
        w = rng.normal(scale=0.8, size=(d_in, d_out))
        b = rng.normal(scale=0.3, size=d_out)
        if not _near_kink(h, w, b):
            break
    base = pairwise_l1(rng.normal(size=(n, int(rng.integers(1, 5)))))
    mask = None
    variant = LossVariant.UNSUPERVISED
    if kind == "guided":
        variant = LossVariant.GUIDED
        target = guide(base, rng.normal(size=n))
    elif kind == "error_fp":
        target = normalize(scale_by_error(base, rng.uniform(1.0, 2.0, size=n)))
    else:
        target = normalize(base)
    if kind == "masked":
        policies = [MaskPolicy.CLOSEST_HALF, MaskPolicy.FURTHEST_HALF,
                    MaskPolicy.CLOSEST_AND_FURTHEST_QUARTER]
        mask = neighborhood_mask(base, policies[int(rng.integers(len(policies)))])
    pairing = list(ScalePairing)[int(rng.integers(2))]
    spec = LocalLossSpec(variant, d_in, d_out, mask, kind == "error_fp", pairing)
    return h, w, b, target, spec


def check_local_instance(kind: str, seed: int) -> float:
    h, w, b, target, spec = local_instance(kind, seed)
    res = layer_loss_and_grad(h, w, b, target, spec)
    numeric = central_difference(lambda: layer_loss(h, w, b, target, spec), [w, b])
    return relative_error([res.weight_grad, res.bias_grad], numeric)


def backprop_instance(seed: int):
    rng = np.random.default_rng(seed)
    n_hidden = int(rng.integers(1, 3))
    sizes = tuple(int(s) for s in rng.integers(1, 9, size=n_hidden))
    d_in = int(rng.integers(1, 6))
    categorical = bool(rng.integers(2))
    n_out = int(rng.integers(2, 4))
    head = PolicyHead("categorical", n_out) if categorical else PolicyHead("gaussian", n_out, 0.1)
    net = init(NetConfig(d_in, n_out, sizes, value_head=True, mode=TrainingMode.BP_FULL), rng)
    for name in net.layer_names():
        layer = net.layer(name)
        layer.bias = rng.normal(scale=0.2, size=layer.bias.shape)
    n = int(rng.integers(1, 7))
    x = rng.normal(size=(n, d_in))
    actions = rng.integers(n_out, size=n) if categorical else rng.normal(size=(n, n_out))
    returns = rng.normal(size=n)
    advantages = rng.normal(size=n)
    return net, head, x, actions, returns, advantages


def _bp_loss(net, head, x, actions, returns, advantages, w_val=0.5) -> float:
    out, values = net.heads(net.forward(x)[-1])
    policy = -np.mean(advantages * head.log_prob(out, actions))
    value = np.mean((values - returns) ** 2)
    return float(policy + w_val * value)


def check_backprop_instance(seed: int, w_val: float = 0.5) -> float:
    net, head, x, actions, returns, advantages = backprop_instance(seed)
    n = x.shape[0]
    out, values = net.heads(net.forward(x)[-1])
    g_policy = -(advantages / n)[:, None] * head.log_prob_grad(out, actions)
    g_value = 2.0 * (values - returns) / n
    grads = backprop_full(net, x, g_policy, g_value, w_val)
    analytic, params = [], []
    for name in net.layer_names():
        layer = net.layer(name)
        analytic.extend(grads[name])
        params.extend([layer.weights, layer.bias])
    numeric = central_difference(lambda: _bp_loss(net, head, x, actions, returns, advantages, w_val),
                                 params)
    return relative_error(analytic, numeric)


def run_suite(name: str, trials: int, base_seed: int = 0) -> SuiteResult:
    worst, worst_seed = 0.0, None
    for t in range(trials):
        seed = base_seed + t
        err = check_backprop_instance(seed) if name == "backprop" else check_local_instance(name, seed)
        if worst_seed is None or err > worst:
            worst, worst_seed = err, seed
    return SuiteResult(name, trials, worst, worst_seed)


def run_all(trials: int = 100, base_seed: int = 0) -> list[SuiteResult]:
    return [run_suite(name, trials, base_seed) for name in SUITES]
