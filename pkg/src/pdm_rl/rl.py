"""Policy heads, rollouts and the output-layer training algorithms.

Three algorithms are provided: REINFORCE (no baseline), REINFORCE with a
learned state-value baseline, and a basic clipped PPO with a KL penalty and
a clipped value loss.  Each works either with full backpropagation or with the
hidden layers trained by local distance-matching losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Algorithm, TrainConfig
from .distance import MaskPolicy, guide, neighborhood_mask, normalize, pairwise_l1, scale_by_error
from .envs import Env
from .locloss import LocalLossSpec, LossVariant, layer_loss_and_grad
from .net import LayeredNetwork, NetConfig, TrainingMode, backprop_full, init


@dataclass(frozen=True)
class PolicyHead:
    """Categorical over ``size`` actions, or a Gaussian with fixed variance."""

    kind: str
    size: int
    sigma2: float = 0.1

    def __post_init__(self):
        if self.kind not in ("categorical", "gaussian"):
            raise ValueError(f"unknown head kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma2 > 0:
            raise ValueError("Gaussian head needs sigma2 > 0")

    @classmethod
    def for_env(cls, env: Env, sigma2: float = 0.1) -> "PolicyHead":
        if env.discrete:
            return cls("categorical", env.num_actions)
        return cls("gaussian", env.action_dim, sigma2)

    def log_prob(self, outputs: np.ndarray, actions) -> np.ndarray:
        outputs = np.atleast_2d(outputs)
        if self.kind == "categorical":
            logp = log_softmax(outputs)
            idx = np.asarray(actions, dtype=np.int64).reshape(-1)
            return logp[np.arange(len(idx)), idx]
        a = np.asarray(actions, dtype=np.float64).reshape(outputs.shape)
        sq = np.sum((a - outputs) ** 2, axis=1)
        return -sq / (2 * self.sigma2) - 0.5 * self.size * math.log(2 * math.pi * self.sigma2)

    def log_prob_grad(self, outputs: np.ndarray, actions) -> np.ndarray:
        """d log pi(a | s) / d outputs (logits or means), one row per sample."""
        outputs = np.atleast_2d(outputs)
        if self.kind == "categorical":
            idx = np.asarray(actions, dtype=np.int64).reshape(-1)
            g = -softmax(outputs)
            g[np.arange(len(idx)), idx] += 1.0
            return g
        a = np.asarray(actions, dtype=np.float64).reshape(outputs.shape)
        return (a - outputs) / self.sigma2

    def sample(self, output_row: np.ndarray, rng: np.random.Generator):
        if self.kind == "categorical":
            p = softmax(output_row[None, :])[0]
            a = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
            return min(a, self.size - 1)
        return output_row + math.sqrt(self.sigma2) * rng.standard_normal(self.size)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def head_log_prob_and_grad(head: PolicyHead, weights: np.ndarray, bias: np.ndarray,
                           head_input: np.ndarray, action) -> tuple[float, dict[str, np.ndarray]]:
    """log pi(action | input) for a linear head and its gradient.

    Returns the gradient w.r.t. the head output (logits or mean), the weights
    and the bias.
    """
    h = np.asarray(head_input, dtype=np.float64).reshape(1, -1)
    out = h @ weights + bias
    g_out = head.log_prob_grad(out, [action])
    grads = {"output": g_out[0], "weights": h.T @ g_out, "bias": g_out[0].copy()}
    return float(head.log_prob(out, [action])[0]), grads


def discounted_returns(rewards, gamma: float, bootstrap: float = 0.0) -> np.ndarray:
    """G_t = r_t + gamma * G_{t+1}, with G_T = ``bootstrap``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    g = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


@dataclass
class EpisodeBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray
    returns: np.ndarray
    values: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))


@dataclass
class ReplayBuffer:
    capacity: int = 2000
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    returns: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def full(self) -> bool:
        return len(self) >= self.capacity

    def add_segment(self, states, actions, log_probs, returns, values) -> None:
        if len(self) + len(states) > self.capacity:
            raise ValueError("segment would overflow the replay buffer")
        self.states.extend(states)
        self.actions.extend(actions)
        self.log_probs.extend(log_probs)
        self.returns.extend(returns)
        self.values.extend(values)

    def clear(self) -> None:
        for lst in (self.states, self.actions, self.log_probs, self.returns, self.values):
            lst.clear()

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "states": np.asarray(self.states, dtype=np.float64),
            "actions": np.asarray(self.actions),
            "log_probs": np.asarray(self.log_probs, dtype=np.float64),
            "returns": np.asarray(self.returns, dtype=np.float64),
            "values": np.asarray(self.values, dtype=np.float64),
        }


def _act(net: LayeredNetwork, head: PolicyHead, obs: np.ndarray, rng: np.random.Generator):
    feats = net.forward(obs)[-1]
    out, value = net.heads(feats)
    action = head.sample(out[0], rng)
    logp = float(head.log_prob(out, [action])[0])
    v = float(value[0]) if value is not None else None
    return action, logp, v


def _critic(net: LayeredNetwork, obs: np.ndarray) -> float:
    _, value = net.heads(net.forward(obs)[-1])
    return float(value[0]) if value is not None else 0.0


def collect_episode(env: Env, net: LayeredNetwork, head: PolicyHead, rng: np.random.Generator,
                    gamma: float) -> EpisodeBatch:
    """Roll out one full episode from a fresh reset."""
    obs = env.reset()
    states, actions, rewards, logps, values = [], [], [], [], []
    while True:
        action, logp, v = _act(net, head, obs, rng)
        states.append(obs)
        actions.append(action)
        logps.append(logp)
        values.append(v)
        step = env.step(action)
        rewards.append(step.reward)
        obs = step.observation
        if step.terminated or step.truncated:
            break
    rewards = np.asarray(rewards, dtype=np.float64)
    return EpisodeBatch(
        states=np.asarray(states, dtype=np.float64),
        actions=np.asarray(actions),
        rewards=rewards,
        log_probs=np.asarray(logps, dtype=np.float64),
        returns=discounted_returns(rewards, gamma),
        values=None if net.value is None else np.asarray(values, dtype=np.float64),
    )


class BufferCollector:
    """Fills a replay buffer from a continuing stream of episodes.

    Episodes may straddle buffer fills; the return of a cut segment is
    bootstrapped with the critic's value of the next state, as is a time-limit
    truncation.  Environment termination bootstraps with zero.
    """

    def __init__(self, env: Env, gamma: float):
        self.env = env
        self.gamma = gamma
        self.obs = None
        self.episode_return = 0.0
        self.finished: list[float] = []

    def fill(self, net: LayeredNetwork, head: PolicyHead, buffer: ReplayBuffer,
             rng: np.random.Generator) -> list[float]:
        """Fill ``buffer`` to capacity; returns the episode returns completed meanwhile."""
        self.finished = []
        seg = ([], [], [], [], [])
        while not buffer.full:
            if self.obs is None:
                self.obs = self.env.reset()
                self.episode_return = 0.0
            action, logp, v = _act(net, head, self.obs, rng)
            step = self.env.step(action)
            for lst, item in zip(seg, (self.obs, action, logp, step.reward, v)):
                lst.append(item)
            self.episode_return += step.reward
            self.obs = step.observation
            room = buffer.capacity - len(buffer) - len(seg[0])
            if step.terminated or step.truncated or room == 0:
                if step.terminated:
                    tail = 0.0
                else:
                    tail = _critic(net, self.obs)
                returns = discounted_returns(seg[3], self.gamma, bootstrap=tail)
                buffer.add_segment(seg[0], seg[1], seg[2], returns, seg[4])
                seg = ([], [], [], [], [])
                if step.terminated or step.truncated:
                    self.finished.append(self.episode_return)
                    self.obs = None
        return self.finished


@dataclass
class UpdateRecord:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    local_losses: list[float] = field(default_factory=list)


def build_network(config: TrainConfig, env: Env, rng: np.random.Generator) -> tuple[LayeredNetwork, PolicyHead]:
    head = PolicyHead.for_env(env, config.sigma2)
    net_cfg = NetConfig(
        in_dim=env.obs_dim,
        policy_out=head.size,
        hidden_sizes=tuple(config.hidden_sizes),
        value_head=config.algorithm is not Algorithm.REINFORCE,
        mode=config.mode,
        alpha=config.learning_rate,
        hidden_rates=config.layer_rates(),
        grad_clip=config.g_clip,
        bias=config.bias,
    )
    return init(net_cfg, rng), head


def local_hidden_update(net: LayeredNetwork, acts: list[np.ndarray], config: TrainConfig,
                        guidance: np.ndarray | None = None) -> list[float]:
    """Train every hidden layer on its own distance-matching loss.

    ``acts`` come from one forward pass and are treated as constants.  With
    the default global target every layer matches the distances of the
    network input; with ``error_fp`` the target is built from the layer's own
    input and scaled by the previous layer's per-point error.
    """
    n = acts[0].shape[0]
    if n < 2:
        return [0.0] * len(net.hidden)
    guided = net.mode is TrainingMode.LOCAL_G
    variant = LossVariant.GUIDED if guided else LossVariant.UNSUPERVISED
    input_dist = pairwise_l1(acts[0])
    factors = None
    losses = []
    for i, layer in enumerate(net.hidden):
        if config.error_fp:
            base = input_dist if i == 0 else pairwise_l1(acts[i])
            if factors is not None:
                base = scale_by_error(base, factors)
        else:
            base = input_dist
        target = guide(base, guidance) if guided else normalize(base)
        mask = None
        if config.mask_policy is not MaskPolicy.KEEP_ALL:
            mask = neighborhood_mask(base, config.mask_policy)
        spec = LocalLossSpec(variant, layer.in_dim, layer.out_dim, mask, config.error_fp,
                             config.scale_pairing)
        res = layer_loss_and_grad(acts[i], layer.weights, layer.bias if layer.use_bias else None,
                                  target, spec, layer.activation)
        if config.error_fp:
            err = np.abs(res.residual).sum(axis=1)
            top = err.max()
            factors = err / top + 1.0 if top > 0 else np.ones(n)
        net.update(f"hidden{i}", res.weight_grad, res.bias_grad)
        losses.append(res.loss)
    return losses


def _apply_head_and_hidden(net: LayeredNetwork, acts, g_policy, g_value, config: TrainConfig,
                           guidance) -> list[float]:
    """Shared tail of every update: BP through all layers, or local + heads."""
    if net.mode is TrainingMode.BP_FULL:
        grads = backprop_full(net, None, g_policy, g_value, config.w_val, acts=acts)
        for name, (gw, gb) in grads.items():
            net.update(name, gw, gb)
        return []
    local = local_hidden_update(net, acts, config, guidance) if net.mode.is_local else []
    feats = acts[-1]
    net.update("policy", feats.T @ g_policy, g_policy.sum(axis=0))
    if g_value is not None:
        gv = np.asarray(g_value).reshape(-1, 1)
        net.update("value", feats.T @ gv, gv.sum(axis=0))
    return local


def _policy_weights(returns: np.ndarray, baseline: np.ndarray | None, whiten: bool) -> np.ndarray:
    w = returns if baseline is None else returns - baseline
    if whiten and len(w) > 1:
        w = (w - w.mean()) / (w.std() + 1e-8)
    return w


def reinforce_update(net: LayeredNetwork, head: PolicyHead, episode: EpisodeBatch,
                     config: TrainConfig) -> UpdateRecord:
    """REINFORCE without baseline: minimize -mean_t G_t log pi(a_t | s_t)."""
    if len(episode) == 0:
        raise ValueError("cannot update from an empty episode")
    acts = net.forward(episode.states)
    out, _ = net.heads(acts[-1])
    t = len(episode)
    w = _policy_weights(episode.returns, None, config.whiten_returns)
    logp = head.log_prob(out, episode.actions)
    g_policy = -(w / t)[:, None] * head.log_prob_grad(out, episode.actions)
    local = _apply_head_and_hidden(net, acts, g_policy, None, config, guidance=episode.returns)
    return UpdateRecord(float(-np.mean(w * logp)), 0.0, local)


def value_baseline_update(net: LayeredNetwork, head: PolicyHead, episode: EpisodeBatch,
                          config: TrainConfig) -> UpdateRecord:
    """REINFORCE weighted by G_t - V(s_t); the value head regresses onto G_t."""
    if net.value is None:
        raise ValueError("REINFORCE with baseline needs a value head")
    if len(episode) == 0:
        raise ValueError("cannot update from an empty episode")
    acts = net.forward(episode.states)
    out, values = net.heads(acts[-1])
    t = len(episode)
    w = _policy_weights(episode.returns, values, config.whiten_returns)
    logp = head.log_prob(out, episode.actions)
    g_policy = -(w / t)[:, None] * head.log_prob_grad(out, episode.actions)
    diff = values - episode.returns
    g_value = 2.0 * diff / t
    local = _apply_head_and_hidden(net, acts, g_policy, g_value, config, guidance=values)
    return UpdateRecord(float(-np.mean(w * logp)), float(np.mean(diff * diff)), local)


def clipped_surrogate(ratio, advantage, eps: float) -> np.ndarray:
    """Per-sample min(r * A, clip(r, 1 - eps, 1 + eps) * A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    return np.minimum(ratio * advantage, np.clip(ratio, 1 - eps, 1 + eps) * advantage)


def kl_estimate(old_log_probs, new_log_probs) -> float:
    return float(np.mean(np.asarray(old_log_probs) - np.asarray(new_log_probs)))


def ppo_minibatch_grads(head: PolicyHead, out: np.ndarray, values: np.ndarray, actions,
                        old_logp: np.ndarray, old_values: np.ndarray, returns: np.ndarray,
                        advantages: np.ndarray, config: TrainConfig):
    """Losses and output-space gradients for one PPO minibatch."""
    b = len(old_logp)
    logp = head.log_prob(out, actions)
    ratio = np.exp(logp - old_logp)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1 - config.clip_eps, 1 + config.clip_eps) * advantages
    objective = np.minimum(unclipped, clipped)
    policy_loss = -objective.mean() + config.w_kl * kl_estimate(old_logp, logp)
    # d objective / d logp is r*A where the unclipped branch is the minimum, else 0
    d_obj = np.where(unclipped <= clipped, unclipped, 0.0)
    d_logp = (-d_obj - config.w_kl) / b
    g_policy = d_logp[:, None] * head.log_prob_grad(out, actions)

    delta = values - old_values
    v_clipped = old_values + np.clip(delta, -config.clip_value, config.clip_value)
    l_plain = (values - returns) ** 2
    l_clip = (v_clipped - returns) ** 2
    value_loss = np.maximum(l_plain, l_clip).mean()
    inside = np.abs(delta) <= config.clip_value
    g_value = np.where(l_plain >= l_clip, 2 * (values - returns),
                       np.where(inside, 2 * (v_clipped - returns), 0.0)) / b
    return float(policy_loss), float(value_loss), g_policy, g_value


def ppo_update(net: LayeredNetwork, head: PolicyHead, buffer: ReplayBuffer, config: TrainConfig,
               rng: np.random.Generator) -> UpdateRecord:
    """Basic clipped PPO over ``epochs`` passes of shuffled minibatches."""
    if net.value is None:
        raise ValueError("PPO needs a value head")
    if not buffer.full:
        raise ValueError(f"replay buffer holds {len(buffer)} of {buffer.capacity} transitions")
    data = buffer.arrays()
    n = len(buffer)
    advantages = data["returns"] - data["values"]
    p_losses, v_losses, local_sum, local_count = [], [], None, 0
    per_minibatch = config.ppo_local_per_minibatch

    if net.mode.is_local and not per_minibatch:
        acts = net.forward(data["states"])
        _, values = net.heads(acts[-1])
        local_sum = np.asarray(local_hidden_update(net, acts, config, values))
        local_count = 1

    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            acts = net.forward(data["states"][idx])
            out, values = net.heads(acts[-1])
            p_loss, v_loss, g_policy, g_value = ppo_minibatch_grads(
                head, out, values, data["actions"][idx], data["log_probs"][idx],
                data["values"][idx], data["returns"][idx], advantages[idx], config)
            if net.mode.is_local and not per_minibatch:
                feats = acts[-1]
                net.update("policy", feats.T @ g_policy, g_policy.sum(axis=0))
                gv = g_value.reshape(-1, 1)
                net.update("value", feats.T @ gv, gv.sum(axis=0))
                local = []
            else:
                local = _apply_head_and_hidden(net, acts, g_policy, g_value, config, guidance=values)
            if local:
                local_sum = np.asarray(local) if local_sum is None else local_sum + np.asarray(local)
                local_count += 1
            p_losses.append(p_loss)
            v_losses.append(v_loss)
    local_mean = [] if local_sum is None else list(local_sum / local_count)
    buffer.clear()
    return UpdateRecord(float(np.mean(p_losses)), float(np.mean(v_losses)), local_mean)
