"""Local distance-matching losses for a single hidden layer and their gradients.

For a layer mapping ``in_dim`` features to ``out_dim`` features the loss is

    L = || T / in_dim - D_Y / (max(D_Y) * out_dim) ||_F

where ``T`` is a normalized (optionally reward-guided) target distance matrix
and ``D_Y`` the l1 distance matrix of the layer outputs.  ``ScalePairing.CROSSED``
swaps the two divisors (T / out_dim against D_Y / in_dim).  The target is a
constant; only the layer's own weights and bias receive gradient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .distance import TargetMatrix, normalize, pairwise_l1


class LossVariant(str, enum.Enum):
    UNSUPERVISED = "unsupervised"
    GUIDED = "guided"


class ScalePairing(str, enum.Enum):
    """Which dimensionality divides which distance matrix."""

    RESPECTIVE = "respective"  # target by in_dim, output by out_dim
    CROSSED = "crossed"  # target by out_dim, output by in_dim


@dataclass(frozen=True)
class LocalLossSpec:
    variant: LossVariant = LossVariant.UNSUPERVISED
    in_dim: int = 1
    out_dim: int = 1
    mask: np.ndarray | None = None
    error_fp: bool = False
    pairing: ScalePairing = ScalePairing.RESPECTIVE

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be positive, got in={self.in_dim} out={self.out_dim}")
        object.__setattr__(self, "pairing", ScalePairing(self.pairing))

    @property
    def target_scale(self) -> int:
        return self.in_dim if self.pairing is ScalePairing.RESPECTIVE else self.out_dim

    @property
    def output_scale(self) -> int:
        return self.out_dim if self.pairing is ScalePairing.RESPECTIVE else self.in_dim


class LayerLoss(NamedTuple):
    loss: float
    weight_grad: np.ndarray
    bias_grad: np.ndarray
    residual: np.ndarray  # masked difference between scaled target and output
    output: np.ndarray  # layer activations on the batch


def _entries(m) -> np.ndarray:
    if isinstance(m, TargetMatrix):
        return m.entries
    return np.asarray(m, dtype=np.float64)


def residual(target, output_dist, spec: LocalLossSpec) -> np.ndarray:
    t, o = _entries(target), _entries(output_dist)
    if t.shape != o.shape or t.ndim != 2:
        raise ValueError(f"target {t.shape} and output {o.shape} distance matrices differ in shape")
    r = t / spec.target_scale - o / spec.output_scale
    if spec.mask is not None:
        if spec.mask.shape != r.shape:
            raise ValueError(f"mask shape {spec.mask.shape} does not match batch size {r.shape[0]}")
        r = np.where(spec.mask, r, 0.0)
    return r


def loss_u(target, output_dist, spec: LocalLossSpec) -> float:
    """Unsupervised distance-matching loss (Frobenius norm of the residual)."""
    return float(np.linalg.norm(residual(target, output_dist, spec)))


def loss_g(guided_target: TargetMatrix, output_dist, spec: LocalLossSpec) -> float:
    """Same loss as :func:`loss_u` evaluated against a reward-guided target."""
    if not getattr(guided_target, "guided", False):
        raise ValueError("loss_g requires a guided target matrix")
    return loss_u(guided_target, output_dist, spec)


def _activate(z: np.ndarray, activation: str) -> tuple[np.ndarray, np.ndarray]:
    if activation == "tanh":
        y = np.tanh(z)
        return y, 1.0 - y * y
    if activation == "linear":
        return z, np.ones_like(z)
    raise ValueError(f"unknown activation {activation!r}")


def layer_loss_and_grad(layer_input, weights, bias, target, spec: LocalLossSpec,
                        activation: str = "tanh") -> LayerLoss:
    """Evaluate the local loss of one layer on a batch and its exact gradient.

    The normalizer ``max(D_Y)`` is differentiated through its first maximizing
    entry in row-major order; ``d|x|/dx`` at zero is taken as zero.
    """
    h = np.asarray(layer_input, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n = h.shape[0]
    if n < 2:
        raise ValueError("local loss needs a batch of at least two points")
    if h.shape[1] != w.shape[0]:
        raise ValueError(f"input width {h.shape[1]} does not match weights {w.shape}")
    if bias is None:
        bias = np.zeros(w.shape[1])
    y, dy_dz = _activate(h @ w + bias, activation)
    y = np.ascontiguousarray(y)
    d = _kernels.l1_pairwise(y)

    flat = int(np.argmax(d))
    m = d.flat[flat]
    normalized = d / m if m > 0.0 else np.zeros_like(d)
    r = residual(_entries(target), normalized, spec)
    loss = float(np.linalg.norm(r))

    if loss == 0.0 or m <= 0.0:
        return LayerLoss(loss, np.zeros_like(w), np.zeros(w.shape[1]), r, y)

    # dL/dB for B = D / (m * s), s the output scale
    s = spec.output_scale
    g_b = -r / loss
    g_d = g_b / (m * s)
    g_d.flat[flat] -= float(np.sum(g_b * d)) / (m * m * s)

    g_y = _kernels.l1_pairwise_adjoint(y, g_d)
    g_z = g_y * dy_dz
    return LayerLoss(loss, h.T @ g_z, g_z.sum(axis=0), r, y)


def layer_gradient(layer_input, weights, bias, target, spec: LocalLossSpec,
                   activation: str = "tanh") -> tuple[np.ndarray, np.ndarray]:
    res = layer_loss_and_grad(layer_input, weights, bias, target, spec, activation)
    return res.weight_grad, res.bias_grad


def layer_loss(layer_input, weights, bias, target, spec: LocalLossSpec,
               activation: str = "tanh") -> float:
    """Loss only, computed along an independent numpy path (no compiled kernels)."""
    h = np.asarray(layer_input, dtype=np.float64)
    if bias is None:
        bias = 0.0
    y, _ = _activate(h @ np.asarray(weights, dtype=np.float64) + bias, activation)
    d = np.abs(y[:, None, :] - y[None, :, :]).sum(axis=2)
    return loss_u(target, normalize(d), spec)


def forward_error(target, output_dist, spec: LocalLossSpec | None = None) -> np.ndarray:
    """Per-point error factors in [1, 2] for forward-error propagation.

    The per-point error is the row sum of the absolute residual; it is divided
    by its maximum and shifted by one.  Zero error everywhere gives all ones.
    """
    t = _entries(target)
    if spec is None:
        spec = LocalLossSpec(in_dim=1, out_dim=1)
    err = np.abs(residual(t, output_dist, spec)).sum(axis=1)
    top = err.max() if err.size else 0.0
    if top <= 0.0:
        return np.ones_like(err)
    return err / top + 1.0


def output_distances(y) -> TargetMatrix:
    return normalize(pairwise_l1(y))
