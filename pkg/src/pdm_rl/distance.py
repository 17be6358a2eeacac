"""Pairwise l1 distance matrices and the targets built from them.

All matrices are dense float64 ``ndarray``s.  Targets carry a ``guided`` flag
because the reward-guided construction may leave mass on the diagonal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


class MaskPolicy(str, enum.Enum):
    KEEP_ALL = "keep_all"
    CLOSEST_HALF = "closest_half"
    FURTHEST_HALF = "furthest_half"
    CLOSEST_AND_FURTHEST_QUARTER = "closest_and_furthest_quarter"


@dataclass(frozen=True)
class TargetMatrix:
    """Normalized N x N distance structure with entries in [0, 1]."""

    entries: np.ndarray
    guided: bool = False

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _as_batch(batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError(f"batch must be a non-empty N x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("batch contains non-finite entries")
    return np.ascontiguousarray(x)


def _as_square(d, name: str = "distance matrix") -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"{name} must be square, got shape {d.shape}")
    return d


def pairwise_l1(batch) -> np.ndarray:
    """``D[i, j] = sum_k |x_ik - x_jk|`` for the rows of an N x d batch."""
    return _kernels.l1_pairwise(_as_batch(batch))


def normalize(d) -> TargetMatrix:
    """Divide by the largest entry; an all-zero matrix stays all-zero."""
    d = _as_square(d)
    m = d.max() if d.size else 0.0
    if m <= 0.0:
        return TargetMatrix(np.zeros_like(d), guided=False)
    return TargetMatrix(d / m, guided=False)


def transform_values(values) -> np.ndarray:
    """Min-max the guidance values, then flip and halve: ``(1 - v) / 2``.

    Low-valued (poorly performing) states end up with the largest offsets.
    Equal values give 0.5 everywhere.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("guidance values must be finite")
    v = v - v.min()
    top = v.max()
    v = v / top if top > 0.0 else np.zeros_like(v)
    return (1.0 - v) / 2.0


def guide_transformed(d, transformed) -> TargetMatrix:
    """Add already-transformed offsets to rows and columns, then normalize."""
    d = _as_square(d)
    v = np.asarray(transformed, dtype=np.float64).ravel()
    if v.shape[0] != d.shape[0]:
        raise ValueError(f"got {v.shape[0]} guidance values for a {d.shape[0]}-point matrix")
    boosted = d + (v[:, None] + v[None, :])  # grouped so the sum stays exactly symmetric
    return TargetMatrix(normalize(boosted).entries, guided=True)


def guide(d, values) -> TargetMatrix:
    """Reward-guided target: inflate distances around low-value states."""
    d = _as_square(d)
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.shape[0] != d.shape[0]:
        raise ValueError(f"got {values.shape[0]} guidance values for a {d.shape[0]}-point matrix")
    return guide_transformed(d, transform_values(values))


def mask_counts(n: int, policy: MaskPolicy) -> tuple[int, int]:
    """(closest, furthest) off-diagonal entries kept per row."""
    policy = MaskPolicy(policy)
    m = n - 1
    if policy is MaskPolicy.KEEP_ALL:
        return m, 0
    if policy is MaskPolicy.CLOSEST_HALF:
        return math.ceil(m / 2), 0
    if policy is MaskPolicy.FURTHEST_HALF:
        return 0, math.ceil(m / 2)
    q = math.ceil(m / 4)
    return q, q


def neighborhood_mask(d, policy: MaskPolicy) -> np.ndarray:
    """Boolean keep-mask selecting each row's nearest and/or furthest neighbours.

    Off-diagonal entries of a row are ranked by (distance, column index); the
    diagonal is always kept.
    """
    d = _as_square(d)
    n = d.shape[0]
    if n < 2:
        raise ValueError("neighborhood mask needs at least two points")
    policy = MaskPolicy(policy)
    if policy is MaskPolicy.KEEP_ALL:
        return np.ones((n, n), dtype=bool)
    n_close, n_far = mask_counts(n, policy)
    keep = np.eye(n, dtype=bool)
    cols = np.arange(n)
    for i in range(n):
        others = cols[cols != i]
        order = others[np.argsort(d[i, others], kind="stable")]
        keep[i, order[:n_close]] = True
        if n_far:
            keep[i, order[-n_far:]] = True
    return keep


def scale_by_error(d, e) -> np.ndarray:
    """Scale distances by error factors in [1, 2].

    ``e`` may be a scalar, a length-N vector (pair (i, j) scaled by
    ``max(e_i, e_j)``) or an N x N matrix.  The result is re-symmetrized and
    keeps a zero diagonal.
    """
    d = _as_square(d)
    n = d.shape[0]
    e = np.asarray(e, dtype=np.float64)
    if np.any(~np.isfinite(e)) or np.any(e < 1.0) or np.any(e > 2.0):
        raise ValueError("error factors must lie in [1, 2]")
    if e.ndim == 0:
        factor = e
    elif e.ndim == 1:
        if e.shape[0] != n:
            raise ValueError(f"factor vector of length {e.shape[0]} does not match n={n}")
        factor = np.maximum(e[:, None], e[None, :])
    elif e.shape == d.shape:
        factor = e
    else:
        raise ValueError(f"factor shape {e.shape} does not conform to {d.shape}")
    m = d * factor
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 0.0)
    return m
