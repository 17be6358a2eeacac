"""Compiled inner loops for l1 pairwise distances and their adjoint.

Loops run in a fixed (i, j, k) order so results are bit-reproducible and
identical to a naive double loop summing over features left to right.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def l1_pairwise(x):
    n, d = x.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                s += abs(x[i, k] - x[j, k])
            out[i, j] = s
            out[j, i] = s
    return out


@numba.njit(cache=True)
def l1_pairwise_adjoint(y, grad_dist):
    """Pull a gradient w.r.t. the distance matrix back onto the points.

    ``grad_dist[i, j]`` is dL/dD_ij for D_ij = sum_k |y_ik - y_jk|.  The sign
    of zero is taken as zero.
    """
    n, d = y.shape
    out = np.zeros((n, d))
    for i in range(n):
        for j in range(i + 1, n):
            s = grad_dist[i, j] + grad_dist[j, i]
            if s == 0.0:
                continue
            for k in range(d):
                diff = y[i, k] - y[j, k]
                if diff > 0.0:
                    out[i, k] += s
                    out[j, k] -= s
                elif diff < 0.0:
                    out[i, k] -= s
                    out[j, k] += s
    return out
