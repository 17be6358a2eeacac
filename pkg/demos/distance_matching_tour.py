#!/usr/bin/env python3
# A walk through the building blocks: pairwise l1 distances, normalization,
# reward guidance, sparse masks, and one hidden layer trained on its own.

import numpy as np

from pdm_rl.distance import MaskPolicy, guide, neighborhood_mask, normalize, pairwise_l1
from pdm_rl.locloss import LocalLossSpec, LossVariant, layer_loss_and_grad
from pdm_rl.net import AdamState, adam_step

rng = np.random.default_rng(0)

# %% distances of a small batch
x = rng.normal(size=(6, 4))
d = pairwise_l1(x)
print("raw l1 distances\n", np.round(d, 2))

t = normalize(d)
print("normalized, largest entry is", t.entries.max())

# scaling the batch changes nothing after normalization
print("scale invariant:", np.allclose(normalize(pairwise_l1(7.5 * x)).entries, t.entries))

# %% reward guidance: low-value points get pushed away from everything
values = np.array([10.0, 9.0, 0.0, 8.0, 1.0, 10.0])
g = guide(d, values)
print("guided target row of the worst point:", np.round(g.entries[2], 3))
print("guided target row of a good point:   ", np.round(g.entries[0], 3))

# %% sparse variant: keep the closest and furthest quarter of each row
keep = neighborhood_mask(d, MaskPolicy.CLOSEST_AND_FURTHEST_QUARTER)
print("kept entries per row (incl. diagonal):", keep.sum(axis=1))

# %% train one 4 -> 32 tanh layer to reproduce the input geometry
batch = rng.normal(size=(64, 4))
target = normalize(pairwise_l1(batch))
w = rng.uniform(-0.5, 0.5, size=(4, 32))
b = np.zeros(32)
spec = LocalLossSpec(LossVariant.UNSUPERVISED, in_dim=4, out_dim=32)
opt = AdamState(rate=1e-2)

for step in range(301):
    res = layer_loss_and_grad(batch, w, b, target, spec)
    w, b = adam_step(opt, [w, b], [res.weight_grad, res.bias_grad])
    if step % 50 == 0:
        out = normalize(pairwise_l1(res.output)).entries
        corr = np.corrcoef(out.ravel(), target.entries.ravel())[0, 1]
        print(f"step {step:3d}  loss {res.loss:.4f}  distance correlation {corr:.3f}")
