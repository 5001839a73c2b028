#!/usr/bin/env python3
"""Where do the different selectors place their picks?

Fits one model on a seed pool, asks each method for a batch, and
summarizes the picked points: 2-D PCA centroid and mean nearest-labeled
distance. Diversity-seeking methods should land farther from the
labeled set than a pure-uncertainty method.
"""
import numpy as np

from gradal import (
    METHODS,
    ArchSpec,
    PoolState,
    TrainConfig,
    init_model,
    make_blobs,
    select_batch,
    train,
)
from gradal.numerics import Rng, pca_project

dataset = make_blobs(n_samples=600, n_classes=3, n_features=8, spread=2.0, seed=4)
arch = ArchSpec(input_dim=8, n_classes=3, hidden_widths=(24,))

labeled = np.arange(30)
unlabeled = np.arange(30, 600)
pool = PoolState(labeled, unlabeled)
model = train(init_model(arch, 0), dataset, labeled,
              TrainConfig(learning_rate=0.01, epochs=25, seed=0))

proj = pca_project(dataset.features, 2)
lab_xy = proj[labeled]


def mean_gap(rows):
    # mean distance from each pick to its closest labeled point, in PCA plane
    d = np.sqrt(((proj[rows][:, None, :] - lab_xy[None, :, :]) ** 2).sum(axis=2))
    return d.min(axis=1).mean()


print("method   centroid(pc1,pc2)      mean dist to labeled")
for method in METHODS:
    batch = select_batch(method, model, dataset, pool, b=12,
                         rng=Rng(0, f"demo/{method}"))
    cx, cy = proj[batch.indices].mean(axis=0)
    print(f"{method:8s} ({cx:+7.3f}, {cy:+7.3f})    {mean_gap(batch.indices):.3f}")

overlap = {}
batches = {m: set(select_batch(m, model, dataset, pool, b=12,
                               rng=Rng(0, f"demo/{m}")).indices.tolist())
           for m in METHODS}
for a in METHODS:
    for b in METHODS:
        if a < b:
            overlap[(a, b)] = len(batches[a] & batches[b])
print("\npairwise batch overlap out of 12:")
for (a, b), n in overlap.items():
    print(f"  {a} vs {b}: {n}")
