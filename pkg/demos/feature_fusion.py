#!/usr/bin/env python3
"""Compare fusion strategies for two feature views of the same faces.

Each identity gets two embeddings per image, standing in for features
extracted from two different networks (or the same network on two crops).
The two views carry partly independent noise, so averaging-style fusion
should beat either one alone (element-wise product can amplify noise
instead). The demo scores top-1 identification accuracy for each fusion
strategy on a gallery/probe split.

Run: python3 demos/feature_fusion.py
"""

import numpy as np

from vse import (
    EmbeddingSet,
    FusionStrategy,
    flat_build,
    fuse_sets,
    top1_identify,
)

rng = np.random.default_rng(3)

dim = 64
n_identities = 200
gallery_per = 4
noise = 1.3  # strong noise so single views make mistakes

identity_centers = rng.standard_normal((n_identities, dim)).astype(np.float32)


def draw_views(identity, count):
    """Two noisy views of `count` images of one identity."""
    clean = identity_centers[identity] + rng.normal(
        scale=0.1, size=(count, dim)
    )
    a = clean + rng.normal(scale=noise, size=(count, dim))
    b = clean + rng.normal(scale=noise, size=(count, dim))
    return a.astype(np.float32), b.astype(np.float32)


gal_a, gal_b, gal_labels = [], [], []
probe_a, probe_b, probe_labels = [], [], []
for i in range(n_identities):
    a, b = draw_views(i, gallery_per + 1)
    gal_a.append(a[:gallery_per])
    gal_b.append(b[:gallery_per])
    gal_labels.extend([f"id{i:03d}"] * gallery_per)
    probe_a.append(a[gallery_per:])
    probe_b.append(b[gallery_per:])
    probe_labels.append(f"id{i:03d}")


def as_set(blocks, labels):
    return EmbeddingSet(
        vectors=np.vstack(blocks).astype(np.float32),
        labels=list(labels),
        normalized=False,
    )


gallery_first = as_set(gal_a, gal_labels)
gallery_second = as_set(gal_b, gal_labels)
probes_first = as_set(probe_a, probe_labels)
probes_second = as_set(probe_b, probe_labels)


def accuracy(gallery, probes):
    index = flat_build(gallery)
    hits = sum(
        int(top1_identify(index, probes.vectors[i]) == probes.labels[i])
        for i in range(probes.count)
    )
    return 100.0 * hits / probes.count


print("strategy  top-1 accuracy")
single = fuse_sets(gallery_first, None, FusionStrategy.SINGLE)
single_probes = fuse_sets(probes_first, None, FusionStrategy.SINGLE)
print(f"single    {accuracy(single, single_probes):6.2f} %  (first view only)")

for strategy in (
    FusionStrategy.SUM,
    FusionStrategy.MAX,
    FusionStrategy.PROD,
    FusionStrategy.CONCAT,
    FusionStrategy.SORT,
):
    gallery = fuse_sets(gallery_first, gallery_second, strategy)
    probes = fuse_sets(probes_first, probes_second, strategy)
    print(f"{strategy.value:8s}  {accuracy(gallery, probes):6.2f} %")
