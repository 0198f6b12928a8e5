#!/usr/bin/env python3
"""Accuracy/latency matrix over the standard strategy sweep.

Generates the seeded synthetic identification workload (identity centers
on the unit sphere plus Gaussian noise), splits it into gallery and
probes with some identities held out entirely, and runs the default
benchmark matrix. The same run is available from the command line as

    vse bench --seed 0 --identities 400 --per-identity 10 --dim 64

The script also prints how exact search cost scales with gallery size,
which is the reason the inverted-file variants exist.

Run: python3 demos/bench_matrix.py
"""

import time

import numpy as np

from vse import (
    EmbeddingSet,
    SplitSpec,
    default_bench_matrix,
    flat_build,
    flat_search,
    make_split,
    normalize_rows,
    reports_to_tsv,
    run_benchmark,
    synthetic_gallery,
)

identities = 400
per_identity = 10
dim = 64

base = synthetic_gallery(
    n_identities=identities, per_identity=per_identity, dim=dim,
    sigma=0.05, seed=0,
)
base = EmbeddingSet(
    vectors=normalize_rows(base.vectors), labels=base.labels, normalized=True
)
split = make_split(
    base,
    SplitSpec(n_identities=identities, in_gallery_fraction=0.8,
              probes_per_identity=3, seed=0),
)
print(f"gallery {split.gallery.count} x {dim}, probes {split.probes.count}, "
      f"{len(split.out_of_gallery_identities)} identities held out")

reports = run_benchmark(
    split.gallery, split.probes, split.truth, default_bench_matrix(seed=0)
)
print()
print(reports_to_tsv(reports))

# exact search cost grows linearly with the gallery; measure it directly
print("flat search scaling (64-d, k=10):")
rng = np.random.default_rng(1)
q = rng.standard_normal((8, dim)).astype(np.float32)
for n in (10_000, 40_000, 160_000):
    rows = rng.standard_normal((n, dim)).astype(np.float32)
    big = EmbeddingSet(
        vectors=rows, labels=[str(i) for i in range(n)], normalized=False
    )
    index = flat_build(big)
    t0 = time.perf_counter()
    flat_search(index, q, k=10)
    ms = (time.perf_counter() - t0) / len(q) * 1e3
    print(f"  N={n:7d}  {ms:7.2f} ms/query")
