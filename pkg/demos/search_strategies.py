#!/usr/bin/env python3
"""Walk through the three index kinds on one synthetic clustered dataset.

Builds an exact flat index, an inverted-file index, and an inverted-file
index with product-quantized residuals over the same 50,000 vectors, then
compares top-1 agreement against the flat baseline and the time each one
spends per query. Finishes with an nprobe sweep to show the recall/latency
trade-off knob.

Run: python3 demos/search_strategies.py
"""

import time

import numpy as np

from vse import (
    EmbeddingSet,
    flat_build,
    flat_search,
    ivf_flat_build,
    ivf_flat_search,
    ivf_pq_build,
    ivf_pq_search,
)

rng = np.random.default_rng(42)

# 500 clusters of 100 vectors each, 64-d, overlapping enough that the
# coarse routing actually loses some neighbors at small nprobe
centers = rng.standard_normal((500, 64)).astype(np.float32)
rows = np.repeat(centers, 100, axis=0)
rows += rng.normal(scale=0.8, size=rows.shape).astype(np.float32)
rows = rows.astype(np.float32)
base = EmbeddingSet(
    vectors=rows,
    labels=[f"vec{i:05d}" for i in range(rows.shape[0])],
    normalized=False,
)
queries = rows[::500] + rng.normal(scale=0.8, size=(100, 64)).astype(np.float32)
queries = queries.astype(np.float32)
print(f"base: {base.count} x {base.dim}, {len(queries)} queries")

print("\nbuilding indexes...")
t0 = time.perf_counter()
flat = flat_build(base)
print(f"  flat:     {time.perf_counter() - t0:6.2f} s")
t0 = time.perf_counter()
ivf = ivf_flat_build(base, nlist=128, seed=0)
print(f"  ivf_flat: {time.perf_counter() - t0:6.2f} s (nlist=128)")
t0 = time.perf_counter()
pq = ivf_pq_build(base, nlist=128, m=8, seed=0)
print(f"  ivf_pq:   {time.perf_counter() - t0:6.2f} s (nlist=128, m=8)")


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - t0) / len(queries) * 1e3


truth, flat_ms = timed(lambda: flat_search(flat, queries, k=1))
ivf_res, ivf_ms = timed(lambda: ivf_flat_search(ivf, queries, k=1, nprobe=4))
pq_res, pq_ms = timed(lambda: ivf_pq_search(pq, queries, k=1, nprobe=4))


def top1_agreement(results):
    return sum(
        int(r.ids[0] == t.ids[0]) for r, t in zip(results, truth)
    ) / len(truth)


print("\nstrategy   top-1 vs flat   ms/query")
print(f"flat            1.000      {flat_ms:8.3f}")
print(f"ivf_flat        {top1_agreement(ivf_res):.3f}      {ivf_ms:8.3f}")
print(f"ivf_pq          {top1_agreement(pq_res):.3f}      {pq_ms:8.3f}")

print("\nnprobe sweep on ivf_flat (recall of the exact top-1):")
for nprobe in (1, 2, 4, 8, 16, 32, 128):
    res, ms = timed(lambda: ivf_flat_search(ivf, queries, k=1, nprobe=nprobe))
    marker = " (exact, nprobe == nlist)" if nprobe == 128 else ""
    print(f"  nprobe={nprobe:3d}  recall={top1_agreement(res):.3f}  "
          f"{ms:7.3f} ms/query{marker}")
