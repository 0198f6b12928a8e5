"""IVF product quantization on residuals with asymmetric distance lookup.

Vectors are filed under a coarse quantizer as byte codes: the residual
(vector minus its coarse centroid) is split into m slices, each quantized
against its own sub-codebook of up to 256 centroids. A query never decodes
candidates; it builds one table of slice-to-centroid distances per probed
list and sums m lookups per candidate. Distances in results are those
estimates, so every result is flagged approximate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, EmbeddingSet, SearchResult, squared_l2_batch, top_k_smallest
from .flat import query_matrix, run_per_query
from .ivf_flat import probe_order, split_posting_lists
from .kmeans import Codebook, assign, kmeans_train

__all__ = [
    "PqParams",
    "IvfPqIndex",
    "ivf_pq_train",
    "ivf_pq_build",
    "ivf_pq_encode",
    "ivf_pq_decode",
    "ivf_pq_search",
]

KSUB = 256  # byte codes: one u8 per subspace per vector


@dataclass(frozen=True)
class PqParams:
    """Product-quantizer shape: m subspaces, 256-entry sub-codebooks."""

    m: int
    ksub: int = KSUB

    def __post_init__(self) -> None:
        if self.m < 1:
            raise DataError(f"m must be >= 1, got {self.m}")
        if self.ksub != KSUB:
            raise DataError(f"ksub is fixed at {KSUB}, got {self.ksub}")


@dataclass(frozen=True)
class IvfPqIndex:
    coarse: Codebook
    params: PqParams
    subs: tuple[Codebook, ...]
    list_ids: tuple[np.ndarray, ...]
    list_codes: tuple[np.ndarray, ...]
    labels: list[str]
    normalized: bool

    def __post_init__(self) -> None:
        m = self.params.m
        if self.coarse.dim % m != 0:
            raise DataError(f"dim {self.coarse.dim} not divisible by m={m}")
        if len(self.subs) != m:
            raise DataError(f"expected {m} sub-codebooks, got {len(self.subs)}")
        sub = self.coarse.dim // m
        for j, cb in enumerate(self.subs):
            if cb.dim != sub:
                raise DataError(f"sub-codebook {j} dim {cb.dim}, expected {sub}")
            if cb.k > KSUB:
                raise DataError(f"sub-codebook {j} has k={cb.k} > {KSUB}")
        if len(self.list_ids) != self.coarse.k or len(self.list_codes) != self.coarse.k:
            raise DataError("posting list count does not match nlist")
        total = 0
        caps = np.asarray([cb.k for cb in self.subs], dtype=np.int64)
        for ids, codes in zip(self.list_ids, self.list_codes):
            if codes.shape != (ids.shape[0], m):
                raise DataError("code block shape does not match its posting list")
            if codes.shape[0] and np.any(codes.max(axis=0) >= caps):
                raise DataError("code byte indexes past its sub-codebook")
            total += ids.shape[0]
            ids.setflags(write=False)
            codes.setflags(write=False)
        if total != len(self.labels):
            raise DataError("posting lists do not cover exactly the labeled vectors")

    @property
    def nlist(self) -> int:
        return self.coarse.k

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def subdim(self) -> int:
        return self.coarse.dim // self.params.m

    @property
    def dim(self) -> int:
        return self.coarse.dim

    @property
    def count(self) -> int:
        return len(self.labels)


def _train_parts(base: EmbeddingSet, nlist: int, m: int, seed: int, max_iters: int):
    if nlist < 1:
        raise DataError(f"nlist must be >= 1, got {nlist}")
    if base.count < KSUB:
        raise DataError(
            f"need at least {KSUB} vectors to train sub-codebooks, got {base.count}"
        )
    if base.count < nlist:
        raise DataError(f"nlist {nlist} exceeds base size {base.count}")
    if base.dim % m != 0:
        raise DataError(f"dim {base.dim} not divisible by m={m}")
    params = PqParams(m=m)
    sub = base.dim // m
    coarse = kmeans_train(base.vectors, nlist, max_iters=max_iters, seed=seed)
    coarse_labels = assign(base.vectors, coarse).labels
    x64 = base.vectors.astype(np.float64)
    residuals = (x64 - coarse.centroids.astype(np.float64)[coarse_labels]).astype(
        np.float32
    )
    subs: list[Codebook] = []
    codes = np.empty((base.count, m), dtype=np.uint8)
    for j in range(m):
        slices = residuals[:, j * sub : (j + 1) * sub]
        distinct = np.unique(slices, axis=0).shape[0]
        # Sub-codebook seeds are offset so no subspace shares the coarse
        # quantizer's stream; k caps at the distinct slice count.
        cb = kmeans_train(
            slices, min(KSUB, distinct), max_iters=max_iters, seed=seed + 1 + j
        )
        subs.append(cb)
        codes[:, j] = assign(slices, cb).labels
    return params, coarse, tuple(subs), coarse_labels, codes


def ivf_pq_train(
    base: EmbeddingSet, nlist: int, m: int, seed: int = 0, max_iters: int = 25
) -> tuple[Codebook, tuple[Codebook, ...]]:
    """Train and return (coarse codebook, m residual sub-codebooks)."""
    _, coarse, subs, _, _ = _train_parts(base, nlist, m, seed, max_iters)
    return coarse, subs


def ivf_pq_build(
    base: EmbeddingSet, nlist: int, m: int, seed: int = 0, max_iters: int = 25
) -> IvfPqIndex:
    """Train quantizers and file every vector as (id, m code bytes)."""
    params, coarse, subs, coarse_labels, codes = _train_parts(
        base, nlist, m, seed, max_iters
    )
    list_ids = split_posting_lists(coarse_labels, nlist)
    list_codes = [np.ascontiguousarray(codes[ids]) for ids in list_ids]
    return IvfPqIndex(
        coarse=coarse,
        params=params,
        subs=subs,
        list_ids=tuple(list_ids),
        list_codes=tuple(list_codes),
        labels=list(base.labels),
        normalized=base.normalized,
    )


def _residual(index: IvfPqIndex, x64: np.ndarray, list_id: int) -> np.ndarray:
    r = x64 - index.coarse.centroids[list_id].astype(np.float64)
    return r.astype(np.float32)


def ivf_pq_encode(index: IvfPqIndex, x) -> tuple[int, np.ndarray]:
    """Quantize one vector to (list id, m code bytes)."""
    q = query_matrix(x, index.dim)
    if q.shape[0] != 1:
        raise DataError("encode takes a single vector")
    q64 = q[0].astype(np.float64)
    coarse_d = squared_l2_batch(index.coarse.centroids, q[0])
    list_id = int(np.argmin(coarse_d))
    r = _residual(index, q64, list_id)
    sub = index.subdim
    codes = np.empty(index.m, dtype=np.uint8)
    for j in range(index.m):
        d = squared_l2_batch(index.subs[j].centroids, r[j * sub : (j + 1) * sub])
        codes[j] = int(np.argmin(d))
    return list_id, codes


def ivf_pq_decode(index: IvfPqIndex, list_id: int, codes) -> np.ndarray:
    """Reconstruct coarse centroid + concatenated sub-centroids."""
    if not 0 <= list_id < index.nlist:
        raise DataError(f"list id {list_id} out of range [0, {index.nlist})")
    c = np.asarray(codes, dtype=np.int64)
    if c.shape != (index.m,):
        raise DataError(f"expected {index.m} codes, got shape {c.shape}")
    out = index.coarse.centroids[list_id].astype(np.float64).copy()
    sub = index.subdim
    for j in range(index.m):
        if not 0 <= c[j] < index.subs[j].k:
            raise DataError(
                f"code {int(c[j])} out of range [0, {index.subs[j].k}) in subspace {j}"
            )
        out[j * sub : (j + 1) * sub] += index.subs[j].centroids[c[j]].astype(np.float64)
    return out.astype(np.float32)


def adc_table(index: IvfPqIndex, query: np.ndarray, list_id: int) -> list[np.ndarray]:
    """Per-subspace distance table for one (query, probed list) pair.

    Entry [j][b] is the canonical squared L2 between slice j of the query's
    residual against this list's centroid and sub-centroid b.
    """
    q64 = np.asarray(query, dtype=np.float32).astype(np.float64)
    r = _residual(index, q64, list_id)
    sub = index.subdim
    return [
        squared_l2_batch(index.subs[j].centroids, r[j * sub : (j + 1) * sub])
        for j in range(index.m)
    ]


def ivf_pq_search(
    index: IvfPqIndex, queries, k: int, nprobe: int | None = None, threads: int = 1
) -> list[SearchResult]:
    """Rank candidates in the nprobe nearest lists by summed table lookups."""
    q = query_matrix(queries, index.dim)
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if nprobe is None:
        nprobe = max(1, index.nlist // 32)
    if not 1 <= nprobe <= index.nlist:
        raise DataError(f"nprobe must be in [1, {index.nlist}], got {nprobe}")

    def worker(i: int) -> SearchResult:
        probes = probe_order(index.coarse, q[i], nprobe)
        id_parts: list[np.ndarray] = []
        est_parts: list[np.ndarray] = []
        for c in probes:
            ids = index.list_ids[c]
            id_parts.append(ids)
            codes = index.list_codes[c]
            tables = adc_table(index, q[i], int(c))
            lookups = np.empty((ids.shape[0], index.m), dtype=np.float64)
            for j in range(index.m):
                lookups[:, j] = tables[j][codes[:, j]]
            est_parts.append(lookups.sum(axis=1))
        ids = np.concatenate(id_parts)
        est = np.concatenate(est_parts)
        kk = min(k, ids.shape[0])
        ids_k, d_k = top_k_smallest(est, ids, kk) if kk else (ids, est)
        return SearchResult(ids=ids_k, dists=d_k, approximate=True)

    return run_per_query(q.shape[0], threads, worker)
