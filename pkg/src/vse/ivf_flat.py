"""Inverted-file index with exact post-verification.

The base set is partitioned into nlist posting lists by a k-means coarse
quantizer. A query ranks the coarse centroids, scans only the nprobe
nearest lists, and orders those candidates by exact squared L2 on the full
stored vectors. Probing every list reproduces the flat index bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, EmbeddingSet, SearchResult, squared_l2_batch, top_k_smallest
from .flat import query_matrix, run_per_query
from .kmeans import Codebook, assign, kmeans_train

__all__ = ["IvfFlatIndex", "ivf_flat_build", "ivf_flat_search", "default_nprobe"]


def default_nprobe(nlist: int) -> int:
    return max(1, nlist // 32)


def probe_order(coarse: Codebook, query: np.ndarray, nprobe: int) -> np.ndarray:
    """The nprobe coarse centroids nearest the query, (distance, id) order."""
    d = squared_l2_batch(coarse.centroids, query)
    ids, _ = top_k_smallest(d, np.arange(coarse.k, dtype=np.int64), nprobe)
    return ids


def split_posting_lists(labels: np.ndarray, nlist: int) -> list[np.ndarray]:
    """Ascending base ids per cluster; empty lists stay as empty arrays."""
    return [np.flatnonzero(labels == j).astype(np.int64) for j in range(nlist)]


@dataclass(frozen=True)
class IvfFlatIndex:
    coarse: Codebook
    list_ids: tuple[np.ndarray, ...]
    list_vectors: tuple[np.ndarray, ...]
    labels: list[str]
    normalized: bool

    def __post_init__(self) -> None:
        if len(self.list_ids) != self.coarse.k or len(self.list_vectors) != self.coarse.k:
            raise DataError("posting list count does not match nlist")
        total = sum(ids.shape[0] for ids in self.list_ids)
        if total != len(self.labels):
            raise DataError("posting lists do not cover exactly the labeled vectors")
        for ids, vecs in zip(self.list_ids, self.list_vectors):
            ids.setflags(write=False)
            vecs.setflags(write=False)

    @property
    def nlist(self) -> int:
        return self.coarse.k

    @property
    def dim(self) -> int:
        return self.coarse.dim

    @property
    def count(self) -> int:
        return len(self.labels)


def ivf_flat_build(base: EmbeddingSet, nlist: int, seed: int = 0, max_iters: int = 25) -> IvfFlatIndex:
    """Train the coarse quantizer and file every vector under its nearest list."""
    if nlist < 1:
        raise DataError(f"nlist must be >= 1, got {nlist}")
    if nlist > base.count:
        raise DataError(f"nlist {nlist} exceeds base size {base.count}")
    coarse = kmeans_train(base.vectors, nlist, max_iters=max_iters, seed=seed)
    labels = assign(base.vectors, coarse).labels
    list_ids = split_posting_lists(labels, nlist)
    list_vectors = [np.ascontiguousarray(base.vectors[ids]) for ids in list_ids]
    return IvfFlatIndex(
        coarse=coarse,
        list_ids=tuple(list_ids),
        list_vectors=tuple(list_vectors),
        labels=list(base.labels),
        normalized=base.normalized,
    )


def ivf_flat_search(
    index: IvfFlatIndex, queries, k: int, nprobe: int | None = None, threads: int = 1
) -> list[SearchResult]:
    """Scan the nprobe nearest lists, rank candidates by exact distance.

    Fewer than k candidates in the probed lists returns the short list.
    """
    q = query_matrix(queries, index.dim)
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if nprobe is None:
        nprobe = default_nprobe(index.nlist)
    if not 1 <= nprobe <= index.nlist:
        raise DataError(f"nprobe must be in [1, {index.nlist}], got {nprobe}")
    exhaustive = nprobe == index.nlist

    def worker(i: int) -> SearchResult:
        probes = probe_order(index.coarse, q[i], nprobe)
        cand_ids = [index.list_ids[c] for c in probes]
        cand_dists = [squared_l2_batch(index.list_vectors[c], q[i]) for c in probes]
        ids = np.concatenate(cand_ids) if cand_ids else np.empty(0, dtype=np.int64)
        dists = np.concatenate(cand_dists) if cand_dists else np.empty(0)
        kk = min(k, ids.shape[0])
        ids_k, d_k = top_k_smallest(dists, ids, kk) if kk else (ids, dists)
        return SearchResult(ids=ids_k, dists=d_k, approximate=not exhaustive)

    return run_per_query(q.shape[0], threads, worker)
