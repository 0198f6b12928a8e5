"""Independent reference implementations used by the oracle tests.

Everything here is written against the public contracts only, in the
plainest form possible (per-row loops, full sorts), so that agreement
with the library is evidence rather than tautology. Only numpy is used.
"""

import numpy as np


def brute_force_search(base, queries, k):
    """Full-sort k nearest rows per query under squared L2.

    base and queries are float32 arrays. Distances are computed row by
    row in float64 and the full distance list is sorted by (distance,
    row id) before truncating to k. Returns (ids, dists) pairs, one per
    query, with int64 ids and float64 distances.
    """
    base = np.asarray(base, dtype=np.float32)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float32))
    n = base.shape[0]
    row_ids = np.arange(n, dtype=np.int64)
    out = []
    for q in queries:
        q64 = q.astype(np.float64)
        dists = np.empty(n, dtype=np.float64)
        for i in range(n):
            diff = base[i].astype(np.float64) - q64
            dists[i] = (diff * diff).sum()
        order = np.lexsort((row_ids, dists))[:k]
        out.append((row_ids[order], dists[order]))
    return out


def lloyd_reference(x, k, max_iters=25, seed=0):
    """Plain Lloyd iteration with the same seeding and repair contract.

    Init picks k distinct rows with default_rng(seed).choice. Empty
    clusters are repaired ascending by stealing the farthest member of
    the largest cluster. Means accumulate in float64 and round to
    float32. Stops when labels stop changing or after max_iters mean
    updates. Returns (centroids, labels, inertia).
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    cents = x[rng.choice(n, size=k, replace=False)].astype(np.float32).copy()

    def point_dists(c):
        # one column per centroid, canonical f64 row reduction
        d = np.empty((n, k))
        for j in range(k):
            diff = x.astype(np.float64) - c[j].astype(np.float64)
            d[:, j] = (diff * diff).sum(axis=1)
        return d

    def repair(labels, c):
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            donor = int(np.argmax(counts))
            members = np.flatnonzero(labels == donor)
            diff = x[members].astype(np.float64) - c[donor].astype(np.float64)
            far = members[int(np.argmax((diff * diff).sum(axis=1)))]
            labels[far] = j
            c[j] = x[far]
            counts[donor] -= 1
            counts[j] = 1
        return labels, c

    def cost(labels, c):
        diff = x.astype(np.float64) - c[labels].astype(np.float64)
        return float(np.sum((diff * diff).sum(axis=1)))

    labels = np.argmin(point_dists(cents), axis=1)
    labels, cents = repair(labels, cents)
    inertia = cost(labels, cents)
    for _ in range(max_iters):
        for j in range(k):
            members = x[labels == j]
            cents[j] = (
                members.astype(np.float64).sum(axis=0) / members.shape[0]
            ).astype(np.float32)
        new = np.argmin(point_dists(cents), axis=1)
        new, cents = repair(new, cents)
        inertia = cost(new, cents)
        same = bool(np.array_equal(new, labels))
        labels = new
        if same:
            break
    return cents, labels, inertia
