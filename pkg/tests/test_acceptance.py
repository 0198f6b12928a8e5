"""End-to-end acceptance checks, one test per required property.

Each test prints a single [acceptance] PASS/FAIL line so the suite doubles
as a checklist when run with pytest -v -s. The constructions are seeded and
the expectations are either exact or carry the stated tolerance; nothing is
tuned to the implementation beyond the pinned seeds documented in
constructions.py.
"""

import time
from contextlib import contextmanager

import numpy as np

from constructions import LOSSLESS_COARSE_INERTIA, LOSSLESS_SEED, lossless_set
from oracles import brute_force_search, lloyd_reference
from vse import (
    EmbeddingSet,
    IdentityFolder,
    SplitSpec,
    StrategyConfig,
    clean_identity,
    flat_build,
    flat_search,
    ivf_flat_build,
    ivf_flat_search,
    ivf_pq_build,
    ivf_pq_decode,
    ivf_pq_encode,
    ivf_pq_search,
    kmeans_train,
    load_index,
    make_split,
    run_benchmark,
    save_index,
    synthetic_gallery,
)
from vse.ivf_pq import adc_table


@contextmanager
def criterion(name, budget_s):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    if elapsed > budget_s:
        print(f"[acceptance] {name}: FAIL (took {elapsed:.1f}s, "
              f"budget {budget_s}s)")
        raise AssertionError(
            f"{name} exceeded its time budget: {elapsed:.1f}s > {budget_s}s"
        )
    print(f"[acceptance] {name}: PASS ({elapsed:.1f}s)")


def random_base(rng, n, d):
    rows = rng.standard_normal((n, d)).astype(np.float32)
    return EmbeddingSet(
        vectors=rows, labels=[f"r{i}" for i in range(n)], normalized=False
    )


def test_flat_search_oracle_exactness():
    with criterion("flat-search oracle exactness, 50 instances", 120):
        rng = np.random.default_rng(1001)
        cases = [(d, k) for d in (8, 64, 512) for k in (1, 10, 100)]
        instance = 0
        while instance < 50:
            for d, k in cases:
                if instance >= 50:
                    break
                n = int(rng.integers(max(k, 200), 10_001))
                rows = rng.standard_normal((n, d)).astype(np.float32)
                # plant duplicates so ties exercise the id ordering
                dup = int(rng.integers(0, n - 1))
                rows[dup + 1] = rows[dup]
                base = EmbeddingSet(
                    vectors=rows,
                    labels=[f"r{i}" for i in range(n)],
                    normalized=False,
                )
                queries = rng.standard_normal((3, d)).astype(np.float32)
                queries[0] = rows[dup]
                got = flat_search(flat_build(base), queries, k=k)
                want = brute_force_search(rows, queries, k)
                for r, (ids, dists) in zip(got, want):
                    assert np.array_equal(r.ids, ids)
                    assert np.array_equal(r.dists, dists)
                instance += 1


def test_full_probe_equivalence():
    with criterion("full-probe IVF equals flat, 20 instances", 120):
        rng = np.random.default_rng(1002)
        instance = 0
        while instance < 20:
            for nlist in (1, 4, 16, 64):
                if instance >= 20:
                    break
                n = int(rng.integers(max(nlist, 100), 3000))
                d = int(rng.choice([8, 32]))
                base = random_base(rng, n, d)
                queries = rng.standard_normal((5, d)).astype(np.float32)
                k = int(rng.integers(1, min(20, n) + 1))
                ivf = ivf_flat_build(base, nlist=nlist, seed=instance)
                flat = flat_build(base)
                a = ivf_flat_search(ivf, queries, k=k, nprobe=nlist)
                b = flat_search(flat, queries, k=k)
                for ra, rb in zip(a, b):
                    assert np.array_equal(ra.ids, rb.ids)
                    assert np.array_equal(ra.dists, rb.dists)
                instance += 1


def test_adc_decomposition():
    with criterion("ADC equals reconstruction distance, 1000 pairs", 30):
        rng = np.random.default_rng(1003)
        base = random_base(rng, 2000, 32)
        idx = ivf_pq_build(base, nlist=8, m=8, seed=7)
        for _ in range(1000):
            q = rng.standard_normal(32).astype(np.float32)
            i = int(rng.integers(0, 2000))
            lid, codes = ivf_pq_encode(idx, base.vectors[i])
            tables = adc_table(idx, q, lid)
            adc = sum(float(tables[j][codes[j]]) for j in range(8))
            rebuilt = ivf_pq_decode(idx, lid, codes)
            diff = q.astype(np.float64) - rebuilt.astype(np.float64)
            exact = float((diff * diff).sum())
            assert abs(adc - exact) <= 1e-4


def test_lossless_pq_equivalence():
    with criterion("lossless-PQ top-1 equals flat on 500 queries", 60):
        base = lossless_set()
        idx = ivf_pq_build(base, nlist=4, m=8, seed=LOSSLESS_SEED)
        # guard the construction itself: training must be exact, or the
        # equivalence below would be vacuous
        assert idx.coarse.inertia == LOSSLESS_COARSE_INERTIA
        assert all(cb.inertia == 0.0 for cb in idx.subs)
        flat = flat_build(base)
        queries = base.vectors[:500]
        want = flat_search(flat, queries, k=1)
        got = ivf_pq_search(idx, queries, k=1, nprobe=4)
        matches = sum(
            int(a.ids[0] == b.ids[0] and abs(a.dists[0] - b.dists[0]) <= 1e-4)
            for a, b in zip(want, got)
        )
        assert matches == 500


def test_strategy_ordering():
    with criterion("strategy ordering flat >= ivf-flat >= ivf-pq", 300):
        base = synthetic_gallery(
            n_identities=1000, per_identity=10, dim=128, sigma=0.05, seed=11
        )
        split = make_split(
            base,
            SplitSpec(n_identities=1000, in_gallery_fraction=0.8,
                      probes_per_identity=3, seed=11),
        )
        reports = run_benchmark(
            split.gallery,
            split.probes,
            split.truth,
            [
                StrategyConfig(kind="flat", seed=5),
                StrategyConfig(kind="ivf_flat", nlist=64, nprobe=2, seed=5),
                StrategyConfig(kind="ivf_pq", nlist=64, nprobe=2, m=16, seed=5),
            ],
        )
        flat_acc, ivf_acc, pq_acc = [r.closed_set_accuracy for r in reports]
        assert flat_acc >= ivf_acc >= pq_acc
        assert flat_acc >= 99.0


def test_speedup_direction():
    with criterion("ivf-flat nlist=256 nprobe=8 is >= 3x flat per query", 600):
        rng = np.random.default_rng(1006)
        rows = rng.standard_normal((200_000, 128)).astype(np.float32)
        base = EmbeddingSet(
            vectors=rows,
            labels=[f"r{i}" for i in range(200_000)],
            normalized=False,
        )
        queries = rng.standard_normal((32, 128)).astype(np.float32)
        flat = flat_build(base)
        ivf = ivf_flat_build(base, nlist=256, seed=0)

        def per_query(fn):
            times = []
            for _ in range(3):
                t0 = time.perf_counter()
                fn()
                times.append(time.perf_counter() - t0)
            return float(np.median(times)) / len(queries)

        t_flat = per_query(lambda: flat_search(flat, queries, k=10))
        t_ivf = per_query(
            lambda: ivf_flat_search(ivf, queries, k=10, nprobe=8)
        )
        speedup = t_flat / t_ivf
        print(f"  flat {t_flat * 1e3:.2f} ms/query, "
              f"ivf {t_ivf * 1e3:.2f} ms/query, speedup {speedup:.1f}x")
        assert speedup >= 3.0


def test_gallery_cleaning_rates():
    with criterion("cleaning removes >=99% outliers, keeps >=95% inliers", 60):
        rng = np.random.default_rng(1007)
        d = 64
        outliers_removed = inliers_kept = 0
        for f in range(100):
            center = rng.normal(size=d)
            center /= np.linalg.norm(center)
            inliers = center + rng.normal(scale=0.05, size=(20, d))
            dirs = rng.normal(size=(3, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            outliers = center + 25.0 * dirs  # 10 * sigma * 50
            feats = np.vstack([inliers, outliers]).astype(np.float32)
            rep = clean_identity(
                IdentityFolder(identity=f"id{f:03d}", features=feats), seed=f
            )
            removed = set(rep.removed.tolist())
            outliers_removed += sum(1 for i in (20, 21, 22) if i in removed)
            inliers_kept += sum(1 for i in range(20) if i not in removed)
        assert outliers_removed >= 297  # 99% of 300
        assert inliers_kept >= 1900  # 95% of 2000

        same = np.tile(np.float32([0.5] * d), (10, 1))
        rep = clean_identity(
            IdentityFolder(identity="same", features=same), seed=0
        )
        assert rep.kept.shape[0] == 10
        assert rep.removed.shape[0] == 0


def test_kmeans_oracle_equivalence():
    with criterion("k-means inertia equals reference Lloyd, 10 instances", 60):
        rng = np.random.default_rng(1008)
        for t in range(10):
            n = int(rng.integers(80, 800))
            d = int(rng.choice([4, 8, 16]))
            k = int(rng.integers(2, 9))
            if t % 3 == 2:
                # duplicate-heavy draw exercises empty-cluster repair
                pool = rng.standard_normal((max(2, k - 1), d)).astype(np.float32)
                x = pool[rng.integers(0, pool.shape[0], n)]
            else:
                x = rng.standard_normal((n, d)).astype(np.float32)
            seed = int(rng.integers(0, 2**31))
            cb = kmeans_train(x, k, seed=seed)
            _, _, ref_inertia = lloyd_reference(x, k, seed=seed)
            assert cb.inertia == ref_inertia


def test_split_protocol():
    with criterion("split 1000/0.8/3 yields 3000 probes, 800 in, 200 out", 60):
        base = synthetic_gallery(
            n_identities=1000, per_identity=10, dim=16, seed=13
        )
        split = make_split(
            base,
            SplitSpec(n_identities=1000, in_gallery_fraction=0.8,
                      probes_per_identity=3, seed=13),
        )
        assert split.probes.count == 3000
        assert len(split.in_gallery_identities) == 800
        assert len(split.out_of_gallery_identities) == 200
        assert not (
            set(split.probe_rows.tolist()) & set(split.gallery_rows.tolist())
        )


def test_persistence_bitwise(tmp_path):
    with criterion("save/load keeps search output bitwise, 1000 queries", 60):
        rng = np.random.default_rng(1010)
        base = random_base(rng, 3000, 64)
        queries = rng.standard_normal((1000, 64)).astype(np.float32)
        builders = [
            ("flat", lambda: flat_build(base), {}),
            ("ivf_flat", lambda: ivf_flat_build(base, nlist=32, seed=1),
             {"nprobe": 4}),
            ("ivf_pq", lambda: ivf_pq_build(base, nlist=32, m=8, seed=1),
             {"nprobe": 4}),
        ]
        searchers = {
            "flat": flat_search,
            "ivf_flat": ivf_flat_search,
            "ivf_pq": ivf_pq_search,
        }
        for name, build, kwargs in builders:
            idx = build()
            path = str(tmp_path / f"{name}.vidx")
            save_index(idx, path)
            back = load_index(path)
            a = searchers[name](idx, queries, k=5, **kwargs)
            b = searchers[name](back, queries, k=5, **kwargs)
            for ra, rb in zip(a, b):
                assert np.array_equal(ra.ids, rb.ids)
                assert np.array_equal(ra.dists, rb.dists)
