"""Exit criteria for the index, one test (or test group) per criterion."""

import csv
import io
import itertools
import math
import time

import numpy as np
import pytest

from fatt.coding import CodingConfig, IndexCode, quantize_code
from fatt.harness import bench_scaling, build_index, run_qbe, scaling_csv, synthetic_dataset
from fatt.store import dumps, loads
from fatt.tree import FattConfig, FattTree, ImageEntry, child_index, parent_index
from fatt.wavelet import db4_filters, dwt2_pyramid, idwt2_pyramid

criterion = pytest.mark.criterion


@criterion(1, "perfect reconstruction, 50 x 64x64, J=3, max error < 1e-8, < 5 s")
def test_perfect_reconstruction():
    fb = db4_filters()
    start = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        x = np.random.default_rng(seed).uniform(0, 255, (64, 64))
        worst = max(worst, float(np.max(np.abs(idwt2_pyramid(dwt2_pyramid(x, 3, fb), fb) - x))))
    elapsed = time.perf_counter() - start
    assert worst < 1e-8
    assert elapsed < 5.0


@criterion(2, "subband chain 128/64/32/16 for 256x256, J=4")
def test_subband_chain():
    p = dwt2_pyramid(np.zeros((256, 256)), 4, db4_filters())
    assert tuple(triple[0].shape[0] for triple in p.details) == (128, 64, 32, 16)
    assert all(b.shape[0] == b.shape[1] for triple in p.details for b in triple)


@criterion(3, "db4 normalization, orthonormal shifts, 4 vanishing moments within 1e-10")
def test_filter_properties():
    h = db4_filters().h
    assert abs(h.sum() - math.sqrt(2)) < 1e-10
    for n in range(4):
        s = sum(h[k] * h[k - 2 * n] for k in range(8) if 0 <= k - 2 * n < 8)
        assert abs(s - (n == 0)) < 1e-10
    k = np.arange(8)
    for p in range(4):
        assert abs(np.sum((-1.0) ** k * k**p * h)) < 1e-10


# the printed range table, one (lower, upper, code) row per line; lower None means "x 0"
PRINTED_TABLE = [
    (None, 10, "00"), (10, 20, "01"), (20, 30, "02"), (30, 40, "03"), (40, 50, "04"),
    (50, 60, "05"), (60, 70, "06"), (70, 80, "07"), (80, 90, "08"), (90, 100, "09"),
    (100, 110, "10"), (110, 120, "11"), (120, 130, "12"), (130, 140, "13"), (140, 150, "14"),
    (150, None, "15"),
]


@criterion(4, "code table boundary battery reproduces digits 00-15")
def test_code_table():
    battery = [0.0] + [v for b in range(10, 151, 10) for v in (float(b), b + 0.0001)]
    for x in battery:
        expected = next(int(code) for lo, hi, code in PRINTED_TABLE
                        if (lo is None or x > lo) and (hi is None or x <= hi))
        assert quantize_code(x) == expected, x
    assert sorted({quantize_code(x) for x in battery}) == list(range(16))


@criterion(5, "child/parent addressing for B=2, B=3 and round trip up to 1e4")
def test_addressing():
    for a in range(1, 200):
        assert {child_index(a, j, 2) for j in range(2)} == {2 * a, 2 * a + 1}
        assert {child_index(a, j, 3) for j in range(3)} == {3 * a, 3 * a + 1, 3 * a + 2}
    for a in range(2, 200):
        assert parent_index(a, 2) == a // 2
    for b in (2, 3, 16):
        for a in range(1, 10_001):
            for j in range(b):
                assert parent_index(child_index(a, j, b), b) == a


@criterion(6, "capacity: B=2,m=4 holds 16 codes; B=3,m=4 holds 81")
@pytest.mark.parametrize("b,expected", [(2, 16), (3, 81)])
def test_capacity(b, expected):
    tree = FattTree(FattConfig(b, 4))
    for i, code in enumerate(itertools.product(range(b), repeat=4)):
        tree.insert(ImageEntry(f"{i}", code, [0.0]))
    stats = tree.stats()
    assert stats["occupied_leaves"] == expected == stats["capacity"]
    for bad in [(b,) + (0,) * 3, (0,) * 5]:
        with pytest.raises(ValueError):
            tree.insert(ImageEntry("extra", bad, [0.0]))


@criterion(7, "tolerance: 122300 found from 122301 (radius 1), not from a first-digit change")
def test_tolerance_rectification():
    tree = FattTree(FattConfig(16, 6))
    features = np.arange(54, dtype=float)
    tree.insert(ImageEntry("stored", IndexCode.parse("122300"), features))
    ranked, _ = tree.retrieve(features, IndexCode.parse("122301"), 5, radius=1)
    assert [i for i, _ in ranked] == ["stored"]
    ranked, _ = tree.retrieve(features, IndexCode.parse("222300"), 5, radius=1)
    assert ranked == []


@pytest.fixture(scope="module")
def scaling():
    start = time.perf_counter()
    rows = bench_scaling([100, 1000, 10000], FattConfig(16, 6, 1), seed=7)
    return rows, time.perf_counter() - start


@criterion(8, "exact-search node accesses <= m+1 and flat (<10%) for n = 100..10000, < 2 min")
def test_cost_flatness(scaling):
    rows, elapsed = scaling
    visits = [r.mean_nodes_visited for r in rows]
    assert all(v <= 6 + 1 for v in visits)
    assert (max(visits) - min(visits)) / min(visits) < 0.10
    assert elapsed < 120.0


@criterion(9, "retrieve equals brute-force ranking over candidate leaves on 20 databases")
def test_oracle_equivalence():
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        b, m, radius = 4, 3, int(rng.integers(0, 4))
        n = int(rng.integers(50, 501))
        tree = FattTree(FattConfig(b, m, radius))
        codes = rng.integers(0, b, (n, m))
        # coarse features make exact distance ties common
        feats = rng.integers(0, 3, (n, 4)).astype(float)
        entries = [ImageEntry(f"id{int(i):04d}", codes[i], feats[i]) for i in rng.permutation(n)]
        for e in entries:
            tree.insert(e)
        for _ in range(25):
            q_code = tuple(int(c) for c in rng.integers(0, b, m))
            q = rng.integers(0, 3, 4).astype(float)
            top_k = int(rng.integers(1, 20))
            ranked, stats = tree.retrieve(q, q_code, top_k, radius)

            exact = [e for e in entries if tuple(e.code) == q_code]
            cands = exact or [e for e in entries if tuple(e.code[:-1]) == q_code[:-1]
                              and 0 < abs(e.code[-1] - q_code[-1]) <= radius]
            brute = sorted(((math.sqrt(sum((a - c) ** 2 for a, c in zip(e.features, q))), e.id)
                            for e in cands), key=lambda t: (t[0], t[1]))
            assert [i for i, _ in ranked] == [i for _, i in brute[:top_k]]
            assert stats.distance_computations == len(cands)


@criterion(10, "index distance computations <= linear scan per query; aggregate ratio < 1 in CSV")
def test_baseline_dominance(scaling):
    rows, _ = scaling
    table = list(csv.DictReader(io.StringIO(scaling_csv(rows))))
    ratio = sum(float(r["mean_dist_comp"]) for r in table) / sum(float(r["mean_linear_comp"]) for r in table)
    assert ratio < 1
    for r in table:
        assert float(r["mean_dist_comp"]) < float(r["mean_linear_comp"])

    ds = synthetic_dataset(500, seed=7, side=128)
    cfg = CodingConfig.for_tree(16, 6)
    tree, _ = build_index(ds, FattConfig(16, 6, 2), cfg)
    report = run_qbe(tree, ds, ds.ids[:100], top_k=10, radius=2, coding_cfg=cfg)
    for row in report.rows:
        assert row.dist_comp <= row.linear_comp
    assert report.aggregates["dist_comp_ratio"] < 1


@criterion(11, "save/load behavioural identity and byte-identical saves")
def test_persistence_round_trip():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        b, m = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        coding = CodingConfig.for_tree(b, m, levels=3, k=2)
        tree = FattTree(FattConfig(b, m, int(rng.integers(0, b))), coding.n_features)
        for i in range(int(rng.integers(0, 300))):
            tree.insert(ImageEntry(f"e{int(rng.integers(0, 400))}", rng.integers(0, b, m),
                                   rng.random(coding.n_features), f"path/{i}"))
        data = dumps(tree, coding)
        assert dumps(tree, coding) == data
        loaded = loads(data)
        assert dumps(loaded.tree, loaded.coding) == data
        assert loaded.tree.stats() == tree.stats()
        for _ in range(60):
            code = tuple(int(c) for c in rng.integers(0, b, m))
            radius = int(rng.integers(0, b))
            q = rng.random(coding.n_features)
            la, sa = tree.tolerant_search(code, radius)
            lb, sb = loaded.tree.tolerant_search(code, radius)
            assert [x.address for x in la] == [x.address for x in lb] and sa == sb
            assert tree.search(code)[1] == loaded.tree.search(code)[1]
            assert tree.retrieve(q, code, 7, radius) == loaded.tree.retrieve(q, code, 7, radius)
