"""Dataset ingestion, index building, query-by-example evaluation and scaling runs."""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coding import CodingConfig, encode_image
from .imaging import load_raster, synthetic_image
from .tree import FattConfig, FattTree, ImageEntry
from .wavelet import db4_filters

log = logging.getLogger(__name__)

SCALING_COLUMNS = ("n", "mean_nodes_visited", "mean_dist_comp", "mean_linear_comp", "build_ms")
EVAL_COLUMNS = (
    "query_id", "rank", "result_id", "distance", "precision_at_k", "nodes_visited", "dist_comp",
)


@dataclass
class DatasetEntry:
    id: str
    raster: np.ndarray
    label: str = "uncategorized"
    path: str = ""


@dataclass
class Dataset:
    entries: list
    name: str = "dataset"

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("dataset ids must be unique")
        shapes = {e.raster.shape for e in self.entries}
        if len(shapes) > 1:
            raise ValueError(f"rasters differ in size: {sorted(shapes)}")
        self._by_id = {e.id: e for e in self.entries}

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, id_):
        return self._by_id[id_]

    def __contains__(self, id_):
        return id_ in self._by_id

    @property
    def ids(self) -> list:
        return [e.id for e in self.entries]


def ingest_dataset(source, target_side: int = 256, name: str | None = None) -> Dataset:
    """Decode every file under ``source``; undecodable files are skipped with a warning.

    The category label is the name of the file's parent directory, or
    ``"uncategorized"`` for files directly under ``source``.
    """
    root = Path(source)
    if target_side < 1 or target_side & (target_side - 1):
        raise ValueError(f"target side must be a power of two, got {target_side}")
    files = sorted(p for p in root.rglob("*") if p.is_file())
    if not files:
        raise ValueError(f"no files found under {root}")
    entries = []
    for path in files:
        try:
            raster = load_raster(path, target_side)
        except Exception as exc:  # PIL raises a zoo of types on bad input
            log.warning("skipping %s: %s", path, exc)
            continue
        rel = path.relative_to(root)
        label = rel.parent.name if rel.parent != Path(".") else "uncategorized"
        entries.append(DatasetEntry(rel.as_posix(), raster, label, str(path)))
    if not entries:
        raise ValueError(f"no decodable images under {root}")
    return Dataset(entries, name or root.name)


def synthetic_dataset(n: int, seed: int = 7, side: int = 256, n_categories: int = 10) -> Dataset:
    entries = []
    for i in range(n):
        pixels, label = synthetic_image(i, seed, side, n_categories)
        entries.append(DatasetEntry(f"synth-{i:06d}", pixels, label))
    return Dataset(entries, f"synthetic-{seed}-{n}")


@dataclass
class BuildReport:
    entries: int
    build_ms: float
    stats: dict
    occupancy_histogram: dict


def build_index(dataset: Dataset, fatt_cfg: FattConfig | None = None, coding_cfg: CodingConfig | None = None):
    """Code and insert every raster; returns ``(tree, BuildReport)``."""
    if not len(dataset):
        raise ValueError("cannot build an index from an empty dataset")
    fatt_cfg = fatt_cfg or FattConfig()
    coding_cfg = coding_cfg or CodingConfig.for_tree(fatt_cfg.branching, fatt_cfg.depth)
    if (coding_cfg.branching, coding_cfg.depth) != (fatt_cfg.branching, fatt_cfg.depth):
        raise ValueError(
            f"coding produces {coding_cfg.depth} digits over {coding_cfg.branching} values, "
            f"tree expects {fatt_cfg.depth} over {fatt_cfg.branching}"
        )
    fb = db4_filters()
    tree = FattTree(fatt_cfg, coding_cfg.n_features)
    start = time.perf_counter()
    for e in dataset.entries:
        try:
            code, feats = encode_image(e.raster, coding_cfg, fb)
            tree.insert(ImageEntry(e.id, code, feats, e.path))
        except ValueError as exc:
            raise ValueError(f"{e.id}: {exc}") from exc
    elapsed = (time.perf_counter() - start) * 1000.0
    return tree, BuildReport(len(tree), elapsed, tree.stats(), tree.occupancy_histogram())


@dataclass
class QueryRow:
    query_id: str
    results: list
    precision: float
    nodes_visited: int
    dist_comp: int
    linear_comp: int
    wall_ms: float
    linear_ranking: list = field(default_factory=list)


@dataclass
class EvalReport:
    rows: list
    top_k: int
    radius: int

    def _col(self, attr):
        return [getattr(r, attr) for r in self.rows]

    @property
    def aggregates(self) -> dict:
        out = {}
        for attr in ("precision", "nodes_visited", "dist_comp", "linear_comp", "wall_ms"):
            vals = self._col(attr)
            out[f"mean_{attr}"] = statistics.fmean(vals) if vals else 0.0
            out[f"median_{attr}"] = statistics.median(vals) if vals else 0.0
        linear = sum(self._col("linear_comp"))
        out["dist_comp_ratio"] = sum(self._col("dist_comp")) / linear if linear else 0.0
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVAL_COLUMNS)
        for r in self.rows:
            for rank, (rid, dist) in enumerate(r.results, start=1):
                w.writerow([r.query_id, rank, rid, repr(dist), repr(r.precision), r.nodes_visited, r.dist_comp])
        return buf.getvalue()


def linear_scan(tree: FattTree, query_features):
    """Brute-force Euclidean ranking of every stored entry, ties by id."""
    q = np.asarray(query_features, dtype=np.float64).ravel()
    scored = sorted((float(np.linalg.norm(e.features - q)), e.id) for e in tree.iter_entries())
    return [(i, d) for d, i in scored]


def run_qbe(tree: FattTree, dataset: Dataset, queries, top_k: int = 10, radius: int | None = None,
            coding_cfg: CodingConfig | None = None) -> EvalReport:
    """Query-by-example with each listed dataset image, compared to a linear scan."""
    queries = list(queries)
    for q in queries:
        if q not in dataset:
            raise KeyError(f"unknown query id {q!r}")
    coding_cfg = coding_cfg or CodingConfig.for_tree(tree.branching, tree.depth)
    radius = tree.config.tolerance if radius is None else radius
    fb = db4_filters()
    labels = {e.id: e.label for e in dataset.entries}
    rows = []
    for qid in queries:
        code, feats = encode_image(dataset[qid].raster, coding_cfg, fb)
        t0 = time.perf_counter()
        ranked, stats = tree.retrieve(feats, code, top_k + 1, radius)
        wall = (time.perf_counter() - t0) * 1000.0
        results = [(i, d) for i, d in ranked if i != qid][:top_k]
        hits = sum(labels.get(i) == labels[qid] for i, _ in results)
        precision = hits / len(results) if results else 0.0
        linear = linear_scan(tree, feats)
        rows.append(QueryRow(qid, results, precision, stats.nodes_visited,
                             stats.distance_computations, len(linear), wall, linear))
    return EvalReport(rows, top_k, radius)


@dataclass
class ScalingRow:
    n: int
    mean_nodes_visited: float
    mean_dist_comp: float
    mean_linear_comp: float
    build_ms: float


def bench_scaling(sizes, fatt_cfg: FattConfig | None = None, coding_cfg: CodingConfig | None = None,
                  seed: int = 7, side: int = 128, n_queries: int = 50, n_categories: int = 10):
    """Build indexes over nested synthetic datasets and measure query costs.

    The query battery is the first ``n_queries`` images, present at every size.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes) or not sizes or sizes[0] < 1:
        raise ValueError("sizes must be positive and ascending")
    fatt_cfg = fatt_cfg or FattConfig()
    coding_cfg = coding_cfg or CodingConfig.for_tree(fatt_cfg.branching, fatt_cfg.depth)
    fb = db4_filters()
    battery = []
    for i in range(min(n_queries, sizes[0])):
        pixels, _ = synthetic_image(i, seed, side, n_categories)
        battery.append(encode_image(pixels, coding_cfg, fb))
    rows = []
    for n in sizes:
        tree, report = build_index(synthetic_dataset(n, seed, side, n_categories), fatt_cfg, coding_cfg)
        visits, comps = [], []
        for code, feats in battery:
            _, exact = tree.search(code)
            _, stats = tree.retrieve(feats, code, 10)
            visits.append(exact.nodes_visited)
            comps.append(stats.distance_computations)
        rows.append(ScalingRow(n, statistics.fmean(visits), statistics.fmean(comps), float(len(tree)),
                               report.build_ms))
    return rows


def flatness(rows) -> float:
    """Relative spread ``(max - min) / min`` of mean exact-search node visits."""
    v = [r.mean_nodes_visited for r in rows]
    return (max(v) - min(v)) / min(v)


def scaling_csv(rows, timings: bool = False) -> str:
    """CSV text; ``build_ms`` is written as ``NA`` unless ``timings`` so output is reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCALING_COLUMNS)
    for r in rows:
        w.writerow([r.n, repr(r.mean_nodes_visited), repr(r.mean_dist_comp), repr(r.mean_linear_comp),
                    f"{r.build_ms:.3f}" if timings else "NA"])
    return buf.getvalue()
