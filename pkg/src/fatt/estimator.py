"""scikit-learn style wrappers around the coder and the index tree."""

from __future__ import annotations

from collections import Counter

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .coding import CodeTable, CodingConfig, default_subbands, encode_image
from .tree import FattConfig, FattTree, ImageEntry
from .wavelet import db4_filters, max_levels


def check_rasters(X, levels: int | None = None) -> np.ndarray:
    """Validate a batch of square grayscale rasters into an ``(n, side, side)`` float array.

    Accepts a 3-D array, a sequence of 2-D arrays, or a single 2-D raster.
    """
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = X[None]
    try:
        arr = np.asarray(X, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValueError("rasters must share one shape and be numeric") from None
    if arr.ndim != 3:
        raise ValueError(f"expected rasters of shape (n, side, side), got {arr.shape}")
    n, rows, cols = arr.shape
    if n == 0:
        raise ValueError("need at least one raster")
    if rows != cols:
        raise ValueError(f"rasters must be square, got {rows}x{cols}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("rasters contain NaN or infinite values")
    if levels is not None:
        feasible = max_levels((rows, cols), db4_filters().length)
        if levels > feasible:
            raise ValueError(
                f"{rows}x{cols} rasters support at most {feasible} db4 levels, {levels} requested"
            )
    return arr


class WaveletCoder(TransformerMixin, BaseEstimator):
    """Map rasters to tile-energy feature vectors and index codes.

    Stateless apart from recording the raster side seen at ``fit``.
    """

    def __init__(self, branching=16, depth=6, levels=4, k=3, scale=10.0,
                 range_max=160.0, normalize=True, subbands=None):
        self.branching = branching
        self.depth = depth
        self.levels = levels
        self.k = k
        self.scale = scale
        self.range_max = range_max
        self.normalize = normalize
        self.subbands = subbands

    def _make_config(self) -> CodingConfig:
        subbands = self.subbands or default_subbands(self.depth, self.levels)
        if len(subbands) != self.depth:
            raise ValueError(f"{len(subbands)} subbands selected for depth {self.depth}")
        return CodingConfig(self.levels, self.k, tuple(subbands), CodeTable.uniform(self.branching),
                            self.normalize, self.scale, self.range_max)

    def fit(self, X, y=None):
        arr = check_rasters(X, self.levels)
        self.config_ = self._make_config()
        self.side_ = arr.shape[1]
        self.n_features_out_ = self.config_.n_features
        return self

    def _encode_all(self, X):
        check_is_fitted(self, "config_")
        arr = check_rasters(X, self.levels)
        if arr.shape[1] != self.side_:
            raise ValueError(f"coder was fitted on {self.side_}px rasters, got {arr.shape[1]}px")
        fb = db4_filters()
        return [encode_image(img, self.config_, fb) for img in arr]

    def transform(self, X):
        return np.vstack([f for _, f in self._encode_all(X)])

    def encode(self, X) -> list:
        """Index codes, one per raster."""
        return [c for c, _ in self._encode_all(X)]


class FattIndex(BaseEstimator):
    """Query-by-example index over rasters.

    ``fit`` codes and stores the rasters; ``kneighbors`` answers queries
    from the candidate leaves (exact leaf, else last-digit neighbours).
    """

    def __init__(self, branching=16, depth=6, radius=1, levels=4, k=3, scale=10.0,
                 range_max=160.0, normalize=True, n_neighbors=10):
        self.branching = branching
        self.depth = depth
        self.radius = radius
        self.levels = levels
        self.k = k
        self.scale = scale
        self.range_max = range_max
        self.normalize = normalize
        self.n_neighbors = n_neighbors

    def fit(self, X, y=None, ids=None):
        self.coder_ = WaveletCoder(self.branching, self.depth, self.levels, self.k, self.scale,
                                   self.range_max, self.normalize).fit(X)
        encoded = self.coder_._encode_all(X)
        n = len(encoded)
        ids = [str(i) for i in range(n)] if ids is None else [str(i) for i in ids]
        if len(ids) != n:
            raise ValueError(f"{len(ids)} ids for {n} rasters")
        if y is not None and len(y) != n:
            raise ValueError(f"{len(y)} labels for {n} rasters")
        self.tree_ = FattTree(FattConfig(self.branching, self.depth, self.radius),
                              self.coder_.config_.n_features)
        for id_, (code, feats) in zip(ids, encoded):
            self.tree_.insert(ImageEntry(id_, code, feats))
        self.labels_ = None if y is None else dict(zip(ids, y))
        self.stats_ = self.tree_.stats()
        return self

    def query(self, X, n_neighbors=None, radius=None):
        """Per-raster ``(ranked [(id, distance)], SearchStats)`` pairs."""
        check_is_fitted(self, "tree_")
        k = self.n_neighbors if n_neighbors is None else n_neighbors
        r = self.radius if radius is None else radius
        return [self.tree_.retrieve(f, c, k, r) for c, f in self.coder_._encode_all(X)]

    def kneighbors(self, X, n_neighbors=None, return_distance=True):
        """Ragged results: lists with one array per query, possibly shorter than ``n_neighbors``."""
        results = self.query(X, n_neighbors)
        ids = [np.array([i for i, _ in ranked], dtype=object) for ranked, _ in results]
        if not return_distance:
            return ids
        dists = [np.array([d for _, d in ranked], dtype=np.float64) for ranked, _ in results]
        return dists, ids

    def predict(self, X):
        """Majority label among retrieved neighbours; ``None`` where nothing was found."""
        check_is_fitted(self, "tree_")
        if self.labels_ is None:
            raise ValueError("FattIndex was fitted without labels")
        out = []
        for ranked, _ in self.query(X):
            votes = Counter(self.labels_[i] for i, _ in ranked)
            # most_common keeps first-seen order on ties, i.e. the closer neighbour wins
            out.append(votes.most_common(1)[0][0] if votes else None)
        return np.array(out, dtype=object)
