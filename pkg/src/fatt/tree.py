"""Fixed-depth N-ary index tree addressed by code digits.

Nodes carry implicit array addresses: the root is 1 and the children of
``A`` are ``B*A + j`` for ``j in range(B)``, so a node at level ``l`` lives
in ``[B**l, 2*B**l)``. Nodes are created lazily along inserted paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import IndexCode


def child_index(address: int, digit: int, branching: int) -> int:
    if address < 1:
        raise ValueError(f"node addresses start at 1, got {address}")
    if not 0 <= digit < branching:
        raise ValueError(f"digit {digit} out of range for branching {branching}")
    return branching * address + digit


def parent_index(address: int, branching: int) -> int:
    if address == 1:
        raise ValueError("the root (address 1) has no parent")
    if address < 1:
        raise ValueError(f"node addresses start at 1, got {address}")
    return address // branching


def address_of(code, branching: int) -> int:
    """Leaf address reached by descending ``code`` from the root."""
    digits = _digits(code)
    m = len(digits)
    addr = branching**m
    for i, d in enumerate(digits, start=1):
        if not 0 <= d < branching:
            raise ValueError(f"digit {d} out of range for branching {branching}")
        addr += d * branching ** (m - i)
    return addr


def _digits(code) -> tuple:
    if isinstance(code, IndexCode):
        return code.digits
    return tuple(int(d) for d in code)


@dataclass(frozen=True)
class FattConfig:
    branching: int = 16
    depth: int = 6
    tolerance: int = 1

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError("branching must be >= 2")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0 <= self.tolerance < self.branching:
            raise ValueError("tolerance must lie in [0, branching - 1]")

    @property
    def capacity(self) -> int:
        return self.branching**self.depth


@dataclass
class ImageEntry:
    id: str
    code: tuple
    features: np.ndarray
    metadata: str = ""

    def __post_init__(self):
        self.code = _digits(self.code)
        self.features = np.asarray(self.features, dtype=np.float64).ravel()


@dataclass
class FattNode:
    address: int
    level: int
    digit: int = -1
    children: dict = field(default_factory=dict)
    entries: list = field(default_factory=list)


@dataclass
class SearchStats:
    nodes_visited: int = 0
    distance_computations: int = 0
    leaves_probed: int = 0

    def __iadd__(self, other: "SearchStats"):
        self.nodes_visited += other.nodes_visited
        self.distance_computations += other.distance_computations
        self.leaves_probed += other.leaves_probed
        return self


@dataclass
class InsertReport:
    leaf_address: int
    nodes_created: int
    replaced: bool


class FattTree:
    """Balanced trie of depth ``config.depth`` over ``config.branching``-ary digits."""

    def __init__(self, config: FattConfig | None = None, n_features: int | None = None):
        self.config = config or FattConfig()
        self.n_features = n_features
        self.root = FattNode(address=1, level=0)
        self._n_entries = 0

    def __len__(self):
        return self._n_entries

    @property
    def branching(self) -> int:
        return self.config.branching

    @property
    def depth(self) -> int:
        return self.config.depth

    def _check_code(self, code) -> tuple:
        digits = _digits(code)
        if isinstance(code, IndexCode) and code.branching != self.branching:
            raise ValueError(
                f"code built for branching {code.branching}, tree uses {self.branching}"
            )
        if len(digits) != self.depth:
            raise ValueError(f"code has {len(digits)} digits, tree depth is {self.depth}")
        for d in digits:
            if not 0 <= d < self.branching:
                raise ValueError(f"digit {d} out of range for branching {self.branching}")
        return digits

    def _check_features(self, n: int, what: str) -> None:
        if self.n_features is not None and n != self.n_features:
            raise ValueError(f"{what} has {n} features, index expects {self.n_features}")

    def insert(self, entry: ImageEntry) -> InsertReport:
        digits = self._check_code(entry.code)
        self._check_features(entry.features.size, f"entry {entry.id!r}")
        if self.n_features is None:
            self.n_features = entry.features.size
        node = self.root
        created = 0
        for d in digits:
            child = node.children.get(d)
            if child is None:
                child = FattNode(child_index(node.address, d, self.branching), node.level + 1, d)
                node.children[d] = child
                created += 1
            node = child
        for i, existing in enumerate(node.entries):
            if existing.id == entry.id:
                node.entries[i] = entry
                return InsertReport(node.address, created, True)
        node.entries.append(entry)
        self._n_entries += 1
        return InsertReport(node.address, created, False)

    def _descend(self, digits, stats: SearchStats) -> list:
        """Nodes along the matched prefix of ``digits``, root first."""
        path = [self.root]
        stats.nodes_visited += 1
        for d in digits:
            child = path[-1].children.get(d)
            if child is None:
                break
            path.append(child)
            stats.nodes_visited += 1
        return path

    def search(self, code):
        """Digit-guided descent; returns ``(leaf or None, SearchStats)``."""
        digits = self._check_code(code)
        stats = SearchStats()
        path = self._descend(digits, stats)
        return (path[-1] if len(path) == self.depth + 1 else None), stats

    def tolerant_search(self, code, radius: int | None = None):
        """Exact search, falling back to last-digit neighbours within ``radius``.

        Only the bottom level is relaxed; a mismatch in any earlier digit
        yields no candidates.
        """
        radius = self.config.tolerance if radius is None else radius
        if not 0 <= radius < self.branching:
            raise ValueError(f"radius must lie in [0, {self.branching - 1}], got {radius}")
        digits = self._check_code(code)
        stats = SearchStats()
        path = self._descend(digits, stats)
        if len(path) == self.depth + 1 and path[-1].entries:
            return [path[-1]], stats
        if len(path) < self.depth:
            return [], stats
        parent = path[self.depth - 1]
        last = digits[-1]
        found = []
        for dist in range(1, radius + 1):
            for d in (last - dist, last + dist):
                if not 0 <= d < self.branching:
                    continue
                nb = parent.children.get(d)
                if nb is None:
                    continue
                stats.nodes_visited += 1
                stats.leaves_probed += 1
                if nb.entries:
                    found.append(nb)
        return found, stats

    def retrieve(self, query_features, query_code, top_k: int = 10, radius: int | None = None):
        """Rank candidate-leaf entries by Euclidean distance, ties by id."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        q = np.asarray(query_features, dtype=np.float64).ravel()
        self._check_features(q.size, "query")
        leaves, stats = self.tolerant_search(query_code, radius)
        scored = []
        for leaf in leaves:
            for e in leaf.entries:
                scored.append((float(np.linalg.norm(e.features - q)), e.id))
        stats.distance_computations = len(scored)
        scored.sort()
        return [(i, d) for d, i in scored[:top_k]], stats

    def iter_nodes(self):
        """Depth-first pre-order, children by ascending digit."""
        stack = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            yield node, path
            for d in sorted(node.children, reverse=True):
                stack.append((node.children[d], path + (d,)))

    def iter_entries(self):
        for node, _ in self.iter_nodes():
            yield from node.entries

    def audit(self) -> None:
        """Raise ``AssertionError`` if any structural invariant is broken."""
        b, m = self.branching, self.depth
        count = 0
        assert self.root.address == 1 and self.root.level == 0
        for node, path in self.iter_nodes():
            assert node.level == len(path) <= m, f"node {node.address} at bad level"
            assert b**node.level <= node.address < 2 * b**node.level
            if path:
                assert node.digit == path[-1]
                expected = 1
                for d in path:
                    expected = child_index(expected, d, b)
                assert node.address == expected, f"address {node.address} != {expected}"
            if node.level == m:
                assert not node.children
                assert node.address == address_of(path, b)
                for e in node.entries:
                    assert tuple(e.code) == path, f"entry {e.id!r} filed under wrong leaf"
                count += len(node.entries)
            else:
                assert not node.entries, f"interior node {node.address} holds entries"
        assert count == self._n_entries

    def stats(self) -> dict:
        per_level = [0] * (self.depth + 1)
        occupancy = []
        for node, _ in self.iter_nodes():
            per_level[node.level] += 1
            if node.level == self.depth and node.entries:
                occupancy.append(len(node.entries))
        return {
            "entries": self._n_entries,
            "nodes": sum(per_level),
            "nodes_per_level": per_level,
            "occupied_leaves": len(occupancy),
            "max_leaf_occupancy": max(occupancy, default=0),
            "mean_leaf_occupancy": (sum(occupancy) / len(occupancy)) if occupancy else 0.0,
            "capacity": self.config.capacity,
        }

    def occupancy_histogram(self) -> dict:
        hist: dict = {}
        for node, _ in self.iter_nodes():
            if node.level == self.depth and node.entries:
                n = len(node.entries)
                hist[n] = hist.get(n, 0) + 1
        return dict(sorted(hist.items()))

