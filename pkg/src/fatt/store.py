"""Self-describing binary index files.

Layout (all little-endian)::

    b"FATT"  u16 version
    config   u32 branching, depth, tolerance, k, levels, side, n_features
             u32 n_subbands, then per subband u16 level + 2 ascii bytes
             u8 normalize, f64 scale, f64 range_max
             u32 n_boundaries, then f64 each
    u64      node count
    nodes    depth-first, children by ascending digit:
             u64 address, u16 level, i32 digit (-1 at the root), u32 n_entries
             per entry: u32 len + utf-8 id, depth x u16 digits,
                        u32 n + n x f64 features, u32 len + utf-8 metadata
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import NamedTuple

from .coding import CodeTable, CodingConfig
from .errors import IndexCorruptError, IndexFormatError
from .tree import FattConfig, FattNode, FattTree, ImageEntry, child_index

MAGIC = b"FATT"
VERSION = 1
_NO_FEATURES = 0xFFFFFFFF


class LoadedIndex(NamedTuple):
    tree: FattTree
    coding: CodingConfig
    side: int


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def dumps(tree: FattTree, coding: CodingConfig, side: int = 256) -> bytes:
    cfg = tree.config
    if (coding.branching, coding.depth) != (cfg.branching, cfg.depth):
        raise ValueError("coding config does not match tree shape")
    out = [MAGIC, struct.pack("<H", VERSION)]
    n_feat = _NO_FEATURES if tree.n_features is None else tree.n_features
    out.append(struct.pack("<7I", cfg.branching, cfg.depth, cfg.tolerance, coding.k,
                           coding.levels, side, n_feat))
    out.append(struct.pack("<I", len(coding.subbands)))
    for lvl, orient in coding.subbands:
        out.append(struct.pack("<H", lvl) + orient.encode("ascii"))
    out.append(struct.pack("<?dd", coding.normalize, coding.scale, coding.range_max))
    bounds = coding.table.boundaries
    out.append(struct.pack(f"<I{len(bounds)}d", len(bounds), *bounds))

    nodes = list(tree.iter_nodes())
    out.append(struct.pack("<Q", len(nodes)))
    for node, _ in nodes:
        out.append(struct.pack("<QHiI", node.address, node.level, node.digit, len(node.entries)))
        for e in node.entries:
            out.append(_pack_str(e.id))
            out.append(struct.pack(f"<{len(e.code)}H", *e.code))
            out.append(struct.pack(f"<I{e.features.size}d", e.features.size, *e.features))
            out.append(_pack_str(e.metadata))
    return b"".join(out)


def save_index(tree: FattTree, coding: CodingConfig, path, side: int = 256) -> int:
    """Write ``tree`` to ``path``; returns the number of bytes written."""
    data = dumps(tree, coding, side)
    Path(path).write_bytes(data)
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise IndexCorruptError(
                f"index truncated at byte offset {self.pos}: needed {size} bytes, "
                f"{len(self.data) - self.pos} remain"
            )
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexCorruptError(f"index truncated at byte offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def string(self) -> str:
        (n,) = self.take("<I")
        at = self.pos
        try:
            return self.raw(n).decode("utf-8")
        except UnicodeDecodeError:
            raise IndexCorruptError(f"invalid utf-8 string at byte offset {at}") from None


def loads(data: bytes) -> LoadedIndex:
    if len(data) < 6 or data[:4] != MAGIC:
        raise IndexFormatError("not a FATT index (bad magic)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise IndexFormatError(f"not a FATT index (unsupported version {version})")
    r = _Reader(data)
    r.pos = 6
    b, m, tol, k, levels, side, n_feat = r.take("<7I")
    (n_sub,) = r.take("<I")
    subbands = []
    for _ in range(n_sub):
        (lvl,) = r.take("<H")
        subbands.append((lvl, r.raw(2).decode("ascii", errors="replace")))
    normalize, scale, range_max = r.take("<?dd")
    (n_b,) = r.take("<I")
    bounds = r.take(f"<{n_b}d")
    header_end = r.pos
    try:
        coding = CodingConfig(levels, k, tuple(subbands), CodeTable(bounds), normalize, scale, range_max)
        tree = FattTree(FattConfig(b, m, tol), None if n_feat == _NO_FEATURES else n_feat)
    except ValueError as exc:
        raise IndexCorruptError(f"invalid config block ending at byte offset {header_end}: {exc}") from None

    (n_nodes,) = r.take("<Q")
    stack: list = []
    for i in range(n_nodes):
        at = r.pos
        address, level, digit, n_entries = r.take("<QHiI")
        if i == 0:
            if (address, level, digit) != (1, 0, -1):
                raise IndexCorruptError(f"bad root record at byte offset {at}")
            node = tree.root
        else:
            del stack[level:]
            if level < 1 or len(stack) != level or not 0 <= digit < b:
                raise IndexCorruptError(f"node out of depth-first order at byte offset {at}")
            parent = stack[-1]
            if address != child_index(parent.address, digit, b) or digit in parent.children:
                raise IndexCorruptError(f"inconsistent node address {address} at byte offset {at}")
            node = FattNode(address, level, digit)
            parent.children[digit] = node
        stack.append(node)
        if n_entries and level != m:
            raise IndexCorruptError(f"interior node holds entries at byte offset {at}")
        for _ in range(n_entries):
            eid = r.string()
            code = r.take(f"<{m}H")
            (nf,) = r.take("<I")
            feats = r.take(f"<{nf}d")
            meta = r.string()
            node.entries.append(ImageEntry(eid, code, feats, meta))
            tree._n_entries += 1
    if r.pos != len(data):
        raise IndexCorruptError(f"trailing bytes after body at byte offset {r.pos}")
    try:
        tree.audit()
    except AssertionError as exc:
        raise IndexCorruptError(f"index failed structural audit: {exc}") from None
    return LoadedIndex(tree, coding, side)


def load_index(path) -> LoadedIndex:
    return loads(Path(path).read_bytes())
