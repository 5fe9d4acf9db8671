"""Turn a subband pyramid into a fixed-length index code.

Each selected subband is reduced to a small k x k matrix of tile RMS
energies; the determinant of its Gram matrix is compressed, then binned
through a range table into one digit of the code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .wavelet import ORIENTATIONS, FilterBank, SubbandPyramid, db4_filters, dwt2_pyramid

DEFAULT_BOUNDARIES = tuple(float(10 * i) for i in range(1, 16))


@dataclass(frozen=True)
class CodeTable:
    """Left-open, right-closed bins over ``[0, inf)``.

    ``x <= boundaries[0]`` maps to 0, ``boundaries[i-1] < x <= boundaries[i]``
    to ``i``, and anything above the last boundary to ``len(boundaries)``.
    """

    boundaries: tuple = DEFAULT_BOUNDARIES

    def __post_init__(self):
        b = tuple(float(v) for v in self.boundaries)
        if not b:
            raise ValueError("code table needs at least one boundary")
        if any(not math.isfinite(v) for v in b) or b[0] < 0:
            raise ValueError("boundaries must be finite and non-negative")
        if any(lo >= hi for lo, hi in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly ascending")
        object.__setattr__(self, "boundaries", b)

    @property
    def branching(self) -> int:
        return len(self.boundaries) + 1

    @classmethod
    def uniform(cls, branching: int, width: float = 10.0) -> "CodeTable":
        """Equal-width bins; ``uniform(16)`` is the 0..150 table."""
        if branching < 2:
            raise ValueError("branching must be >= 2")
        return cls(tuple(width * i for i in range(1, branching)))


def render_code(digits, branching: int) -> str:
    """One hex character per digit when ``branching <= 16``, else fixed-width decimal."""
    digits = [int(d) for d in digits]
    for d in digits:
        if not 0 <= d < branching:
            raise ValueError(f"digit {d} out of range for branching {branching}")
    if branching <= 16:
        return "".join(format(d, "X") for d in digits)
    width = len(str(branching - 1))
    return "".join(str(d).zfill(width) for d in digits)


def parse_code(text: str, branching: int) -> tuple:
    text = text.strip()
    width = 1 if branching <= 16 else len(str(branching - 1))
    if not text or len(text) % width:
        raise ValueError(f"code {text!r} is not a whole number of {width}-character digits")
    try:
        if width == 1:
            digits = tuple(int(c, 16) for c in text)
        else:
            digits = tuple(int(text[i:i + width]) for i in range(0, len(text), width))
    except ValueError:
        raise ValueError(f"code {text!r} contains non-digit characters") from None
    for d in digits:
        if d >= branching:
            raise ValueError(f"digit {d} in {text!r} out of range for branching {branching}")
    return digits


@dataclass(frozen=True)
class IndexCode:
    """Fixed-length digit string addressing one leaf."""

    digits: tuple
    branching: int = 16

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        if not digits:
            raise ValueError("index code must have at least one digit")
        for d in digits:
            if not 0 <= d < self.branching:
                raise ValueError(f"digit {d} out of range for branching {self.branching}")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def parse(cls, text: str, branching: int = 16) -> "IndexCode":
        return cls(parse_code(text, branching), branching)

    @property
    def rendered(self) -> str:
        return render_code(self.digits, self.branching)

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def __getitem__(self, i):
        return self.digits[i]

    def __str__(self):
        return self.rendered


def default_subbands(depth: int, levels: int) -> tuple:
    """Coarse-to-fine selection: LL_J, then LH/HL/HH of J, J-1, ..."""
    order = [(levels, "LL")]
    for lvl in range(levels, 0, -1):
        order.extend((lvl, o) for o in ORIENTATIONS)
    if depth > len(order):
        raise ValueError(f"only {len(order)} subbands exist for {levels} levels, need {depth}")
    return tuple(order[:depth])


@dataclass(frozen=True)
class CodingConfig:
    levels: int = 4
    k: int = 3
    subbands: tuple = ((4, "LL"), (4, "LH"), (4, "HL"), (4, "HH"), (3, "LH"), (3, "HL"))
    table: CodeTable = field(default_factory=CodeTable)
    normalize: bool = True
    scale: float = 10.0
    range_max: float = 160.0

    def __post_init__(self):
        subbands = tuple((int(lvl), str(o)) for lvl, o in self.subbands)
        object.__setattr__(self, "subbands", subbands)
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not subbands:
            raise ValueError("at least one subband must be selected")
        for lvl, o in subbands:
            if o not in ("LL",) + ORIENTATIONS:
                raise ValueError(f"unknown orientation {o!r}")
            if not 1 <= lvl <= self.levels or (o == "LL" and lvl != self.levels):
                raise ValueError(f"subband {o}_{lvl} does not exist with {self.levels} levels")

    @classmethod
    def for_tree(cls, branching: int = 16, depth: int = 6, levels: int = 4, k: int = 3, **kw):
        return cls(
            levels=levels,
            k=k,
            subbands=default_subbands(depth, levels),
            table=CodeTable.uniform(branching),
            **kw,
        )

    @property
    def depth(self) -> int:
        return len(self.subbands)

    @property
    def branching(self) -> int:
        return self.table.branching

    @property
    def n_features(self) -> int:
        return self.depth * self.k * self.k


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    source: tuple = (0, "")


def _tile_edges(n: int, k: int) -> np.ndarray:
    # same split as np.array_split: the first n % k tiles are one longer
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    return np.concatenate([[0], np.cumsum(sizes)])


def extract_feature_matrix(subband, k: int = 3, source: tuple = (0, "")) -> FeatureMatrix:
    """k x k grid of tile root-mean-square values."""
    s = np.asarray(subband, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < k or s.shape[1] < k:
        raise ValueError(f"subband of shape {s.shape} is smaller than {k}x{k}")
    re, ce = _tile_edges(s.shape[0], k), _tile_edges(s.shape[1], k)
    sq = s * s
    sums = np.add.reduceat(np.add.reduceat(sq, re[:-1], axis=0), ce[:-1], axis=1)
    counts = np.outer(np.diff(re), np.diff(ce))
    return FeatureMatrix(np.sqrt(sums / counts), source)


def gram(m) -> np.ndarray:
    m = np.asarray(getattr(m, "values", m), dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"feature matrix must be square, got {m.shape}")
    return m @ m.T


def determinant(s) -> float:
    """Cofactor expansion for k <= 3, LU beyond."""
    a = np.asarray(s, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"determinant needs a square matrix, got {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if n == 3:
        return float(
            a[0, 0] * (a[1, 1] * a[2, 2] - a[2, 1] * a[1, 2])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[2, 0] * a[1, 2])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )
    if n > 8:
        raise ValueError(f"determinant is limited to small matrices (k <= 8), got {n}")
    return float(np.linalg.det(a))


def normalize_det(d: float, scale: float = 10.0, range_max: float = 160.0, enabled: bool = True) -> float:
    """``scale * log10(1 + d)`` clipped to ``[0, range_max]``; identity when disabled."""
    if d < 0:
        raise ValueError(f"determinant must be non-negative, got {d}")
    if not enabled:
        return float(d)
    return float(min(scale * math.log10(1.0 + d), range_max))


def quantize_code(x: float, table: CodeTable | None = None) -> int:
    if table is None:
        table = CodeTable()
    if x < 0 or math.isnan(x):
        raise ValueError(f"cannot quantize {x}")
    return int(np.searchsorted(table.boundaries, x, side="left"))


def image_code(pyramid: SubbandPyramid, cfg: CodingConfig | None = None):
    """Return ``(IndexCode, features)`` for one decomposed image.

    ``features`` is the concatenation of the raw k x k matrices, in subband order.
    """
    cfg = cfg or CodingConfig()
    digits = []
    feats = []
    for lvl, orient in cfg.subbands:
        try:
            band = pyramid.subband(lvl, orient)
        except KeyError as exc:
            raise ValueError(f"subband {orient}_{lvl} missing from pyramid: {exc}") from None
        fm = extract_feature_matrix(band, cfg.k, (lvl, orient))
        det = max(determinant(gram(fm)), 0.0)
        x = normalize_det(det, cfg.scale, cfg.range_max, cfg.normalize)
        digits.append(quantize_code(x, cfg.table))
        feats.append(fm.values.ravel())
    return IndexCode(tuple(digits), cfg.branching), np.concatenate(feats)


def encode_image(image, cfg: CodingConfig | None = None, fb: FilterBank | None = None):
    """Decompose a raster with db4 and code it; returns ``(IndexCode, features)``."""
    cfg = cfg or CodingConfig()
    pyramid = dwt2_pyramid(np.asarray(image, dtype=np.float64), cfg.levels, fb or db4_filters())
    return image_code(pyramid, cfg)
