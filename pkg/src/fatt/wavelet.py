"""Orthogonal two-channel filter banks and the separable 2-D DWT.

All transforms use periodic extension, so every level is an orthogonal
change of basis: energy is preserved and synthesis is the exact transpose
of analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt

import numpy as np
from numpy.polynomial import polynomial as P

ORIENTATIONS = ("LH", "HL", "HH")


@dataclass(frozen=True)
class FilterBank:
    """Analysis lowpass ``h`` and highpass ``g`` of equal even length."""

    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64)
        g = np.asarray(self.g, dtype=np.float64)
        if h.ndim != 1 or h.shape != g.shape:
            raise ValueError("h and g must be 1-D arrays of equal length")
        h.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @property
    def length(self) -> int:
        return len(self.h)


def make_qmf(h) -> np.ndarray:
    """Alternating flip ``g[k] = (-1)**k * h[L-1-k]``."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or len(h) == 0:
        raise ValueError("lowpass filter must be a non-empty 1-D sequence")
    if len(h) % 2:
        raise ValueError(f"lowpass filter length must be even, got {len(h)}")
    signs = np.where(np.arange(len(h)) % 2 == 0, 1.0, -1.0)
    return signs * h[::-1]


@lru_cache(maxsize=None)
def _daubechies_lowpass(moments: int) -> tuple:
    # Spectral factorization of the maxflat half-band polynomial: keep the
    # roots inside the unit circle (minimum phase).
    n = moments
    q = np.zeros(1)
    for k in range(n):
        # z**(n-1) * y**k with y = -(z-1)**2 / (4z)
        term = P.polymul(P.polypow([-1.0, 1.0], 2 * k), [0.0] * (n - 1 - k) + [1.0])
        q = P.polyadd(q, comb(n - 1 + k, k) * (-0.25) ** k * term)
    roots = P.polyroots(q)
    inside = roots[np.abs(roots) < 1.0]
    poly = P.polypow([1.0, 1.0], n)
    for r in inside:
        poly = P.polymul(poly, [-r, 1.0])
    # reverse to the customary ordering with the large taps first
    h = np.real(poly)[::-1]
    h = h * (sqrt(2.0) / h.sum())
    return tuple(h)


def daubechies_filters(moments: int) -> FilterBank:
    """Daubechies orthogonal bank with ``moments`` vanishing moments."""
    if moments < 1:
        raise ValueError("need at least one vanishing moment")
    if moments == 1:
        h = np.full(2, 1.0 / sqrt(2.0))
    else:
        h = np.array(_daubechies_lowpass(moments))
    return FilterBank(h, make_qmf(h))


def db4_filters() -> FilterBank:
    """The length-8 Daubechies bank with four vanishing moments."""
    return daubechies_filters(4)


def haar_filters() -> FilterBank:
    return daubechies_filters(1)


def _check_length(n: int, fb: FilterBank) -> None:
    if n % 2:
        raise ValueError(f"signal length must be even, got {n}")
    if n < fb.length:
        raise ValueError(
            f"signal length {n} is shorter than the filter length {fb.length}; "
            "periodic extension needs at least one full filter period"
        )


def analyze_1d(signal, fb: FilterBank, axis: int = -1):
    """One periodic analysis step along ``axis``.

    Returns ``(approx, detail)`` with ``approx[n] = sum_k x[k] h[k - 2n]``
    (indices mod N), each half the input length along ``axis``.
    """
    x = np.moveaxis(np.asarray(signal, dtype=np.float64), axis, -1)
    n = x.shape[-1]
    _check_length(n, fb)
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(fb.length)[None, :]) % n
    windows = x[..., idx]
    approx = windows @ fb.h
    detail = windows @ fb.g
    return np.moveaxis(approx, -1, axis), np.moveaxis(detail, -1, axis)


def synthesize_1d(approx, detail, fb: FilterBank, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`analyze_1d`."""
    a = np.moveaxis(np.asarray(approx, dtype=np.float64), axis, -1)
    d = np.moveaxis(np.asarray(detail, dtype=np.float64), axis, -1)
    if a.shape != d.shape:
        raise ValueError(f"approx shape {a.shape} != detail shape {d.shape}")
    half = a.shape[-1]
    n = 2 * half
    _check_length(n, fb)
    out = np.zeros(a.shape[:-1] + (n,))
    base = 2 * np.arange(half)
    # for a fixed tap the target indices are distinct, so fancy += is safe
    for i in range(fb.length):
        out[..., (base + i) % n] += fb.h[i] * a + fb.g[i] * d
    return np.moveaxis(out, -1, axis)


def dwt2_level(image, fb: FilterBank):
    """One separable 2-D level: rows first, then columns.

    Returns ``(LL, LH, HL, HH)`` where the first letter is the horizontal
    (along-row) filter and the second the vertical one.
    """
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    if x.shape[0] % 2 or x.shape[1] % 2:
        raise ValueError(f"image dimensions must be even, got {x.shape}")
    lo, hi = analyze_1d(x, fb, axis=1)
    ll, lh = analyze_1d(lo, fb, axis=0)
    hl, hh = analyze_1d(hi, fb, axis=0)
    return ll, lh, hl, hh


def idwt2_level(ll, lh, hl, hh, fb: FilterBank) -> np.ndarray:
    bands = [np.asarray(b, dtype=np.float64) for b in (ll, lh, hl, hh)]
    shapes = {b.shape for b in bands}
    if len(shapes) != 1:
        raise ValueError(f"subband shapes differ: {[b.shape for b in bands]}")
    lo = synthesize_1d(bands[0], bands[1], fb, axis=0)
    hi = synthesize_1d(bands[2], bands[3], fb, axis=0)
    return synthesize_1d(lo, hi, fb, axis=1)


@dataclass
class SubbandPyramid:
    """Multilevel decomposition: ``details[j-1]`` holds ``(LH, HL, HH)`` of level j."""

    levels: int
    ll: np.ndarray
    details: list = field(default_factory=list)
    original_size: tuple = (0, 0)

    def subband(self, level: int, orientation: str) -> np.ndarray:
        if not 1 <= level <= self.levels:
            raise KeyError(f"level {level} not in pyramid with {self.levels} levels")
        if orientation == "LL":
            if level != self.levels:
                raise KeyError(f"LL is only kept at the coarsest level {self.levels}")
            return self.ll
        try:
            return self.details[level - 1][ORIENTATIONS.index(orientation)]
        except ValueError:
            raise KeyError(f"unknown orientation {orientation!r}") from None

    def energy(self) -> float:
        total = float(np.sum(self.ll**2))
        for triple in self.details:
            total += sum(float(np.sum(b**2)) for b in triple)
        return total


def max_levels(shape, filter_length: int) -> int:
    """Deepest J such that every level sees even sides of at least the filter length."""
    j = 0
    rows, cols = shape
    while rows % 2 == 0 and cols % 2 == 0 and min(rows, cols) >= filter_length:
        rows //= 2
        cols //= 2
        j += 1
    return j


def dwt2_pyramid(image, levels: int, fb: FilterBank) -> SubbandPyramid:
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    feasible = max_levels(x.shape, fb.length)
    if levels > feasible:
        raise ValueError(
            f"cannot decompose {x.shape} into {levels} levels with a length-"
            f"{fb.length} filter; maximum feasible levels is {feasible}"
        )
    details = []
    current = x
    for _ in range(levels):
        current, lh, hl, hh = dwt2_level(current, fb)
        details.append((lh, hl, hh))
    return SubbandPyramid(levels, current, details, tuple(x.shape))


def idwt2_pyramid(pyramid: SubbandPyramid, fb: FilterBank) -> np.ndarray:
    current = pyramid.ll
    for lh, hl, hh in reversed(pyramid.details):
        current = idwt2_level(current, lh, hl, hh, fb)
    return current
