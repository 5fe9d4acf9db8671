"""Raster decoding, canonicalization and the seeded synthetic texture generator."""

from __future__ import annotations

import numpy as np
from PIL import Image

LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(img: Image.Image) -> np.ndarray:
    """8-bit luminance, rounded half up."""
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8).copy()
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    return np.floor(rgb @ LUMA + 0.5).clip(0, 255).astype(np.uint8)


def canonicalize(gray: np.ndarray, side: int) -> np.ndarray:
    """Bilinear resize to ``side x side``; same-size input passes through untouched."""
    gray = np.asarray(gray, dtype=np.uint8)
    if gray.shape == (side, side):
        return gray
    return np.asarray(Image.fromarray(gray).resize((side, side), Image.BILINEAR), dtype=np.uint8)


def load_raster(path, side: int = 256) -> np.ndarray:
    with Image.open(path) as img:
        img.load()
        return canonicalize(to_gray(img), side)


def save_raster(raster: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(raster, dtype=np.uint8), mode="L").save(path)


def _category_profile(seed: int, category: int):
    rng = np.random.default_rng([seed, 1_000_003, category])
    tile = int(rng.choice([4, 8, 16, 32]))
    freqs = rng.uniform(0.02, 0.45, size=(3, 2))
    phases = rng.uniform(0, 2 * np.pi, size=3)
    weights = rng.uniform(0.2, 1.0, size=3)
    base = rng.standard_normal((tile, tile))
    mean = rng.uniform(40, 210)
    layout = rng.uniform(0.3, 1.7, size=(3, 3))
    return tile, freqs, phases, weights, base, mean, layout


def synthetic_image(index: int, seed: int = 7, side: int = 256, n_categories: int = 10):
    """Deterministic textured raster ``(pixels, category)``.

    Each category owns a noise tile, a set of gratings and a coarse 3x3
    gain layout; images vary by contrast, brightness and fresh noise. Image ``i`` depends only on
    ``(seed, i)``, so datasets of growing size are nested prefixes.
    """
    category = index % n_categories
    tile, freqs, phases, weights, base, mean, layout = _category_profile(seed, category)
    rng = np.random.default_rng([seed, index])
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    texture = np.tile(base, (side // tile + 1, side // tile + 1))[:side, :side]
    for (fy, fx), ph, w in zip(freqs, phases, weights):
        texture = texture + w * np.sin(2 * np.pi * (fy * yy + fx * xx) / 4 + ph)
    texture = texture + 0.3 * rng.standard_normal((side, side))
    # coarse spatial gain keeps the tile-energy matrices well conditioned
    gain = np.asarray(
        Image.fromarray(layout.astype(np.float32), mode="F").resize((side, side), Image.BILINEAR)
    )
    texture = texture * gain
    contrast = 10.0 ** rng.uniform(1.0, 1.2)
    brightness = mean + rng.uniform(-10, 10)
    pixels = np.clip(np.rint(brightness + contrast * texture), 0, 255).astype(np.uint8)
    return pixels, f"cat{category:02d}"
