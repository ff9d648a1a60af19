"""Synthetic two-class corpus so desk-scale training can run without the
real image collection.

Class "bright_blobs" (label 0): a large warm-colored radial bump on a dark
background.  Class "dark_stripes" (label 1): a dim periodic stripe texture.
The classes differ strongly in both mean intensity and structure, so they
stay separable under the training augmentations (brightness 0.8-1.2, small
zoom, horizontal flip) and a small network learns them quickly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .rng import Xoshiro256StarStar, derive_seed

CLASS_BLOBS = "bright_blobs"
CLASS_STRIPES = "dark_stripes"


def _blob_image(size: int, rng: Xoshiro256StarStar) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    cy = rng.uniform(0.35, 0.65) * size
    cx = rng.uniform(0.35, 0.65) * size
    radius = rng.uniform(0.30, 0.45) * size
    d2 = ((yy - cy) ** 2 + (xx - cx) ** 2) / (radius * radius)
    bump = np.exp(-1.5 * d2)
    base = rng.uniform(0.03, 0.10)
    img = np.empty((size, size, 3), dtype=np.float32)
    img[:, :, 0] = base + (0.95 - base) * bump
    img[:, :, 1] = base + (0.75 - base) * bump
    img[:, :, 2] = base + (0.45 - base) * bump
    noise = rng.fill_uniform((size, size, 3), -0.02, 0.02)
    return np.clip(img + noise, 0.0, 1.0)


def _stripe_image(size: int, rng: Xoshiro256StarStar) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    period = rng.uniform(6.0, 12.0)
    phase = rng.uniform(0.0, float(2 * np.pi))
    axis = yy if rng.coin(0.5) else xx
    wave = 0.5 * (1.0 + np.sin(2.0 * np.pi * axis / period + phase))
    lo = rng.uniform(0.02, 0.06)
    hi = rng.uniform(0.18, 0.28)
    img = np.empty((size, size, 3), dtype=np.float32)
    img[:, :, 0] = lo + (hi - lo) * wave
    img[:, :, 1] = lo + 0.8 * (hi - lo) * wave
    img[:, :, 2] = lo + 1.1 * (hi - lo) * wave
    noise = rng.fill_uniform((size, size, 3), -0.02, 0.02)
    return np.clip(img + noise, 0.0, 1.0)


def generate_synthetic_corpus(root, per_class: int = 20, size: int = 80,
                              seed: int = 0) -> Path:
    """Write per_class PNGs into <root>/bright_blobs and <root>/dark_stripes."""
    root = Path(root)
    for class_name, painter in ((CLASS_BLOBS, _blob_image),
                                (CLASS_STRIPES, _stripe_image)):
        class_dir = root / class_name
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rng = Xoshiro256StarStar(derive_seed(seed, "synthetic", class_name, i))
            img = painter(size, rng)
            pixels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
            Image.fromarray(pixels).save(class_dir / f"{class_name}_{i:04d}.png")
    return root
