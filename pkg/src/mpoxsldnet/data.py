"""Dataset ingestion, preprocessing, deterministic splitting, and batching.

Corpus layout: ``<root>/<ClassName>/<file>.{png,jpg,jpeg}``.  Class names are
sorted lexicographically before encoding, so with the public corpus layout
Monkeypox encodes to 0 and Non_Monkeypox to 1.

Preprocessing per image: decode to 8-bit RGB (alpha dropped, grayscale
replicated), bilinear resize to the target square size, rescale into [0, 1].
Training batches additionally receive on-the-fly augmentation (zoom,
brightness, horizontal flip) drawn from per-image substreams derived from
(master seed, epoch, record id), so worker parallelism cannot perturb the
randomness.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .rng import Xoshiro256StarStar, derive_seed

log = logging.getLogger(__name__)

IMAGE_EXTS = {".png", ".jpg", ".jpeg"}


# ---------------------------------------------------------------------------
# scanning

@dataclass(frozen=True)
class DatasetRecord:
    path: Path
    class_name: str
    label: int


@dataclass
class DatasetIndex:
    records: list[DatasetRecord]
    class_names: list[str]
    skipped: list[Path] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in self.class_names}
        for r in self.records:
            out[r.class_name] += 1
        return out

    def __len__(self) -> int:
        return len(self.records)


def scan_dataset(root, limit: int | None = None) -> DatasetIndex:
    """Index a class-folder corpus with stable lexicographic ordering.

    ``limit`` keeps at most that many records, taken round-robin across the
    classes so a subset always contains both, then re-sorted lexicographically.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if len(class_dirs) != 2:
        raise ValueError(
            f"binary task requires exactly two class directories, found "
            f"{len(class_dirs)} in {root}")
    class_names = [d.name for d in class_dirs]
    skipped: list[Path] = []
    per_class: list[list[DatasetRecord]] = []
    for label, d in enumerate(class_dirs):
        records = []
        for f in sorted(p for p in d.iterdir()
                        if p.is_file() and p.suffix.lower() in IMAGE_EXTS):
            try:
                with Image.open(f) as im:
                    im.size  # header parse only
            except Exception:
                log.warning("skipping unreadable image %s", f)
                skipped.append(f)
                continue
            records.append(DatasetRecord(f, d.name, label))
        if not records:
            raise ValueError(f"class directory {d} contains no readable images")
        per_class.append(records)
    if limit is not None:
        picked: list[DatasetRecord] = []
        i = 0
        while len(picked) < limit and any(i < len(c) for c in per_class):
            for c in per_class:
                if i < len(c) and len(picked) < limit:
                    picked.append(c[i])
            i += 1
        records = sorted(picked, key=lambda r: (r.class_name, r.path.name))
    else:
        records = [r for c in per_class for r in c]
    return DatasetIndex(records=records, class_names=class_names, skipped=skipped)


def write_dataset_stats_csv(index: DatasetIndex, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "count"])
        for name, count in index.counts.items():
            writer.writerow([name, count])


# ---------------------------------------------------------------------------
# preprocessing

def load_image(path) -> np.ndarray:
    """Decode to an 8-bit RGB array of shape (H, W, 3)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-center sampling and edge clamping.

    Source coordinate for output index i is (i + 0.5) * (in / out) - 0.5,
    clamped to the valid range.  Interpolation uses the lerp form
    a + t * (b - a), which is exact for constants and for t == 0, so a
    same-size resize is a bitwise copy.
    """
    h, w, c = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    dtype = img.dtype
    sy = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5,
                 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5,
                 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ty = (sy - y0).astype(dtype)[:, None, None]
    tx = (sx - x0).astype(dtype)[None, :, None]
    r0 = img[y0]
    r1 = img[y1]
    top = r0[:, x0] + tx * (r0[:, x1] - r0[:, x0])
    bot = r1[:, x0] + tx * (r1[:, x1] - r1[:, x0])
    return top + ty * (bot - top)


def rescale(img: np.ndarray) -> np.ndarray:
    """Scale 8-bit pixel values (0..255) into [0, 1] by the 1/255 ratio."""
    return img.astype(np.float32) / np.float32(255.0)


def preprocess(path, image_size: int) -> np.ndarray:
    """decode -> resize -> rescale; returns float32 (S, S, 3) in [0, 1]."""
    raw = load_image(path).astype(np.float32)
    return rescale(resize_bilinear(raw, image_size, image_size))


# ---------------------------------------------------------------------------
# splitting

@dataclass(frozen=True)
class SplitPlan:
    permutation: tuple[int, ...]
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    ratio: float
    seed: int


def split(index, ratio: float = 0.9, seed: int = 0) -> SplitPlan:
    """Seeded Fisher-Yates shuffle; the first floor(ratio * N) records train."""
    n = index if isinstance(index, int) else len(index)
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    perm = Xoshiro256StarStar(seed).permutation(n)
    cut = int(math.floor(ratio * n))
    if cut == 0 or cut == n:
        raise ValueError(f"split of {n} records at ratio {ratio} leaves one side empty")
    return SplitPlan(permutation=tuple(perm), train_ids=tuple(perm[:cut]),
                     test_ids=tuple(perm[cut:]), ratio=ratio, seed=seed)


# ---------------------------------------------------------------------------
# augmentation

@dataclass(frozen=True)
class AugmentPolicy:
    zoom: tuple[float, float] = (0.99, 1.01)
    brightness: tuple[float, float] = (0.8, 1.2)
    flip_prob: float = 0.5
    fill: float = 0.0

    @classmethod
    def identity(cls) -> "AugmentPolicy":
        return cls(zoom=(1.0, 1.0), brightness=(1.0, 1.0), flip_prob=0.0)


def zoom_resample(img: np.ndarray, z: float, fill: float = 0.0) -> np.ndarray:
    """Uniform scale by z about the image center with bilinear resampling.

    z < 1 shrinks the content, leaving a constant-fill border band; z > 1
    magnifies, cropping the edges.  Neighbors outside the grid contribute
    the fill value.
    """
    h, w, c = img.shape
    dtype = img.dtype
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    sy = cy + (np.arange(h, dtype=np.float64) - cy) / z
    sx = cx + (np.arange(w, dtype=np.float64) - cx) / z
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    ty = (sy - y0).astype(dtype)
    tx = (sx - x0).astype(dtype)
    out = np.zeros_like(img)
    covered = np.zeros((h, w, 1), dtype=dtype)
    for yi, wy in ((y0, 1.0 - ty), (y0 + 1, ty)):
        yv = (yi >= 0) & (yi < h)
        yc = np.clip(yi, 0, h - 1)
        for xi, wx in ((x0, 1.0 - tx), (x0 + 1, tx)):
            xv = (xi >= 0) & (xi < w)
            xc = np.clip(xi, 0, w - 1)
            weight = ((wy * yv)[:, None] * (wx * xv)[None, :])[:, :, None].astype(dtype)
            out += weight * img[yc][:, xc]
            covered += weight
    if fill != 0.0:
        out += img.dtype.type(fill) * (1.0 - covered)
    return out


def augment_image(img: np.ndarray, policy: AugmentPolicy,
                  rng: Xoshiro256StarStar) -> np.ndarray:
    """Apply one policy draw. Draw order is fixed: zoom, brightness, flip."""
    z = rng.uniform(*policy.zoom)
    b = rng.uniform(*policy.brightness)
    flip = rng.coin(policy.flip_prob)
    if z != 1.0:
        img = zoom_resample(img, z, policy.fill)
    if b != 1.0:
        img = np.clip(img * img.dtype.type(b), 0.0, 1.0)
    if flip:
        img = np.ascontiguousarray(img[:, ::-1, :])
    return img


# ---------------------------------------------------------------------------
# batching

def one_hot(labels, num_classes: int = 2) -> np.ndarray:
    return np.eye(num_classes, dtype=np.float32)[np.asarray(labels)]


@dataclass
class Batch:
    images: np.ndarray          # (B, S, S, 3) float32 in [0, 1]
    labels: np.ndarray          # (B, num_classes) one-hot float32
    record_ids: list[int]
    skipped: list[int] = field(default_factory=list)


def _data_workers(explicit: int | None) -> int:
    if explicit is not None:
        return max(1, explicit)
    return max(1, int(os.environ.get("MPOX_THREADS", "1")))


def batch_spans(n: int, batch_size: int) -> list[tuple[int, int]]:
    """(start, size) per batch; the last batch may be short."""
    if batch_size < 1:
        raise ValueError("batch size must be positive")
    return [(start, min(batch_size, n - start))
            for start in range(0, n, batch_size)]


def batches(index: DatasetIndex, record_ids, *, batch_size: int, mode: str,
            image_size: int = 224, policy: AugmentPolicy | None = None,
            master_seed: int = 0, epoch: int = 0, workers: int | None = None):
    """Yield Batch objects over the given record ids.

    Training mode reshuffles the order each epoch from the seeded stream and
    augments; eval mode is ordered and unaugmented.  Decode failures drop the
    entry from its batch and are reported in Batch.skipped.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if batch_size < 1:
        raise ValueError("batch size must be positive")
    ids = list(record_ids)
    if mode == "train":
        Xoshiro256StarStar(derive_seed(master_seed, "shuffle", epoch)).shuffle(ids)
        policy = policy or AugmentPolicy()

    def prepare(rid: int):
        record = index.records[rid]
        try:
            img = preprocess(record.path, image_size)
        except Exception:
            log.warning("decode failure for %s", record.path)
            return rid, None
        if mode == "train":
            rng = Xoshiro256StarStar(derive_seed(master_seed, "augment", epoch, rid))
            img = augment_image(img, policy, rng)
        return rid, img

    n_workers = _data_workers(workers)
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        for start, size in batch_spans(len(ids), batch_size):
            chunk = ids[start:start + size]
            if pool is not None:
                prepared = list(pool.map(prepare, chunk))  # order-preserving
            else:
                prepared = [prepare(rid) for rid in chunk]
            ok = [(rid, img) for rid, img in prepared if img is not None]
            bad = [rid for rid, img in prepared if img is None]
            if not ok:
                continue
            images = np.stack([img for _, img in ok])
            labels = one_hot([index.records[rid].label for rid, _ in ok],
                             len(index.class_names))
            yield Batch(images=images, labels=labels,
                        record_ids=[rid for rid, _ in ok], skipped=bad)
    finally:
        if pool is not None:
            pool.shutdown()


# ---------------------------------------------------------------------------
# visualization

def preview_grid(index: DatasetIndex, n: int, policy: AugmentPolicy, seed: int,
                 out_path, image_size: int = 224) -> Path:
    """Write an n-tile grid of augmented samples as a PNG for eyeballing."""
    if not index.records:
        raise ValueError("dataset index is empty")
    order = Xoshiro256StarStar(derive_seed(seed, "preview")).permutation(len(index.records))
    chosen = [order[i % len(order)] for i in range(n)]
    cols = int(math.ceil(math.sqrt(n)))
    rows = int(math.ceil(n / cols))
    grid = np.zeros((rows * image_size, cols * image_size, 3), dtype=np.float32)
    for i, rid in enumerate(chosen):
        img = preprocess(index.records[rid].path, image_size)
        rng = Xoshiro256StarStar(derive_seed(seed, "preview", i))
        img = augment_image(img, policy, rng)
        r, c = divmod(i, cols)
        grid[r * image_size:(r + 1) * image_size,
             c * image_size:(c + 1) * image_size] = img
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(np.rint(grid * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(out_path, format="PNG")
    return out_path
