"""MNIST ingestion, angle reduction, noise injection and subsetting."""
from __future__ import annotations

import gzip
import hashlib
import logging
import shutil
import struct
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError, ValidationError

log = logging.getLogger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049

MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"
MNIST_FILES = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}
SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class Sample:
    pixels: np.ndarray
    label: int


@dataclass
class Dataset:
    """Images as an ``(N, 784)`` array in [0, 1] with integer labels in [0, 10)."""

    images: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ShapeError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return Sample(self.images[i], int(self.labels[i]))

    def with_images(self, images):
        return Dataset(images, self.labels, self.split)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ConfigError("noise", f"kind must be 'uniform' or 'gaussian', got {self.kind!r}")
        if not self.level >= 0:
            raise ConfigError("noise_level", f"must be >= 0, got {self.level}")


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------

def _read_bytes(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw, magic, ndim, what):
    header = 4 + 4 * ndim
    if len(raw) >= 4:
        (found,) = struct.unpack(">I", raw[:4])
        if found != magic:
            raise FormatError(f"{what} file has magic {found:#010x}, expected {magic:#010x}", 0)
    if len(raw) < header:
        raise FormatError(f"{what} file truncated inside its {header}-byte header", len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) < header + count:
        raise FormatError(f"{what} file truncated: header promises {count} data bytes", len(raw))
    if len(raw) > header + count:
        raise FormatError(f"{what} file has trailing bytes after its data", header + count)
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, split="train"):
    """Read an MNIST-style image/label pair (plain or gzipped).

    Pixels are divided by 255 and stored as float32, one flattened row per image.
    """
    images = _parse_idx(_read_bytes(images_path), IMAGES_MAGIC, 3, "images")
    raw_labels = _read_bytes(labels_path)
    labels = _parse_idx(raw_labels, LABELS_MAGIC, 1, "labels")
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels", 4)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise FormatError(f"label {labels[bad[0]]} out of range [0, 10)", 8 + int(bad[0]))
    pixels = images.reshape(len(images), -1).astype(np.float32) / np.float32(255)
    return Dataset(pixels, labels.astype(np.int64), split)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images ``(N, rows, cols)`` and labels ``(N,)`` as IDX; ``.gz`` paths are gzipped."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or len(images) != len(labels):
        raise ShapeError("images must be (N, rows, cols) with one label per image")
    n, rows, cols = images.shape
    blobs = {
        Path(images_path): struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols) + images.tobytes(),
        Path(labels_path): struct.pack(">II", LABELS_MAGIC, n) + labels.tobytes(),
    }
    for path, blob in blobs.items():
        if path.suffix == ".gz":
            blob = gzip.compress(blob, mtime=0)
        path.write_bytes(blob)


def _find(data_dir, stem):
    for name in (stem, stem + ".gz"):
        path = Path(data_dir) / name
        if path.exists():
            return path
    raise FileNotFoundError(f"no {stem}[.gz] in {data_dir}")


def load_split(data_dir, split):
    """Load ``train`` or ``test`` from a directory holding the standard MNIST file names."""
    img, lab = SPLIT_FILES[split]
    return load_idx(_find(data_dir, img), _find(data_dir, lab), split)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def reduce_to_angles(pixels, n):
    """Mean of ``n`` contiguous chunks of the flattened image, scaled to [0, pi/2].

    Chunk sizes differ by at most one. Accepts one image or a batch (rows).
    """
    pixels = np.asarray(pixels, dtype=float)
    d = pixels.shape[-1]
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= d:
        raise ValidationError(f"number of angles must be in [1, {d}], got {n!r}")
    bounds = np.linspace(0, d, n + 1).round().astype(int)
    sizes = np.diff(bounds)
    sums = np.add.reduceat(pixels, bounds[:-1], axis=-1)
    return sums / sizes * (np.pi / 2)


def noise_draws(spec, shape, rng):
    """The additive perturbation before clipping."""
    if spec.kind == "uniform":
        return rng.uniform(-spec.level, spec.level, size=shape)
    return rng.normal(0.0, spec.level, size=shape)


def add_noise(pixels, spec, rng=None):
    """Add i.i.d. noise and clip to [0, 1]. Level 0 returns an unchanged copy.

    ``rng`` defaults to a generator seeded from ``spec.seed``.
    """
    pixels = np.asarray(pixels)
    if spec.level == 0:
        return pixels.copy()
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    noisy = pixels.astype(float) + noise_draws(spec, pixels.shape, rng)
    return np.clip(noisy, 0.0, 1.0)


def subset(ds, k, seed):
    """Shuffle with a seeded permutation and keep the first ``k`` samples."""
    if not 1 <= k <= len(ds):
        raise ValidationError(f"subset size must be in [1, {len(ds)}], got {k}")
    order = np.random.default_rng(seed).permutation(len(ds))[:k]
    return Dataset(ds.images[order], ds.labels[order], ds.split)


# ---------------------------------------------------------------------------
# Download
# ---------------------------------------------------------------------------

def _md5(path):
    h = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_mnist(cache_dir, base_url=MNIST_MIRROR, files=None, timeout=60):
    """Download the MNIST IDX files into ``cache_dir`` unless valid copies exist.

    ``files`` maps file name to MD5. Returns the names actually downloaded.
    A file whose checksum fails is deleted and ``IOError`` is raised.
    """
    files = MNIST_FILES if files is None else files
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    fetched = []
    for name, md5 in files.items():
        dest = cache / name
        if dest.exists() and _md5(dest) == md5:
            continue
        if dest.exists():
            log.warning("%s fails its checksum; fetching again", dest)
        tmp = dest.with_suffix(dest.suffix + ".part")
        try:
            with urllib.request.urlopen(base_url.rstrip("/") + "/" + name, timeout=timeout) as resp, \
                    open(tmp, "wb") as out:
                shutil.copyfileobj(resp, out)
            if _md5(tmp) != md5:
                raise IOError(f"checksum mismatch for {name}")
            tmp.replace(dest)
        except BaseException:
            tmp.unlink(missing_ok=True)
            dest.unlink(missing_ok=True)
            raise
        fetched.append(name)
    return fetched
