"""Dataset container, IDX ingestion, the synthetic blob generator, and a
byte-deterministic on-disk format.

A dataset on disk is a pair ``<base>.json`` (metadata) + ``<base>.bin``
(raw little-endian arrays: inputs as float64, then labels as int64, then
optional clean labels as int64). The format is deliberately plain so that
identical inputs always produce identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 in [0, k)
    k: int
    clean_labels: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise InputError(f"inputs must be 2-D, got shape {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise InputError("labels length must match number of rows")
        if self.k < 2:
            raise InputError(f"class count must be >= 2, got {self.k}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise InputError(f"labels outside [0, {self.k})")
        if self.clean_labels is not None:
            self.clean_labels = np.asarray(self.clean_labels, dtype=np.int64)
            if self.clean_labels.shape != self.labels.shape:
                raise InputError("clean labels length must match labels")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def slice(self, start: int, stop: int) -> "Dataset":
        clean = self.clean_labels[start:stop].copy() if self.clean_labels is not None else None
        return Dataset(self.inputs[start:stop].copy(), self.labels[start:stop].copy(),
                       k=self.k, clean_labels=clean)


def split_dataset(data: Dataset, n_train: int, n_val: int, n_test: int):
    """Contiguous train/val/test split; sizes must fit the dataset."""
    if n_train <= 0 or n_val <= 0 or n_test <= 0:
        raise InputError("all split sizes must be positive")
    if n_train + n_val + n_test > data.n:
        raise InputError(
            f"splits {n_train}+{n_val}+{n_test} exceed dataset size {data.n}"
        )
    a = data.slice(0, n_train)
    b = data.slice(n_train, n_train + n_val)
    c = data.slice(n_train + n_val, n_train + n_val + n_test)
    return a, b, c


def gen_synthetic(n: int, k: int, d: int, separation: float, seed: int) -> Dataset:
    """k isotropic unit-variance Gaussian blobs with pairwise class-mean
    distance ``separation`` (minimum pairwise distance when k > d+1 forces
    a non-simplex layout). Labels cycle 0..k-1 so any prefix split stays
    balanced. Deterministic per seed."""
    if k < 2:
        raise InputError(f"need at least 2 classes, got {k}")
    if d < 1 or n < 1:
        raise InputError("n and d must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    if separation == 0.0:
        means = np.zeros((k, d))
    elif k <= d:
        # orthogonal corners: all pairwise distances equal separation
        means = np.zeros((k, d))
        for c in range(k):
            means[c, c] = separation / np.sqrt(2.0)
    else:
        directions = rng.standard_normal((k, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        dists = np.linalg.norm(directions[:, None, :] - directions[None, :, :], axis=2)
        min_dist = dists[~np.eye(k, dtype=bool)].min()
        if min_dist <= 0:
            raise InputError("degenerate class directions; use a different seed")
        means = directions * (separation / min_dist)
    labels = np.arange(n, dtype=np.int64) % k
    inputs = means[labels] + rng.standard_normal((n, d))
    return Dataset(inputs, labels, k=k)


# ---------------------------------------------------------------------------
# IDX format (big-endian headers, uint8 payload)


def _read_be32(buf: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(buf):
        raise FormatError(f"{path}: truncated header", offset=offset)
    return struct.unpack_from(">I", buf, offset)[0]


def load_idx(images_path, labels_path) -> Dataset:
    """Load an image/label IDX pair; pixels scaled to [0,1] float64 and
    flattened row-major."""
    images_path, labels_path = str(images_path), str(labels_path)
    img = Path(images_path).read_bytes()
    magic = _read_be32(img, 0, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(
            f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}",
            offset=0,
        )
    n = _read_be32(img, 4, images_path)
    rows = _read_be32(img, 8, images_path)
    cols = _read_be32(img, 12, images_path)
    need = 16 + n * rows * cols
    if len(img) < need:
        raise FormatError(f"{images_path}: truncated pixel data", offset=len(img))
    pixels = np.frombuffer(img, dtype=np.uint8, count=n * rows * cols, offset=16)

    lab = Path(labels_path).read_bytes()
    magic = _read_be32(lab, 0, labels_path)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(
            f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}",
            offset=0,
        )
    n_labels = _read_be32(lab, 4, labels_path)
    if n_labels != n:
        raise FormatError(
            f"{labels_path}: {n_labels} labels for {n} images", offset=4
        )
    if len(lab) < 8 + n:
        raise FormatError(f"{labels_path}: truncated label data", offset=len(lab))
    labels = np.frombuffer(lab, dtype=np.uint8, count=n, offset=8).astype(np.int64)

    inputs = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    k = int(labels.max()) + 1 if n else 2
    return Dataset(inputs, labels, k=max(k, 2))


# ---------------------------------------------------------------------------
# on-disk dataset format


def _base(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix == ".json" else p


def save_dataset(data: Dataset, path) -> Path:
    """Write ``<base>.json`` + ``<base>.bin``; returns the json path."""
    base = _base(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    blob = bytearray()
    blob += np.ascontiguousarray(data.inputs, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(data.labels, dtype="<i8").tobytes()
    if data.clean_labels is not None:
        blob += np.ascontiguousarray(data.clean_labels, dtype="<i8").tobytes()
    meta = {
        "format": "limitlab-dataset-v1",
        "n": int(data.n),
        "d": int(data.inputs.shape[1]),
        "k": int(data.k),
        "has_clean_labels": data.clean_labels is not None,
        "bin_file": base.name + ".bin",
    }
    base.with_suffix(".bin").write_bytes(bytes(blob))
    base.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return base.with_suffix(".json")


def load_dataset(path) -> Dataset:
    base = _base(path)
    meta_path = base.with_suffix(".json")
    if not meta_path.exists():
        raise FormatError(f"{meta_path}: no such dataset")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{meta_path}: invalid JSON header: {exc}") from exc
    if meta.get("format") != "limitlab-dataset-v1":
        raise FormatError(f"{meta_path}: unknown format {meta.get('format')!r}")
    n, d, k = int(meta["n"]), int(meta["d"]), int(meta["k"])
    blob = (base.parent / meta["bin_file"]).read_bytes()
    need = n * d * 8 + n * 8 + (n * 8 if meta["has_clean_labels"] else 0)
    if len(blob) != need:
        raise FormatError(
            f"{meta['bin_file']}: expected {need} bytes, found {len(blob)}",
            offset=min(len(blob), need),
        )
    inputs = np.frombuffer(blob, dtype="<f8", count=n * d).reshape(n, d).copy()
    labels = np.frombuffer(blob, dtype="<i8", count=n, offset=n * d * 8).copy()
    clean = None
    if meta["has_clean_labels"]:
        clean = np.frombuffer(blob, dtype="<i8", count=n, offset=n * d * 8 + n * 8).copy()
    return Dataset(inputs, labels, k=k, clean_labels=clean)
