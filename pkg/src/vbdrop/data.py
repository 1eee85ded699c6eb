"""Dataset loading (IDX files), synthetic generators, and minibatch serving.

IDX layout (big endian): 4-byte magic, one 4-byte unsigned size per
dimension, then raw bytes.  Image files carry magic 0x00000803 and three
dimensions (count, rows, cols); label files carry 0x00000801 and one.
Files may be gzip-compressed; compression is sniffed from the first two
bytes, not the file name.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .tensor import derive_rng

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class Dataset:
    features: np.ndarray  # (n, input_dim) float64
    labels: np.ndarray  # (n,) int64, values in [0, num_classes)
    num_classes: int

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def input_dim(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n, path, offset):
    buf = f.read(n)
    if len(buf) != n:
        raise DataFormatError(
            f"{path}: truncated, wanted {n} bytes at byte offset {offset}, got {len(buf)}"
        )
    return buf


def _read_header(f, path, expected_magic, ndim):
    magic = struct.unpack(">I", _read_exact(f, 4, path, 0))[0]
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, "
            f"expected 0x{expected_magic:08x}"
        )
    dims = struct.unpack(
        f">{ndim}I", _read_exact(f, 4 * ndim, path, 4)
    )
    return dims


def load_idx(images_path, labels_path):
    """Load an IDX image/label pair into a Dataset with pixels scaled to [0, 1]."""
    with _open_maybe_gzip(images_path) as f:
        count, rows, cols = _read_header(f, images_path, IMAGES_MAGIC, 3)
        body = _read_exact(f, count * rows * cols, images_path, 16)
        pixels = np.frombuffer(body, dtype=np.uint8)
    with _open_maybe_gzip(labels_path) as f:
        (label_count,) = _read_header(f, labels_path, LABELS_MAGIC, 1)
        raw = _read_exact(f, label_count, labels_path, 8)
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if label_count != count:
        raise DataFormatError(
            f"{labels_path}: {label_count} labels for {count} images"
        )
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    num_classes = int(labels.max()) + 1 if count else 0
    return Dataset(features, labels, num_classes)


def _resolve_idx_file(directory, stem):
    for name in (stem, stem + ".gz"):
        p = Path(directory) / name
        if p.exists():
            return p
    raise FileNotFoundError(
        f"no {stem}[.gz] under {directory}; point --mnist-dir (or VBDROP_MNIST_DIR) "
        "at a directory with the four IDX files"
    )


def load_mnist(directory, split="train"):
    images, labels = MNIST_FILES[split]
    return load_idx(
        _resolve_idx_file(directory, images), _resolve_idx_file(directory, labels)
    )


def make_synthetic(seed, n_per_class, num_classes, input_dim, *,
                   noise_sd=0.25, noise_dims=0, part=0):
    """Gaussian class blobs with mutually orthogonal unit means.

    The first ``input_dim`` coordinates carry the class structure; an optional
    ``noise_dims`` tail is filled with class-independent unit Gaussians, which
    makes those inputs pure distractors.  The class means depend only on the
    seed, while samples come from a stream keyed by (seed, part), so
    part=0/part=1 give disjoint train/test sets of the same task.
    Deterministic throughout.
    """
    if min(n_per_class, num_classes, input_dim) < 1:
        raise ValueError("make_synthetic: counts must be positive")
    if num_classes > input_dim:
        raise ValueError("make_synthetic: need input_dim >= num_classes")
    q, _ = np.linalg.qr(derive_rng(seed, 101).standard_normal((input_dim, num_classes)))
    means = q.T  # (num_classes, input_dim), orthonormal rows
    rng = derive_rng(seed, 102, part)
    n = n_per_class * num_classes
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), n_per_class)
    features = means[labels] + noise_sd * rng.standard_normal((n, input_dim))
    if noise_dims:
        features = np.hstack([features, rng.standard_normal((n, noise_dims))])
    perm = rng.permutation(n)
    return Dataset(np.ascontiguousarray(features[perm]), labels[perm], num_classes)


def split_tail(dataset, fraction):
    """Split off the trailing fraction of the sample order (head, tail)."""
    cut = dataset.n - int(round(dataset.n * fraction))
    idx = np.arange(dataset.n)
    return dataset.subset(idx[:cut]), dataset.subset(idx[cut:])


class BatchIterator:
    """Serves shuffled minibatches; every epoch visits each sample once.

    The permutation for epoch e is drawn from a stream keyed by (seed, e), so
    replaying an iterator reproduces the same batch sequence exactly.  The
    final batch of an epoch may be short.
    """

    def __init__(self, dataset, batch_size, seed):
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self._pos = 0
        self._perm = self._epoch_perm(0)

    def _epoch_perm(self, epoch):
        return derive_rng(self.seed, 7, epoch).permutation(self.dataset.n)

    @property
    def batches_per_epoch(self):
        n, m = self.dataset.n, self.batch_size
        return (n + m - 1) // m

    def next_batch(self):
        if self._pos >= self.dataset.n:
            self.epoch += 1
            self._perm = self._epoch_perm(self.epoch)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return self.dataset.features[idx], self.dataset.labels[idx]
