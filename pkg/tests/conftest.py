import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

from vbdrop.data import make_synthetic

REPO_ROOT = Path(__file__).resolve().parent.parent
MNIST_DIR = REPO_ROOT / "data" / "mnist"


def mnist_available():
    return all(
        (MNIST_DIR / f"{stem}.gz").exists() or (MNIST_DIR / stem).exists()
        for stem in (
            "train-images-idx3-ubyte",
            "train-labels-idx1-ubyte",
            "t10k-images-idx3-ubyte",
            "t10k-labels-idx1-ubyte",
        )
    )


needs_mnist = pytest.mark.skipif(
    not mnist_available(),
    reason=f"MNIST IDX files not found under {MNIST_DIR} "
    "(run scripts/fetch_mnist.py or set VBDROP_MNIST_DIR)",
)


def write_idx_pair(directory, images, labels, *, gz=False):
    """Serialize uint8 images (n, rows, cols) and labels (n,) as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    img_path = Path(directory) / ("images.idx" + (".gz" if gz else ""))
    lab_path = Path(directory) / ("labels.idx" + (".gz" if gz else ""))
    img_bytes = struct.pack(">IIII", 0x803, n, rows, cols) + images.tobytes()
    lab_bytes = struct.pack(">II", 0x801, labels.shape[0]) + labels.tobytes()
    for path, blob in ((img_path, img_bytes), (lab_path, lab_bytes)):
        if gz:
            with gzip.open(path, "wb") as f:
                f.write(blob)
        else:
            path.write_bytes(blob)
    return img_path, lab_path


@pytest.fixture
def blobs2():
    """Well-separated 2-class blobs, train and test."""
    train = make_synthetic(11, 120, 2, 6, part=0)
    test = make_synthetic(11, 60, 2, 6, part=1)
    return train, test


@pytest.fixture
def blobs3():
    train = make_synthetic(5, 150, 3, 8, part=0)
    test = make_synthetic(5, 60, 3, 8, part=1)
    return train, test
