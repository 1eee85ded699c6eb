"""Dense 2-D float64 matrix operations and seeded sampling.

Matrices are plain numpy arrays: float64, two-dimensional, row-major.  The
functions here validate shapes and domains and delegate the arithmetic to the
active kernel backend (or numpy for the cheap elementwise cases).  All public
operations assert finite outputs when running unoptimized.

Random sampling uses counter-based Philox generators.  A given seed plus a
given call sequence always reproduces the same samples bit for bit;
independent streams are derived through SeedSequence.
"""

import numpy as np

from . import backend
from .errors import ShapeError

Matrix2D = np.ndarray


def as_matrix(x):
    """Coerce to a C-contiguous float64 2-D array, validating rank."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def _checked(out):
    if __debug__ and not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite entries in matrix operation result")
    return out


def _require_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a, b):
    """Matrix product; element (m, d) = sum_k a(m, k) * b(k, d)."""
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    return _checked(backend.kernels.matmul(a, b))


def hadamard(a, b):
    """Elementwise product of same-shape matrices."""
    _require_same_shape(a, b, "hadamard")
    return _checked(a * b)


def add(a, b):
    _require_same_shape(a, b, "add")
    return _checked(a + b)


def sub(a, b):
    _require_same_shape(a, b, "sub")
    return _checked(a - b)


def scale(a, c):
    return _checked(a * float(c))


def square(a):
    return _checked(a * a)


def sqrt(a):
    if np.any(a < 0):
        raise ValueError("sqrt: negative entries")
    return _checked(np.sqrt(a))


def transpose(a):
    return np.ascontiguousarray(a.T)


def row_sum(a):
    """Sum over columns, one value per row; returns an (rows, 1) matrix."""
    return _checked(a.sum(axis=1, keepdims=True))


def col_sum(a):
    """Sum over rows, one value per column; returns a (1, cols) matrix."""
    return _checked(a.sum(axis=0, keepdims=True))


def map_elementwise(a, fn):
    return _checked(np.vectorize(fn, otypes=[np.float64])(a))


def make_rng(seed):
    """Counter-based generator for a single stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def derive_rng(*parts):
    """Independent stream keyed by a tuple of integers (seed, purpose, epoch, ...)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(p) for p in parts]))
    )


def sample_gaussian(rng, mean, var):
    """Entrywise normal draws: mean + sqrt(var) * eps with eps ~ N(0, 1)."""
    _require_same_shape(mean, var, "sample_gaussian")
    if np.any(var < 0):
        raise ValueError("sample_gaussian: negative variance")
    eps = rng.standard_normal(mean.shape)
    return _checked(mean + np.sqrt(var) * eps)


def sample_bernoulli_scaled(rng, shape, p):
    """Inverted-dropout mask: 0 with probability p, else 1/(1-p), so E = 1."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"sample_bernoulli_scaled: p must be in [0, 1), got {p}")
    u = rng.random(shape)
    return _checked(np.where(u < p, 0.0, 1.0 / (1.0 - p)))
