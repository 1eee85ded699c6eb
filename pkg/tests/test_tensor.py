import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbdrop import tensor
from vbdrop.errors import ShapeError


def naive_matmul(a, b):
    """Triple-loop oracle, deliberately independent of the library path."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


class TestMatmul:
    def test_identity(self):
        eye = np.eye(2)
        b = np.array([[3.0, 4.0], [5.0, 6.0]])
        assert np.array_equal(tensor.matmul(eye, b), b)

    def test_forced_scalar(self):
        out = tensor.matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 11.0

    def test_against_triple_loop(self):
        rng = tensor.make_rng(3)
        a = rng.standard_normal((7, 5))
        b = rng.standard_normal((5, 3))
        got = tensor.matmul(a, b)
        want = naive_matmul(a, b)
        assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.abs(want).max())

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))
    def test_against_triple_loop_any_shape(self, m, k, n, seed):
        rng = tensor.make_rng(seed)
        a = rng.standard_normal((m, k))
        b = rng.standard_normal((k, n))
        want = naive_matmul(a, b)
        assert np.allclose(tensor.matmul(a, b), want, rtol=1e-12, atol=1e-12)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            tensor.matmul(np.zeros((2, 3)), np.zeros((2, 3)))


class TestHadamard:
    def test_ones_identity(self):
        a = np.array([[2.0, 3.0]])
        assert np.array_equal(tensor.hadamard(a, np.ones_like(a)), a)

    def test_zeros_annihilate(self):
        a = np.array([[2.0, 3.0]])
        assert np.array_equal(tensor.hadamard(a, np.zeros_like(a)), np.zeros_like(a))

    def test_against_scalar_loop(self):
        rng = tensor.make_rng(4)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((5, 4))
        got = tensor.hadamard(a, b)
        for i in range(5):
            for j in range(4):
                assert abs(got[i, j] - a[i, j] * b[i, j]) <= 1e-15

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            tensor.hadamard(np.zeros((2, 3)), np.zeros((3, 2)))


class TestSampling:
    def test_gaussian_zero_variance_is_mean(self):
        rng = tensor.make_rng(0)
        mean = np.arange(6.0).reshape(2, 3)
        out = tensor.sample_gaussian(rng, mean, np.zeros_like(mean))
        assert np.array_equal(out, mean)

    def test_gaussian_moments(self):
        rng = tensor.make_rng(1)
        out = tensor.sample_gaussian(rng, np.zeros((1000, 1000)), np.ones((1000, 1000)))
        assert abs(out.mean()) < 0.005
        assert 0.99 <= out.var() <= 1.01

    def test_gaussian_negative_variance(self):
        rng = tensor.make_rng(0)
        with pytest.raises(ValueError):
            tensor.sample_gaussian(rng, np.zeros((2, 2)), np.full((2, 2), -1.0))

    def test_gaussian_replay(self):
        a = tensor.sample_gaussian(tensor.make_rng(9), np.zeros((4, 4)), np.ones((4, 4)))
        b = tensor.sample_gaussian(tensor.make_rng(9), np.zeros((4, 4)), np.ones((4, 4)))
        assert np.array_equal(a, b)

    def test_bernoulli_p_zero_all_ones(self):
        out = tensor.sample_bernoulli_scaled(tensor.make_rng(2), (50, 50), 0.0)
        assert np.all(out == 1.0)

    def test_bernoulli_mean_one(self):
        out = tensor.sample_bernoulli_scaled(tensor.make_rng(3), (1000, 1000), 0.5)
        assert 0.99 <= out.mean() <= 1.01

    def test_bernoulli_replay(self):
        a = tensor.sample_bernoulli_scaled(tensor.make_rng(4), (8, 8), 0.3)
        b = tensor.sample_bernoulli_scaled(tensor.make_rng(4), (8, 8), 0.3)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("p", [-0.1, 1.0, 1.5])
    def test_bernoulli_domain(self, p):
        with pytest.raises(ValueError):
            tensor.sample_bernoulli_scaled(tensor.make_rng(0), (2, 2), p)

    def test_derived_streams_differ(self):
        a = tensor.derive_rng(7, 0).standard_normal(4)
        b = tensor.derive_rng(7, 1).standard_normal(4)
        assert not np.array_equal(a, b)


def test_unit_noise_mask_reduces_to_plain_product():
    # (A o xi) theta with xi == 1 must equal A theta exactly
    rng = tensor.make_rng(5)
    a = rng.standard_normal((4, 6))
    theta = rng.standard_normal((6, 2))
    masked = tensor.matmul(tensor.hadamard(a, np.ones_like(a)), theta)
    assert np.array_equal(masked, tensor.matmul(a, theta))


class TestElementwise:
    def test_add_sub_scale_square_sqrt(self):
        a = np.array([[1.0, 4.0], [9.0, 16.0]])
        b = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert np.array_equal(tensor.add(a, b), a + 1)
        assert np.array_equal(tensor.sub(a, b), a - 1)
        assert np.array_equal(tensor.scale(a, 2.0), 2 * a)
        assert np.array_equal(tensor.square(b), b)
        assert np.array_equal(tensor.sqrt(a), np.array([[1.0, 2.0], [3.0, 4.0]]))
        with pytest.raises(ValueError):
            tensor.sqrt(np.array([[-1.0]]))

    def test_transpose_and_sums(self):
        a = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        assert np.array_equal(tensor.transpose(a), a.T)
        assert np.array_equal(tensor.row_sum(a), np.array([[6.0], [15.0]]))
        assert np.array_equal(tensor.col_sum(a), np.array([[5.0, 7.0, 9.0]]))

    def test_map_elementwise(self):
        a = np.array([[1.0, -2.0]])
        out = tensor.map_elementwise(a, lambda v: v * v)
        assert np.array_equal(out, np.array([[1.0, 4.0]]))

    def test_finite_check_trips(self):
        bad = np.array([[np.inf, 0.0]])
        with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
            tensor.hadamard(bad, np.zeros_like(bad))  # inf * 0 -> nan

    def test_as_matrix_rank(self):
        with pytest.raises(ShapeError):
            tensor.as_matrix(np.zeros(3))
