import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbdrop import regularizers as reg
from vbdrop.layers import DenseVariational
from vbdrop.tensor import derive_rng, make_rng
from vbdrop.variants import Variant, build_network

nonzero_theta = st.floats(-2.0, 2.0).filter(lambda t: abs(t) > 1e-3)
alpha_range = st.floats(0.01, 100.0)


class TestClosedForm:
    def test_value_at_log_alpha_zero(self):
        assert abs(reg.kl_vbd(0.0) - 0.5 * math.log(2.0)) <= 1e-15

    def test_vanishes_for_huge_alpha(self):
        assert reg.kl_vbd(50.0) <= 1e-12
        assert reg.kl_vbd(1e6) == 0.0

    def test_alpha_three(self):
        assert abs(reg.kl_vbd(math.log(3.0)) - 0.5 * math.log(4.0 / 3.0)) <= 1e-15

    def test_explicit_kl_spot_value(self):
        # 0.5*ln(2/(1*1)) + (1 + 1)/(2*2) - 0.5 = 0.5*ln 2
        got = reg.kl_gaussian_vs_prior(1.0, 1.0, 2.0)
        assert abs(got - 0.5 * math.log(2.0)) <= 1e-15

    def test_explicit_kl_domain(self):
        with pytest.raises(ValueError):
            reg.kl_gaussian_vs_prior(1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            reg.kl_gaussian_vs_prior(1.0, 1.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(nonzero_theta, alpha_range)
    def test_optimal_prior_collapses_to_closed_form(self, theta, alpha):
        direct = reg.kl_gaussian_vs_prior(theta, alpha, reg.gamma_star(theta, alpha))
        assert abs(direct - reg.kl_vbd(math.log(alpha))) <= 1e-12

    def test_value_does_not_depend_on_theta(self):
        rng = make_rng(0)
        alpha = 0.7
        thetas = rng.uniform(-2, 2, 10_000)
        thetas[np.abs(thetas) < 1e-3] = 1.0
        vals = reg.kl_gaussian_vs_prior(thetas, alpha, reg.gamma_star(thetas, alpha))
        assert np.max(np.abs(vals - vals[0])) <= 1e-12


class TestGammaStar:
    def test_spot_value(self):
        assert abs(reg.gamma_star(0.5, 0.2) - 0.3) <= 1e-15

    def test_degenerate_theta(self):
        assert reg.gamma_star(0.0, 5.0) == 0.0

    def test_local_minimum_probe(self):
        rng = make_rng(1)
        theta = rng.uniform(-2, 2, 300)
        theta[np.abs(theta) < 1e-3] = 0.7
        alpha = np.exp(rng.uniform(math.log(0.01), math.log(100), 300))
        g = reg.gamma_star(theta, alpha)
        base = reg.kl_gaussian_vs_prior(theta, alpha, g)
        for factor in (1 + 1e-3, 1 - 1e-3):
            probe = reg.kl_gaussian_vs_prior(theta, alpha, g * factor)
            assert np.all(base <= probe + 1e-15)


class TestVdApprox:
    def test_vanishes_for_huge_alpha(self):
        assert reg.kl_vd_approx(100.0) <= 1e-12

    def test_grows_like_half_log_alpha(self):
        val = reg.kl_vd_approx(-50.0)
        assert abs(val - (reg.VD_K1 + 25.0)) <= 1e-10

    def test_value_at_log_alpha_zero(self):
        want = reg.VD_K1 * (1.0 - 1.0 / (1.0 + math.exp(-reg.VD_K2))) + 0.5 * math.log(2.0)
        assert abs(reg.kl_vd_approx(0.0) - want) <= 1e-12


class TestGradients:
    def test_closed_form_derivative_matches_fd(self):
        grid = np.linspace(-12, 12, 97)
        h = 1e-5
        fd = (reg.kl_vbd(grid + h) - reg.kl_vbd(grid - h)) / (2 * h)
        assert np.max(np.abs(fd - reg.kl_vbd_grad(grid))) <= 1e-8

    def test_approx_derivative_matches_fd(self):
        grid = np.linspace(-12, 12, 97)
        h = 1e-5
        fd = (reg.kl_vd_approx(grid + h) - reg.kl_vd_approx(grid - h)) / (2 * h)
        assert np.max(np.abs(fd - reg.kl_vd_approx_grad(grid))) <= 1e-8


class TestShape:
    def test_nondecreasing_in_inverse_alpha(self):
        t = np.logspace(-6, 6, 1000)
        f = reg.kl_vbd(-np.log(t))
        assert np.all(np.diff(f) >= 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
    def test_midpoint_concave(self, t1, t2):
        mid = reg.kl_vbd(-math.log((t1 + t2) / 2.0))
        chord = 0.5 * (reg.kl_vbd(-math.log(t1)) + reg.kl_vbd(-math.log(t2)))
        assert mid >= chord - 1e-12


class TestMonteCarloOracle:
    def test_matched_distributions_give_zero(self):
        rng = derive_rng(0, 1)
        est, se = reg.mc_kl_oracle(1.3, 0.5, 0.5 * 1.3**2, 100_000, rng,
                                   zero_mean=True)
        assert abs(est) <= 3 * se + 1e-12

    def test_brackets_spot_value(self):
        rng = derive_rng(0, 2)
        est, se = reg.mc_kl_oracle(1.0, 1.0, 2.0, 1_000_000, rng)
        assert abs(est - 0.5 * math.log(2.0)) <= 3 * se

    def test_se_scales_with_sample_count(self):
        _, se_small = reg.mc_kl_oracle(1.0, 2.0, 1.5, 10_000, derive_rng(1, 0))
        _, se_big = reg.mc_kl_oracle(1.0, 2.0, 1.5, 1_000_000, derive_rng(1, 1))
        assert 5.0 <= se_small / se_big <= 20.0  # expect ~10 for 100x samples

    def test_brackets_explicit_kl_at_random_gammas(self):
        rng = derive_rng(2, 0)
        hits = 0
        cases = 60
        for _ in range(cases):
            theta = rng.uniform(0.2, 2.0)
            alpha = math.exp(rng.uniform(math.log(0.01), math.log(100)))
            gamma = reg.gamma_star(theta, alpha) * math.exp(rng.uniform(-1, 1))
            closed = reg.kl_gaussian_vs_prior(theta, alpha, gamma)
            est, se = reg.mc_kl_oracle(theta, alpha, gamma, 200_000, rng)
            hits += abs(est - closed) <= 3 * se
        assert hits >= math.ceil(0.94 * cases)

    def test_domain(self):
        with pytest.raises(ValueError):
            reg.mc_kl_oracle(1.0, 0.0, 1.0, 100, derive_rng(0, 0))


class TestRegularizerTotal:
    def test_none_is_zero(self):
        net = build_network([4, 3, 2], Variant("vbd"), seed=0)
        assert reg.regularizer_total(net, "none") == 0.0

    def test_shared_layer_sums_copies(self):
        layer = DenseVariational(2, 2, "lr-shared", rng=make_rng(0))
        layer.log_alpha[...] = 0.0

        class Net:
            layers = [layer]

        total = reg.regularizer_total(Net(), "vbd")
        assert abs(total - 4 * 0.5 * math.log(2.0)) <= 1e-12

    def test_per_weight_matches_scalar_loop(self):
        net = build_network([3, 4, 2], Variant("vbd", per_weight=True), seed=1)
        total = reg.regularizer_total(net, "vbd")
        want = 0.0
        for layer in net.layers:
            if not hasattr(layer, "log_sigma2") or layer.log_sigma2 is None:
                continue
            for th, ls in zip(layer.theta.ravel(), layer.log_sigma2.ravel()):
                want += 0.5 * math.log1p(th * th / math.exp(ls))
        assert abs(total - want) <= 1e-10

    def test_penalty_grads_match_fd(self):
        # theta and log_sigma2 gradients of the summed penalty, both penalties
        rng = make_rng(3)
        theta = rng.standard_normal((3, 4))
        log_sigma2 = rng.standard_normal((3, 4)) - 2.0

        class GateLike:
            def penalty_terms(self):
                return ("per-weight", theta, np.exp(log_sigma2))

        for kind in ("vbd", "vd"):
            val, grads = reg.layer_penalty_and_grads(GateLike(), kind)
            h = 1e-6
            for arr, g in ((theta, grads["theta"]), (log_sigma2, grads["log_sigma2"])):
                flat = arr.reshape(-1)
                gf = g.reshape(-1)
                for j in range(flat.size):
                    orig = flat[j]
                    flat[j] = orig + h
                    up = reg.layer_penalty_and_grads(GateLike(), kind)[0]
                    flat[j] = orig - h
                    down = reg.layer_penalty_and_grads(GateLike(), kind)[0]
                    flat[j] = orig
                    fd = (up - down) / (2 * h)
                    assert abs(fd - gf[j]) <= 1e-6 * max(1.0, abs(gf[j]))
