"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The two full-MNIST
criteria are skipped (loudly) if the IDX files are missing; everything else
is self-contained.  Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np

from conftest import MNIST_DIR, needs_mnist
from vbdrop.cli import main as cli_main
from vbdrop.compression import prune_neurons, sweep_threshold
from vbdrop.data import load_mnist, make_synthetic
from vbdrop.layers import FeatureGate
from vbdrop.regularizers import gamma_star, kl_gaussian_vs_prior, kl_vbd, mc_kl_oracle
from vbdrop.tensor import derive_rng, make_rng
from vbdrop.training import Adam, TrainConfig, train
from vbdrop.variants import Variant, build_network, loss_and_grads
from vbdrop.verify import grad_check_network

PRUNE_THRESHOLD = math.log(9.0)  # noise ratio 9 <=> drop probability 0.9


def report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_criterion_1_closed_form_kl_vs_oracles():
    """Identity at the optimal prior variance, and Monte-Carlo bracketing."""
    t0 = time.time()
    rng = make_rng(1001)
    theta = rng.uniform(-2.0, 2.0, 100)
    theta[np.abs(theta) < 1e-3] = 0.5  # theta = 0 is excluded
    alpha = np.exp(rng.uniform(math.log(0.01), math.log(100.0), 100))
    direct = kl_gaussian_vs_prior(theta, alpha, gamma_star(theta, alpha))
    closed = kl_vbd(np.log(alpha))
    worst = float(np.max(np.abs(direct - closed)))
    hits = 0
    for t, a in zip(theta, alpha):
        est, se = mc_kl_oracle(t, a, gamma_star(t, a), 1_000_000, rng)
        hits += abs(est - kl_vbd(math.log(a))) <= 3.0 * se
    elapsed = time.time() - t0
    ok = worst <= 1e-12 and hits >= 97 and elapsed < 60.0
    report(1, ok, f"identity max err {worst:.2e} (tol 1e-12), "
                  f"MC brackets {hits}/100 (need 97), {elapsed:.1f}s (< 60s)")


def test_criterion_2_gradient_correctness():
    """Analytic gradients vs central differences, h = 1e-4, per variant."""
    t0 = time.time()
    cases = [
        ("none", Variant("none")),
        ("gaussian-dropout", Variant("gaussian-dropout", alpha=0.8)),
        ("vd shared", Variant("vd")),
        ("vbd shared", Variant("vbd")),
        ("vd per-weight", Variant("vd", per_weight=True, noise_input_layer=True)),
        ("vbd per-weight", Variant("vbd", per_weight=True, noise_input_layer=True)),
    ]
    worst = {}
    for name, variant in cases:
        worst[name] = grad_check_network(
            variant, widths=(4, 6, 5, 3), batch=4, seed=0, h=1e-4
        )
    elapsed = time.time() - t0
    ok = all(w <= 1e-4 for w in worst.values()) and elapsed < 60.0
    detail = ", ".join(f"{k}={v:.2e}" for k, v in worst.items())
    report(2, ok, f"max rel err (tol 1e-4): {detail}; {elapsed:.1f}s (< 60s)")


def test_criterion_3_penalty_independent_of_means():
    """With the noise scale frozen, the mean-weight gradients of the
    adaptive method and plain Gaussian dropout coincide."""
    alpha = 0.37
    gd = build_network([6, 8, 5, 3], Variant("gaussian-dropout", alpha=alpha), seed=3)
    vbd = build_network([6, 8, 5, 3], Variant("vbd"), seed=3)
    for layer in vbd.layers:
        if getattr(layer, "log_alpha", None) is not None:
            layer.log_alpha[...] = math.log(alpha)
            layer.train_alpha = False
    data_rng = derive_rng(1003, 0)
    opts = {}
    for tag, net in (("gd", gd), ("vbd", vbd)):
        params = [(k, a) for k, a, t in net.parameters() if t]
        opts[tag] = Adam(params, lr=1e-3)
    worst = 0.0
    noise_gd, noise_vbd = derive_rng(1003, 1), derive_rng(1003, 1)
    for step in range(10):
        x = data_rng.standard_normal((8, 6))
        y = data_rng.integers(0, 3, 8)
        _, _, _, g1, _ = loss_and_grads(gd, x, y, 0.005, noise_gd)
        _, _, _, g2, _ = loss_and_grads(vbd, x, y, 0.005, noise_vbd)
        for key in g1:
            if key[1] == "theta":
                worst = max(worst, float(np.max(np.abs(g1[key] - g2[key]))))
        opts["gd"].step(g1)
        opts["vbd"].step(g2)
    report(3, worst <= 1e-12,
           f"max theta-gradient gap over 10 steps = {worst:.2e} (tol 1e-12)")


def test_criterion_4_sparsity_promoting_shape():
    """In t = 1/alpha the penalty is non-decreasing and midpoint-concave."""
    t = np.logspace(-6.0, 6.0, 1000)
    f = kl_vbd(-np.log(t))
    nondecreasing = bool(np.all(np.diff(f) >= 0.0))
    mids = kl_vbd(-np.log((t[:, None] + t[None, :]) / 2.0))
    chords = (f[:, None] + f[None, :]) / 2.0
    gap = float(np.min(mids - chords))
    ok = nondecreasing and gap >= -1e-12
    report(4, ok, f"non-decreasing={nondecreasing}, "
                  f"min midpoint-concavity gap={gap:.2e} over all grid pairs")


@needs_mnist
def test_criterion_5_mnist_classification_trend():
    """Adaptive noise must beat the clean baseline on mean test error."""
    t0 = time.time()
    train_ds = load_mnist(MNIST_DIR, "train")
    test_ds = load_mnist(MNIST_DIR, "test")
    means = {}
    per_seed = {}
    for tag, variant in (("none", Variant("none")),
                         ("vbd", Variant("vbd", per_weight=True))):
        errs = []
        for seed in (0, 1, 2):
            cfg = TrainConfig(arch=[784, 100, 100, 100, 10], epochs=20,
                              batch_size=128, seed=seed)
            _, log = train(train_ds, test_ds, variant, cfg)
            errs.append(log.records[-1].test_error)
        means[tag] = sum(errs) / len(errs)
        per_seed[tag] = errs
    elapsed = time.time() - t0
    ok = means["vbd"] < means["none"] and means["vbd"] <= 2.5
    report(5, ok,
           f"mean test error: vbd={means['vbd']:.3f}% (per seed {per_seed['vbd']}) "
           f"vs none={means['none']:.3f}% (per seed {per_seed['none']}); "
           f"need vbd < none and vbd <= 2.5%; {elapsed / 60:.1f} min")


@needs_mnist
def test_criterion_6_weight_compression():
    """The threshold sweep must reach a >= 20x weight ratio at <= 2.5% error."""
    t0 = time.time()
    train_ds = load_mnist(MNIST_DIR, "train")
    test_ds = load_mnist(MNIST_DIR, "test")
    variant = Variant("vbd", per_weight=True, noise_input_layer=True)
    cfg = TrainConfig(arch=[784, 300, 100, 10], epochs=20, batch_size=128, seed=0)
    net, log = train(train_ds, test_ds, variant, cfg)
    rows = sweep_threshold(net, np.arange(-1.0, 7.01, 0.5), test_ds)
    feasible = [(t, r, e) for t, r, e in rows if r >= 20.0 and e <= 2.5]
    best = max(feasible, key=lambda row: row[1], default=None)
    elapsed = time.time() - t0
    ok = best is not None
    detail = (f"best feasible point threshold={best[0]:.2f} ratio={best[1]:.1f} "
              f"error={best[2]:.2f}%" if best else
              f"no sweep point with ratio >= 20 at error <= 2.5%: {rows}")
    report(6, ok, detail + f"; unpruned error {log.records[-1].test_error:.2f}%; "
                           f"{elapsed / 60:.1f} min")


def test_criterion_7_structured_neuron_compression():
    """Gates must discard most pure-noise inputs and keep the informative ones."""
    t0 = time.time()
    n_informative, n_noise = 16, 48
    train_ds = make_synthetic(29, 500, 4, n_informative, noise_sd=0.25,
                              noise_dims=n_noise, part=0)
    test_ds = make_synthetic(29, 250, 4, n_informative, noise_sd=0.25,
                             noise_dims=n_noise, part=1)
    variant = Variant("vbd", structured=True)
    cfg = TrainConfig(arch=[64, 32, 16, 4], epochs=80, batch_size=32, seed=0,
                      kl_scale=6.0)
    net, _ = train(train_ds, test_ds, variant, cfg)
    pruned, rep = prune_neurons(net, PRUNE_THRESHOLD, test_ds)
    input_gate = next(l for l in pruned.layers if isinstance(l, FeatureGate))
    kept = input_gate.theta != 0.0
    kept_total = int(kept.sum())
    kept_informative = int(kept[:n_informative].sum())
    err_drift = abs(rep.error_after - rep.error_before)
    elapsed = time.time() - t0
    ok = (kept_total <= 24 and kept_informative >= 14 and err_drift <= 1.0
          and elapsed < 300.0)
    report(7, ok,
           f"input gates kept {kept_total}/64 (<= 24), informative kept "
           f"{kept_informative}/16 (>= 14), error {rep.error_before:.2f}% -> "
           f"{rep.error_after:.2f}% (drift {err_drift:.2f} <= 1.0), "
           f"retained {rep.neurons_text()}; {elapsed:.0f}s (< 300s)")


def test_criterion_8_determinism(tmp_path):
    """Identical seed, config, and data give byte-identical training logs."""
    args = ["--data", "synthetic", "--synth-classes", "3", "--synth-dim", "8",
            "--synth-per-class", "150", "--synth-test-per-class", "60",
            "--variant", "vbd", "--alpha-mode", "per-weight",
            "--arch", "8,16,3", "--epochs", "5", "--batch-size", "32",
            "--seed", "11"]
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        assert cli_main(["train", *args, "--out", str(out)]) == 0
        outs.append((out / "trainlog.csv").read_bytes())
    ok = outs[0] == outs[1]
    report(8, ok, f"two runs wrote identical {len(outs[0])}-byte logs: {ok}")
