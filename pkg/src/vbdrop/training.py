"""Optimizers, the training loop, metrics, and per-epoch logging.

Everything is deterministic given (seed, config, data): parameter init, batch
order, and noise draws each use streams derived from the seed, and the log
serializes floats with repr so two identical runs write identical bytes.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backend
from .data import BatchIterator
from .errors import TrainingDiverged
from .regularizers import regularizer_total
from .tensor import derive_rng
from .variants import build_network, loss_and_grads

@dataclass
class TrainConfig:
    arch: list
    epochs: int
    batch_size: int = 128
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    momentum: float = 0.9
    # Per-step loss is mean_batch_NLL + warmup * kl_scale/N * penalty, so one
    # epoch accumulates the penalty exactly kl_scale times relative to the
    # full-data NLL sum.  1.0 is the evidence bound; larger values compress
    # harder at some accuracy cost.
    kl_scale: float = 1.0
    warmup_epochs: int = 10  # penalty ramps linearly over this many epochs
    lr_decay: bool = True  # decay lr linearly over the final third
    clip_norm: float = 10.0  # global gradient-norm clip; 0 disables
    seed: int = 0
    eval_every: int = 1

    def validate(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("adam betas must be in (0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.kl_scale < 0:
            raise ValueError("kl_scale must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    penalty: float
    test_error: float
    logalpha_min: float
    logalpha_med: float
    logalpha_max: float


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    CSV_HEADER = "epoch,train_nll,penalty,test_error,logalpha_min,logalpha_med,logalpha_max"

    def csv_text(self):
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(
                ",".join(
                    [str(r.epoch)]
                    + [
                        repr(float(v))
                        for v in (
                            r.train_nll,
                            r.penalty,
                            r.test_error,
                            r.logalpha_min,
                            r.logalpha_med,
                            r.logalpha_max,
                        )
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        Path(path).write_text(self.csv_text())


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params  # list of (key, array)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.moments = [
            (np.zeros(arr.size), np.zeros(arr.size)) for _, arr in params
        ]

    def step(self, grads, lr=None):
        self.t += 1
        lr = self.lr if lr is None else lr
        for (key, arr), (m, v) in zip(self.params, self.moments):
            g = np.ascontiguousarray(grads[key], dtype=np.float64).reshape(-1)
            backend.kernels.adam_update(
                arr.reshape(-1), g, m, v, self.t, lr, self.beta1, self.beta2, self.eps
            )


class SGD:
    def __init__(self, params, lr, momentum=0.9):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros(arr.shape) for _, arr in params]

    def step(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        for (key, arr), vel in zip(self.params, self.velocity):
            vel *= self.momentum
            vel += grads[key]
            arr -= lr * vel


def make_optimizer(config, params):
    if config.optimizer == "adam":
        return Adam(params, config.lr, config.beta1, config.beta2, config.adam_eps)
    return SGD(params, config.lr, config.momentum)


def epoch_lr(config, epoch):
    if not config.lr_decay:
        return config.lr
    decay_start = config.epochs - config.epochs // 3
    if epoch < decay_start:
        return config.lr
    return config.lr * (config.epochs - epoch) / (config.epochs - decay_start)


def kl_warmup(epoch, warmup_epochs):
    if warmup_epochs <= 0:
        return 1.0
    return min(1.0, epoch / warmup_epochs)


def clip_global_norm(grads, keys, max_norm):
    """Scale the listed gradients so their joint L2 norm is at most max_norm."""
    sq = 0.0
    for key in keys:
        g = grads[key]
        sq += float(np.sum(g * g))
    norm = math.sqrt(sq)
    if norm > max_norm > 0:
        factor = max_norm / norm
        for key in keys:
            grads[key] = grads[key] * factor
    return norm


def evaluate(network, dataset, chunk=2048):
    """Deterministic test error in percent (mean weights, no noise)."""
    wrong = 0
    for start in range(0, dataset.n, chunk):
        x = dataset.features[start:start + chunk]
        y = dataset.labels[start:start + chunk]
        pred = np.argmax(network.forward_eval(x), axis=1)
        wrong += int(np.sum(pred != y))
    return 100.0 * wrong / dataset.n


def _log_alpha_stats(network):
    vals = network.log_alpha_values()
    if vals.size == 0:
        return math.nan, math.nan, math.nan
    return float(np.min(vals)), float(np.median(vals)), float(np.max(vals))


def train(train_ds, test_ds, variant, config, *, network=None, out_dir=None,
          checkpoint_hook=None):
    """Train a network on train_ds, tracking test error per epoch.

    Returns (network, TrainLog).  When out_dir is given, checkpoints are
    written at the best test error and after the final epoch.  A pre-built
    network may be passed to continue or to train a customized instance; by
    default one is built from config.arch and the variant.
    """
    from .checkpoint import save_checkpoint  # local import, checkpoint uses variants

    config.validate()
    if config.arch[0] != train_ds.input_dim:
        raise ValueError(
            f"arch input width {config.arch[0]} != dataset dim {train_ds.input_dim}"
        )
    if config.arch[-1] < train_ds.num_classes:
        raise ValueError("arch output width smaller than number of classes")
    net = network if network is not None else build_network(
        config.arch, variant, config.seed
    )
    noise_rng = derive_rng(config.seed, 23)
    batches = BatchIterator(train_ds, config.batch_size, config.seed)
    params = [(key, arr) for key, arr, trainable in net.parameters() if trainable]
    keys = [key for key, _ in params]
    opt = make_optimizer(config, params)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    log = TrainLog()
    best_error = math.inf
    n_total = train_ds.n
    for epoch in range(config.epochs):
        lr = epoch_lr(config, epoch)
        warm = kl_warmup(epoch, config.warmup_epochs)
        coeff = warm * config.kl_scale / n_total
        nll_sum = 0.0
        for b in range(batches.batches_per_epoch):
            x, y = batches.next_batch()
            total, nll, _, grads, _ = loss_and_grads(net, x, y, coeff, noise_rng)
            if not math.isfinite(total):
                raise TrainingDiverged(epoch, b, total)
            if config.clip_norm:
                clip_global_norm(grads, keys, config.clip_norm)
            opt.step(grads, lr)
            nll_sum += nll * len(y)
        penalty = regularizer_total(net, net.regularizer)
        if epoch % config.eval_every == 0 or epoch == config.epochs - 1:
            test_error = evaluate(net, test_ds)
        else:
            test_error = math.nan
        la_min, la_med, la_max = _log_alpha_stats(net)
        log.records.append(
            EpochRecord(epoch, nll_sum / n_total, penalty, test_error,
                        la_min, la_med, la_max)
        )
        if checkpoint_hook is not None:
            checkpoint_hook(epoch, net, test_error)
        if math.isfinite(test_error) and test_error <= best_error:
            if out is not None:
                save_checkpoint(net, variant, out / "checkpoint_best.npz")
            best_error = test_error
    if out is not None:
        save_checkpoint(net, variant, out / "checkpoint_final.npz")
    return net, log
