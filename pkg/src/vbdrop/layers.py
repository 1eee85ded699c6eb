"""Network layers with exact hand-derived reverse-mode gradients.

The layer set is fixed: fully connected blocks with optional multiplicative
noise, relu, and per-feature Gaussian gates for structured pruning.  Each
layer implements forward_eval (deterministic, mean weights), forward_train
(noise sampled from an rng, or replayed from a frozen cache, or suppressed
entirely when rng is None), and backward against a cache from forward_train.

Noise modes of the dense layer:

  plain           B = A @ theta
  bernoulli       B = (A * mask) @ theta, inverted-dropout mask at rate p
  gaussian-noise  B = (A * xi) @ theta,   xi ~ N(1, alpha)
  lr-shared       B sampled from N(A @ theta, exp(log_alpha) * (A^2 @ theta^2))
  lr-perweight    B sampled from N(A @ theta, A^2 @ exp(log_sigma2))

The two lr modes sample layer outputs directly from the Gaussian induced by
multiplicative weight noise, which matches sampling W ~ N(theta, sigma^2) in
distribution but with far lower gradient variance.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ShapeError, UsageError
from .tensor import sample_bernoulli_scaled

DENSE_MODES = ("plain", "bernoulli", "gaussian-noise", "lr-shared", "lr-perweight")

# log(sigma^2) init floor; only relevant if a weight initializes to exactly 0.
_LOG_SIGMA2_FLOOR = 1e-40


class DenseVariational:
    def __init__(self, fan_in, fan_out, mode="plain", *, rng, p=0.5,
                 fixed_alpha=1.0, init_alpha=0.01, train_alpha=True):
        if mode not in DENSE_MODES:
            raise ValueError(f"unknown dense mode {mode!r}")
        if fan_in < 1 or fan_out < 1:
            raise ValueError("layer widths must be >= 1")
        if mode == "bernoulli" and not 0.0 <= p < 1.0:
            raise ValueError(f"bernoulli rate p must be in [0, 1), got {p}")
        if mode in ("gaussian-noise", "lr-shared") and fixed_alpha < 0.0:
            raise ValueError(f"noise variance alpha must be >= 0, got {fixed_alpha}")
        self.fan_in = fan_in
        self.fan_out = fan_out
        self.mode = mode
        self.p = p
        self.fixed_alpha = fixed_alpha
        self.train_alpha = train_alpha
        self.theta = rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out))
        self.log_sigma2 = None
        self.log_alpha = None
        if mode == "lr-perweight":
            self.log_sigma2 = np.log(
                np.maximum(init_alpha * self.theta**2, _LOG_SIGMA2_FLOOR)
            )
        elif mode == "lr-shared":
            start = fixed_alpha if not train_alpha else init_alpha
            self.log_alpha = np.array(math.log(start) if start > 0 else -math.inf)

    def params(self):
        out = [("theta", self.theta, True)]
        if self.mode == "lr-shared":
            out.append(("log_alpha", self.log_alpha, self.train_alpha))
        elif self.mode == "lr-perweight":
            out.append(("log_sigma2", self.log_sigma2, self.train_alpha))
        return out

    def sigma2(self):
        # overflow to inf is the honest limit; divergence is caught by the
        # training loop's finite-loss check
        if self.mode == "lr-shared":
            with np.errstate(over="ignore"):
                return float(np.exp(self.log_alpha)) * self.theta**2
        if self.mode == "lr-perweight":
            with np.errstate(over="ignore"):
                return np.exp(self.log_sigma2)
        return None

    def penalty_terms(self):
        if self.mode == "lr-shared":
            return ("shared", float(self.log_alpha), self.theta.size)
        if self.mode == "lr-perweight":
            return ("per-weight", self.theta, self.sigma2())
        return None

    def log_alpha_values(self):
        if self.mode == "lr-shared":
            return np.array([float(self.log_alpha)])
        if self.mode == "lr-perweight":
            with np.errstate(divide="ignore"):
                return (self.log_sigma2 - np.log(self.theta**2)).ravel()
        return np.empty(0)

    def _check_input(self, a):
        if a.shape[1] != self.fan_in:
            raise ShapeError(
                f"dense layer expects {self.fan_in} inputs, got {a.shape[1]}"
            )

    def forward_eval(self, a):
        self._check_input(a)
        return backend.kernels.matmul(a, self.theta)

    def forward_train(self, a, rng=None, frozen=None):
        self._check_input(a)
        k = backend.kernels
        if self.mode == "plain":
            return k.matmul(a, self.theta), {"a": a}
        if self.mode in ("bernoulli", "gaussian-noise"):
            if frozen is not None:
                mask = frozen["mask"]
            elif rng is None:
                mask = np.ones_like(a)
            elif self.mode == "bernoulli":
                mask = sample_bernoulli_scaled(rng, a.shape, self.p)
            else:
                # multiplicative Gaussian input noise, mean 1, variance alpha
                mask = 1.0 + math.sqrt(self.fixed_alpha) * rng.standard_normal(a.shape)
            return k.matmul(a * mask, self.theta), {"a": a, "mask": mask}
        if frozen is not None:
            eps = frozen["eps"]
        elif rng is None:
            eps = np.zeros((a.shape[0], self.fan_out))
        else:
            eps = rng.standard_normal((a.shape[0], self.fan_out))
        sigma2 = self.sigma2()
        b, delta = k.local_reparam_forward(a, self.theta, sigma2, eps)
        return b, {"a": a, "eps": eps, "delta": delta, "sigma2": sigma2}

    def backward(self, gb, cache):
        k = backend.kernels
        a = cache["a"]
        if self.mode == "plain":
            return k.matmul_nt(gb, self.theta), {"theta": k.matmul_tn(a, gb)}
        if self.mode in ("bernoulli", "gaussian-noise"):
            mask = cache["mask"]
            gtheta = k.matmul_tn(a * mask, gb)
            ga = k.matmul_nt(gb, self.theta) * mask
            return ga, {"theta": gtheta}
        sigma2 = cache["sigma2"]
        ga, gtheta, gsigma2 = k.local_reparam_backward(
            gb, a, self.theta, sigma2, cache["delta"], cache["eps"]
        )
        if self.mode == "lr-perweight":
            return ga, {"theta": gtheta, "log_sigma2": gsigma2 * sigma2}
        with np.errstate(over="ignore"):
            alpha = float(np.exp(self.log_alpha))
        grads = {
            "theta": gtheta + gsigma2 * (2.0 * alpha * self.theta),
            "log_alpha": np.array(float(np.sum(gsigma2 * sigma2))),
        }
        return ga, grads


class Relu:
    def params(self):
        return []

    def forward_eval(self, a):
        return backend.kernels.relu(a)

    def forward_train(self, a, rng=None, frozen=None):
        return backend.kernels.relu(a), {"x": a}

    def backward(self, g, cache):
        return backend.kernels.relu_backward(g, cache["x"]), {}


class FeatureGate:
    """Per-feature multiplicative Gaussian gate, optionally after a relu.

    Training multiplies each activation column d by its own draw
    theta_d + sigma_d * eps (one draw per batch row); evaluation multiplies by
    theta_d.  A gate whose theta_d is zeroed removes feature d entirely, so
    these layers are the unit of structured (neuron-level) pruning.
    """

    def __init__(self, dim, activation="identity", init_alpha=0.01):
        if activation not in ("identity", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        self.dim = dim
        self.activation = activation
        self.theta = np.ones(dim)
        self.log_sigma2 = np.full(dim, math.log(init_alpha))

    def params(self):
        return [("theta", self.theta, True), ("log_sigma2", self.log_sigma2, True)]

    def penalty_terms(self):
        return ("per-weight", self.theta, np.exp(self.log_sigma2))

    def log_alpha_values(self):
        with np.errstate(divide="ignore"):
            return self.log_sigma2 - np.log(self.theta**2)

    def _activate(self, b):
        return backend.kernels.relu(b) if self.activation == "relu" else b

    def forward_eval(self, b):
        if b.shape[1] != self.dim:
            raise ShapeError(f"gate expects {self.dim} features, got {b.shape[1]}")
        return self._activate(b) * self.theta

    def forward_train(self, b, rng=None, frozen=None):
        if b.shape[1] != self.dim:
            raise ShapeError(f"gate expects {self.dim} features, got {b.shape[1]}")
        f = self._activate(b)
        if frozen is not None:
            eps = frozen["eps"]
        elif rng is None:
            eps = np.zeros_like(b)
        else:
            eps = rng.standard_normal(b.shape)
        w = self.theta + np.exp(0.5 * self.log_sigma2) * eps
        return f * w, {"b": b, "f": f, "eps": eps, "w": w}

    def backward(self, g, cache):
        gf = g * cache["w"]
        gw = g * cache["f"]
        gtheta = gw.sum(axis=0)
        g_log_sigma2 = 0.5 * np.exp(0.5 * self.log_sigma2) * (gw * cache["eps"]).sum(
            axis=0
        )
        if self.activation == "relu":
            gb = backend.kernels.relu_backward(gf, cache["b"])
        else:
            gb = gf
        return gb, {"theta": gtheta, "log_sigma2": g_log_sigma2}


@dataclass
class ForwardTrace:
    """Everything backward needs: per-layer caches, in layer order.

    Replaying forward_train with a trace as ``frozen`` reuses the stored
    noise, reproducing the same stochastic pass for the current parameters.
    """

    caches: list
    logits: np.ndarray


class Network:
    """A fixed layer sequence ending in logits."""

    def __init__(self, layers, regularizer="none", widths=None):
        self.layers = layers
        self.regularizer = regularizer
        self.widths = widths

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr, trainable in layer.params():
                out.append(((i, name), arr, trainable))
        return out

    def forward_eval(self, x):
        for layer in self.layers:
            x = layer.forward_eval(x)
        return x

    def forward_train(self, x, rng=None, frozen=None):
        caches = []
        for i, layer in enumerate(self.layers):
            fc = frozen.caches[i] if frozen is not None else None
            x, cache = layer.forward_train(x, rng, fc)
            caches.append(cache)
        return x, ForwardTrace(caches, x)

    def backward(self, trace, grad_logits):
        if len(trace.caches) != len(self.layers):
            raise UsageError(
                f"trace has {len(trace.caches)} layer caches, network has "
                f"{len(self.layers)} layers"
            )
        grads = {}
        g = grad_logits
        for i in range(len(self.layers) - 1, -1, -1):
            g, layer_grads = self.layers[i].backward(g, trace.caches[i])
            for name, grad in layer_grads.items():
                grads[(i, name)] = grad
        return grads

    def log_alpha_values(self):
        vals = [
            layer.log_alpha_values()
            for layer in self.layers
            if hasattr(layer, "log_alpha_values")
        ]
        vals = [v for v in vals if v.size]
        return np.concatenate(vals) if vals else np.empty(0)


def softmax_cross_entropy(logits, labels):
    """Mean NLL over the batch and d(loss)/d(logits) = (softmax - onehot)/M."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ShapeError("labels must be 1-D and aligned with logits rows")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError("label out of range")
    return backend.kernels.softmax_xent(logits, labels)
