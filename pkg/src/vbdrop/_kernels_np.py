"""Numpy implementation of the hot kernels.

This is the reference backend: every function here has a compiled twin in
``_kernels_c`` with the same signature and semantics.  All arrays are float64,
2-D and C-contiguous unless stated otherwise; labels are int64.
"""

import numpy as np


def matmul(a, b):
    return a @ b


def matmul_tn(a, b):
    """a.T @ b without materializing the transpose."""
    return a.T @ b


def matmul_nt(a, b):
    """a @ b.T without materializing the transpose."""
    return a @ b.T


def relu(x):
    return np.where(x > 0.0, x, 0.0)


def relu_backward(gy, x):
    return np.where(x > 0.0, gy, 0.0)


def local_reparam_forward(a, theta, sigma2, eps):
    """Sample layer outputs from their induced Gaussian.

    Output means are a @ theta; output variances are (a*a) @ sigma2, which is
    nonnegative by construction (no cancellation), so the sqrt is safe.
    Returns (output, delta) where delta is the per-entry standard deviation,
    cached for the backward pass.
    """
    mu = a @ theta
    delta = np.sqrt((a * a) @ sigma2)
    return mu + delta * eps, delta


def local_reparam_backward(gb, a, theta, sigma2, delta, eps):
    """Exact gradients through the sampled-output forward pass.

    gb is dLoss/dB for B = mu + delta*eps.  Where delta == 0 the noise path
    carries no signal and its gradient is defined as 0.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        gdelta2 = np.where(delta > 0.0, gb * eps / (2.0 * delta), 0.0)
    gtheta = a.T @ gb
    gsigma2 = (a * a).T @ gdelta2
    ga = gb @ theta.T + 2.0 * a * (gdelta2 @ sigma2.T)
    return ga, gtheta, gsigma2


def softmax_xent(logits, labels):
    """Mean negative log-likelihood and its logit gradient, log-sum-exp stabilized."""
    m = logits.shape[0]
    rows = np.arange(m)
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(s[:, 0]) - z[rows, labels]))
    g = e / s
    g[rows, labels] -= 1.0
    g /= m
    return loss, g


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place on p, m, v."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalty_vbd(theta, sigma2):
    """Closed-form KL penalty sum(0.5*log(1 + theta^2/sigma2)) and its gradients.

    The noise-to-signal ratio alpha is sigma2/theta^2, so this is
    0.5*log(1 + 1/alpha) per weight.  Gradients are returned with respect to
    theta and to log(sigma2); both stay finite as theta -> 0.
    """
    t2 = theta * theta
    val = float(np.sum(0.5 * np.log1p(t2 / sigma2)))
    den = t2 + sigma2
    gtheta = theta / den
    glog_sigma2 = -0.5 * t2 / den
    return val, gtheta, glog_sigma2


def penalty_vd(theta, sigma2, k1, k2, k3):
    """Sigmoid-approximated KL penalty of the log-uniform-prior method.

    Per weight: k1 - k1*sigmoid(k2 + k3*log(alpha)) + 0.5*log(1 + 1/alpha),
    normalized so the penalty vanishes as alpha -> inf.  Gradients with
    respect to theta and log(sigma2); the sigmoid term's theta-gradient has
    limit 0 at theta == 0 and is pinned there explicitly.
    """
    t2 = theta * theta
    with np.errstate(divide="ignore"):
        x = np.log(sigma2) - np.log(t2)
    sx = _sigmoid(k2 + k3 * x)
    val = float(np.sum(k1 - k1 * sx + 0.5 * np.log1p(t2 / sigma2)))
    den = t2 + sigma2
    sig_d = k1 * k3 * sx * (1.0 - sx)
    with np.errstate(divide="ignore", invalid="ignore"):
        gtheta = np.where(theta == 0.0, 0.0, 2.0 * sig_d / theta) + theta / den
    glog_sigma2 = -sig_d - 0.5 * t2 / den
    return val, gtheta, glog_sigma2
