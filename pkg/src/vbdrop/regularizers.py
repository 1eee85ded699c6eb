"""KL penalties for adaptive multiplicative Gaussian noise.

The posterior over a weight is N(theta, alpha*theta^2).  Against a zero-mean
Gaussian prior whose variance gamma is itself optimized, the KL collapses to
0.5*log(1 + 1/alpha) per weight, independent of theta.  The older log-uniform
formulation has no closed form and uses a fitted sigmoid approximation whose
constants are fixed below.  A Monte-Carlo estimator is provided purely as a
verification oracle for the closed forms.
"""

import math

import numpy as np

from . import backend

# Fitted constants of the sigmoid KL approximation for the log-uniform prior.
VD_K1 = 0.63576
VD_K2 = 1.87320
VD_K3 = 1.48695

# |theta| floor used only in diagnostic evaluations of the explicit
# Gaussian-vs-prior KL, which is singular at theta == 0.
THETA_FLOOR = 1e-12


def _softplus(z):
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def kl_vbd(log_alpha):
    """Closed-form penalty 0.5*log(1 + exp(-log_alpha)), elementwise."""
    out = 0.5 * _softplus(-np.asarray(log_alpha, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def kl_vbd_grad(log_alpha):
    """d/d(log_alpha) of kl_vbd: -0.5*sigmoid(-log_alpha)."""
    out = -0.5 * _sigmoid(-np.asarray(log_alpha, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def kl_vd_approx(log_alpha, k1=VD_K1, k2=VD_K2, k3=VD_K3):
    """Sigmoid-approximated penalty, shifted by +k1 so it vanishes as alpha -> inf."""
    x = np.asarray(log_alpha, dtype=np.float64)
    out = k1 - k1 * _sigmoid(k2 + k3 * x) + 0.5 * _softplus(-x)
    return float(out) if out.ndim == 0 else out


def kl_vd_approx_grad(log_alpha, k1=VD_K1, k2=VD_K2, k3=VD_K3):
    x = np.asarray(log_alpha, dtype=np.float64)
    s = _sigmoid(k2 + k3 * x)
    out = -k1 * k3 * s * (1.0 - s) - 0.5 * _sigmoid(-x)
    return float(out) if out.ndim == 0 else out


def gamma_star(theta, alpha):
    """Prior variance minimizing the Gaussian-vs-prior KL: alpha*theta^2 + theta^2."""
    theta = np.asarray(theta, dtype=np.float64)
    out = alpha * theta * theta + theta * theta
    return float(out) if out.ndim == 0 else out


def kl_gaussian_vs_prior(theta, alpha, gamma):
    """Exact KL( N(theta, alpha*theta^2) || N(0, gamma) ), a diagnostic surface.

    Singular at theta == 0, where the posterior variance degenerates; a
    |theta| floor keeps diagnostic sweeps finite.
    """
    if np.any(np.asarray(alpha) <= 0):
        raise ValueError("kl_gaussian_vs_prior: alpha must be positive")
    if np.any(np.asarray(gamma) <= 0):
        raise ValueError("kl_gaussian_vs_prior: gamma must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    t2 = np.maximum(theta * theta, THETA_FLOOR**2)
    out = 0.5 * np.log(gamma / (alpha * t2)) + (alpha * t2 + t2) / (2.0 * gamma) - 0.5
    return float(out) if out.ndim == 0 else out


def mc_kl_oracle(theta, alpha, gamma, n_samples, rng, *, zero_mean=False,
                 chunk=1_000_000):
    """Monte-Carlo estimate of KL( N(mean, alpha*theta^2) || N(0, gamma) ).

    Averages log q(w) - log p(w) over w ~ q.  Returns (estimate, standard
    error).  With zero_mean=True the posterior mean is forced to 0, which
    gives the matched case KL = 0 when gamma = alpha*theta^2.
    """
    if alpha <= 0 or gamma <= 0:
        raise ValueError("mc_kl_oracle: alpha and gamma must be positive")
    if n_samples < 2:
        raise ValueError("mc_kl_oracle: need at least 2 samples")
    s2 = alpha * theta * theta
    mean = 0.0 if zero_mean else theta
    log_ratio_const = -0.5 * math.log(s2) + 0.5 * math.log(gamma)
    total = 0.0
    total_sq = 0.0
    left = n_samples
    while left > 0:
        m = min(left, chunk)
        z = rng.standard_normal(m)
        w = mean + math.sqrt(s2) * z
        vals = log_ratio_const - 0.5 * z * z + w * w / (2.0 * gamma)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        left -= m
    est = total / n_samples
    var = max(total_sq - n_samples * est * est, 0.0) / (n_samples - 1)
    return est, math.sqrt(var / n_samples)


def layer_penalty_and_grads(layer, kind):
    """Penalty value and parameter gradients contributed by one layer.

    Layers advertise their posterior through ``penalty_terms()``; layers
    without one contribute nothing.  Gradient keys match the layer's
    parameter names.
    """
    get_terms = getattr(layer, "penalty_terms", None)
    if kind == "none" or get_terms is None:
        return 0.0, {}
    terms = get_terms()
    if terms is None:
        return 0.0, {}
    if terms[0] == "shared":
        _, log_alpha, count = terms
        if kind == "vbd":
            return count * kl_vbd(log_alpha), {
                "log_alpha": np.array(count * kl_vbd_grad(log_alpha))
            }
        return count * kl_vd_approx(log_alpha), {
            "log_alpha": np.array(count * kl_vd_approx_grad(log_alpha))
        }
    _, theta, sigma2 = terms
    shape = theta.shape
    theta2d = theta.reshape(1, -1) if theta.ndim == 1 else theta
    sigma2d = sigma2.reshape(1, -1) if sigma2.ndim == 1 else sigma2
    if kind == "vbd":
        val, gt, gl = backend.kernels.penalty_vbd(theta2d, sigma2d)
    else:
        val, gt, gl = backend.kernels.penalty_vd(theta2d, sigma2d, VD_K1, VD_K2, VD_K3)
    return val, {"theta": gt.reshape(shape), "log_sigma2": gl.reshape(shape)}


def penalty_and_grads(network, kind):
    """Total penalty over all variational layers plus per-parameter gradients."""
    total = 0.0
    grads = {}
    for i, layer in enumerate(network.layers):
        val, g = layer_penalty_and_grads(layer, kind)
        total += val
        for name, grad in g.items():
            grads[(i, name)] = grad
    return total, grads


def regularizer_total(network, kind):
    """Sum of the per-weight penalty over all variational layers."""
    return penalty_and_grads(network, kind)[0]
