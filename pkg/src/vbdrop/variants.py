"""Variant configuration: binds a network to one noise scheme and penalty.

Fixed-rate variants (none, bernoulli, gaussian-noise, gaussian-dropout) never
train their noise scale and carry no penalty.  Learned-rate variants (vd,
vbd) always pair with their matching penalty.  By default every variant
leaves the first layer noise-free (raw inputs untouched); noise_input_layer
puts noise, and for the learned variants a prunable posterior, on the input
weight matrix as well, which weight-compression runs need since that matrix
holds most of the parameters.
"""

from dataclasses import dataclass, field, fields

from .errors import UsageError
from .layers import DenseVariational, FeatureGate, Network, Relu, softmax_cross_entropy
from .regularizers import penalty_and_grads
from .tensor import derive_rng

VARIANT_KINDS = ("none", "bernoulli", "gaussian-noise", "gaussian-dropout", "vd", "vbd")


@dataclass(frozen=True)
class Variant:
    kind: str = "none"
    p: float = 0.5  # dropout rate of the fixed input-noise baselines
    alpha: float = 1.0  # fixed noise variance (gaussian-noise, gaussian-dropout)
    per_weight: bool = False  # learn one noise scale per weight instead of per layer
    structured: bool = False  # per-feature gates instead of weight noise
    noise_input_layer: bool = False  # also mask the raw inputs
    init_alpha: float = field(default=0.01, repr=False)

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant {self.kind!r}")
        if self.structured and self.kind not in ("vd", "vbd"):
            raise UsageError("structured gates require a learned-rate variant")

    @property
    def regularizer(self):
        if self.kind == "vbd":
            return "vbd"
        if self.kind == "vd":
            return "vd"
        return "none"

    @property
    def trains_alpha(self):
        return self.kind in ("vd", "vbd")

    def asdict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def build_network(widths, variant, seed):
    """Construct the network for a variant; widths = [in, hidden..., out]."""
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    if min(widths) < 1:
        raise ValueError("layer widths must be >= 1")
    rng = derive_rng(seed, 11)
    layers = []
    if variant.structured:
        layers.append(FeatureGate(widths[0], "identity", init_alpha=variant.init_alpha))
        for i in range(len(widths) - 2):
            layers.append(DenseVariational(widths[i], widths[i + 1], "plain", rng=rng))
            layers.append(
                FeatureGate(widths[i + 1], "relu", init_alpha=variant.init_alpha)
            )
        layers.append(DenseVariational(widths[-2], widths[-1], "plain", rng=rng))
        return Network(layers, regularizer=variant.regularizer, widths=widths)

    for i in range(len(widths) - 1):
        skip_noise = i == 0 and not variant.noise_input_layer
        if variant.kind == "none" or skip_noise:
            mode, kwargs = "plain", {}
        elif variant.kind == "bernoulli":
            mode, kwargs = "bernoulli", {"p": variant.p}
        elif variant.kind == "gaussian-noise":
            mode, kwargs = "gaussian-noise", {"fixed_alpha": variant.alpha}
        elif variant.kind == "gaussian-dropout":
            mode = "lr-shared"
            kwargs = {"fixed_alpha": variant.alpha, "train_alpha": False}
        else:  # vd, vbd
            mode = "lr-perweight" if variant.per_weight else "lr-shared"
            kwargs = {"init_alpha": variant.init_alpha}
        layers.append(DenseVariational(widths[i], widths[i + 1], mode, rng=rng, **kwargs))
        if i < len(widths) - 2:
            layers.append(Relu())
    return Network(layers, regularizer=variant.regularizer, widths=widths)


def loss_and_grads(network, x, y, kl_coeff, rng=None, frozen=None):
    """One stochastic loss evaluation with gradients.

    Returns (total, nll, penalty, grads, trace): total = nll + kl_coeff *
    penalty, where penalty is the network's unscaled regularizer value.
    """
    logits, trace = network.forward_train(x, rng, frozen)
    nll, glogits = softmax_cross_entropy(logits, y)
    grads = network.backward(trace, glogits)
    penalty = 0.0
    if network.regularizer != "none":
        penalty, pgrads = penalty_and_grads(network, network.regularizer)
        if kl_coeff != 0.0:
            for key, pg in pgrads.items():
                if key in grads:
                    grads[key] = grads[key] + kl_coeff * pg
                else:
                    grads[key] = kl_coeff * pg
    return nll + kl_coeff * penalty, nll, penalty, grads, trace


def loss_value(network, x, y, kl_coeff, frozen=None):
    """Loss only, replaying frozen noise; the finite-difference oracle target."""
    logits, _ = network.forward_train(x, None, frozen)
    nll, _ = softmax_cross_entropy(logits, y)
    penalty = 0.0
    if network.regularizer != "none":
        penalty, _ = penalty_and_grads(network, network.regularizer)
    return nll + kl_coeff * penalty
