"""Training and compression of dense networks with adaptive multiplicative
Gaussian noise on the weights, plus the classic dropout baselines it
generalizes.

The per-weight noise ratio alpha doubles as a learned dropout rate: the
closed-form penalty 0.5*log(1 + 1/alpha) lets the optimizer push useless
weights toward infinite noise, after which they can be removed outright,
either one weight at a time or one neuron at a time through per-feature
gates.
"""

__version__ = "0.1.0"

from . import backend
from .checkpoint import load_checkpoint, save_checkpoint
from .compression import (
    DEFAULT_THRESHOLD,
    CompressionReport,
    prune_neurons,
    prune_weights,
    sweep_threshold,
)
from .data import BatchIterator, Dataset, load_idx, load_mnist, make_synthetic
from .errors import DataFormatError, ShapeError, TrainingDiverged, UsageError
from .layers import (
    DenseVariational,
    FeatureGate,
    ForwardTrace,
    Network,
    Relu,
    softmax_cross_entropy,
)
from .regularizers import (
    gamma_star,
    kl_gaussian_vs_prior,
    kl_vbd,
    kl_vd_approx,
    mc_kl_oracle,
    regularizer_total,
)
from .training import Adam, SGD, TrainConfig, TrainLog, evaluate, train
from .variants import Variant, build_network, loss_and_grads, loss_value

__all__ = [
    "Adam",
    "BatchIterator",
    "CompressionReport",
    "DEFAULT_THRESHOLD",
    "Dataset",
    "DataFormatError",
    "DenseVariational",
    "FeatureGate",
    "ForwardTrace",
    "Network",
    "Relu",
    "SGD",
    "ShapeError",
    "TrainConfig",
    "TrainLog",
    "TrainingDiverged",
    "UsageError",
    "Variant",
    "backend",
    "build_network",
    "evaluate",
    "gamma_star",
    "kl_gaussian_vs_prior",
    "kl_vbd",
    "kl_vd_approx",
    "load_checkpoint",
    "load_idx",
    "load_mnist",
    "loss_and_grads",
    "loss_value",
    "make_synthetic",
    "mc_kl_oracle",
    "prune_neurons",
    "prune_weights",
    "regularizer_total",
    "save_checkpoint",
    "softmax_cross_entropy",
    "sweep_threshold",
    "train",
]
