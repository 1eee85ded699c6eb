"""Post-training pruning and sparsity accounting.

Weight pruning zeroes every mean weight whose per-weight noise ratio exceeds
a log-alpha threshold (a noise ratio of 9 corresponds to an effective drop
probability of 0.9, the default cut).  Neuron pruning zeroes per-feature
gates instead, removing whole columns.  Both return a fresh network and a
report; the input network is never modified.
"""

import copy
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .layers import DenseVariational, FeatureGate
from .training import evaluate

# log(9): noise-to-signal ratio at which a multiplicative gate is more noise
# than signal 90% of the time.
DEFAULT_THRESHOLD = math.log(9.0)


@dataclass
class CompressionReport:
    threshold: float
    kind: str  # "weights" | "neurons"
    layer_sparsity: list  # percent zeros per pruned parameter group
    total_weights: int
    nonzero_weights: int
    error_before: float
    error_after: float
    retained_neurons: list = None  # per gate, plus the output width

    @property
    def ratio(self):
        if self.nonzero_weights == 0:
            return math.inf
        return self.total_weights / self.nonzero_weights

    def neurons_text(self):
        if self.retained_neurons is None:
            return ""
        return " - ".join(str(n) for n in self.retained_neurons)

    def sparsity_text(self):
        return "-".join(f"{s:.1f}" for s in self.layer_sparsity)

    CSV_HEADER = ("threshold,kind,error_before,error_after,ratio,"
                  "sparsity_per_layer,neurons_per_layer")

    def csv_row(self):
        return ",".join([
            repr(float(self.threshold)),
            self.kind,
            repr(float(self.error_before)),
            repr(float(self.error_after)),
            repr(float(self.ratio)),
            self.sparsity_text(),
            self.neurons_text().replace(" ", ""),
        ])

    def csv_text(self):
        return self.CSV_HEADER + "\n" + self.csv_row() + "\n"

    def table_text(self):
        if self.kind == "neurons":
            header = ("Error %", "Neurons per Layer")
            row = (f"{self.error_after:.2f}", self.neurons_text())
        else:
            header = ("Error %", "Sparsity per Layer %", "|W|/|W!=0|")
            row = (f"{self.error_after:.2f}", self.sparsity_text(),
                   f"{self.ratio:.1f}")
        widths = [max(len(h), len(r)) for h, r in zip(header, row)]
        line = lambda cells: " | ".join(c.ljust(w) for c, w in zip(cells, widths))
        return "\n".join([line(header), "-+-".join("-" * w for w in widths),
                          line(row)]) + "\n"


def _perweight_layers(network):
    return [l for l in network.layers
            if isinstance(l, DenseVariational) and l.mode == "lr-perweight"]


def _gate_layers(network):
    return [l for l in network.layers if isinstance(l, FeatureGate)]


def _log_alpha(theta, log_sigma2):
    with np.errstate(divide="ignore"):
        return log_sigma2 - np.log(theta * theta)


def prune_weights(network, log_alpha_threshold, dataset=None):
    """Zero out weights whose log noise ratio exceeds the threshold.

    Only layers with per-weight noise can lose weights; layers without a
    posterior still count toward the whole-network weight totals and show up
    in the per-layer sparsity list.
    """
    if not _perweight_layers(network):
        raise UsageError("weight pruning needs per-weight noise parameters")
    error_before = evaluate(network, dataset) if dataset is not None else math.nan
    pruned = copy.deepcopy(network)
    sparsity = []
    total = 0
    nonzero = 0
    for layer in pruned.layers:
        if not isinstance(layer, DenseVariational):
            continue
        if layer.mode == "lr-perweight":
            drop = _log_alpha(layer.theta, layer.log_sigma2) > log_alpha_threshold
            layer.theta[drop] = 0.0
        zeros = int(np.sum(layer.theta == 0.0))
        sparsity.append(100.0 * zeros / layer.theta.size)
        total += layer.theta.size
        nonzero += layer.theta.size - zeros
    error_after = evaluate(pruned, dataset) if dataset is not None else math.nan
    return pruned, CompressionReport(
        log_alpha_threshold, "weights", sparsity, total, nonzero,
        error_before, error_after,
    )


def prune_neurons(network, log_alpha_threshold, dataset=None):
    """Zero out per-feature gates whose log noise ratio exceeds the threshold.

    A zeroed gate removes its feature column for every input, so downstream
    weight rows fed by it are dead and the retained-neuron counts describe the
    effective architecture.
    """
    if not _gate_layers(network):
        raise UsageError("neuron pruning needs feature-gate layers")
    error_before = evaluate(network, dataset) if dataset is not None else math.nan
    pruned = copy.deepcopy(network)
    sparsity = []
    retained = []
    total = 0
    nonzero = 0
    for gate in _gate_layers(pruned):
        drop = _log_alpha(gate.theta, gate.log_sigma2) > log_alpha_threshold
        gate.theta[drop] = 0.0
        keep = int(np.sum(gate.theta != 0.0))
        retained.append(keep)
        zeros = gate.theta.size - keep
        sparsity.append(100.0 * zeros / gate.theta.size)
        total += gate.theta.size
        nonzero += keep
    retained.append(pruned.widths[-1])
    error_after = evaluate(pruned, dataset) if dataset is not None else math.nan
    return pruned, CompressionReport(
        log_alpha_threshold, "neurons", sparsity, total, nonzero,
        error_before, error_after, retained_neurons=retained,
    )


def sweep_threshold(network, thresholds, dataset):
    """Prune at each threshold; rows of (threshold, ratio, error_percent)."""
    rows = []
    for t in thresholds:
        _, report = prune_weights(network, t, dataset)
        rows.append((float(t), report.ratio, report.error_after))
    return rows


SWEEP_CSV_HEADER = "threshold,ratio,error_percent"


def sweep_csv_text(rows):
    lines = [SWEEP_CSV_HEADER]
    for t, ratio, err in rows:
        lines.append(f"{t!r},{float(ratio)!r},{float(err)!r}")
    return "\n".join(lines) + "\n"
