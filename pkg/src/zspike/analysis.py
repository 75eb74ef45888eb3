"""Post-training analysis: decision latency, hidden sparsity, selectivity.

A classification is the earliest output-layer spike.  These statistics
measure how much of the hidden layer actually fired before that decision,
and which hidden neurons participate in classifying which class.
"""

from dataclasses import dataclass

import numpy as np

from .core import NON_SPIKE, network_forward_batch, time_from_z


@dataclass
class AnalysisResult:
    """Aggregate statistics over one dataset.

    Hidden neurons are indexed by concatenating all hidden layers in order.
    participation[c, j] = P(hidden neuron j spikes before the earliest output
    spike | class c), estimated over the dataset.
    """

    n_examples: int
    n_classes: int
    n_hidden: int
    decision_z: np.ndarray          # (N,) earliest output spike per example
    predictions: np.ndarray         # (N,)
    labels: np.ndarray              # (N,)
    hidden_fraction_before: np.ndarray  # (N,) fraction of hidden neurons pre-decision
    hidden_spike_z: np.ndarray      # all finite hidden spike z values, flattened
    n_hidden_silent: int            # hidden spikes that never happened (count)
    participation: np.ndarray       # (n_classes, n_hidden)
    class_counts: np.ndarray        # (n_classes,)

    @property
    def decision_t(self):
        return time_from_z(self.decision_z)

    @property
    def hidden_spike_t(self):
        return time_from_z(self.hidden_spike_z)

    @property
    def mean_hidden_fraction_before(self):
        return float(np.mean(self.hidden_fraction_before))

    @property
    def error_rate(self):
        return float(np.mean(self.predictions != self.labels))

    @property
    def neg_log_participation(self):
        with np.errstate(divide="ignore"):
            return -np.log(self.participation)

    @property
    def redundant_neurons(self):
        """Hidden neurons that spike before the decision in zero examples."""
        total = self.participation * self.class_counts[:, None]
        return np.flatnonzero(np.sum(total, axis=0) < 0.5)


def analyze(topology, weights, dataset, chunk=64):
    """Compute decision-latency and participation statistics over a dataset."""
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels)
    n = inputs.shape[0]
    n_hidden = sum(topology.layer_sizes[1:-1])
    n_classes = dataset.n_classes

    decision_z = np.empty(n)
    predictions = np.empty(n, dtype=np.intp)
    fraction = np.empty(n)
    hidden_z_parts = []
    silent = 0
    before_counts = np.zeros((n_classes, n_hidden))
    class_counts = np.zeros(n_classes)

    for start in range(0, n, chunk):
        z = inputs[start : start + chunk]
        trace = network_forward_batch(topology, weights, z)
        z_top = trace.z_out
        batch = z_top.shape[0]
        dz = np.min(z_top, axis=1)
        pred = np.argmin(z_top, axis=1)
        hidden = (
            np.concatenate([lt.z_out for lt in trace.layers[:-1]], axis=1)
            if topology.n_layers > 2
            else np.empty((batch, 0))
        )
        before = hidden < dz[:, None]
        decision_z[start : start + batch] = dz
        predictions[start : start + batch] = pred
        fraction[start : start + batch] = (
            np.mean(before, axis=1) if n_hidden else 0.0
        )
        finite_hidden = hidden[hidden < NON_SPIKE]
        hidden_z_parts.append(finite_hidden)
        silent += hidden.size - finite_hidden.size
        batch_labels = labels[start : start + batch]
        np.add.at(before_counts, batch_labels, before.astype(float))
        np.add.at(class_counts, batch_labels, 1.0)

    with np.errstate(invalid="ignore"):
        participation = np.where(
            class_counts[:, None] > 0, before_counts / np.maximum(class_counts[:, None], 1), 0.0
        )
    return AnalysisResult(
        n_examples=n,
        n_classes=n_classes,
        n_hidden=n_hidden,
        decision_z=decision_z,
        predictions=predictions,
        labels=labels,
        hidden_fraction_before=fraction,
        hidden_spike_z=np.concatenate(hidden_z_parts) if hidden_z_parts else np.empty(0),
        n_hidden_silent=silent,
        participation=participation,
        class_counts=class_counts,
    )


def confusion_counts(predictions, labels, n_classes):
    """Counts[i, j] = examples of true class i predicted as class j."""
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return counts
