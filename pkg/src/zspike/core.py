"""Core z-domain machinery for first-spike-time networks.

A non-leaky integrate-and-fire neuron driven by exponentially decaying
synaptic currents fires its first spike at a time that, after the change of
variables z = exp(t / tau_syn), is a ratio of weighted sums over the causal
input spikes.  Everything here works in the z-domain: spike times are z
values >= 1 (t >= 0), and a neuron that never fires carries the NON_SPIKE
sentinel.
"""

from dataclasses import dataclass, field

import numpy as np

# Largest representable double stands in for "never fires".  Using a finite
# value keeps all arithmetic total (no NaN / inf propagation into the loss).
NON_SPIKE = float(np.finfo(np.float64).max)

# z value of the always-active reference input (a spike at t = 0).
REFERENCE_Z = 1.0

# Log of NON_SPIKE; z_from_time saturates beyond this.
_LOG_NON_SPIKE = float(np.log(NON_SPIKE))


class ContractError(ValueError):
    """Raised when a caller violates an operation's preconditions."""


def z_from_time(t):
    """Map a spike time (units of tau_syn) to the z-domain, z = exp(t).

    Saturates to NON_SPIKE instead of overflowing to inf.
    """
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        z = np.where(t >= _LOG_NON_SPIKE, NON_SPIKE, np.exp(np.minimum(t, _LOG_NON_SPIKE)))
    if z.ndim == 0:
        return float(z)
    return z


def time_from_z(z):
    """Inverse of z_from_time; NON_SPIKE maps to +inf."""
    z = np.asarray(z, dtype=np.float64)
    t = np.where(z >= NON_SPIKE, np.inf, np.log(np.maximum(z, np.finfo(np.float64).tiny)))
    if t.ndim == 0:
        return float(t)
    return t


def is_spike(z):
    """True for entries representing an actual spike (finite z < NON_SPIKE)."""
    return np.asarray(z) < NON_SPIKE


@dataclass(frozen=True)
class CausalSet:
    """Indices of the input spikes that arrive before a neuron's first spike.

    An empty set means no prefix of the sorted inputs fires the neuron.
    """

    indices: frozenset = field(default_factory=frozenset)

    @property
    def is_empty(self):
        return len(self.indices) == 0

    def __contains__(self, i):
        return i in self.indices

    def __len__(self):
        return len(self.indices)


EMPTY_CAUSAL_SET = CausalSet()


@dataclass(frozen=True)
class NetworkTopology:
    """Layer sizes of a fully connected feedforward network.

    When use_reference_neuron is set, every weight matrix gains one extra
    source column (index 0) fed by a constant spike at z = REFERENCE_Z.
    """

    layer_sizes: tuple
    use_reference_neuron: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ContractError("topology needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ContractError("layer sizes must be positive")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self):
        return len(self.layer_sizes)

    @property
    def n_weight_layers(self):
        return len(self.layer_sizes) - 1

    def fan_in(self, layer):
        """Number of source columns feeding weight layer `layer` (0-based)."""
        extra = 1 if self.use_reference_neuron else 0
        return self.layer_sizes[layer] + extra

    def weight_shape(self, layer):
        """(targets, sources) of weight layer `layer` (0-based)."""
        return (self.layer_sizes[layer + 1], self.fan_in(layer))

    def validate_weights(self, weights):
        if len(weights) != self.n_weight_layers:
            raise ContractError(
                f"expected {self.n_weight_layers} weight matrices, got {len(weights)}"
            )
        for l, w in enumerate(weights):
            if w.shape != self.weight_shape(l):
                raise ContractError(
                    f"weight matrix {l} has shape {w.shape}, expected {self.weight_shape(l)}"
                )


@dataclass(frozen=True)
class LayerTraceBatch:
    """Per-layer intermediates of a batched forward pass.

    All arrays carry a leading batch axis.  `z_in` includes the reference
    column when the topology uses one.  `order` is the stable ascending
    argsort of `z_in`; `counts[b, i]` is the causal-prefix length of target
    neuron i in sorted coordinates (0 for an empty causal set), and
    `denom[b, i]` is (sum of causal weights - 1), 1.0 where undefined.
    """

    z_in: np.ndarray
    order: np.ndarray
    counts: np.ndarray
    z_out: np.ndarray
    denom: np.ndarray


@dataclass(frozen=True)
class ForwardTraceBatch:
    """Everything a batched forward pass computed, for backprop to consume."""

    topology: NetworkTopology
    layers: tuple

    @property
    def z_out(self):
        return self.layers[-1].z_out

    @property
    def batch_size(self):
        return self.layers[0].z_in.shape[0]


@dataclass(frozen=True)
class ForwardTrace:
    """Single-example forward trace: all layer z-vectors plus causal sets."""

    topology: NetworkTopology
    batch: ForwardTraceBatch

    @property
    def z_layers(self):
        """z vectors of every layer, input first (without the reference entry)."""
        skip = 1 if self.topology.use_reference_neuron else 0
        layers = [self.batch.layers[0].z_in[0, skip:]]
        layers.extend(lt.z_out[0] for lt in self.batch.layers)
        return layers

    @property
    def z_out(self):
        return self.batch.z_out[0]

    def causal_sets(self, layer):
        """CausalSet of every neuron in weight layer `layer` (0-based).

        Indices refer to source columns of that layer's weight matrix
        (reference column included when present).
        """
        lt = self.batch.layers[layer]
        order = lt.order[0]
        return [
            CausalSet(frozenset(order[: lt.counts[0, i]].tolist()))
            for i in range(lt.z_out.shape[1])
        ]


def _layer_forward_batch(z_in, w):
    """Vectorized causal-set search and first-spike evaluation for one layer.

    z_in: (B, n_in) z values; w: (n_out, n_in) weights.
    Returns a LayerTraceBatch.

    Scans increasingly long prefixes of the ascending-sorted inputs; a prefix
    is the causal set when its weight sum strictly exceeds the threshold (1)
    and the resulting output spike strictly precedes the next input spike.
    NON_SPIKE entries sort to the end and can never be members.
    """
    z_in = np.asarray(z_in, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    batch, n_in = z_in.shape
    n_out = w.shape[0]
    if w.shape[1] != n_in:
        raise ContractError(f"weight row length {w.shape[1]} != input length {n_in}")

    order = np.argsort(z_in, axis=1, kind="stable")
    z_sorted = np.take_along_axis(z_in, order, axis=1)
    finite = z_sorted < NON_SPIKE
    # w rearranged per example to match the sorted inputs: (B, n_out, n_in)
    w_sorted = np.transpose(w[:, order], (1, 0, 2))
    z_safe = np.where(finite, z_sorted, 0.0)

    cum_w = np.cumsum(w_sorted, axis=2)
    cum_wz = np.cumsum(w_sorted * z_safe[:, None, :], axis=2)
    next_spike = np.concatenate(
        [z_sorted[:, 1:], np.full((batch, 1), NON_SPIKE)], axis=1
    )[:, None, :]

    denom = cum_w - 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        candidate = cum_wz / denom
        valid = (cum_w > 1.0) & (candidate < next_spike) & finite[:, None, :]

    has_spike = valid.any(axis=2)
    first = np.argmax(valid, axis=2)
    b_idx = np.arange(batch)[:, None]
    o_idx = np.arange(n_out)[None, :]
    z_out = np.where(has_spike, candidate[b_idx, o_idx, first], NON_SPIKE)
    counts = np.where(has_spike, first + 1, 0)
    denom_sel = np.where(has_spike, denom[b_idx, o_idx, first], 1.0)
    return LayerTraceBatch(z_in=z_in, order=order, counts=counts, z_out=z_out, denom=denom_sel)


def _with_reference(z, topology):
    if not topology.use_reference_neuron:
        return z
    batch = z.shape[0]
    return np.concatenate([np.full((batch, 1), REFERENCE_Z), z], axis=1)


def network_forward_batch(topology, weights, z_inputs):
    """Run the analytical forward pass on a batch of input z vectors.

    z_inputs: (B, n_input).  Returns a ForwardTraceBatch.
    """
    topology.validate_weights(weights)
    z = np.asarray(z_inputs, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != topology.layer_sizes[0]:
        raise ContractError(
            f"input batch shape {z.shape} does not match input size {topology.layer_sizes[0]}"
        )
    layers = []
    for w in weights:
        z_eff = _with_reference(z, topology)
        lt = _layer_forward_batch(z_eff, w)
        layers.append(lt)
        z = lt.z_out
    return ForwardTraceBatch(topology=topology, layers=tuple(layers))


def network_forward(topology, weights, z_input):
    """Analytical forward pass for a single input ZVector.

    Returns a ForwardTrace recording every layer's z vector and causal sets.
    """
    z_input = np.asarray(z_input, dtype=np.float64)
    if z_input.ndim != 1:
        raise ContractError("z_input must be a 1-D vector")
    batch = network_forward_batch(topology, weights, z_input[None, :])
    return ForwardTrace(topology=topology, batch=batch)


def causal_set(z_in, w):
    """Find the causal input set and first-spike time of a single neuron.

    Returns (CausalSet, z_out); (empty set, NON_SPIKE) when no prefix of the
    sorted inputs fires the neuron.
    """
    z_in = np.asarray(z_in, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if z_in.shape != w.shape or z_in.ndim != 1:
        raise ContractError(f"z_in shape {z_in.shape} != weight shape {w.shape}")
    lt = _layer_forward_batch(z_in[None, :], w[None, :])
    count = int(lt.counts[0, 0])
    members = frozenset(lt.order[0, :count].tolist())
    return CausalSet(members), float(lt.z_out[0, 0])


def neuron_first_spike(z_in, w, causal):
    """Evaluate the closed-form first-spike time for a known causal set.

    z_out = sum_{i in C} w_i z_i / (sum_{i in C} w_i - 1).  The result always
    strictly exceeds every causal input spike time.
    """
    if causal.is_empty:
        return NON_SPIKE
    z_in = np.asarray(z_in, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    idx = np.fromiter(causal.indices, dtype=np.intp)
    denom = float(np.sum(w[idx])) - 1.0
    if denom <= 0.0:
        raise ContractError("causal set invalid: member weights sum to <= 1")
    return float(np.sum(w[idx] * z_in[idx]) / denom)


def nth_spike_time(z_in, w, q):
    """Time of the neuron's q-th spike in the z-domain.

    Extends the causal-prefix search with threshold q: the q-th spike occurs
    at sum(w z) / (sum(w) - q) over the smallest sorted prefix whose weight
    sum strictly exceeds q and whose spike precedes the next input.  Not part
    of the training path (each neuron fires at most once there).
    """
    q = int(q)
    if q < 1:
        raise ContractError("spike index q must be >= 1")
    z_in = np.asarray(z_in, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if z_in.shape != w.shape or z_in.ndim != 1:
        raise ContractError(f"z_in shape {z_in.shape} != weight shape {w.shape}")
    order = np.argsort(z_in, kind="stable")
    z_sorted = z_in[order]
    w_sorted = w[order]
    cum_w = 0.0
    cum_wz = 0.0
    for i in range(z_in.size):
        if z_sorted[i] >= NON_SPIKE:
            break
        cum_w += w_sorted[i]
        cum_wz += w_sorted[i] * z_sorted[i]
        next_spike = z_sorted[i + 1] if i + 1 < z_in.size else NON_SPIKE
        if cum_w > q:
            z_q = cum_wz / (cum_w - q)
            if z_q < next_spike:
                return float(z_q)
    return NON_SPIKE


def predict(topology, weights, z_inputs):
    """Predicted class per example: index of the earliest output spike.

    Ties (equal earliest z) break to the lowest neuron index.
    """
    trace = network_forward_batch(topology, weights, np.atleast_2d(z_inputs))
    return np.argmin(trace.z_out, axis=1)
