"""Exact derivatives of first-spike times, loss terms, and backpropagation.

Within one linear piece (fixed causal sets) the z-domain forward pass is
linear, so the derivatives are closed form:

    dz_out/dw_p = (z_p - z_out) / (sum_C w - 1)   for p in C, else 0
    dz_out/dz_p = w_p / (sum_C w - 1)             for p in C, else 0

Causal sets are treated as locally constant during differentiation; the
derivative jumps where a set changes, exactly as with ReLU activations.
"""

from dataclasses import dataclass

import numpy as np

from .core import ContractError, ForwardTrace, ForwardTraceBatch, network_forward


@dataclass(frozen=True)
class LossBreakdown:
    """Additive decomposition of the training loss."""

    cross_entropy: float
    weight_sum_penalty: float
    l2_penalty: float

    @property
    def total(self):
        return self.cross_entropy + self.weight_sum_penalty + self.l2_penalty


def d_zout_d_weight(z_in, w, causal, z_out, p):
    """Derivative of the neuron's first-spike z w.r.t. weight p."""
    if p not in causal:
        return 0.0
    idx = np.fromiter(causal.indices, dtype=np.intp)
    denom = float(np.sum(np.asarray(w, dtype=np.float64)[idx])) - 1.0
    return (float(z_in[p]) - z_out) / denom


def d_zout_d_zin(w, causal, p):
    """Derivative of the neuron's first-spike z w.r.t. input spike p."""
    if p not in causal:
        return 0.0
    w = np.asarray(w, dtype=np.float64)
    idx = np.fromiter(causal.indices, dtype=np.intp)
    denom = float(np.sum(w[idx])) - 1.0
    return float(w[p]) / denom


def softmax_xent_loss(z_top, target):
    """Cross-entropy on negated output spike times.

    loss = -ln( exp(-z[g]) / sum_i exp(-z[i]) ), stabilized by max-shifting
    the negated values.  The returned gradient is dloss/dz = onehot(g) -
    softmax(-z): the correct class is pushed to fire earlier, the rest later.
    NON_SPIKE entries carry essentially zero probability; when every entry is
    NON_SPIKE the softmax degenerates to uniform (training escapes via the
    weight-sum penalty).
    """
    z = np.asarray(z_top, dtype=np.float64)
    target = int(target)
    if not 0 <= target < z.size:
        raise ContractError(f"target class {target} out of range for {z.size} outputs")
    neg = -z
    shift = np.max(neg)
    expd = np.exp(neg - shift)
    total = np.sum(expd)
    p = expd / total
    # group (neg - shift) first: both can sit at sentinel magnitude
    loss = float(np.log(total) - (neg[target] - shift))
    grad = -p
    grad[target] += 1.0
    return loss, grad


def weight_sum_cost(weights, k):
    """Hinge penalty pushing every neuron's incoming weight sum above 1.

    cost = k * sum_j max(0, 1 - sum_i w_ji).  The subgradient at a row sum of
    exactly 1 is taken as 0 (penalty inactive at the boundary).
    """
    if k <= 0:
        raise ContractError("penalty coefficient k must be > 0")
    cost = 0.0
    grads = []
    for w in weights:
        row_sums = np.sum(w, axis=1)
        deficit = 1.0 - row_sums
        active = deficit > 0.0
        cost += k * float(np.sum(deficit[active]))
        g = np.zeros_like(w)
        g[active, :] = -k
        grads.append(g)
    return cost, grads


def l2_cost(weights, lam):
    """L2 penalty lam * sum(w^2) with gradient 2 * lam * w."""
    if lam < 0:
        raise ContractError("l2 coefficient must be >= 0")
    cost = 0.0
    grads = []
    for w in weights:
        cost += lam * float(np.sum(w * w))
        grads.append(2.0 * lam * w)
    return cost, grads


def _member_mask(layer):
    """Causal membership in original source coordinates: (B, n_out, n_in)."""
    batch, n_in = layer.z_in.shape
    inverse = np.empty_like(layer.order)
    np.put_along_axis(inverse, layer.order, np.broadcast_to(np.arange(n_in), (batch, n_in)), axis=1)
    return inverse[:, None, :] < layer.counts[:, :, None]


def xent_gradients_batch(trace, weights, targets):
    """Mean cross-entropy loss and its weight gradients over a batch.

    Chain-rules the softmax z-gradient down through the layers; neurons with
    empty causal sets transport exactly zero gradient.  Per-example gradients
    are averaged, not summed.
    """
    if not isinstance(trace, ForwardTraceBatch):
        raise ContractError("expected a ForwardTraceBatch")
    trace.topology.validate_weights(weights)
    targets = np.asarray(targets, dtype=np.intp)
    batch = trace.batch_size
    if targets.shape != (batch,):
        raise ContractError(f"targets shape {targets.shape} != batch size {batch}")

    z_top = trace.z_out
    neg = -z_top
    shift = np.max(neg, axis=1, keepdims=True)
    expd = np.exp(neg - shift)
    p = expd / np.sum(expd, axis=1, keepdims=True)
    rows = np.arange(batch)
    # non-spiking targets contribute sentinel-magnitude losses; their mean may
    # legitimately overflow to inf without affecting the gradients
    with np.errstate(over="ignore"):
        losses = np.log(np.sum(expd, axis=1)) - (neg[rows, targets] - shift[:, 0])
        mean_loss = float(np.mean(losses))
    delta = -p
    delta[rows, targets] += 1.0

    skip = 1 if trace.topology.use_reference_neuron else 0
    grads = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        layer = trace.layers[l]
        member = _member_mask(layer)
        inv_denom = 1.0 / layer.denom  # 1.0 placeholder rows have empty masks
        # weight gradient: delta_i * (z_p - z_out_i) / denom_i over members
        diff = np.where(member, layer.z_in[:, None, :] - layer.z_out[:, :, None], 0.0)
        grads[l] = np.einsum("bi,bip->ip", delta * inv_denom, diff) / batch
        if l > 0:
            transport = np.where(member, weights[l][None, :, :], 0.0)
            delta = np.einsum("bi,bip->bp", delta * inv_denom, transport)[:, skip:]
    return mean_loss, grads


def backprop(trace, weights, target, hyper):
    """Loss breakdown and full weight gradient for one example.

    Combines the cross-entropy term (chain-ruled through the trace) with the
    weight-sum hinge and L2 penalties from `hyper` (coefficients K and
    l2_lambda).
    """
    if not isinstance(trace, ForwardTrace):
        raise ContractError("expected a ForwardTrace from network_forward")
    ce, grads = xent_gradients_batch(trace.batch, weights, [int(target)])
    ws_cost, l2c = 0.0, 0.0
    if hyper.weight_sum_k > 0:
        ws_cost, ws_grads = weight_sum_cost(weights, hyper.weight_sum_k)
        for g, gw in zip(grads, ws_grads):
            g += gw
    if hyper.l2_lambda > 0:
        l2c, l2_grads = l2_cost(weights, hyper.l2_lambda)
        for g, gl in zip(grads, l2_grads):
            g += gl
    return LossBreakdown(ce, ws_cost, l2c), grads


def total_loss(topology, weights, z_input, target, hyper):
    """Scalar training loss of one example (used by finite-difference checks)."""
    trace = network_forward(topology, weights, z_input)
    ce, _ = softmax_xent_loss(trace.z_out, target)
    ws = weight_sum_cost(weights, hyper.weight_sum_k)[0] if hyper.weight_sum_k > 0 else 0.0
    l2 = l2_cost(weights, hyper.l2_lambda)[0] if hyper.l2_lambda > 0 else 0.0
    return ce + ws + l2
