"""Weight initialization, schedules, clipping, noise, and the SGD loop."""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    NON_SPIKE,
    ContractError,
    network_forward_batch,
)
from .grad import l2_cost, weight_sum_cost, xent_gradients_batch

# Expected incoming-weight row sum at initialization.  Kept above the firing
# threshold (1) so freshly initialized neurons spike and gradients flow.
INIT_EXPECTED_ROW_SUM = 1.5


@dataclass(frozen=True)
class Hyperparams:
    """Training hyperparameters; defaults follow the MNIST setup."""

    lr_start: float = 0.01
    lr_end: float = 0.0001
    epochs: int = 100
    batch_size: int = 10
    weight_sum_k: float = 100.0
    l2_lambda: float = 0.001
    clip_threshold: float = 10.0
    input_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (self.lr_start >= self.lr_end > 0):
            raise ContractError("need lr_start >= lr_end > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError("epochs and batch_size must be positive")
        if self.clip_threshold <= 0:
            raise ContractError("clip_threshold must be > 0")
        if self.weight_sum_k < 0 or self.l2_lambda < 0:
            raise ContractError("penalty coefficients must be >= 0")


@dataclass
class TrainReport:
    """Per-epoch metrics plus the final weights of one training run."""

    epochs: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    train_loss_ce: list = field(default_factory=list)
    train_loss_wsum: list = field(default_factory=list)
    train_loss_l2: list = field(default_factory=list)
    train_error: list = field(default_factory=list)
    test_error: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    weights: list = field(default_factory=list)


def init_weights(topology, seed):
    """Draw initial weights i.i.d. uniform on [0, 2 * 1.5 / fan_in].

    The expected incoming row sum is then INIT_EXPECTED_ROW_SUM (> 1), so
    neurons spike at initialization in expectation.  Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    weights = []
    for l in range(topology.n_weight_layers):
        n_out, n_in = topology.weight_shape(l)
        high = 2.0 * INIT_EXPECTED_ROW_SUM / n_in
        weights.append(rng.uniform(0.0, high, size=(n_out, n_in)))
    return weights


def lr_at(epoch, hyper):
    """Learning rate in a given 1-based epoch: geometric decay start -> end."""
    if not 1 <= epoch <= hyper.epochs:
        raise ContractError(f"epoch {epoch} outside [1, {hyper.epochs}]")
    if hyper.epochs == 1 or hyper.lr_start == hyper.lr_end:
        return hyper.lr_start
    ratio = (hyper.lr_end / hyper.lr_start) ** (1.0 / (hyper.epochs - 1))
    return hyper.lr_start * ratio ** (epoch - 1)


def clip_gradient(g, threshold, n_source):
    """Scale down a gradient matrix whose row-normalized Frobenius norm is large.

    The norm is divided by the source-neuron (fan-in) count; if the result
    strictly exceeds the threshold, the matrix is scaled so the normalized
    norm equals the threshold.  Direction is preserved exactly.
    """
    if threshold <= 0 or n_source < 1:
        raise ContractError("need threshold > 0 and n_source >= 1")
    norm = float(np.linalg.norm(g))
    if norm / n_source > threshold:
        return g * (threshold * n_source / norm)
    return g


def apply_input_noise(z_input, rng):
    """Delay each finite input spike by |N(0, 1)| in the time domain.

    In the z-domain that is a multiplication by exp(|n|); NON_SPIKE entries
    pass through.  Training-time only.
    """
    z = np.asarray(z_input, dtype=np.float64)
    delays = np.abs(rng.standard_normal(z.shape))
    spiking = z < NON_SPIKE
    out = z.copy()
    out[spiking] *= np.exp(delays[spiking])
    return out


def error_rate(topology, weights, inputs, labels, chunk=None):
    """Fraction of examples whose earliest output spike is the wrong class."""
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    if chunk is None:
        # keep the (B, n_out, n_in) intermediates of the widest layer modest
        widest = max(
            topology.weight_shape(l)[0] * topology.fan_in(l)
            for l in range(topology.n_weight_layers)
        )
        chunk = max(1, int(2e7) // widest)
    wrong = 0
    for start in range(0, inputs.shape[0], chunk):
        z = inputs[start : start + chunk]
        pred = np.argmin(network_forward_batch(topology, weights, z).z_out, axis=1)
        wrong += int(np.sum(pred != labels[start : start + chunk]))
    return wrong / inputs.shape[0]


def sgd_step(topology, weights, z_batch, labels, hyper, lr):
    """One mini-batch gradient step in place; returns the LossBreakdown parts.

    The data gradient is the mean over per-example cross-entropy gradients;
    the weight-sum and L2 penalty gradients are added once per step.  Each
    matrix is then clipped on its fan-in-normalized Frobenius norm.
    """
    trace = network_forward_batch(topology, weights, z_batch)
    ce, grads = xent_gradients_batch(trace, weights, labels)
    ws = l2 = 0.0
    if hyper.weight_sum_k > 0:
        ws, ws_grads = weight_sum_cost(weights, hyper.weight_sum_k)
        for g, gw in zip(grads, ws_grads):
            g += gw
    if hyper.l2_lambda > 0:
        l2, l2_grads = l2_cost(weights, hyper.l2_lambda)
        for g, gl in zip(grads, l2_grads):
            g += gl
    for l, g in enumerate(grads):
        g = clip_gradient(g, hyper.clip_threshold, topology.fan_in(l))
        weights[l] -= lr * g
    return ce, ws, l2


def train(topology, dataset, hyper, test_set=None, progress=None):
    """SGD training loop: shuffled mini-batches, per-epoch decayed rate.

    `dataset` and `test_set` are EncodedDatasets (or anything exposing
    .inputs and .labels).  Deterministic for a fixed seed: a single RNG
    stream drives shuffling and input noise, and gradients reduce in fixed
    order.  Returns a TrainReport.
    """
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels)
    n = inputs.shape[0]
    if n == 0:
        raise ContractError("dataset is empty")
    rng = np.random.default_rng(hyper.seed)
    weights = init_weights(topology, hyper.seed)
    report = TrainReport()
    for epoch in range(1, hyper.epochs + 1):
        started = time.perf_counter()
        lr = lr_at(epoch, hyper)
        perm = rng.permutation(n)
        ce_sum = ws_sum = l2_sum = 0.0
        n_batches = 0
        for start in range(0, n, hyper.batch_size):
            batch_idx = perm[start : start + hyper.batch_size]
            z = inputs[batch_idx]
            if hyper.input_noise:
                z = apply_input_noise(z, rng)
            ce, ws, l2 = sgd_step(topology, weights, z, labels[batch_idx], hyper, lr)
            ce_sum += ce
            ws_sum += ws
            l2_sum += l2
            n_batches += 1
        train_err = error_rate(topology, weights, inputs, labels)
        test_err = (
            error_rate(topology, weights, test_set.inputs, test_set.labels)
            if test_set is not None
            else float("nan")
        )
        report.epochs.append(epoch)
        report.learning_rates.append(lr)
        report.train_loss.append((ce_sum + ws_sum + l2_sum) / n_batches)
        report.train_loss_ce.append(ce_sum / n_batches)
        report.train_loss_wsum.append(ws_sum / n_batches)
        report.train_loss_l2.append(l2_sum / n_batches)
        report.train_error.append(train_err)
        report.test_error.append(test_err)
        report.wall_time.append(time.perf_counter() - started)
        if progress is not None:
            progress(epoch, report)
    report.weights = weights
    return report


@dataclass
class XorTrainResult:
    iterations: int
    converged: bool
    weights: list
    errors: list  # training error after each completed iteration


def train_xor(topology, dataset, hyper, max_iterations=200, restart_after=40):
    """Train on the 4-pattern task until every pattern classifies correctly.

    One training iteration presents the four patterns 100 times (shuffled,
    one gradient step per pattern); convergence means all four patterns
    classify correctly at the end of an iteration.

    A rare symmetric fixed point exists where both output neurons' causal
    sets collapse onto one early hidden neuron, making the prediction
    pattern-independent and the gradients cancel exactly; no amount of
    further training escapes it.  An attempt still unconverged after
    `restart_after` iterations (well above the healthy-run maximum) is
    therefore restarted with fresh weights drawn from the same RNG stream.
    Iterations accumulate across restarts, so the reported count remains
    comparable and the run stays deterministic per seed.
    """
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels)
    rng = np.random.default_rng(hyper.seed)
    weights = init_weights(topology, hyper.seed)
    per_pattern = replace(hyper, batch_size=1)
    errors = []
    since_restart = 0
    for iteration in range(1, max_iterations + 1):
        for _ in range(100):
            for i in rng.permutation(inputs.shape[0]):
                z = inputs[i : i + 1]
                if hyper.input_noise:
                    z = apply_input_noise(z, rng)
                sgd_step(topology, weights, z, labels[i : i + 1], per_pattern, hyper.lr_start)
        err = error_rate(topology, weights, inputs, labels)
        errors.append(err)
        if err == 0.0:
            return XorTrainResult(iteration, True, weights, errors)
        since_restart += 1
        if since_restart >= restart_after and iteration < max_iterations:
            weights = init_weights(topology, int(rng.integers(0, 2**32)))
            since_restart = 0
    return XorTrainResult(max_iterations, False, weights, errors)
