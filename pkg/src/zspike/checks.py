"""Verification harnesses: finite-difference gradient check and sim oracle runs.

These drive the `gradcheck` and `verify-sim` CLI commands and the acceptance
suite.  The finite-difference side stays independent of the analytical
gradient path: it only re-evaluates the scalar training loss.
"""

from dataclasses import dataclass

import numpy as np

from .core import NON_SPIKE, NetworkTopology, network_forward
from .grad import backprop, total_loss
from .sim import SimConfig, compare_with_analytical
from .train import Hyperparams, init_weights

GRADCHECK_MEDIAN_TOL = 1e-8
GRADCHECK_MAX_TOL = 1e-5
# relative-error floor: errors are measured against max(|grad|, 1), so
# inactive coordinates (both sides ~0) compare absolutely instead of 0/0
GRADCHECK_SCALE_FLOOR = 1.0


@dataclass
class GradcheckReport:
    n_checked: int
    n_skipped: int
    median_rel_error: float
    max_rel_error: float

    @property
    def passed(self):
        return (
            self.median_rel_error < GRADCHECK_MEDIAN_TOL
            and self.max_rel_error < GRADCHECK_MAX_TOL
        )


def _random_problem(rng):
    """A small random network and input with plenty of causal-set variety."""
    n_hidden_layers = int(rng.integers(1, 3))
    sizes = [int(rng.integers(2, 6)) for _ in range(n_hidden_layers + 2)]
    topology = NetworkTopology(tuple(sizes), use_reference_neuron=bool(rng.integers(0, 2)))
    weights = init_weights(topology, int(rng.integers(0, 2**32)))
    # mix in negative weights; pure init weights are all positive
    for w in weights:
        w += rng.normal(0.0, 0.5 / w.shape[1], size=w.shape)
    z_input = np.exp(rng.uniform(0.0, 2.0, size=sizes[0]))
    if rng.random() < 0.2:
        z_input[rng.integers(0, sizes[0])] = NON_SPIKE
    target = int(rng.integers(0, sizes[-1]))
    return topology, weights, z_input, target


def _causal_structure(topology, weights, z_input):
    """Frozen causal sets of every neuron, for the stability filter."""
    trace = network_forward(topology, weights, z_input)
    structure = []
    for l in range(topology.n_weight_layers):
        layer = trace.batch.layers[l]
        order = layer.order[0]
        structure.append(
            tuple(frozenset(order[: layer.counts[0, i]].tolist()) for i in range(layer.z_out.shape[1]))
        )
    return tuple(structure)


def gradcheck(
    n_points=1000,
    seed=0,
    h=1e-6,
    hyper=None,
    gradient_fn=None,
):
    """Compare analytical weight gradients to central finite differences.

    Samples random small networks and inputs, then random weight coordinates;
    coordinates whose +-h perturbation changes any causal set (or sits on the
    weight-sum hinge kink) are skipped and tallied.  `gradient_fn` may
    override the analytical gradient computation (test fixture hook).
    """
    if hyper is None:
        hyper = Hyperparams(lr_start=0.1, lr_end=0.1, epochs=1, weight_sum_k=10.0, l2_lambda=0.001)
    if gradient_fn is None:
        def gradient_fn(topology, weights, z_input, target, hp):
            trace = network_forward(topology, weights, z_input)
            return backprop(trace, weights, target, hp)[1]

    rng = np.random.default_rng(seed)
    errors = []
    n_skipped = 0
    while len(errors) < n_points:
        topology, weights, z_input, target = _random_problem(rng)
        # a non-spiking target output puts the loss at sentinel scale, far
        # beyond what a +-h finite difference can resolve; skip such points
        if network_forward(topology, weights, z_input).z_out[target] >= NON_SPIKE:
            n_skipped += 1
            continue
        grads = gradient_fn(topology, weights, z_input, target, hyper)
        base_structure = _causal_structure(topology, weights, z_input)
        coords_per_problem = 20
        for _ in range(coords_per_problem):
            if len(errors) >= n_points:
                break
            l = int(rng.integers(0, len(weights)))
            i = int(rng.integers(0, weights[l].shape[0]))
            j = int(rng.integers(0, weights[l].shape[1]))
            # hinge kink: skip coordinates whose row sum sits at the boundary
            if hyper.weight_sum_k > 0 and abs(np.sum(weights[l][i]) - 1.0) < 10 * h:
                n_skipped += 1
                continue
            stable = True
            losses = []
            for sign in (+1.0, -1.0):
                weights[l][i, j] += sign * h
                if _causal_structure(topology, weights, z_input) != base_structure:
                    stable = False
                losses.append(total_loss(topology, weights, z_input, target, hyper))
                weights[l][i, j] -= sign * h
            if not stable:
                n_skipped += 1
                continue
            fd = (losses[0] - losses[1]) / (2 * h)
            a = grads[l][i, j]
            scale = max(abs(a), abs(fd), GRADCHECK_SCALE_FLOOR)
            errors.append(abs(a - fd) / scale)
    errors = np.array(errors)
    return GradcheckReport(
        n_checked=len(errors),
        n_skipped=n_skipped,
        median_rel_error=float(np.median(errors)),
        max_rel_error=float(np.max(errors)),
    )


@dataclass
class SimVerifyReport:
    n_networks: int
    n_disagreements: int
    n_excluded_grazing: int
    max_abs_dt: float
    tolerance: float

    @property
    def passed(self):
        return self.n_disagreements == 0 and self.max_abs_dt <= self.tolerance


def random_sim_problem(rng, sizes=(5, 8, 3)):
    """Random network + input for the simulator comparison."""
    topology = NetworkTopology(sizes)
    weights = init_weights(topology, int(rng.integers(0, 2**32)))
    for w in weights:
        w += rng.normal(0.0, 0.3 / w.shape[1], size=w.shape)
    z_input = np.exp(rng.uniform(0.0, 2.3, size=sizes[0]))
    return topology, weights, z_input


def verify_sim(n_networks=100, dt=1e-4, seed=0, sizes=(5, 8, 3), t_max=15.0):
    """Compare the analytical forward pass against the time-stepped simulator.

    Tolerance is 10 * dt in the t-domain; grazing neurons are excluded.
    """
    rng = np.random.default_rng(seed)
    config = SimConfig(dt=dt, t_max=t_max)
    max_dt = 0.0
    disagreements = 0
    excluded = 0
    for _ in range(n_networks):
        topology, weights, z_input = random_sim_problem(rng, sizes)
        report = compare_with_analytical(topology, weights, z_input, config)
        max_dt = max(max_dt, report.max_abs_dt)
        disagreements += len(report.disagreements)
        excluded += report.n_excluded_grazing
    return SimVerifyReport(
        n_networks=n_networks,
        n_disagreements=disagreements,
        n_excluded_grazing=excluded,
        max_abs_dt=max_dt,
        tolerance=10 * dt,
    )
