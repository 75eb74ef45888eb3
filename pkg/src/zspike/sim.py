"""Time-stepped simulator of the raw integrate-and-fire dynamics.

Independent ground truth for the analytical z-domain forward pass: membrane
potential integrates exponentially decaying synaptic currents (forward Euler
for V, exact multiplicative decay for the current), a neuron fires once when
V crosses the threshold, then resets to 0 and stays refractory.  Never used
in the training loop.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import NON_SPIKE, ContractError, network_forward, time_from_z

# causal weight sums this close to the threshold make spike/no-spike
# numerically unstable; oracle comparisons exclude such neurons
GRAZING_TOL = 1e-3


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    t_max: float = 20.0
    threshold: float = 1.0
    tau_syn: float = 1.0

    def __post_init__(self):
        if not 0 < self.dt <= 1e-2:
            raise ContractError("dt must be in (0, 1e-2]")
        if self.t_max <= 0:
            raise ContractError("t_max must be positive")

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))


@dataclass
class SimTrace:
    """Recorded simulation: spike times (t-domain) and sampled state per layer.

    spike_times[l][i] is np.inf for a neuron that never fired.  potentials[l]
    and currents[l] are (n_neurons, n_steps + 1) sample arrays; the membrane
    is clamped at 0 from the sample after its (single) spike onward.
    """

    config: SimConfig
    spike_times: list = field(default_factory=list)
    potentials: list = field(default_factory=list)
    currents: list = field(default_factory=list)

    def dump(self, path, layer=None, decimate=1):
        """Write membrane samples as delimited text: t, then one column per neuron."""
        layers = range(len(self.potentials)) if layer is None else [layer]
        t = np.arange(self.potentials[0].shape[1]) * self.config.dt
        cols = [t] + [self.potentials[l][i] for l in layers for i in range(self.potentials[l].shape[0])]
        header = "t\t" + "\t".join(
            f"V_l{l}_n{i}" for l in layers for i in range(self.potentials[l].shape[0])
        )
        np.savetxt(path, np.column_stack(cols)[::decimate], delimiter="\t", header=header, comments="")


def _simulate_layer(weights, input_times, config):
    """Integrate one layer given the (t-domain) spike times of its sources.

    The synaptic current of each source jumps by the weight at the grid point
    nearest its spike time and decays exactly between steps.  The membrane
    update uses the exact integral of the decaying current over one step,
    V_{k+1} = V_k + I_k * tau * (1 - exp(-dt/tau)), so only event snapping
    and threshold detection carry O(dt) error.  Returns (spike_times,
    V samples, I samples); the spike time is linearly interpolated across the
    crossing step.
    """
    n_out, n_in = weights.shape
    n_steps = config.n_steps
    dt = config.dt
    steps = np.arange(n_steps)
    current = np.zeros((n_out, n_steps))
    for i in range(n_in):
        t_i = input_times[i]
        if not np.isfinite(t_i):
            continue
        k_i = int(round(t_i / dt))
        if k_i >= n_steps:
            continue
        kernel = np.exp(-(steps[k_i:] - k_i) * dt / config.tau_syn)
        current[:, k_i:] += np.outer(weights[:, i], kernel)

    # V_k at time k*dt: V_0 = 0, V_{k+1} = V_k + I_k * tau * (1 - exp(-dt/tau))
    step_gain = config.tau_syn * -np.expm1(-dt / config.tau_syn)
    potentials = np.concatenate(
        [np.zeros((n_out, 1)), step_gain * np.cumsum(current, axis=1)], axis=1
    )
    crossed = potentials[:, 1:] >= config.threshold
    spike_times = np.full(n_out, np.inf)
    for j in range(n_out):
        hits = np.flatnonzero(crossed[j])
        if hits.size == 0:
            continue
        k = hits[0]
        v0, v1 = potentials[j, k], potentials[j, k + 1]
        frac = (config.threshold - v0) / (v1 - v0)
        spike_times[j] = (k + frac) * dt
        # single-spike rule: reset at the crossing and clamp thereafter
        potentials[j, k + 1 :] = 0.0
    currents = np.concatenate([np.zeros((n_out, 1)), current], axis=1)
    return spike_times, potentials, currents


def simulate_network(topology, weights, input_spike_times, config=SimConfig()):
    """Simulate the whole feedforward network layer by layer.

    input_spike_times: t-domain times per input neuron; np.inf marks an input
    that never spikes.  Spikes propagate to the next layer snapped to the
    nearest grid point.  Returns a SimTrace.
    """
    topology.validate_weights(weights)
    times = np.asarray(input_spike_times, dtype=np.float64)
    if times.shape != (topology.layer_sizes[0],):
        raise ContractError(
            f"input times shape {times.shape} != input size {topology.layer_sizes[0]}"
        )
    trace = SimTrace(config=config)
    for w in weights:
        layer_in = times
        if topology.use_reference_neuron:
            layer_in = np.concatenate([[0.0], layer_in])
        snapped = np.where(
            np.isfinite(layer_in), np.round(layer_in / config.dt) * config.dt, np.inf
        )
        spike_times, potentials, currents = _simulate_layer(w, snapped, config)
        trace.spike_times.append(spike_times)
        trace.potentials.append(potentials)
        trace.currents.append(currents)
        times = spike_times
    return trace


def _grazing_flags(forward_trace, weights):
    """Per layer, per neuron: causal weight sum within GRAZING_TOL of threshold.

    For non-spiking neurons any sorted finite prefix whose weight sum grazes 1
    counts, since a tiny perturbation could make that prefix fire.
    """
    flags = []
    for l in range(forward_trace.topology.n_weight_layers):
        layer = forward_trace.batch.layers[l]
        z_in = layer.z_in[0]
        order = layer.order[0]
        finite = z_in[order] < NON_SPIKE
        n_finite = int(np.sum(finite))
        layer_flags = np.zeros(layer.z_out.shape[1], dtype=bool)
        for i in range(layer.z_out.shape[1]):
            cum_w = np.cumsum(weights[l][i][order][:n_finite])
            if n_finite:
                layer_flags[i] = bool(np.any(np.abs(cum_w - 1.0) < GRAZING_TOL))
        flags.append(layer_flags)
    return flags


@dataclass
class ComparisonReport:
    """Outcome of one analytical-vs-simulated network comparison."""

    max_abs_dt: float
    n_compared: int
    n_excluded_grazing: int
    disagreements: list  # (layer, neuron, t_analytical, t_sim)
    per_neuron: list  # (layer, neuron, t_analytical, t_sim, abs_dt)

    @property
    def agreed(self):
        return not self.disagreements


def compare_with_analytical(topology, weights, z_input, config=SimConfig()):
    """Run both forward passes and report per-neuron spike-time discrepancies.

    Neurons whose causal weight sum grazes the threshold are excluded from
    both the discrepancy maximum and the spike/no-spike disagreement list.
    """
    trace = network_forward(topology, weights, z_input)
    flags = _grazing_flags(trace, weights)
    t_input = time_from_z(np.asarray(z_input, dtype=np.float64))
    sim = simulate_network(topology, weights, np.where(np.isfinite(t_input), t_input, np.inf), config)

    max_abs_dt = 0.0
    n_compared = 0
    n_excluded = 0
    disagreements = []
    per_neuron = []
    for l in range(topology.n_weight_layers):
        t_analytical = time_from_z(trace.batch.layers[l].z_out[0])
        t_sim = sim.spike_times[l]
        for i in range(t_analytical.shape[0]):
            if flags[l][i]:
                n_excluded += 1
                continue
            a_spikes = np.isfinite(t_analytical[i])
            s_spikes = np.isfinite(t_sim[i])
            if a_spikes != s_spikes:
                disagreements.append((l, i, t_analytical[i], t_sim[i]))
                continue
            if a_spikes:
                d = abs(t_analytical[i] - t_sim[i])
                per_neuron.append((l, i, t_analytical[i], t_sim[i], d))
                max_abs_dt = max(max_abs_dt, d)
                n_compared += 1
    return ComparisonReport(
        max_abs_dt=max_abs_dt,
        n_compared=n_compared,
        n_excluded_grazing=n_excluded,
        disagreements=disagreements,
        per_neuron=per_neuron,
    )
