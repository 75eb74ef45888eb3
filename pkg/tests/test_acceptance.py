"""Acceptance suite.

Each test prints one PASS/FAIL line (visible with `pytest -s` or on failure).
The MNIST tests need the four original IDX files; point ZSPIKE_MNIST_DIR at
the directory holding them (default search: ./data/mnist) or they skip.  The
full-size run is additionally gated behind ZSPIKE_RUN_LONG=1.
"""

import os

import numpy as np
import pytest

from zspike import (
    NON_SPIKE,
    Hyperparams,
    NetworkTopology,
    network_forward,
    train,
    train_xor,
    xor_dataset,
)
from zspike.analysis import analyze
from zspike.checks import gradcheck, verify_sim
from zspike.data import mnist_dataset
from zspike.grad import d_zout_d_zin
from zspike.train import init_weights

XOR_HYPER = dict(
    lr_start=0.1, lr_end=0.1, epochs=1, batch_size=1,
    weight_sum_k=10.0, l2_lambda=0.0, clip_threshold=10.0,
)


def report(criterion, passed, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} — {detail}"
    print(line)
    assert passed, line


def mnist_paths():
    base = os.environ.get("ZSPIKE_MNIST_DIR", os.path.join("data", "mnist"))
    names = (
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    )
    paths = []
    for name in names:
        for candidate in (os.path.join(base, name), os.path.join(base, name + ".gz")):
            if os.path.exists(candidate):
                paths.append(candidate)
                break
        else:
            return None
    return paths

MNIST_SKIP = (
    "MNIST IDX files not found (set ZSPIKE_MNIST_DIR or place them in "
    "./data/mnist); this environment has no network access to fetch them"
)


def run_xor_trials(n_trials=100):
    topology = NetworkTopology((2, 4, 2))
    dataset = xor_dataset()
    results = []
    for seed in range(n_trials):
        hyper = Hyperparams(seed=seed, **XOR_HYPER)
        results.append(train_xor(topology, dataset, hyper, max_iterations=200))
    return results


@pytest.fixture(scope="module")
def xor_trials():
    return run_xor_trials()


def random_network_sample(rng):
    """Small random network + input, no reference neuron (it would not scale)."""
    n_hidden_layers = int(rng.integers(1, 3))
    sizes = tuple(int(rng.integers(2, 6)) for _ in range(n_hidden_layers + 2))
    topology = NetworkTopology(sizes)
    weights = init_weights(topology, int(rng.integers(0, 2**32)))
    for w in weights:
        w += rng.normal(0.0, 0.5 / w.shape[1], size=w.shape)
    z_input = np.exp(rng.uniform(0.0, 2.0, size=sizes[0]))
    return topology, weights, z_input


def causal_structure(trace):
    return tuple(
        tuple(
            frozenset(layer.order[0, : layer.counts[0, i]].tolist())
            for i in range(layer.z_out.shape[1])
        )
        for layer in trace.batch.layers
    )


class TestCriterion1:
    def test_xor_robustness(self, xor_trials):
        n_converged = sum(r.converged for r in xor_trials)
        mean_iters = float(np.mean([r.iterations for r in xor_trials]))
        max_iters = max(r.iterations for r in xor_trials)
        report(
            "1 (XOR robustness)",
            n_converged == len(xor_trials) and mean_iters <= 20.0,
            f"{n_converged}/{len(xor_trials)} converged ≤200 iterations, "
            f"mean {mean_iters:.2f} (≤20), max {max_iters}",
        )


class TestCriterion2:
    def test_gradient_correctness(self):
        result = gradcheck(n_points=1000, seed=0, h=1e-6)
        report(
            "2 (gradient correctness)",
            result.median_rel_error < 1e-8 and result.max_rel_error < 1e-5,
            f"{result.n_checked} points: median rel err {result.median_rel_error:.2e} "
            f"(<1e-8), max {result.max_rel_error:.2e} (<1e-5), "
            f"{result.n_skipped} unstable skipped",
        )


class TestCriterion3:
    def test_oracle_equivalence(self):
        result = verify_sim(n_networks=100, dt=1e-4, seed=0)
        coarse = verify_sim(n_networks=20, dt=2e-4, seed=1)
        fine = verify_sim(n_networks=20, dt=1e-4, seed=1)
        ratio = fine.max_abs_dt / coarse.max_abs_dt
        report(
            "3 (oracle equivalence)",
            result.n_disagreements == 0
            and result.max_abs_dt <= result.tolerance
            and ratio <= 0.75,
            f"100 networks at dt=1e-4: {result.n_disagreements} disagreements, "
            f"max |Δt| {result.max_abs_dt:.2e} (≤{result.tolerance:.0e}), "
            f"{result.n_excluded_grazing} grazing excluded; "
            f"halving dt scales the discrepancy by {ratio:.2f}",
        )


@pytest.fixture(scope="module")
def scaling_samples():
    rng = np.random.default_rng(7)
    samples = []
    while len(samples) < 1000:
        topology, weights, z_input = random_network_sample(rng)
        trace = network_forward(topology, weights, z_input)
        samples.append((topology, weights, z_input, trace))
    return samples


class TestCriterion4:
    def test_homogeneity_and_argmin_invariance(self, scaling_samples):
        worst = 0.0
        for topology, weights, z_input, base in scaling_samples:
            base_structure = causal_structure(base)
            base_out = base.z_out
            for k in (0.5, 2.0, 10.0):
                scaled = network_forward(topology, weights, k * z_input)
                assert causal_structure(scaled) == base_structure
                assert np.argmin(scaled.z_out) == np.argmin(base_out)
                finite = base_out < NON_SPIKE
                assert np.all((scaled.z_out >= NON_SPIKE) == ~finite)
                if finite.any():
                    rel = np.abs(scaled.z_out[finite] / (k * base_out[finite]) - 1.0)
                    worst = max(worst, float(rel.max()))
        report(
            "4 (homogeneity/argmin invariance)",
            worst < 1e-12,
            f"1000 networks × K∈{{0.5,2,10}}: causal sets and argmin identical, "
            f"worst relative scaling error {worst:.2e} (<1e-12)",
        )


class TestCriterion5:
    def test_euler_identity(self, scaling_samples):
        worst = 0.0
        n_neurons = 0
        for topology, weights, z_input, trace in scaling_samples:
            for l in range(topology.n_weight_layers):
                layer = trace.batch.layers[l]
                z_in = layer.z_in[0]
                for i, c in enumerate(trace.causal_sets(l)):
                    if c.is_empty:
                        continue
                    z_out = layer.z_out[0, i]
                    total = sum(
                        d_zout_d_zin(weights[l][i], c, p) * z_in[p] for p in c.indices
                    )
                    worst = max(worst, abs(total / z_out - 1.0))
                    n_neurons += 1
        report(
            "5 (Euler identity)",
            worst < 1e-12,
            f"Σ (∂z_out/∂z_p)·z_p = z_out at {n_neurons} spiking neurons, "
            f"worst relative error {worst:.2e} (<1e-12)",
        )


def train_mnist_subset(paths, seed=0):
    train_set = mnist_dataset(paths[0], paths[1]).subset(10000)
    test_set = mnist_dataset(paths[2], paths[3])
    topology = NetworkTopology((784, 100, 10))
    hyper = Hyperparams(
        lr_start=0.01, lr_end=0.0001, epochs=20, batch_size=10,
        weight_sum_k=100.0, l2_lambda=0.001, clip_threshold=10.0,
        input_noise=True, seed=seed,
    )
    return train(topology, train_set, hyper, test_set=test_set), test_set


@pytest.fixture(scope="module")
def mnist_subset_run():
    paths = mnist_paths()
    if paths is None:
        pytest.skip(MNIST_SKIP)
    return train_mnist_subset(paths)


class TestCriterion6:
    def test_mnist_subset_regression(self, mnist_subset_run):
        run, _ = mnist_subset_run
        err = run.test_error[-1]
        report(
            "6 (MNIST desk-scale regression)",
            err <= 0.12,
            f"784-100-10, 10k subset, 20 epochs: test error {err:.4f} (≤0.12)",
        )


@pytest.fixture(scope="module")
def mnist_full_run():
    paths = mnist_paths()
    if paths is None:
        pytest.skip(MNIST_SKIP)
    if os.environ.get("ZSPIKE_RUN_LONG") != "1":
        pytest.skip("long-running full MNIST reproduction; set ZSPIKE_RUN_LONG=1")
    train_set = mnist_dataset(paths[0], paths[1])
    test_set = mnist_dataset(paths[2], paths[3])
    topology = NetworkTopology((784, 800, 10))
    hyper = Hyperparams(input_noise=True, seed=0)  # defaults are the full setup
    return train(topology, train_set, hyper, test_set=test_set), train_set, test_set


class TestCriterion7:
    def test_mnist_full_reproduction(self, mnist_full_run):
        run, train_set, _ = mnist_full_run
        from zspike.train import error_rate

        topology = NetworkTopology((784, 800, 10))
        train_err = error_rate(topology, run.weights, train_set.inputs, train_set.labels)
        report(
            "7 (MNIST full reproduction)",
            run.test_error[-1] <= 0.035 and train_err <= 0.001,
            f"784-800-10, 100 epochs: test error {run.test_error[-1]:.4f} (≤0.035), "
            f"train error {train_err:.5f} (≤0.001)",
        )


class TestCriterion8:
    def test_early_decision_statistic(self, mnist_full_run):
        run, _, test_set = mnist_full_run
        topology = NetworkTopology((784, 800, 10))
        frac_800 = analyze(topology, run.weights, test_set).mean_hidden_fraction_before

        paths = mnist_paths()
        deep_top = NetworkTopology((784, 400, 400, 10))
        train_set = mnist_dataset(paths[0], paths[1])
        deep = train(
            deep_top, train_set, Hyperparams(input_noise=True, seed=0), test_set=test_set
        )
        frac_deep = analyze(deep_top, deep.weights, test_set).mean_hidden_fraction_before
        report(
            "8 (early-decision statistic)",
            frac_800 <= 0.15 and frac_deep <= 0.25,
            f"hidden fraction before decision: 784-800-10 {frac_800:.4f} (≤0.15), "
            f"784-400-400-10 {frac_deep:.4f} (≤0.25)",
        )


class TestCriterion9:
    def test_xor_determinism(self, xor_trials):
        repeat = run_xor_trials()
        identical = all(
            a.converged == b.converged
            and a.iterations == b.iterations
            and a.errors == b.errors
            and all(np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights))
            for a, b in zip(xor_trials, repeat)
        )
        report(
            "9a (determinism, XOR)",
            identical,
            "repeating all 100 trials reproduces iteration counts, error curves, "
            "and final weights bit-exactly",
        )

    def test_mnist_determinism(self, mnist_subset_run):
        run, _ = mnist_subset_run
        paths = mnist_paths()
        repeat, _ = train_mnist_subset(paths)
        identical = (
            run.train_loss == repeat.train_loss
            and run.train_error == repeat.train_error
            and run.test_error == repeat.test_error
            and all(np.array_equal(a, b) for a, b in zip(run.weights, repeat.weights))
        )
        report(
            "9b (determinism, MNIST subset)",
            identical,
            "repeating the criterion-6 run reproduces metrics and weights bit-exactly",
        )
