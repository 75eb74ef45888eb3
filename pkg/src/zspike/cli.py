"""Command-line driver: train, eval, gradcheck, verify-sim, analyze.

Reports are plain delimited text plus matplotlib renderings of the same
data, written next to each other in the run's output directory.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from .analysis import analyze, confusion_counts
from .checks import gradcheck, random_sim_problem, verify_sim
from .config import ConfigError, load_config
from .core import NetworkTopology, network_forward_batch, time_from_z
from .data import (
    DEFAULT_BINARIZE_THRESHOLD,
    IdxFormatError,
    mnist_dataset,
    xor_dataset,
)
from .model_io import ModelFormatError, load_model, save_model
from .sim import SimConfig, simulate_network
from .train import train, train_xor


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _load_dataset(args, threshold):
    if args.task == "xor":
        return xor_dataset()
    if not args.images or not args.labels:
        raise ConfigError("--images and --labels are required unless --task xor")
    return mnist_dataset(args.images, args.labels, threshold)


def _model_metadata(config, epochs_completed):
    meta = {key: value for key, value in config.as_items() if key != "outdir"}
    meta["epochs_completed"] = epochs_completed
    return meta


def cmd_train(args):
    config = load_config(args.config, args.set or [])
    topology = config.to_topology()
    hyper = config.to_hyperparams()
    os.makedirs(config.outdir, exist_ok=True)
    print(f"task={config.task} topology={config.topology} seed={config.seed}")

    with open(os.path.join(config.outdir, "run_config.txt"), "w") as f:
        for key, value in config.as_items():
            f.write(f"{key} = {value}\n")

    metrics_path = os.path.join(config.outdir, "metrics.csv")
    model_path = os.path.join(config.outdir, "model.txt")
    header = [
        "epoch", "lr", "loss_total", "loss_ce", "loss_wsum", "loss_l2",
        "train_error", "test_error", "wall_time_s",
    ]

    if config.task == "xor":
        result = train_xor(topology, xor_dataset(), hyper, max_iterations=args.max_iterations)
        rows = [
            [i + 1, hyper.lr_start, "", "", "", "", err, "", ""]
            for i, err in enumerate(result.errors)
        ]
        _write_csv(metrics_path, header, rows)
        save_model(model_path, topology, result.weights, _model_metadata(config, result.iterations))
        status = "converged" if result.converged else "DID NOT CONVERGE"
        print(f"{status} after {result.iterations} iterations; final training error "
              f"{result.errors[-1]:.3f}")
        return 0 if result.converged else 1

    train_set = mnist_dataset(config.train_images, config.train_labels, config.encode_threshold)
    if config.train_limit:
        train_set = train_set.subset(config.train_limit)
    test_set = mnist_dataset(config.test_images, config.test_labels, config.encode_threshold)

    def progress(epoch, report):
        print(
            f"epoch {epoch:3d}  lr {report.learning_rates[-1]:.6f}  "
            f"loss {report.train_loss[-1]:.4f}  train_err {report.train_error[-1]:.4f}  "
            f"test_err {report.test_error[-1]:.4f}",
            flush=True,
        )

    report = train(topology, train_set, hyper, test_set=test_set, progress=progress)
    rows = [
        [
            report.epochs[i], f"{report.learning_rates[i]:.8g}",
            f"{report.train_loss[i]:.8g}", f"{report.train_loss_ce[i]:.8g}",
            f"{report.train_loss_wsum[i]:.8g}", f"{report.train_loss_l2[i]:.8g}",
            f"{report.train_error[i]:.6f}", f"{report.test_error[i]:.6f}",
            f"{report.wall_time[i]:.3f}",
        ]
        for i in range(len(report.epochs))
    ]
    _write_csv(metrics_path, header, rows)
    save_model(model_path, topology, report.weights, _model_metadata(config, hyper.epochs))
    from .plots import plot_training_curves

    plot_training_curves(report, os.path.join(config.outdir, "training_curves.png"))
    print(f"final train error {report.train_error[-1]:.4%}, test error {report.test_error[-1]:.4%}")
    return 0


def cmd_eval(args):
    topology, weights, metadata = load_model(args.model)
    threshold = args.encode_threshold
    if threshold is None:
        threshold = int(metadata.get("encode_threshold", DEFAULT_BINARIZE_THRESHOLD))
    dataset = _load_dataset(args, threshold)
    if dataset.input_dim != topology.layer_sizes[0]:
        raise ConfigError(
            f"dataset input size {dataset.input_dim} != model input size {topology.layer_sizes[0]}"
        )

    n = len(dataset)
    predictions = np.empty(n, dtype=np.intp)
    decision_z = np.empty(n)
    ties = 0
    chunk = 256
    for start in range(0, n, chunk):
        z_top = network_forward_batch(topology, weights, dataset.inputs[start : start + chunk]).z_out
        predictions[start : start + z_top.shape[0]] = np.argmin(z_top, axis=1)
        dz = np.min(z_top, axis=1)
        decision_z[start : start + z_top.shape[0]] = dz
        ties += int(np.sum(np.sum(z_top == dz[:, None], axis=1) > 1))

    labels = dataset.labels
    error = float(np.mean(predictions != labels))
    decision_t = time_from_z(decision_z)
    finite_t = decision_t[np.isfinite(decision_t)]
    print(f"examples: {n}")
    print(f"error rate: {error:.4%}")
    print(f"ties at the earliest spike (broken to lowest index): {ties}")
    if finite_t.size:
        print(f"decision time (t-domain): mean {finite_t.mean():.4f}, "
              f"median {np.median(finite_t):.4f}, max {finite_t.max():.4f}")
    print(f"examples with no output spike: {int(np.sum(~np.isfinite(decision_t)))}")

    if args.outdir:
        os.makedirs(args.outdir, exist_ok=True)
        counts = confusion_counts(predictions, labels, dataset.n_classes)
        _write_csv(
            os.path.join(args.outdir, "confusion.csv"),
            ["true\\pred"] + list(range(dataset.n_classes)),
            [[i] + counts[i].tolist() for i in range(dataset.n_classes)],
        )
        _write_csv(
            os.path.join(args.outdir, "decision_times.csv"),
            ["example", "label", "prediction", "decision_z", "decision_t"],
            [
                [i, int(labels[i]), int(predictions[i]), repr(float(decision_z[i])),
                 repr(float(decision_t[i]))]
                for i in range(n)
            ],
        )
    return 0


def cmd_gradcheck(args):
    report = gradcheck(n_points=args.points, seed=args.seed)
    print(f"checked {report.n_checked} coordinates, skipped {report.n_skipped} unstable")
    print(f"median relative error: {report.median_rel_error:.3e}")
    print(f"max relative error:    {report.max_rel_error:.3e}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_verify_sim(args):
    sizes = tuple(int(s) for s in args.sizes.split("-"))
    report = verify_sim(n_networks=args.networks, dt=args.dt, seed=args.seed, sizes=sizes)
    print(f"networks: {report.n_networks}  (sizes {args.sizes}, dt {args.dt:g})")
    print(f"spike/no-spike disagreements: {report.n_disagreements}")
    print(f"neurons excluded as threshold-grazing: {report.n_excluded_grazing}")
    print(f"max |t_analytical - t_sim|: {report.max_abs_dt:.3e} (tolerance {report.tolerance:.3e})")
    if args.dump_trace:
        rng = np.random.default_rng(args.seed)
        topology, weights, z_input = random_sim_problem(rng, sizes)
        trace = simulate_network(
            topology, weights, time_from_z(z_input), SimConfig(dt=args.dt, t_max=15.0)
        )
        trace.dump(args.dump_trace, decimate=max(1, int(1e-2 / args.dt)))
        print(f"membrane trace written to {args.dump_trace}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_analyze(args):
    topology, weights, metadata = load_model(args.model)
    threshold = args.encode_threshold
    if threshold is None:
        threshold = int(metadata.get("encode_threshold", DEFAULT_BINARIZE_THRESHOLD))
    dataset = _load_dataset(args, threshold)
    result = analyze(topology, weights, dataset)
    os.makedirs(args.outdir, exist_ok=True)

    decision_t = result.decision_t
    _write_csv(
        os.path.join(args.outdir, "decision_stats.csv"),
        ["example", "label", "prediction", "decision_z", "decision_t", "hidden_fraction_before"],
        [
            [i, int(result.labels[i]), int(result.predictions[i]),
             repr(float(result.decision_z[i])), repr(float(decision_t[i])),
             f"{result.hidden_fraction_before[i]:.6f}"]
            for i in range(result.n_examples)
        ],
    )

    hidden_t = result.hidden_spike_t
    finite = np.concatenate([hidden_t, decision_t[np.isfinite(decision_t)]])
    upper = finite.max() * 1.02 + 1e-9 if finite.size else 1.0
    edges = np.linspace(0.0, upper, 61)
    hidden_hist, _ = np.histogram(hidden_t, bins=edges)
    decision_hist, _ = np.histogram(decision_t[np.isfinite(decision_t)], bins=edges)
    _write_csv(
        os.path.join(args.outdir, "spike_time_histograms.csv"),
        ["bin_left", "bin_right", "hidden_spikes", "earliest_output_spikes"],
        [
            [f"{edges[i]:.6f}", f"{edges[i + 1]:.6f}", int(hidden_hist[i]), int(decision_hist[i])]
            for i in range(len(hidden_hist))
        ],
    )

    _write_csv(
        os.path.join(args.outdir, "participation.csv"),
        ["class"] + [f"neuron_{j}" for j in range(result.n_hidden)],
        [[c] + [f"{p:.6f}" for p in result.participation[c]] for c in range(result.n_classes)],
    )
    neglog = result.neg_log_participation
    _write_csv(
        os.path.join(args.outdir, "neglog_participation.csv"),
        ["class"] + [f"neuron_{j}" for j in range(result.n_hidden)],
        [
            [c] + [("inf" if math.isinf(v) else f"{v:.6f}") for v in neglog[c]]
            for c in range(result.n_classes)
        ],
    )

    redundant = result.redundant_neurons
    with open(os.path.join(args.outdir, "summary.txt"), "w") as f:
        f.write(f"examples {result.n_examples}\n")
        f.write(f"error_rate {result.error_rate:.6f}\n")
        f.write(f"mean_hidden_fraction_before_decision {result.mean_hidden_fraction_before:.6f}\n")
        f.write(f"hidden_neurons {result.n_hidden}\n")
        f.write(f"redundant_neurons {len(redundant)}\n")
        if len(redundant):
            f.write("redundant_indices " + " ".join(map(str, redundant.tolist())) + "\n")

    from .plots import plot_selectivity, plot_spike_time_histograms

    plot_spike_time_histograms(
        hidden_t, decision_t, os.path.join(args.outdir, "spike_time_histograms.png")
    )
    if result.n_hidden:
        plot_selectivity(neglog, os.path.join(args.outdir, "selectivity.png"))

    print(f"mean fraction of hidden neurons spiking before the decision: "
          f"{result.mean_hidden_fraction_before:.4f}")
    print(f"redundant hidden neurons (never pre-decision): {len(redundant)}")
    print(f"analysis files written to {args.outdir}")
    return 0


def _add_dataset_args(parser):
    parser.add_argument("--task", choices=["xor", "mnist"], default="mnist",
                        help="xor uses the built-in 4-pattern set")
    parser.add_argument("--images", help="IDX image file")
    parser.add_argument("--labels", help="IDX label file")
    parser.add_argument("--encode-threshold", type=int, default=None,
                        help="binarization threshold (default: from model metadata)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="zspike",
        description="Train and inspect first-spike-time spiking networks (z-domain).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (wins over the file)")
    p.add_argument("--max-iterations", type=int, default=200,
                   help="XOR task: iteration cap (each = 100 presentations of 4 patterns)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    p.add_argument("--model", required=True)
    _add_dataset_args(p)
    p.add_argument("--outdir", help="write confusion.csv and decision_times.csv here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytical gradients")
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("verify-sim", help="compare the forward pass against the simulator")
    p.add_argument("--networks", type=int, default=100)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="5-8-3", help="network layer sizes, e.g. 5-8-3")
    p.add_argument("--dump-trace", help="write a membrane-potential trace (delimited text)")
    p.set_defaults(func=cmd_verify_sim)

    p = sub.add_parser("analyze", help="decision-latency and selectivity statistics")
    p.add_argument("--model", required=True)
    _add_dataset_args(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IdxFormatError, ModelFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
