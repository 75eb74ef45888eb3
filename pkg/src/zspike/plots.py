"""Matplotlib renderings of the delimited report files."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_training_curves(report, path):
    """Loss and error curves per epoch from a TrainReport."""
    fig, (ax_loss, ax_err) = plt.subplots(1, 2, figsize=(10, 4))
    epochs = report.epochs
    ax_loss.plot(epochs, report.train_loss, label="total")
    ax_loss.plot(epochs, report.train_loss_ce, label="cross-entropy")
    ax_loss.plot(epochs, report.train_loss_wsum, label="weight-sum")
    if any(v > 0 for v in report.train_loss_l2):
        ax_loss.plot(epochs, report.train_loss_l2, label="L2")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("training loss")
    ax_loss.set_yscale("log")
    ax_loss.legend()

    ax_err.plot(epochs, report.train_error, label="train")
    if not all(np.isnan(report.test_error)):
        ax_err.plot(epochs, report.test_error, label="test")
    ax_err.set_xlabel("epoch")
    ax_err.set_ylabel("error rate")
    ax_err.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_spike_time_histograms(hidden_t, decision_t, path, bins=60):
    """Histograms of hidden spike times and of the earliest output spike."""
    fig, ax = plt.subplots(figsize=(7, 4))
    finite_hidden = hidden_t[np.isfinite(hidden_t)]
    finite_decision = decision_t[np.isfinite(decision_t)]
    upper = 1.0
    if finite_hidden.size or finite_decision.size:
        upper = max(
            finite_hidden.max() if finite_hidden.size else 0.0,
            finite_decision.max() if finite_decision.size else 0.0,
        )
    edges = np.linspace(0.0, upper * 1.02 + 1e-9, bins)
    if finite_hidden.size:
        ax.hist(finite_hidden, bins=edges, density=True, alpha=0.6, label="hidden spikes")
    if finite_decision.size:
        ax.hist(finite_decision, bins=edges, density=True, alpha=0.6, label="earliest output spike")
    ax.set_xlabel("spike time (units of tau_syn)")
    ax.set_ylabel("density")
    if finite_hidden.size or finite_decision.size:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_selectivity(neg_log_participation, path, max_neurons=30, rng=None):
    """Heat map of -log P(hidden neuron fires before the decision | class)."""
    m = neg_log_participation
    n_classes, n_hidden = m.shape
    if n_hidden > max_neurons:
        rng = rng or np.random.default_rng(0)
        cols = np.sort(rng.choice(n_hidden, size=max_neurons, replace=False))
        m = m[:, cols]
    else:
        cols = np.arange(n_hidden)
    finite = m[np.isfinite(m)]
    cap = finite.max() + 1.0 if finite.size else 1.0
    fig, ax = plt.subplots(figsize=(max(6, 0.3 * len(cols)), 4))
    im = ax.imshow(np.minimum(m, cap), aspect="auto", cmap="viridis")
    ax.set_xlabel("hidden neuron")
    ax.set_ylabel("class")
    ax.set_xticks(range(len(cols)), [str(c) for c in cols], rotation=90, fontsize=7)
    fig.colorbar(im, ax=ax, label="-log participation probability")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
