"""Feedforward spiking networks trained on first-spike times in the z-domain."""

from .core import (
    NON_SPIKE,
    CausalSet,
    ContractError,
    ForwardTrace,
    NetworkTopology,
    causal_set,
    network_forward,
    network_forward_batch,
    neuron_first_spike,
    nth_spike_time,
    predict,
    time_from_z,
    z_from_time,
)
from .data import EncodedDataset, encode_mnist, load_idx_images, load_idx_labels, mnist_dataset, xor_dataset
from .grad import (
    LossBreakdown,
    backprop,
    d_zout_d_weight,
    d_zout_d_zin,
    l2_cost,
    softmax_xent_loss,
    weight_sum_cost,
)
from .model_io import ModelFormatError, load_model, save_model
from .sim import SimConfig, SimTrace, compare_with_analytical, simulate_network
from .train import (
    Hyperparams,
    TrainReport,
    apply_input_noise,
    clip_gradient,
    init_weights,
    lr_at,
    train,
    train_xor,
)

__all__ = [
    "NON_SPIKE",
    "CausalSet",
    "ContractError",
    "EncodedDataset",
    "ForwardTrace",
    "Hyperparams",
    "LossBreakdown",
    "ModelFormatError",
    "NetworkTopology",
    "SimConfig",
    "SimTrace",
    "TrainReport",
    "apply_input_noise",
    "backprop",
    "causal_set",
    "clip_gradient",
    "compare_with_analytical",
    "d_zout_d_weight",
    "d_zout_d_zin",
    "encode_mnist",
    "init_weights",
    "l2_cost",
    "load_idx_images",
    "load_idx_labels",
    "load_model",
    "lr_at",
    "mnist_dataset",
    "network_forward",
    "network_forward_batch",
    "neuron_first_spike",
    "nth_spike_time",
    "predict",
    "save_model",
    "simulate_network",
    "softmax_xent_loss",
    "time_from_z",
    "train",
    "train_xor",
    "weight_sum_cost",
    "xor_dataset",
    "z_from_time",
]
