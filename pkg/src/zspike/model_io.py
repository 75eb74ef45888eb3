"""Versioned flat-text model persistence.

Header lines carry the format version, topology, and free-form metadata;
weight values follow row-major using repr(), which round-trips IEEE doubles
bit-exactly.  The format is diff-able and language-agnostic.
"""

import numpy as np

from .core import NetworkTopology

FORMAT_NAME = "zspike-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file failed validation (version, shape, or syntax)."""


def save_model(path, topology, weights, metadata=None):
    """Write topology, metadata, and weights to a flat text file."""
    topology.validate_weights(weights)
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}"]
    lines.append("layers " + " ".join(str(s) for s in topology.layer_sizes))
    lines.append(f"reference_neuron {int(topology.use_reference_neuron)}")
    for key, value in (metadata or {}).items():
        if any(c.isspace() for c in key):
            raise ModelFormatError(f"metadata key {key!r} contains whitespace")
        lines.append(f"meta {key} {value}")
    for l, w in enumerate(weights):
        lines.append(f"weights {l} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_model(path):
    """Read a model file; returns (topology, weights, metadata dict)."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or not lines[0].startswith(FORMAT_NAME):
        raise ModelFormatError(f"{path}: not a {FORMAT_NAME} file")
    version = lines[0].split()[1:]
    if version != [str(FORMAT_VERSION)]:
        raise ModelFormatError(f"{path}: unsupported format version {' '.join(version)}")

    layer_sizes = None
    use_reference = False
    metadata = {}
    weights = []
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("layers "):
            layer_sizes = tuple(int(s) for s in line.split()[1:])
            i += 1
        elif line.startswith("reference_neuron "):
            use_reference = bool(int(line.split()[1]))
            i += 1
        elif line.startswith("meta "):
            _, key, value = line.split(" ", 2)
            metadata[key] = value
            i += 1
        elif line.startswith("weights "):
            _, idx, rows, cols = line.split()
            if int(idx) != len(weights):
                raise ModelFormatError(f"{path}: weight blocks out of order at line {i + 1}")
            rows, cols = int(rows), int(cols)
            block = lines[i + 1 : i + 1 + rows]
            if len(block) != rows:
                raise ModelFormatError(f"{path}: truncated weight block {idx}")
            w = np.array([[float(v) for v in row.split()] for row in block])
            if w.shape != (rows, cols):
                raise ModelFormatError(
                    f"{path}: weight block {idx} has shape {w.shape}, header says {(rows, cols)}"
                )
            weights.append(w)
            i += 1 + rows
        elif not line.strip():
            i += 1
        else:
            raise ModelFormatError(f"{path}: unrecognized line {i + 1}: {line[:40]!r}")

    if layer_sizes is None:
        raise ModelFormatError(f"{path}: missing layers header")
    topology = NetworkTopology(layer_sizes, use_reference_neuron=use_reference)
    try:
        topology.validate_weights(weights)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    return topology, weights, metadata
