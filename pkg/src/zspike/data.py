"""Dataset ingestion and spike-time encoding.

MNIST arrives in the IDX container format (big-endian magic, dimension
sizes, then raw unsigned bytes).  Images are binarized: bright pixels spike
at t = 0 (z = 1), dark pixels at t = ln 6 (z = 6), giving the two input
populations a temporal separation larger than one synaptic time constant.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .core import z_from_time

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# z values of the binarized pixel encoding: bright -> t = 0, dark -> t = ln 6
Z_BRIGHT = 1.0
Z_DARK = 6.0

DEFAULT_BINARIZE_THRESHOLD = 127

# z value of a late input spike in the XOR task (t = 2.0)
Z_LATE = float(z_from_time(2.0))


class IdxFormatError(ValueError):
    """An IDX file failed to parse (bad magic, truncation, shape mismatch)."""


@dataclass(frozen=True)
class EncodedDataset:
    """Spike-time-encoded examples: inputs (N, d) in the z-domain, labels (N,)."""

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise IdxFormatError(
                f"{self.inputs.shape[0]} examples but {self.labels.shape[0]} labels"
            )
        if self.labels.size and int(self.labels.max()) >= self.n_classes:
            raise IdxFormatError("label out of range for n_classes")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    def subset(self, n):
        return EncodedDataset(self.inputs[:n], self.labels[:n], self.n_classes)

    def save(self, path):
        np.savez(path, inputs=self.inputs, labels=self.labels, n_classes=self.n_classes)

    @staticmethod
    def load(path):
        with np.load(path) as f:
            return EncodedDataset(f["inputs"], f["labels"], int(f["n_classes"]))


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_header(f, path, expected_magic, n_dims):
    header = f.read(4 * (1 + n_dims))
    if len(header) != 4 * (1 + n_dims):
        raise IdxFormatError(f"{path}: truncated IDX header")
    fields = struct.unpack(f">{1 + n_dims}i", header)
    if fields[0] != expected_magic:
        raise IdxFormatError(
            f"{path}: wrong magic 0x{fields[0]:08x} (expected 0x{expected_magic:08x})"
        )
    return fields[1:]


def load_idx_images(path):
    """Load an IDX image file (optionally gzipped) as a uint8 (N, rows, cols) array."""
    with _open_maybe_gzip(path) as f:
        count, rows, cols = _read_header(f, path, IDX_IMAGE_MAGIC, 3)
        expected = count * rows * cols
        payload = f.read(expected + 1)
    if len(payload) < expected:
        raise IdxFormatError(
            f"{path}: unexpected end of data ({expected} pixel bytes expected, {len(payload)} found)"
        )
    if len(payload) > expected:
        raise IdxFormatError(f"{path}: {len(payload) - expected}+ trailing bytes after pixel data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def load_idx_labels(path):
    """Load an IDX label file (optionally gzipped) as a uint8 (N,) array."""
    with _open_maybe_gzip(path) as f:
        (count,) = _read_header(f, path, IDX_LABEL_MAGIC, 1)
        payload = f.read(count + 1)
    if len(payload) < count:
        raise IdxFormatError(
            f"{path}: unexpected end of data ({count} label bytes expected, {len(payload)} found)"
        )
    if len(payload) > count:
        raise IdxFormatError(f"{path}: {len(payload) - count}+ trailing bytes after label data")
    return np.frombuffer(payload, dtype=np.uint8)


def encode_mnist(pixels, threshold=DEFAULT_BINARIZE_THRESHOLD):
    """Binarize pixel bytes to the two spike times.

    Strictly-above-threshold pixels spike at t = 0 (z = 1); the rest at
    t = ln 6 (z = 6).  Works on a single image or a batch; images flatten
    row-major to 784 entries.
    """
    pixels = np.asarray(pixels)
    flat = pixels.reshape(pixels.shape[0], -1) if pixels.ndim == 3 else pixels.reshape(1, -1)
    z = np.where(flat > threshold, Z_BRIGHT, Z_DARK)
    return z if pixels.ndim == 3 else z[0]


def mnist_dataset(image_path, label_path, threshold=DEFAULT_BINARIZE_THRESHOLD):
    """Load and encode an MNIST IDX image/label pair."""
    images = load_idx_images(image_path)
    labels = load_idx_labels(label_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"{images.shape[0]} images in {image_path} but {labels.shape[0]} labels in {label_path}"
        )
    return EncodedDataset(encode_mnist(images, threshold), labels.astype(np.intp), 10)


def xor_dataset():
    """The 4-pattern XOR task over two input spike sources.

    Each input spikes early (t = 0, z = 1) or late (t = 2, z = e^2).  Class 0
    when exactly one spike is early, class 1 otherwise.
    """
    early, late = 1.0, Z_LATE
    inputs = np.array(
        [
            [early, early],
            [early, late],
            [late, early],
            [late, late],
        ]
    )
    labels = np.array([1, 0, 0, 1], dtype=np.intp)
    return EncodedDataset(inputs, labels, 2)
