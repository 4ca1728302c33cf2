"""Datasets: the IDX binary format and the shifted synthetic task."""

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, IdxFormatError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.labels.shape != (self.inputs.shape[0],):
            raise ContractError(f"inputs {self.inputs.shape} and labels {self.labels.shape} do not line up")
        if not np.all(np.isfinite(self.inputs)):
            raise ContractError("dataset inputs must be finite")
        classes = self.meta.get("class_count")
        if classes is not None and self.labels.size and self.labels.max() >= classes:
            raise ContractError("label outside the declared class count")

    @property
    def samples(self):
        return self.inputs.shape[0]

    @property
    def features(self):
        return self.inputs.shape[1]

    @property
    def class_count(self):
        return int(self.meta.get("class_count", int(self.labels.max()) + 1 if self.labels.size else 0))


def _read_header(blob, fields, path):
    size = 4 * fields
    if len(blob) < size:
        raise IdxFormatError(f"{path}: header truncated, need {size} bytes, have {len(blob)}", offset=len(blob))
    return struct.unpack(f">{fields}I", blob[:size])


def read_idx_images(path):
    blob = Path(path).read_bytes()
    magic, *_ = _read_header(blob, 1, path)
    if magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"{path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}", offset=0)
    _, count, rows, cols = _read_header(blob, 4, path)
    body = blob[16:]
    need = count * rows * cols
    if len(body) < need:
        raise IdxFormatError(f"{path}: pixel data truncated, need {need} bytes, have {len(body)}", offset=len(blob))
    if len(body) > need:
        raise IdxFormatError(f"{path}: {len(body) - need} trailing bytes after pixel data", offset=16 + need)
    return np.frombuffer(body, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path):
    blob = Path(path).read_bytes()
    magic, *_ = _read_header(blob, 1, path)
    if magic != IDX_LABELS_MAGIC:
        raise IdxFormatError(f"{path}: bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}", offset=0)
    _, count = _read_header(blob, 2, path)
    body = blob[8:]
    if len(body) < count:
        raise IdxFormatError(f"{path}: label data truncated, need {count} bytes, have {len(body)}", offset=len(blob))
    if len(body) > count:
        raise IdxFormatError(f"{path}: {len(body) - count} trailing bytes after labels", offset=8 + count)
    return np.frombuffer(body, dtype=np.uint8)


def load_idx(images_path, labels_path, name=None):
    """IDX image + label files -> Dataset with pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}", offset=4
        )
    count, rows, cols = images.shape
    inputs = images.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    meta = {
        "name": name or Path(images_path).stem,
        "feature_count": rows * cols,
        "class_count": int(labels.max()) + 1 if count else 0,
        "image_shape": (rows, cols),
        "generation_seed": None,
    }
    logger.info("loaded %d IDX images of %dx%d", count, rows, cols)
    return Dataset(inputs, labels, meta)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images [count x rows x cols] and labels [count] as IDX files."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ContractError(f"images {images.shape} and labels {labels.shape} do not line up")
    if images.dtype != np.uint8 or labels.dtype != np.uint8:
        raise ContractError("IDX stores uint8 pixels and labels")
    count, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, count, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, count))
        f.write(labels.tobytes())


def gen_shifted_task(seed, samples, features, classes, shift, noise=0.25):
    """Gaussian class clusters offset by `shift`.

    Class means are uniform in [0, 1] per coordinate, so with shift = 0 the
    data sits at the bottom of a [0, D] window; a large |shift| pushes it out.
    """
    if classes < 2:
        raise ContractError("need at least two classes")
    if samples < classes:
        raise ContractError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0, 1.0, size=(classes, features))
    labels = rng.permutation(np.arange(samples) % classes)
    inputs = means[labels] + noise * rng.standard_normal((samples, features)) + shift
    meta = {
        "name": f"shifted(shift={shift:g})",
        "feature_count": features,
        "class_count": classes,
        "generation_seed": seed,
        "shift": shift,
        "noise": noise,
    }
    return Dataset(inputs, labels.astype(np.int64), meta)


def encode_temporal(dataset, steps):
    """Direct (constant-current) encoding: every sample repeated over T steps -> [T x B x F]."""
    if steps < 1:
        raise ContractError("T must be >= 1")
    inputs = dataset.inputs if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)
    return np.repeat(inputs[None, :, :], steps, axis=0)


def expand_time(x, d):
    """Repeat each timestep D times: [T x B x F] -> [(T*D) x B x F]."""
    if d < 1:
        raise ContractError("D must be >= 1")
    return np.repeat(np.asarray(x), d, axis=0)


def unit_norm_weights(rng, out_features, in_features):
    """Nonnegative random rows scaled to unit L2 norm."""
    w = np.abs(rng.standard_normal((out_features, in_features)))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def truncation_fraction(dataset, d, alpha=0.0, width=64, seed=0):
    """Fraction of first-layer pre-activations whose rounded value the window clips.

    Uses nonnegative unit-norm random weights. A row then sums to roughly
    0.8 * sqrt(F), so a shift of the inputs moves every pre-activation the same way.
    """
    rng = np.random.default_rng(seed)
    w = unit_norm_weights(rng, width, dataset.features)
    u = np.round(dataset.inputs @ w.T)
    lo = np.ceil(alpha)
    return float(np.mean((u < lo) | (u > lo + d)))


def export_csv(dataset, path):
    """Write `label,f0,f1,...` rows."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["label"] + [f"f{i}" for i in range(dataset.features)])
        for label, row in zip(dataset.labels, dataset.inputs):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def batches(dataset, batch_size, rng=None):
    """Yield (inputs, labels) mini-batches; shuffled when an rng is given."""
    order = np.arange(dataset.samples) if rng is None else rng.permutation(dataset.samples)
    for start in range(0, dataset.samples, batch_size):
        idx = order[start:start + batch_size]
        yield dataset.inputs[idx], dataset.labels[idx]


def load_csv(path, name=None):
    """Read a `label,f0,f1,...` file written by export_csv."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] < 2:
        raise ContractError(f"{path}: need a label column and at least one feature")
    labels = table[:, 0].astype(np.int64)
    meta = {"name": name or Path(path).stem, "feature_count": table.shape[1] - 1}
    return Dataset(table[:, 1:].astype(np.float64), labels, meta)
