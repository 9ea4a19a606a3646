"""MNIST softmax pipeline: IDX ingestion, full-precision training, and
k-bit quantized inference through the rounding modes of the matmul
engine.

The quantized path rounds only the multiplication operands.  Weights
are pre-scaled into [-1, 1] (argmax is invariant to the positive
rescale), inputs stay in [0, 1], and both map through the affine
(-1, 1) -> grid scale, so pixel values deliberately use only the upper
half of the quantizer levels.  Bias addition and accumulation are full
precision.
"""

from __future__ import annotations

import csv
import gzip
import os
import struct
import urllib.request
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .linalg import MATMUL_MODES, QuantMatmulConfig, matmul_quantized
from .rng import substream
from .validation import check_matrix

__all__ = [
    "IdxError",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxCountMismatchError",
    "TrainingError",
    "Dataset",
    "read_idx",
    "load_idx",
    "MNIST_FILES",
    "find_mnist",
    "download_mnist",
    "ModelWeights",
    "save_weights",
    "load_weights",
    "save_weights_text",
    "load_weights_text",
    "train_softmax",
    "SoftmaxRegression",
    "forward_full",
    "scale_for_quantization",
    "infer_quantized",
    "AccuracyStats",
    "MNIST_CSV_HEADER",
    "run_mnist_experiment",
    "write_mnist_csv",
]


class IdxError(Exception):
    """Base class for IDX ingestion failures."""


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


class TrainingError(Exception):
    pass


_IDX_IMAGES_MAGIC = 2051
_IDX_LABELS_MAGIC = 2049


@dataclass(frozen=True)
class Dataset:
    """Flattened image rows in [0, 1] with integer class labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 2:
            raise ValueError("images must be 2-D (n_samples, n_features)")
        if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
            raise IdxCountMismatchError(
                f"{images.shape[0]} images but {labels.shape[0]} labels"
            )
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                return gz.read()
        return fh.read()


def read_idx(path) -> np.ndarray:
    """Parse one IDX file (gzip transparent) into a uint8 ndarray."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: shorter than the 4-byte magic")
    zero, dtype_code, ndim = raw[0] << 8 | raw[1], raw[2], raw[3]
    if zero != 0 or dtype_code != 0x08:
        raise IdxMagicError(
            f"{path}: bad magic {raw[:4].hex()} (want unsigned-byte IDX)"
        )
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxTruncatedError(f"{path}: header cut off at {len(raw)} bytes")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    count = int(np.prod(dims, dtype=np.int64))
    body = raw[header_len:]
    if len(body) < count:
        raise IdxTruncatedError(
            f"{path}: payload holds {len(body)} bytes, header promises {count}"
        )
    if len(body) > count:
        raise IdxTruncatedError(f"{path}: {len(body) - count} trailing bytes")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Load an image/label IDX pair; pixels are rescaled to [0, 1]."""
    images = read_idx(images_path)
    if images.ndim != 3:
        raise IdxMagicError(
            f"{images_path}: expected 3-D image tensor, got {images.ndim}-D"
        )
    labels = read_idx(labels_path)
    if labels.ndim != 1:
        raise IdxMagicError(f"{labels_path}: expected 1-D labels, got {labels.ndim}-D")
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(images=flat, labels=labels.astype(np.int64))


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
_DEFAULT_MNIST_URL = "https://storage.googleapis.com/cvdf-datasets/mnist/"


def _resolve_idx(directory, stem):
    for name in (stem, stem + ".gz"):
        path = os.path.join(directory, name)
        if os.path.isfile(path):
            return path
    return None


def find_mnist(directory) -> dict | None:
    """Return {'train': Dataset-paths, 'test': ...} if all files exist."""
    found = {}
    for split, (img_stem, lab_stem) in MNIST_FILES.items():
        img = _resolve_idx(directory, img_stem)
        lab = _resolve_idx(directory, lab_stem)
        if img is None or lab is None:
            return None
        found[split] = (img, lab)
    return found


def download_mnist(directory, base_url=None) -> dict:
    """Fetch the four MNIST files into ``directory``.

    ``base_url`` (or the DITHERCOMP_MNIST_URL environment variable)
    overrides the default mirror; it must serve the standard
    *-ubyte.gz file names.
    """
    base = base_url or os.environ.get("DITHERCOMP_MNIST_URL") or _DEFAULT_MNIST_URL
    if not base.endswith("/"):
        base += "/"
    os.makedirs(directory, exist_ok=True)
    for img_stem, lab_stem in MNIST_FILES.values():
        for stem in (img_stem, lab_stem):
            dest = os.path.join(directory, stem + ".gz")
            if os.path.isfile(dest):
                continue
            with urllib.request.urlopen(base + stem + ".gz") as resp:
                data = resp.read()
            with open(dest, "wb") as fh:
                fh.write(data)
    paths = find_mnist(directory)
    if paths is None:
        raise IdxError(f"download into {directory} did not produce a full dataset")
    return paths


ACTIVATIONS = ("softmax", "relu-then-next")


@dataclass(frozen=True)
class ModelWeights:
    """Dense layers as (weight matrix, bias vector) pairs.

    Hidden layers apply ReLU when activation is "relu-then-next"; the
    final layer is always read through softmax/argmax.
    """

    layers: tuple
    activation: str = "softmax"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        layers = []
        prev_out = None
        for idx, (w, b) in enumerate(self.layers):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {idx}: weight/bias shapes {w.shape} {b.shape}")
            if prev_out is not None and w.shape[0] != prev_out:
                raise ValueError(f"layer {idx}: input dim {w.shape[0]} != {prev_out}")
            prev_out = w.shape[1]
            layers.append((w, b))
        object.__setattr__(self, "layers", tuple(layers))


_WEIGHTS_MAGIC = b"DCWB"
_WEIGHTS_VERSION = 1


def save_weights(model: ModelWeights, path) -> None:
    """Binary weight file: magic, version, layer count, explicit dims."""
    with open(path, "wb") as fh:
        fh.write(_WEIGHTS_MAGIC)
        fh.write(
            struct.pack(
                ">IIB",
                _WEIGHTS_VERSION,
                len(model.layers),
                ACTIVATIONS.index(model.activation),
            )
        )
        for w, b in model.layers:
            fh.write(struct.pack(">II", w.shape[0], w.shape[1]))
            fh.write(np.ascontiguousarray(w, dtype=">f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype=">f8").tobytes())


def load_weights(path) -> ModelWeights:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _WEIGHTS_MAGIC:
        raise ValueError(f"{path}: not a weight file (magic {raw[:4]!r})")
    version, n_layers, act_code = struct.unpack(">IIB", raw[4:13])
    if version != _WEIGHTS_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    off = 13
    layers = []
    for _ in range(n_layers):
        rows, cols = struct.unpack(">II", raw[off : off + 8])
        off += 8
        w = np.frombuffer(raw, dtype=">f8", count=rows * cols, offset=off)
        off += 8 * rows * cols
        b = np.frombuffer(raw, dtype=">f8", count=cols, offset=off)
        off += 8 * cols
        layers.append((w.reshape(rows, cols).astype(np.float64), b.astype(np.float64)))
    return ModelWeights(layers=tuple(layers), activation=ACTIVATIONS[act_code])


def save_weights_text(model: ModelWeights, path) -> None:
    """Plain-text interchange variant of the weight file."""
    with open(path, "w") as fh:
        fh.write(f"dithercomp-weights {_WEIGHTS_VERSION}\n")
        fh.write(f"activation {model.activation}\n")
        fh.write(f"layers {len(model.layers)}\n")
        for idx, (w, b) in enumerate(model.layers):
            fh.write(f"layer {idx} {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
            fh.write("bias " + " ".join(repr(float(v)) for v in b) + "\n")


def load_weights_text(path) -> ModelWeights:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("dithercomp-weights "):
        raise ValueError(f"{path}: not a text weight file")
    if int(lines[0].split()[1]) != _WEIGHTS_VERSION:
        raise ValueError(f"{path}: unsupported version")
    activation = lines[1].split()[1]
    n_layers = int(lines[2].split()[1])
    pos = 3
    layers = []
    for _ in range(n_layers):
        _, _, rows, cols = lines[pos].split()
        rows, cols = int(rows), int(cols)
        pos += 1
        w = np.array(
            [[float(v) for v in lines[pos + i].split()] for i in range(rows)]
        )
        pos += rows
        b = np.array([float(v) for v in lines[pos].split()[1:]])
        pos += 1
        layers.append((w, b))
    return ModelWeights(layers=tuple(layers), activation=activation)


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def train_softmax(
    train: Dataset,
    epochs: int = 30,
    lr: float = 0.5,
    seed: int = 0,
    batch_size: int = 128,
    momentum: float = 0.9,
    lr_decay: float = 0.95,
) -> ModelWeights:
    """Minibatch SGD with momentum on the softmax cross-entropy.

    The problem is convex, so zero initialization is fine; all
    shuffling comes from ``seed`` and training is deterministic.
    """
    if len(train) == 0:
        raise ValueError("training dataset is empty")
    x = train.images
    n, d = x.shape
    classes = int(train.labels.max()) + 1
    y = np.zeros((n, classes))
    y[np.arange(n), train.labels] = 1.0
    w = np.zeros((d, classes))
    b = np.zeros(classes)
    vw = np.zeros_like(w)
    vb = np.zeros_like(b)
    for epoch in range(epochs):
        order = substream(seed, epoch).permutation(n)
        step = lr * lr_decay**epoch
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x[idx], y[idx]
            probs = _softmax(xb @ w + b)
            grad = probs - yb
            gw = xb.T @ grad / len(idx)
            gb = grad.mean(axis=0)
            vw = momentum * vw - step * gw
            vb = momentum * vb - step * gb
            w += vw
            b += vb
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise TrainingError(f"non-finite weights at epoch {epoch}")
    return ModelWeights(layers=((w, b),), activation="softmax")


class SoftmaxRegression(BaseEstimator, ClassifierMixin):
    """Estimator facade over train_softmax / forward_full."""

    def __init__(self, epochs: int = 30, lr: float = 0.5, seed: int = 0,
                 batch_size: int = 128, momentum: float = 0.9, lr_decay: float = 0.95):
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.batch_size = batch_size
        self.momentum = momentum
        self.lr_decay = lr_decay

    def fit(self, X, y):
        X = check_matrix(X, "X")
        data = Dataset(images=X, labels=np.asarray(y))
        self.model_ = train_softmax(
            data,
            epochs=self.epochs,
            lr=self.lr,
            seed=self.seed,
            batch_size=self.batch_size,
            momentum=self.momentum,
            lr_decay=self.lr_decay,
        )
        self.classes_ = np.arange(self.model_.layers[-1][0].shape[1])
        return self

    def decision_function(self, X):
        return forward_full(self.model_, check_matrix(X, "X"))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


def forward_full(model: ModelWeights, x) -> np.ndarray:
    """Full-precision logits for a batch of input rows."""
    h = check_matrix(x, "x")
    last = len(model.layers) - 1
    for idx, (w, b) in enumerate(model.layers):
        h = h @ w + b
        if idx != last:
            h = np.maximum(h, 0.0)
    return h


def scale_for_quantization(model: ModelWeights) -> ModelWeights:
    """Rescale each layer's weights into [-1, 1].

    Bias shrinks by the same factor, and ReLU commutes with positive
    scaling, so predicted labels are unchanged.
    """
    layers = []
    for w, b in model.layers:
        s = max(float(np.abs(w).max()), 1e-12)
        layers.append((w / s, b / s))
    return ModelWeights(layers=tuple(layers), activation=model.activation)


@dataclass(frozen=True)
class AccuracyStats:
    """Accuracy mean/variance of quantized inference over trials."""

    k: int
    mode: str
    variant: str
    trials: int
    mean_acc: float
    var_acc: float
    seed: int
    accuracies: tuple

    def to_csv_row(self) -> list:
        return [
            self.k,
            self.mode,
            self.variant,
            self.trials,
            repr(self.mean_acc),
            repr(self.var_acc),
            self.seed,
        ]


def infer_quantized(
    model: ModelWeights,
    test: Dataset,
    k: int,
    mode: str,
    variant: str = "per-partial",
    trials: int = 30,
    seed: int = 0,
) -> AccuracyStats:
    """Classify with every layer product quantized to k bits.

    Inputs in [0, 1] and weights in [-1, 1] share the (-1, 1) -> grid
    scale.  Deterministic mode collapses to a single trial.  For
    multi-layer weights each hidden activation is rescaled into [0, 1]
    and the running factor is divided out of later biases, which keeps
    every operand on the same scale without moving the argmax; the
    single-layer path never hits it.
    """
    scaled = scale_for_quantization(model)
    trials_eff = 1 if mode == "deterministic" else int(trials)
    accs = np.empty(trials_eff)
    last = len(scaled.layers) - 1
    cfg = QuantMatmulConfig(k=k, mode=mode, variant=variant, scale=(-1.0, 1.0))
    for trial in range(trials_eff):
        gen = substream(seed, trial)
        h = test.images
        carry = 1.0
        for idx, (w, b) in enumerate(scaled.layers):
            z = matmul_quantized(h, w, cfg, rng=gen) + b / carry
            if idx != last:
                z = np.maximum(z, 0.0)
                lim = max(1.0, float(z.max()))
                h = z / lim
                carry *= lim
            else:
                h = z
        preds = np.argmax(h, axis=1)
        accs[trial] = float(np.mean(preds == test.labels))
    return AccuracyStats(
        k=int(k),
        mode=mode,
        variant=variant,
        trials=trials_eff,
        mean_acc=float(accs.mean()),
        var_acc=float(accs.var(ddof=1)) if trials_eff > 1 else 0.0,
        seed=int(seed),
        accuracies=tuple(accs.tolist()),
    )


MNIST_CSV_HEADER = "k,mode,variant,trials,mean_acc,var_acc,seed"


def run_mnist_experiment(
    model: ModelWeights,
    test: Dataset,
    k_list,
    modes=MATMUL_MODES,
    variants=("per-partial",),
    trials: int = 30,
    seed: int = 0,
) -> list[AccuracyStats]:
    """Accuracy sweep over (k, mode, variant), plus a full-precision row.

    The reference row reports k=0, mode "full-precision", variant
    "none".
    """
    logits = forward_full(model, test.images)
    baseline = float(np.mean(np.argmax(logits, axis=1) == test.labels))
    records = [
        AccuracyStats(
            k=0,
            mode="full-precision",
            variant="none",
            trials=1,
            mean_acc=baseline,
            var_acc=0.0,
            seed=int(seed),
            accuracies=(baseline,),
        )
    ]
    for k in k_list:
        for variant in variants:
            for mode in modes:
                records.append(
                    infer_quantized(
                        model, test, k=k, mode=mode, variant=variant,
                        trials=trials, seed=seed,
                    )
                )
    return records


def write_mnist_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MNIST_CSV_HEADER.split(","))
        for rec in records:
            writer.writerow(rec.to_csv_row())
