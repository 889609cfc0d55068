"""Synthetic data generators and an IDX (MNIST-format) loader."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import Dataset
from .numerics import ValidationError, make_rng
from .objective import LayerData

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049


class IdxError(ValueError):
    pass


class IdxFormatError(IdxError):
    """Bad magic number or malformed header."""


class IdxTruncatedError(IdxError):
    """Payload shorter than the header promises."""


class IdxCountMismatchError(IdxError):
    """Image and label files hold different numbers of items."""


@dataclass(frozen=True)
class ToySpec:
    d1: int
    d2: int
    N: int
    seed: int = 0

    def __post_init__(self):
        if min(self.d1, self.d2, self.N) < 1:
            raise ValidationError("d1, d2 and N must be >= 1")


def toy_gaussian(spec: ToySpec, nonnegative: bool = False) -> LayerData:
    """I.i.d. standard normal layer inputs (N x d1) and outputs (N x d2).

    Outputs are signed unless ``nonnegative`` is set, in which case their
    absolute values are used.
    """
    rng = make_rng(spec.seed)
    a = rng.standard_normal((spec.N, spec.d1))
    b = rng.standard_normal((spec.N, spec.d2))
    if nonnegative:
        b = np.abs(b)
    return LayerData(a, b)


def synth_blobs(classes: int, dim: int, per_class: int, spread: float, seed: int = 0,
                center_scale: float = 1.0, latent_dim: int | None = None,
                noise: float = 0.0) -> Dataset:
    """Gaussian blobs around standard-normal class centers.

    With ``latent_dim`` set, blobs are drawn in a ``latent_dim``-dimensional
    space and mapped into ``dim`` features by a fixed random linear map, so
    features are strongly correlated (as pixels are). ``noise`` adds
    isotropic Gaussian noise in feature space afterwards.
    """
    if per_class < 1:
        raise ValidationError("per_class must be >= 1")
    if classes < 2 or dim < 1:
        raise ValidationError("need classes >= 2 and dim >= 1")
    if spread < 0:
        raise ValidationError("spread must be nonnegative")
    rng = make_rng(seed)
    inner = dim if latent_dim is None else latent_dim
    centers = center_scale * rng.standard_normal((classes, inner))
    labels = np.repeat(np.arange(classes), per_class)
    x = centers[labels] + spread * rng.standard_normal((labels.size, inner))
    if latent_dim is not None:
        x = x @ (rng.standard_normal((inner, dim)) / np.sqrt(inner))
    if noise > 0:
        x = x + noise * rng.standard_normal(x.shape)
    order = rng.permutation(labels.size)
    return Dataset(x[order], labels[order], classes)


def train_test_split(data: Dataset, test_fraction: float, seed: int = 0):
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must lie in (0, 1)")
    order = make_rng(seed).permutation(len(data))
    n_test = int(round(test_fraction * len(data)))
    return data.subset(order[n_test:]), data.subset(order[:n_test])


def _read_header(raw: bytes, magic: int, ndim: int, what: str):
    if len(raw) < 4 * (ndim + 1):
        raise IdxFormatError(f"{what} file too short for an IDX header")
    got = struct.unpack_from(">I", raw, 0)[0]
    if got != magic:
        raise IdxFormatError(f"{what} file has magic {got}, expected {magic}")
    return struct.unpack_from(f">{ndim}I", raw, 4)


def read_idx_images(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    count, rows, cols = _read_header(raw, IDX_IMAGES_MAGIC, 3, "image")
    need = count * rows * cols
    payload = raw[16:]
    if len(payload) < need:
        raise IdxTruncatedError(f"image payload has {len(payload)} bytes, need {need}")
    return np.frombuffer(payload, np.uint8, need).reshape(count, rows * cols)


def read_idx_labels(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (count,) = _read_header(raw, IDX_LABELS_MAGIC, 1, "label")
    payload = raw[8:]
    if len(payload) < count:
        raise IdxTruncatedError(f"label payload has {len(payload)} bytes, need {count}")
    return np.frombuffer(payload, np.uint8, count).astype(np.int64)


def load_idx(images_path, labels_path, n_classes: int | None = None,
             limit: int | None = None) -> Dataset:
    """Images flattened row-major and scaled to [0, 1], with integer labels."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    if n_classes is None:
        n_classes = max(2, int(labels.max()) + 1 if labels.size else 2)
    return Dataset(images.astype(np.float64) / 255.0, labels, n_classes)
