"""Minimal dense feedforward network runtime.

Layers store ``W`` as ``d_in x d_out`` so a batch propagates as
``Z @ W + bias``. Hidden layers use ReLU; the last layer is linear and
softmax only appears inside the training loss.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, softmax

from .numerics import (
    DimensionError, DivergenceError, ValidationError, as_matrix, make_rng, spectral_norm)
from .objective import LayerData

RELU = "relu"
LINEAR = "linear"
_ACT_CODES = {LINEAR: 0, RELU: 1}
_CODE_ACTS = {v: k for k, v in _ACT_CODES.items()}
MAGIC = b"FETA"
VERSION = 1


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        w = as_matrix(self.weights, "weights")
        b = np.asarray(self.bias, dtype=np.float64).ravel()
        if b.shape[0] != w.shape[1]:
            raise DimensionError(f"bias length {b.shape[0]} != d_out {w.shape[1]}")
        if self.activation not in _ACT_CODES:
            raise ValidationError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_in(self) -> int:
        return self.weights.shape[0]

    @property
    def d_out(self) -> int:
        return self.weights.shape[1]

    def __call__(self, z):
        out = z @ self.weights + self.bias
        return np.maximum(out, 0.0) if self.activation == RELU else out


@dataclass(frozen=True)
class Network:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("network needs at least one layer")
        for i, (a, b) in enumerate(zip(layers, layers[1:])):
            if a.d_out != b.d_in:
                raise DimensionError(f"layer {i} outputs {a.d_out} but layer {i + 1} "
                                     f"expects {b.d_in}")
        if layers[-1].activation != LINEAR:
            raise ValidationError("last layer must be linear")
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n_classes(self) -> int:
        return self.layers[-1].d_out

    def __eq__(self, other):
        if not isinstance(other, Network) or self.depth != other.depth:
            return False
        return all(a.activation == b.activation and np.array_equal(a.weights, b.weights)
                   and np.array_equal(a.bias, b.bias)
                   for a, b in zip(self.layers, other.layers))

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64).ravel()
        if x.ndim != 2:
            raise DimensionError("inputs must be 2-D")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(f"{x.shape[0]} inputs but {y.shape[0]} labels")
        if self.n_classes < 2:
            raise ValidationError("need at least two classes")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValidationError("labels out of range")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes)


def init_mlp(sizes, seed: int = 0) -> Network:
    """He-initialized ReLU MLP with a linear head, e.g. ``sizes=[N, 128, 64, 10]``."""
    rng = make_rng(seed)
    layers = []
    for i, (d_in, d_out) in enumerate(zip(sizes, sizes[1:])):
        w = rng.standard_normal((d_in, d_out)) * np.sqrt(2.0 / d_in)
        act = LINEAR if i == len(sizes) - 2 else RELU
        layers.append(Layer(w, np.zeros(d_out), act))
    return Network(tuple(layers))


def activations(net: Network, x) -> list:
    """``[z^0, z^1, ..., z^L]`` for a batch of inputs."""
    z = np.asarray(x, dtype=np.float64)
    out = [z]
    for layer in net.layers:
        z = layer(z)
        out.append(z)
    return out


def forward_batch(net: Network, x) -> np.ndarray:
    return activations(net, np.atleast_2d(x))[-1]


def forward(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != net.layers[0].d_in:
        raise DimensionError(f"input length {x.shape[0]} != {net.layers[0].d_in}")
    return forward_batch(net, x[None, :])[0]


def predict_batch(net: Network, x) -> np.ndarray:
    # argmax picks the lowest index on ties
    return np.argmax(forward_batch(net, x), axis=1)


def predict(net: Network, x) -> int:
    return int(np.argmax(forward(net, x)))


def accuracy(net: Network, data: Dataset) -> float:
    if len(data) == 0:
        raise ValidationError("empty dataset")
    return float(np.mean(predict_batch(net, data.inputs) == data.labels))


def capture_layer_io(net: Network, data: Dataset, layer_index: int) -> LayerData:
    """Inputs and post-activation outputs of one layer over a dataset."""
    if not 0 <= layer_index < net.depth:
        raise IndexError(f"layer index {layer_index} out of range [0, {net.depth})")
    zs = activations(net, data.inputs)
    return LayerData(zs[layer_index], zs[layer_index + 1])


def folded_weights(layer: Layer) -> np.ndarray:
    """``W`` with the bias appended as an extra last row."""
    return np.vstack([layer.weights, layer.bias[None, :]])


def replace_layer(net: Network, layer_index: int, weights, bias=None) -> Network:
    """Copy of ``net`` with new weights (and optionally bias) at one layer."""
    if not 0 <= layer_index < net.depth:
        raise IndexError(f"layer index {layer_index} out of range [0, {net.depth})")
    old = net.layers[layer_index]
    w = as_matrix(weights, "weights")
    if w.shape != old.weights.shape:
        raise DimensionError(f"replacement shape {w.shape} != {old.weights.shape}")
    new = Layer(w.copy(), old.bias.copy() if bias is None else bias, old.activation)
    layers = list(net.layers)
    layers[layer_index] = new
    return Network(tuple(layers))


def replace_layer_folded(net: Network, layer_index: int, folded) -> Network:
    folded = as_matrix(folded, "folded weights")
    return replace_layer(net, layer_index, folded[:-1], folded[-1])


def cross_entropy(net: Network, data: Dataset) -> float:
    logits = forward_batch(net, data.inputs)
    return float(-np.mean(log_softmax(logits, axis=1)[np.arange(len(data)), data.labels]))


def train_sgd(net: Network, data: Dataset, epochs: int, lr: float, seed: int = 0,
              batch_size: int = 32) -> Network:
    """Minibatch SGD on softmax cross-entropy; returns a new network."""
    if epochs < 0 or lr < 0:
        raise ValidationError("epochs and lr must be nonnegative")
    rng = make_rng(seed)
    ws = [l.weights.copy() for l in net.layers]
    bs = [l.bias.copy() for l in net.layers]
    acts = [l.activation for l in net.layers]
    m = len(data)
    onehot = np.eye(net.n_classes)[data.labels]
    for epoch in range(epochs):
        order = rng.permutation(m)
        for start in range(0, m, batch_size):
            idx = order[start:start + batch_size]
            zs = [data.inputs[idx]]
            for w, b, act in zip(ws, bs, acts):
                out = zs[-1] @ w + b
                zs.append(np.maximum(out, 0.0) if act == RELU else out)
            delta = (softmax(zs[-1], axis=1) - onehot[idx]) / len(idx)
            for i in range(len(ws) - 1, -1, -1):
                if acts[i] == RELU:
                    delta = delta * (zs[i + 1] > 0)
                gw = zs[i].T @ delta
                gb = delta.sum(axis=0)
                if i > 0:
                    delta = delta @ ws[i].T
                ws[i] -= lr * gw
                bs[i] -= lr * gb
        if not all(np.all(np.isfinite(w)) for w in ws):
            raise DivergenceError(f"training diverged in epoch {epoch}")
    trained = Network(tuple(Layer(w, b, a) for w, b, a in zip(ws, bs, acts)))
    loss = cross_entropy(trained, data) if m else 0.0
    if not np.isfinite(loss):
        raise DivergenceError("non-finite training loss", trained)
    return trained


def spectral_norms(net: Network) -> list:
    return [spectral_norm(l.weights) for l in net.layers]


def to_bytes(net: Network) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<BI", VERSION, net.depth))
    for layer in net.layers:
        buf.write(struct.pack("<IIB", layer.d_in, layer.d_out, _ACT_CODES[layer.activation]))
    for layer in net.layers:
        buf.write(layer.weights.astype("<f8").tobytes(order="C"))
        buf.write(layer.bias.astype("<f8").tobytes())
    return buf.getvalue()


def from_bytes(raw: bytes) -> Network:
    if len(raw) < 9 or raw[:4] != MAGIC:
        raise ModelFormatError("not a FETA model file (bad magic)")
    version, count = struct.unpack_from("<BI", raw, 4)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    pos = 9
    header = []
    for _ in range(count):
        if pos + 9 > len(raw):
            raise ModelFormatError("truncated layer header")
        d_in, d_out, code = struct.unpack_from("<IIB", raw, pos)
        pos += 9
        if code not in _CODE_ACTS:
            raise ModelFormatError(f"unknown activation code {code}")
        header.append((d_in, d_out, _CODE_ACTS[code]))
    layers = []
    for d_in, d_out, act in header:
        need = 8 * (d_in * d_out + d_out)
        if pos + need > len(raw):
            raise ModelFormatError("truncated weight payload")
        w = np.frombuffer(raw, "<f8", d_in * d_out, pos).reshape(d_in, d_out)
        pos += 8 * d_in * d_out
        b = np.frombuffer(raw, "<f8", d_out, pos)
        pos += 8 * d_out
        layers.append(Layer(w.astype(np.float64), b.astype(np.float64), act))
    if pos != len(raw):
        raise ModelFormatError(f"{len(raw) - pos} trailing bytes after payload")
    try:
        return Network(tuple(layers))
    except (DimensionError, ValidationError) as err:
        raise ModelFormatError(str(err)) from None


def save_model(net: Network, path) -> None:
    Path(path).write_bytes(to_bytes(net))


def load_model(path) -> Network:
    return from_bytes(Path(path).read_bytes())
