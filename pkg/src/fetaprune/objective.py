"""DC decomposition of the layerwise pruning loss.

For one layer with captured inputs ``A`` (m x d1) and outputs ``B`` (m x d2)
the squared reconstruction loss ``sum_j ||rho(U^T a_j) - b_j||^2`` splits as
``g(U) - h(U)`` with both parts convex:

    g(U) = sum_{j,i} rho(z_ji)^2 + b_ji^2 - 2 b_ji rho(z_ji) [b_ji < 0]
    h(U) = sum_{j,i} 2 b_ji rho(z_ji) [b_ji >= 0]

where ``z = A @ U``. ``rho`` is the softplus ``log(1 + exp(beta x)) / beta``;
``beta = inf`` selects the exact rectifier, which is only used as a test
oracle for the decomposition identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .numerics import DimensionError, ValidationError, as_matrix

DEFAULT_BETA = 20.0


@dataclass(frozen=True)
class SmoothReluParams:
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError(f"softplus beta must be positive, got {self.beta}")

    @property
    def exact(self) -> bool:
        return math.isinf(self.beta)


EXACT_RELU = SmoothReluParams(math.inf)


@dataclass(frozen=True)
class LayerData:
    """Captured activations of one dense layer: inputs ``A`` and outputs ``B``."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.inputs, "inputs A")
        b = as_matrix(self.outputs, "outputs B")
        if a.shape[0] != b.shape[0]:
            raise DimensionError(
                f"A has {a.shape[0]} samples but B has {b.shape[0]}")
        object.__setattr__(self, "inputs", a)
        object.__setattr__(self, "outputs", b)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def d1(self) -> int:
        return self.inputs.shape[1]

    @property
    def d2(self) -> int:
        return self.outputs.shape[1]

    def subset(self, idx) -> "LayerData":
        return LayerData(self.inputs[idx], self.outputs[idx])

    def with_bias_column(self) -> "LayerData":
        """Append a constant-1 input coordinate so a bias folds into U."""
        ones = np.ones((self.m, 1))
        return LayerData(np.hstack([self.inputs, ones]), self.outputs)


def softplus(x, p: SmoothReluParams = SmoothReluParams()):
    x = np.asarray(x, dtype=np.float64)
    if p.exact:
        out = np.maximum(x, 0.0)
    else:
        out = np.maximum(x, 0.0) + np.log1p(np.exp(-p.beta * np.abs(x))) / p.beta
    return out if out.ndim else float(out)


def softplus_grad(x, p: SmoothReluParams = SmoothReluParams()):
    x = np.asarray(x, dtype=np.float64)
    if p.exact:
        out = (x > 0).astype(np.float64)
    else:
        out = expit(p.beta * x)
    return out if out.ndim else float(out)


def _check(u, data: LayerData) -> np.ndarray:
    u = as_matrix(u, "U")
    if u.shape != (data.d1, data.d2):
        raise DimensionError(
            f"U has shape {u.shape}, layer data needs ({data.d1}, {data.d2})")
    return u


def _pre_activation(u, data):
    return data.inputs @ u


def input_transpose_times(a, coeff):
    """``a.T @ coeff`` computed as ``(coeff.T @ a).T``, which streams the rows
    of a C-ordered ``a`` instead of striding through its columns."""
    return np.ascontiguousarray((coeff.T @ a).T)


def g_value(u, data: LayerData, p: SmoothReluParams = SmoothReluParams()) -> float:
    u = _check(u, data)
    b = data.outputs
    r = softplus(_pre_activation(u, data), p)
    neg = np.minimum(b, 0.0)
    return float(np.sum(r * r) + np.sum(b * b) - 2.0 * np.sum(neg * r))


def h_value(u, data: LayerData, p: SmoothReluParams = SmoothReluParams()) -> float:
    u = _check(u, data)
    pos = np.maximum(data.outputs, 0.0)
    return float(2.0 * np.sum(pos * softplus(_pre_activation(u, data), p)))


def grad_g(u, data: LayerData, p: SmoothReluParams = SmoothReluParams()) -> np.ndarray:
    u = _check(u, data)
    z = _pre_activation(u, data)
    neg = np.minimum(data.outputs, 0.0)
    coeff = 2.0 * softplus_grad(z, p) * (softplus(z, p) - neg)
    return input_transpose_times(data.inputs, coeff)


def grad_h(u, data: LayerData, p: SmoothReluParams = SmoothReluParams()) -> np.ndarray:
    u = _check(u, data)
    z = _pre_activation(u, data)
    pos = np.maximum(data.outputs, 0.0)
    return input_transpose_times(data.inputs, 2.0 * pos * softplus_grad(z, p))


def f_value(u, data: LayerData, p: SmoothReluParams = SmoothReluParams(),
            reg=None) -> float:
    """``g - h + penalty``: the summed loss plus the regularizer."""
    penalty = reg.penalty(u) if reg is not None else 0.0
    return g_value(u, data, p) - h_value(u, data, p) + penalty


def reconstruction_loss(u, data: LayerData, p: SmoothReluParams = EXACT_RELU) -> float:
    """``sum_j ||rho(U^T a_j) - b_j||^2`` evaluated directly."""
    u = _check(u, data)
    diff = softplus(_pre_activation(u, data), p) - data.outputs
    return float(np.sum(diff * diff))


def layer_mse(u, data: LayerData, p: SmoothReluParams = EXACT_RELU) -> float:
    """Mean over samples of the squared reconstruction error."""
    return reconstruction_loss(u, data, p) / data.m
