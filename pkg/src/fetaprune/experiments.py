"""Desk-scale experiment pipelines shared by the CLI, scripts and tests."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .baselines import prune_to_sparsity, rank_for_ratio, svd_compress
from .data import ToySpec, synth_blobs, toy_gaussian, train_test_split
from .feta import PruneConfig, PruneResult, feta_prune, feta_prune_to_sparsity
from .network import (
    RELU, Dataset, Network, accuracy, capture_layer_io, folded_weights, init_mlp,
    replace_layer, replace_layer_folded, train_sgd)
from .numerics import ValidationError
from .regularizers import Regularizer
from .solver import SolverParams

# Stand-in for the FC head of a small convnet on MNIST: ten classes living on a
# 10-dimensional latent space embedded in 100 correlated features.
REFERENCE_BLOBS = dict(classes=10, dim=100, per_class=400, spread=0.5,
                       latent_dim=10, noise=0.3)
REFERENCE_HIDDEN = (128, 64)
TRAIN_EPOCHS = 30
TRAIN_LR = 0.05


def reference_data(seed: int = 0, **overrides):
    """Train/test split (75/25) of the reference blob dataset."""
    params = {**REFERENCE_BLOBS, **overrides}
    return train_test_split(synth_blobs(seed=seed, **params), 0.25, seed=seed)


def train_reference(train: Dataset, seed: int = 0, hidden=REFERENCE_HIDDEN,
                    epochs: int = TRAIN_EPOCHS, lr: float = TRAIN_LR) -> Network:
    sizes = [train.inputs.shape[1], *hidden, train.n_classes]
    return train_sgd(init_mlp(sizes, seed), train, epochs, lr, seed)


def layer_problem(net: Network, data: Dataset, layer: int):
    """Captured layer data with a constant input column, and the folded weights."""
    if net.layers[layer].activation != RELU:
        raise ValidationError(f"layer {layer} is linear; FeTa prunes ReLU layers")
    return capture_layer_io(net, data, layer).with_bias_column(), \
        folded_weights(net.layers[layer])


def bias_exempt(cfg: PruneConfig) -> PruneConfig:
    return dataclasses.replace(cfg, reg=dataclasses.replace(cfg.reg, unpenalized_rows=1))


def feta_layer(net: Network, data: Dataset, layer: int, cfg: PruneConfig,
               target: float | None = None):
    """Prune one layer with FeTa; returns ``(pruned_net, lambda, result)``.

    With ``target`` set, lambda is bisected to reach that sparsity (or, for
    the nuclear norm, that fraction of zeroed singular values).
    """
    ld, init = layer_problem(net, data, layer)
    cfg = bias_exempt(cfg)
    if target is None:
        lam, res = cfg.reg.lam, feta_prune(ld, init, cfg)
    else:
        lam, res = feta_prune_to_sparsity(ld, init, cfg, target)
    return replace_layer_folded(net, layer, res.weights), lam, res


def threshold_layer(net: Network, layer: int, target: float):
    rep = prune_to_sparsity(net.layers[layer].weights, target)
    return replace_layer(net, layer, rep.weights_out), rep


def svd_layer(net: Network, layer: int, rank: int):
    rep = svd_compress(net.layers[layer].weights, rank)
    return replace_layer(net, layer, rep.weights_out), rep


def default_prune_config(reg: str = "l1", lam: float = 0.0, seed: int = 0,
                         **solver_overrides) -> PruneConfig:
    solver = dataclasses.replace(SolverParams(seed=seed), **solver_overrides)
    return PruneConfig(reg=Regularizer(reg, lam), solver=solver)


@dataclass
class BenchRow:
    d1: int
    d2: int
    n: int
    reps: int
    median_seconds: float
    slope: float


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x); nan for fewer than 2 points."""
    if len(xs) < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def bench_scaling(d1_list, d2: int = 10, n: int = 1000, seed: int = 0, reps: int = 3,
                  cfg: PruneConfig | None = None):
    """Median FeTa wall time on toy Gaussian layers of growing input size.

    The default config fixes all iteration counts (no early stop, no step
    fallback, small step) so every size does the same number of gradient
    evaluations.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    if cfg is None:
        cfg = PruneConfig(
            reg=Regularizer("l1", 0.1), outer_iters=3, convergence_tol=1e-300,
            solver=SolverParams(epochs=2, inner_steps=10, minibatch=n, step_eta=1e-5,
                                fallback_etas=(), seed=seed))
    medians = []
    for d1 in d1_list:
        data = toy_gaussian(ToySpec(d1, d2, n, seed))
        init = np.zeros((d1, d2))
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            feta_prune(data, init, cfg)
            times.append(time.perf_counter() - t0)
        medians.append(float(np.median(times)))
    slope = loglog_slope(list(d1_list), medians)
    return [BenchRow(d1, d2, n, reps, t, slope) for d1, t in zip(d1_list, medians)]
