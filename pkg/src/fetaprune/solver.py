"""Accelerated proximal SVRG for ``smooth(x) + reg(x)``.

Each epoch takes a full-gradient snapshot at the epoch's starting point and
then runs ``inner_steps`` minibatch steps along the variance-reduced
direction ``grad_mb(y) - grad_mb(snapshot) + full_grad(snapshot)``, each
followed by a prox step on the regularizer and a fixed-momentum
extrapolation. Momentum is reset at the start of every epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numerics import DimensionError, DivergenceError, ValidationError, make_rng
from .regularizers import Regularizer

DEFAULT_ETA = 1e-3
FALLBACK_ETA = 1e-4
DEFAULT_MOMENTUM = 0.95


@dataclass(frozen=True)
class SolverParams:
    epochs: int = 5
    inner_steps: Optional[int] = None  # None: ceil(m / minibatch)
    step_eta: float = DEFAULT_ETA
    momentum_beta: float = DEFAULT_MOMENTUM
    minibatch: int = 64
    seed: int = 0
    # Tried in order when the first epoch blows up the objective.
    fallback_etas: tuple = (FALLBACK_ETA,)
    increase_tolerance: float = 0.10

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.inner_steps is not None and self.inner_steps < 1:
            raise ValidationError("inner_steps must be >= 1")
        if self.minibatch < 1:
            raise ValidationError("minibatch must be >= 1")
        if not self.step_eta > 0:
            raise ValidationError("step_eta must be positive")
        if not 0.0 <= self.momentum_beta < 1.0:
            raise ValidationError("momentum_beta must lie in [0, 1)")

    def steps_for(self, m: int) -> int:
        if self.inner_steps is not None:
            return self.inner_steps
        return math.ceil(m / min(self.minibatch, m))


@dataclass
class SmoothOracle:
    """Gradient access to the smooth part of a composite objective.

    ``minibatch_gradient(x, idx)`` must be an unbiased estimate of
    ``full_gradient(x)`` that equals it when ``idx`` covers every sample.
    ``value`` is optional; when present it enables the step-size fallback
    and per-epoch objective tracking.
    """

    full_gradient: Callable[[np.ndarray], np.ndarray]
    minibatch_gradient: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sample_count: int
    value: Optional[Callable[[np.ndarray], float]] = None


@dataclass
class SolverResult:
    x: np.ndarray
    eta: float
    epoch_values: list = field(default_factory=list)
    steps: int = 0


def variance_reduced_direction(oracle: SmoothOracle, y, snapshot, snapshot_grad, idx):
    return (oracle.minibatch_gradient(y, idx)
            - oracle.minibatch_gradient(snapshot, idx) + snapshot_grad)


def _draw(rng, m, size):
    if size >= m:
        return np.arange(m)
    return rng.choice(m, size=size, replace=False)


class _Diverged(Exception):
    def __init__(self, last):
        self.last = last


def _epoch(oracle, reg, start, eta, beta, steps, batch, rng):
    snap_grad = oracle.full_gradient(start)
    if not np.all(np.isfinite(snap_grad)):
        raise _Diverged(start)
    x_prev = start
    y = start
    for _ in range(steps):
        idx = _draw(rng, oracle.sample_count, batch)
        u = variance_reduced_direction(oracle, y, start, snap_grad, idx)
        if not np.all(np.isfinite(u)):
            raise _Diverged(x_prev)
        x = reg.prox(y - eta * u, eta)
        y = x + beta * (x - x_prev)
        x_prev = x
    if not np.all(np.isfinite(x_prev)):
        raise _Diverged(start)
    return x_prev


def solve(oracle: SmoothOracle, reg: Regularizer, init, params: SolverParams) -> SolverResult:
    init = np.asarray(init, dtype=np.float64)
    probe = oracle.full_gradient(init)
    if probe.shape != init.shape:
        raise DimensionError(
            f"oracle gradient shape {probe.shape} != init shape {init.shape}")
    m = oracle.sample_count
    steps = params.steps_for(m)
    batch = min(params.minibatch, m)

    def composite(x):
        return oracle.value(x) + reg.penalty(x)

    etas = (params.step_eta,) + tuple(params.fallback_etas)
    f0 = composite(init) if oracle.value is not None else None
    for attempt, eta in enumerate(etas):
        last_chance = attempt == len(etas) - 1
        rng = make_rng(params.seed)
        values = []
        x = init
        try:
            x = _epoch(oracle, reg, init, eta, params.momentum_beta, steps, batch, rng)
        except _Diverged as err:
            if last_chance:
                raise DivergenceError(
                    f"non-finite gradient in first epoch (eta={eta})", err.last) from None
            continue
        if f0 is not None:
            f1 = composite(x)
            blew_up = not math.isfinite(f1) or f1 > f0 + params.increase_tolerance * abs(f0)
            if blew_up and not last_chance:
                continue
            values.append(f1)
        for _ in range(params.epochs - 1):
            try:
                x = _epoch(oracle, reg, x, eta, params.momentum_beta, steps, batch, rng)
            except _Diverged as err:
                raise DivergenceError(
                    f"non-finite gradient (eta={eta})", err.last, values) from None
            if f0 is not None:
                values.append(composite(x))
        return SolverResult(x, eta, values, params.epochs * steps)
    raise AssertionError("unreachable")


def acc_prox_svrg(oracle: SmoothOracle, reg: Regularizer, init, params: SolverParams) -> np.ndarray:
    """Run the solver and return only the final iterate."""
    return solve(oracle, reg, init, params).x
