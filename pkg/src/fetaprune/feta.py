"""DCA outer loop for layerwise pruning.

Every outer iteration replaces the concave part ``-h`` by its tangent at the
current weights and hands the resulting convex problem

    min_U  (g(U) - <U, grad_h(U_k)>) / m + lam * Omega(U)

to the accelerated proximal SVRG solver. The loss is averaged over the
``m`` captured samples so that ``lam`` and the step size do not depend on
how many samples were captured.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import DimensionError, DivergenceError, ValidationError, as_matrix, svd
from .objective import (
    EXACT_RELU, LayerData, SmoothReluParams, g_value, grad_g, grad_h, h_value,
    input_transpose_times, layer_mse, softplus, softplus_grad)
from .regularizers import Regularizer
from .solver import SmoothOracle, SolverParams, solve

log = logging.getLogger(__name__)

ZERO_SNAP = 1e-12
RANK_TOL = 1e-10


@dataclass(frozen=True)
class PruneConfig:
    reg: Regularizer = Regularizer("l1", 0.0)
    smooth: SmoothReluParams = SmoothReluParams()
    outer_iters: int = 10
    solver: SolverParams = SolverParams()
    convergence_tol: float = 1e-4
    keep_history: bool = False

    def __post_init__(self):
        if self.outer_iters < 1:
            raise ValidationError("outer_iters must be >= 1")
        if not self.convergence_tol > 0:
            raise ValidationError("convergence_tol must be positive")

    def with_lambda(self, lam: float) -> "PruneConfig":
        return dataclasses.replace(self, reg=dataclasses.replace(self.reg, lam=lam))


@dataclass
class PruneResult:
    weights: np.ndarray
    objective_trace: list
    achieved_sparsity: float
    layer_mse: float
    iterations_used: int
    converged: bool
    rank: Optional[int] = None
    history: list = field(default_factory=list)
    etas: list = field(default_factory=list)


def objective(u, data: LayerData, cfg: PruneConfig) -> float:
    """Sample-averaged DC objective ``(g - h) / m + lam * Omega``."""
    return (g_value(u, data, cfg.smooth) - h_value(u, data, cfg.smooth)) / data.m \
        + cfg.reg.penalty(u)


def linearized_objective(u, u_k, data: LayerData, cfg: PruneConfig) -> float:
    """Convex majorant of ``objective`` built from the tangent of h at ``u_k``."""
    c = grad_h(u_k, data, cfg.smooth)
    h_k = h_value(u_k, data, cfg.smooth)
    lin = h_k + np.sum((u - u_k) * c)
    return (g_value(u, data, cfg.smooth) - lin) / data.m + cfg.reg.penalty(u)


def subproblem_oracle(data: LayerData, c: np.ndarray, p: SmoothReluParams) -> SmoothOracle:
    """Oracle for ``(g(U) - <U, C>) / m`` with cheap minibatch gradients."""
    a, b = data.inputs, data.outputs
    m = data.m
    neg = np.minimum(b, 0.0)
    c_over_m = c / m

    def batch_grad(u, rows):
        if len(rows) == m:
            # full batch: skip the row gather (rows is then arange(m))
            ar, nr = a, neg
        else:
            ar, nr = a[rows], neg[rows]
        z = ar @ u
        coeff = 2.0 * softplus_grad(z, p) * (softplus(z, p) - nr)
        return input_transpose_times(ar, coeff)

    def full(u):
        return grad_g(u, data, p) / m - c_over_m

    def minibatch(u, idx):
        return batch_grad(u, idx) / len(idx) - c_over_m

    def value(u):
        return (g_value(u, data, p) - np.sum(u * c)) / m

    return SmoothOracle(full, minibatch, m, value)


def snap_zeros(u, tol: float = ZERO_SNAP) -> np.ndarray:
    out = np.array(u, dtype=np.float64)
    out[np.abs(out) < tol] = 0.0
    return out


def effective_rank(w, tol: float = RANK_TOL) -> int:
    s = svd(w).singular_values
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s >= tol * s[0]))


def achieved_sparsity(u, reg: Regularizer) -> float:
    """Fraction of exact zeros in the penalized block.

    For the nuclear norm this is instead the fraction of singular values that
    were zeroed, ``1 - rank / min(d1, d2)``.
    """
    n = u.shape[0] - reg.unpenalized_rows
    w = u[:n]
    if w.size == 0:
        return 0.0
    if reg.kind == "nuclear":
        return 1.0 - effective_rank(w) / min(w.shape)
    return float(np.count_nonzero(w == 0.0)) / w.size


def feta_prune(data: LayerData, init, cfg: PruneConfig = PruneConfig()) -> PruneResult:
    u = as_matrix(init, "init").copy()
    if u.shape != (data.d1, data.d2):
        raise DimensionError(
            f"init has shape {u.shape}, layer data needs ({data.d1}, {data.d2})")
    trace, history, etas = [], [], []
    converged = False
    k = 0
    for k in range(1, cfg.outer_iters + 1):
        c = grad_h(u, data, cfg.smooth)
        oracle = subproblem_oracle(data, c, cfg.smooth)
        params = dataclasses.replace(cfg.solver, seed=cfg.solver.seed + k - 1)
        try:
            res = solve(oracle, cfg.reg, u, params)
        except DivergenceError as err:
            err.trace = trace
            raise
        u_next = res.x
        etas.append(res.eta)
        trace.append(objective(u_next, data, cfg))
        if cfg.keep_history:
            history.append(u_next.copy())
        change = np.linalg.norm(u_next - u) / max(np.linalg.norm(u), 1e-12)
        u = u_next
        log.debug("outer %d: f=%.6g change=%.3g eta=%g", k, trace[-1], change, res.eta)
        if change < cfg.convergence_tol:
            converged = True
            break
    if cfg.reg.kind == "l1":
        n = u.shape[0] - cfg.reg.unpenalized_rows
        u[:n] = snap_zeros(u[:n])
    rank = None
    if cfg.reg.kind == "nuclear":
        rank = effective_rank(u[:u.shape[0] - cfg.reg.unpenalized_rows])
    return PruneResult(
        weights=u,
        objective_trace=trace,
        achieved_sparsity=achieved_sparsity(u, cfg.reg),
        layer_mse=layer_mse(u, data, EXACT_RELU),
        iterations_used=k,
        converged=converged,
        rank=rank,
        history=history,
        etas=etas,
    )


def sparsity_for_lambda_sweep(data: LayerData, init, cfg: PruneConfig, lambdas) -> list:
    """Independent prune runs (same seed) for each lambda, sorted by lambda."""
    return [(lam, feta_prune(data, init, cfg.with_lambda(lam))) for lam in sorted(lambdas)]


def feta_prune_to_sparsity(data: LayerData, init, cfg: PruneConfig, target: float,
                           tol: float = 0.01, max_iter: int = 20,
                           lam_range=(1e-5, 10.0)):
    """Bisect ``log(lambda)`` until the achieved sparsity is within ``tol`` of
    ``target``.

    Returns ``(lambda, result)`` for the first run inside the tolerance, or
    for the closest run seen when ``max_iter`` runs are exhausted.
    """
    if not 0.0 <= target <= 1.0:
        raise ValidationError("target sparsity must lie in [0, 1]")
    lo, hi = np.log(lam_range[0]), np.log(lam_range[1])
    best = None
    for _ in range(max_iter):
        lam = float(np.exp(0.5 * (lo + hi)))
        res = feta_prune(data, init, cfg.with_lambda(lam))
        gap = res.achieved_sparsity - target
        if best is None or abs(gap) < abs(best[1].achieved_sparsity - target):
            best = (lam, res)
        if abs(gap) <= tol:
            return lam, res
        if gap < 0:
            lo = np.log(lam)
        else:
            hi = np.log(lam)
    log.warning("sparsity target %.3f not reached; closest %.3f at lambda=%.4g",
                target, best[1].achieved_sparsity, best[0])
    return best
