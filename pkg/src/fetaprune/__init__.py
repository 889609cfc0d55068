"""Post-training pruning of dense layers by DC programming, with baselines
and margin-based generalization bounds."""

from .numerics import DimensionError, DivergenceError, ValidationError
from .objective import LayerData, SmoothReluParams
from .regularizers import Regularizer
from .solver import SolverParams, acc_prox_svrg
from .feta import PruneConfig, PruneResult, feta_prune, sparsity_for_lambda_sweep
from .network import Dataset, Network

__all__ = [
    "DimensionError", "DivergenceError", "ValidationError", "LayerData",
    "SmoothReluParams", "Regularizer", "SolverParams", "acc_prox_svrg", "PruneConfig",
    "PruneResult", "feta_prune", "sparsity_for_lambda_sweep", "Dataset", "Network",
]
