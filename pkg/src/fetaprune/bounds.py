"""Margin-based generalization-error bounds for pruned networks.

Logarithms are natural throughout: ``log(2)`` in the manifold constant ``A``
and ``log(1/delta)`` in ``B``. A bound is *vacuous* when the pruning penalty
eats the whole margin; vacuous values are reported as ``inf``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .numerics import DimensionError, ValidationError, as_matrix, make_rng, spectral_norm
from .network import Dataset, Network, activations, forward_batch, predict_batch, spectral_norms

VACUOUS = math.inf
SQRT2 = math.sqrt(2.0)
MAX_PAIRS = 10**8


@dataclass(frozen=True)
class ManifoldParams:
    C_M: float
    k: float
    N_y: int
    m: int
    delta: float = 0.05

    def __post_init__(self):
        if not (self.C_M > 0 and self.k > 0 and self.N_y > 0 and self.m > 0):
            raise ValidationError("C_M, k, N_y and m must be positive")
        if not 0 < self.delta < 1:
            raise ValidationError("delta must lie in (0, 1)")

    @property
    def A(self) -> float:
        return math.sqrt(math.log(2.0) * self.N_y * 2.0 ** (self.k + 1)
                         * self.C_M ** self.k / self.m)

    @property
    def B(self) -> float:
        return math.sqrt(2.0 * math.log(1.0 / self.delta) / self.m)


@dataclass
class GEBoundReport:
    kind: str
    gamma: float
    penalty: float
    bound_value: float
    A_const: float
    B_const: float
    score_min: float = math.nan

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.bound_value)

    def csv_row(self) -> dict:
        row = asdict(self)
        row["bound_value"] = "VACUOUS" if self.vacuous else repr(self.bound_value)
        row["vacuous"] = int(self.vacuous)
        return row


REPORT_COLUMNS = ("kind", "score_min", "gamma", "penalty", "A_const", "B_const",
                  "bound_value", "vacuous")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, REPORT_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        writer.writerow(rep.csv_row())
    return buf.getvalue()


def score(logits, predicted_class: int) -> float:
    """sqrt(2) times the gap between the predicted logit and the best other one."""
    z = np.asarray(logits, dtype=np.float64).ravel()
    if z.size < 2:
        raise DimensionError("need at least two logits")
    others = np.delete(z, predicted_class)
    return float(SQRT2 * (z[predicted_class] - others.max()))


def scores(net: Network, data: Dataset) -> np.ndarray:
    """Score of every sample with respect to the network's own prediction."""
    logits = forward_batch(net, data.inputs)
    top2 = np.sort(logits, axis=1)[:, -2:]
    return SQRT2 * (top2[:, 1] - top2[:, 0])


def min_score(net: Network, data: Dataset) -> float:
    return float(np.min(scores(net, data)))


def mean_score(net: Network, data: Dataset) -> float:
    return float(np.mean(scores(net, data)))


def margin_gamma(score_min: float, spectral_norms) -> float:
    norms = list(spectral_norms)
    if not norms:
        raise ValidationError("need at least one layer norm")
    return score_min / math.prod(norms)


def estimate_C(original_outputs, pruned_outputs) -> float:
    """Largest squared row distance between two output matrices."""
    a = as_matrix(original_outputs, "original outputs")
    b = as_matrix(pruned_outputs, "pruned outputs")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.sum((a - b) ** 2, axis=1)))


def mean_squared_perturbation(original_outputs, pruned_outputs) -> float:
    a = as_matrix(original_outputs, "original outputs")
    b = as_matrix(pruned_outputs, "pruned outputs")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.sum((a - b) ** 2, axis=1)))


def estimate_epsilon(train_inputs, test_inputs, seed: int = 0, chunk: int = 512) -> float:
    """Empirical covering radius: max over test rows of the squared distance
    to the nearest training row.

    Exact brute force up to ``MAX_PAIRS`` pairs; above that the test rows are
    subsampled (with a warning) and the result is an underestimate.
    """
    train = as_matrix(train_inputs, "train inputs")
    test = as_matrix(test_inputs, "test inputs")
    if train.shape[1] != test.shape[1]:
        raise DimensionError("train and test inputs differ in dimension")
    if train.shape[0] * test.shape[0] > MAX_PAIRS:
        keep = max(1, MAX_PAIRS // train.shape[0])
        warnings.warn(f"covering radius subsampled to {keep} test rows", stacklevel=2)
        test = test[make_rng(seed).choice(test.shape[0], keep, replace=False)]
    best = 0.0
    for start in range(0, test.shape[0], chunk):
        d = cdist(test[start:start + chunk], train, "sqeuclidean")
        best = max(best, float(d.min(axis=1).max()))
    return best


def transfer_C2(C1: float, B1: float, B2: float, epsilon: float) -> float:
    """Test-set perturbation bound from the training-set bound ``C1``."""
    return C1 + (B1 + B2) * epsilon


def frame_bound(weights) -> float:
    """Upper frame bound ``sup ||W x||^2 / ||x||^2`` of a layer matrix."""
    return spectral_norm(weights) ** 2


def _evaluate(kind, gamma, penalty, mp: ManifoldParams, score_min=math.nan) -> GEBoundReport:
    eff = gamma - penalty
    value = mp.A * eff ** (-mp.k / 2.0) + mp.B if eff > 0 else VACUOUS
    return GEBoundReport(kind, gamma, penalty, value, mp.A, mp.B, score_min)


def ge_bound_base(gamma: float, mp: ManifoldParams) -> GEBoundReport:
    if not gamma > 0:
        raise ValidationError(f"margin must be positive, got {gamma}")
    return _evaluate("base", gamma, 0.0, mp)


def _tail_products(norms):
    # tail[i] = prod_{j > i} norms[j]
    tail = [1.0] * len(norms)
    for i in range(len(norms) - 2, -1, -1):
        tail[i] = tail[i + 1] * norms[i + 1]
    return tail


def single_layer_penalty(C2: float, norms, pruned_index: int) -> float:
    norms = list(norms)
    if not norms:
        raise ValidationError("need at least one layer norm")
    if not 0 <= pruned_index < len(norms):
        raise IndexError(f"pruned layer {pruned_index} out of range")
    if C2 < 0:
        raise ValidationError("C2 must be nonnegative")
    return math.sqrt(C2) * _tail_products(norms)[pruned_index] / math.prod(norms)


def multi_layer_penalty(C_list, norms) -> float:
    norms = list(norms)
    C_list = list(C_list)
    if not norms:
        raise ValidationError("need at least one layer norm")
    if len(C_list) != len(norms):
        raise DimensionError("need one C per layer")
    if any(c < 0 for c in C_list):
        raise ValidationError("C entries must be nonnegative")
    tail = _tail_products(norms)
    return sum(math.sqrt(c) * t for c, t in zip(C_list, tail)) / math.prod(norms)


def ge_bound_single_layer(gamma: float, C2: float, norms, pruned_index: int,
                          mp: ManifoldParams) -> GEBoundReport:
    if not gamma > 0:
        raise ValidationError(f"margin must be positive, got {gamma}")
    return _evaluate("single", gamma, single_layer_penalty(C2, norms, pruned_index), mp)


def ge_bound_multi_layer(gamma: float, C_list, norms, mp: ManifoldParams) -> GEBoundReport:
    if not gamma > 0:
        raise ValidationError(f"margin must be positive, got {gamma}")
    return _evaluate("multi", gamma, multi_layer_penalty(C_list, norms), mp)


def ge_ratio_prediction(base_GE: float, score_stat: float, C_list, norms, k: float) -> float:
    """Predicted GE of a pruned network from the GE of the unpruned one.

    ``base_GE * (s / (s - sum_i sqrt(C_i) prod_{j>i} ||W_j||))^(k/2)`` with the
    additive constant dropped. ``score_stat`` is typically the mean score.
    Returns ``inf`` when the denominator is not positive.
    """
    if not k > 0:
        raise ValidationError("k must be positive")
    norms = list(norms)
    C_list = list(C_list)
    if len(C_list) != len(norms):
        raise DimensionError("need one C per layer")
    tail = _tail_products(norms)
    shift = sum(math.sqrt(c) * t for c, t in zip(C_list, tail))
    denom = score_stat - shift
    if not denom > 0:
        return VACUOUS
    return base_GE * (score_stat / denom) ** (k / 2.0)


@dataclass
class LayerPerturbation:
    layer: int
    C_max: float          # empirical C1: worst squared perturbation on the data
    C_mean: float         # mean squared perturbation (the layerwise error)
    C_test: float = math.nan
    epsilon: float = math.nan
    C2_theory: float = math.nan


@dataclass
class PruningAnalysis:
    norms: list
    score_min: float
    score_mean: float
    layers: list
    base: GEBoundReport
    single: list
    multi: GEBoundReport
    predicted_ge: float
    base_ge: float
    flipped_fraction: float


def layer_perturbations(original: Network, pruned: Network, data: Dataset,
                        test: Dataset | None = None) -> list:
    """Per-layer output perturbation when each layer alone is swapped.

    Both layers see the original network's representation as input, so
    untouched layers report exactly zero.
    """
    if original.depth != pruned.depth:
        raise DimensionError("networks differ in depth")
    zs = activations(original, data.inputs)
    zs_test = activations(original, test.inputs) if test is not None else None
    out = []
    for i, (lo, lp) in enumerate(zip(original.layers, pruned.layers)):
        a, b = lo(zs[i]), lp(zs[i])
        pert = LayerPerturbation(i, estimate_C(a, b), mean_squared_perturbation(a, b))
        if zs_test is not None:
            pert.C_test = estimate_C(lo(zs_test[i]), lp(zs_test[i]))
            pert.epsilon = estimate_epsilon(zs[i], zs_test[i])
            pert.C2_theory = transfer_C2(pert.C_max, frame_bound(lo.weights),
                                            frame_bound(lp.weights), pert.epsilon)
        out.append(pert)
    return out


def analyze_pruning(original: Network, pruned: Network, train: Dataset,
                    mp: ManifoldParams, test: Dataset | None = None,
                    base_ge: float | None = None) -> PruningAnalysis:
    """Evaluate every bound for a pruned network against its original.

    Bounds use the training-set (empirical) C of each layer. The ratio
    prediction uses the mean score and the mean layerwise error. When
    ``base_ge`` is not given it is measured as the train/test error gap
    (or 0.01 without a test set).
    """
    norms = spectral_norms(original)
    s = scores(original, train)
    s_min, s_mean = float(np.min(s)), float(np.mean(s))
    layers = layer_perturbations(original, pruned, train, test)
    c_max = [p.C_max for p in layers]
    if s_min > 0:
        gamma = margin_gamma(s_min, norms)
        base = ge_bound_base(gamma, mp)
        single = [ge_bound_single_layer(gamma, p.C_max, norms, p.layer, mp) for p in layers]
        multi = ge_bound_multi_layer(gamma, c_max, norms, mp)
    else:
        gamma = 0.0
        base = GEBoundReport("base", 0.0, 0.0, VACUOUS, mp.A, mp.B)
        single = [GEBoundReport("single", 0.0, single_layer_penalty(p.C_max, norms, p.layer),
                                VACUOUS, mp.A, mp.B) for p in layers]
        multi = GEBoundReport("multi", 0.0, multi_layer_penalty(c_max, norms), VACUOUS,
                              mp.A, mp.B)
    for rep in [base, *single, multi]:
        rep.score_min = s_min
    for i, rep in enumerate(single):
        rep.kind = f"single[{i}]"
    if base_ge is None:
        if test is not None:
            train_err = 1.0 - float(np.mean(predict_batch(original, train.inputs) == train.labels))
            test_err = 1.0 - float(np.mean(predict_batch(original, test.inputs) == test.labels))
            base_ge = abs(test_err - train_err)
        else:
            base_ge = 0.01
    predicted = ge_ratio_prediction(base_ge, s_mean, [p.C_mean for p in layers], norms, mp.k)
    flipped = float(np.mean(predict_batch(original, train.inputs)
                            != predict_batch(pruned, train.inputs)))
    return PruningAnalysis(norms, s_min, s_mean, layers, base, single, multi,
                           predicted, base_ge, flipped)


ANALYSIS_COLUMNS = ("kind", "layer", "score_min", "score_mean", "gamma", "penalty",
                    "C_emp", "C_mean", "C_test", "epsilon", "C2_theory", "A_const",
                    "B_const", "value", "vacuous")


def analysis_rows(an: PruningAnalysis) -> list:
    """Flat rows (``ANALYSIS_COLUMNS``) for every bound in an analysis.

    ``value`` is the bound (or the predicted GE for the ``prediction`` row);
    vacuous values are written as ``VACUOUS``.
    """
    def fmt(x):
        return "VACUOUS" if math.isinf(x) else repr(float(x))

    def row(kind, rep, layer="", pert=None):
        out = dict(kind=kind, layer=layer, score_min=repr(an.score_min),
                   score_mean=repr(an.score_mean), gamma=repr(rep.gamma),
                   penalty=repr(rep.penalty), A_const=repr(rep.A_const),
                   B_const=repr(rep.B_const), value=fmt(rep.bound_value),
                   vacuous=int(rep.vacuous))
        if pert is not None:
            out.update(C_emp=repr(pert.C_max), C_mean=repr(pert.C_mean),
                       C_test=repr(pert.C_test), epsilon=repr(pert.epsilon),
                       C2_theory=repr(pert.C2_theory))
        return out

    rows = [row("base", an.base)]
    for rep, pert in zip(an.single, an.layers):
        rows.append(row(rep.kind, rep, pert.layer, pert))
    rows.append(row("multi", an.multi))
    rows.append(dict(kind="prediction", score_min=repr(an.score_min),
                     score_mean=repr(an.score_mean), value=fmt(an.predicted_ge),
                     vacuous=int(math.isinf(an.predicted_ge))))
    return rows
