"""Magnitude thresholding and truncated-SVD compression."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import ValidationError, as_matrix, svd


@dataclass
class CompressionReport:
    method: str
    knob: float
    weights_out: np.ndarray
    sparsity: Optional[float] = None
    cr: Optional[float] = None
    factors: Optional[tuple] = None


def hard_threshold(w, t: float) -> np.ndarray:
    """Keep entries with ``|w| > t`` (strict), zero the rest."""
    if t < 0:
        raise ValidationError(f"threshold must be nonnegative, got {t}")
    w = as_matrix(w, "W")
    return np.where(np.abs(w) > t, w, 0.0)


def sparsity(w) -> float:
    w = np.asarray(w)
    return float(np.count_nonzero(w == 0.0)) / w.size


def threshold_for_sparsity(w, target: float) -> float:
    """Smallest threshold zeroing at least ``target`` of the entries.

    Returns the ``ceil(target * size)``-th smallest magnitude, or 0 for a
    zero target.
    """
    if not 0.0 <= target <= 1.0:
        raise ValidationError(f"target sparsity must lie in [0, 1], got {target}")
    mags = np.sort(np.abs(as_matrix(w, "W")).ravel())
    k = math.ceil(target * mags.size - 1e-9)
    if k <= 0:
        return 0.0
    return float(mags[k - 1])


def prune_to_sparsity(w, target: float) -> CompressionReport:
    t = threshold_for_sparsity(w, target)
    out = hard_threshold(w, t)
    return CompressionReport("threshold", t, out, sparsity=sparsity(out))


def truncated_svd_compress(w, k: int):
    """Top-``k`` singular triplets ``(left d1 x k, sigma k, right d2 x k)``."""
    res = svd(w)
    if not 0 <= k <= len(res.singular_values):
        raise ValidationError(f"rank {k} outside [0, {len(res.singular_values)}]")
    return res.left[:, :k].copy(), res.singular_values[:k].copy(), res.right[:, :k].copy()


def reconstruct(factors) -> np.ndarray:
    left, sigma, right = factors
    return (left * sigma) @ right.T


def compression_ratio(d1: int, d2: int, k: int) -> float:
    """Stored numbers of a rank-k factorization relative to the dense matrix.

    Values above 1 mean the factorization is larger than the dense matrix;
    they are returned with a warning.
    """
    cr = (k * d1 + k + k * d2) / (d1 * d2)
    if cr > 1:
        warnings.warn(f"compression ratio {cr:.4g} > 1: rank {k} does not compress "
                      f"a {d1}x{d2} matrix", stacklevel=2)
    return cr


def rank_for_ratio(d1: int, d2: int, target_cr: float) -> int:
    """Largest rank whose compression ratio does not exceed ``target_cr``."""
    return max(0, int(math.floor(target_cr * d1 * d2 / (d1 + d2 + 1))))


def svd_compress(w, k: int) -> CompressionReport:
    factors = truncated_svd_compress(w, k)
    d1, d2 = np.shape(w)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cr = compression_ratio(d1, d2, k)
    return CompressionReport("svd", k, reconstruct(factors), cr=cr, factors=factors)
