"""Convex regularizers and their proximal operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ValidationError, as_matrix, svd

KINDS = ("none", "l1", "nuclear")


@dataclass(frozen=True)
class Regularizer:
    """``lam * Omega(U)`` with ``Omega`` the L1 norm, nuclear norm, or zero.

    ``unpenalized_rows`` trailing rows of ``U`` are left out of both the
    penalty and the prox. This is how a bias folded into the last row of the
    weight matrix is kept unregularized.
    """

    kind: str = "none"
    lam: float = 0.0
    unpenalized_rows: int = 0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValidationError(f"unknown regularizer {self.kind!r}")
        if not self.lam >= 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if self.unpenalized_rows < 0:
            raise ValidationError("unpenalized_rows must be >= 0")
        object.__setattr__(self, "kind", kind)

    def _block(self, u):
        n = u.shape[0] - self.unpenalized_rows
        return u[:n]

    def penalty(self, u) -> float:
        u = as_matrix(u, "U")
        if self.kind == "none" or self.lam == 0.0:
            return 0.0
        w = self._block(u)
        if w.size == 0:
            return 0.0
        if self.kind == "l1":
            return float(self.lam * np.sum(np.abs(w)))
        return float(self.lam * np.sum(svd(w).singular_values))

    def prox(self, v, step: float) -> np.ndarray:
        """argmin_X 0.5 ||X - V||_F^2 + step * lam * Omega(X)."""
        if not step > 0:
            raise ValidationError(f"prox step must be positive, got {step}")
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "none" or self.lam == 0.0:
            return v.copy()
        out = v.copy()
        n = v.shape[0] - self.unpenalized_rows
        if n <= 0:
            return out
        tau = step * self.lam
        if self.kind == "l1":
            out[:n] = soft_threshold(v[:n], tau)
        else:
            out[:n] = singular_value_threshold(v[:n], tau)
        return out


def soft_threshold(v, tau: float) -> np.ndarray:
    """sign(v) * max(|v| - tau, 0); ties |v| == tau map to exactly 0."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def singular_value_threshold(v, tau: float) -> np.ndarray:
    res = svd(v)
    s = np.maximum(res.singular_values - tau, 0.0)
    keep = s > 0
    if not np.any(keep):
        return np.zeros_like(np.asarray(v, dtype=np.float64))
    return (res.left[:, keep] * s[keep]) @ res.right[:, keep].T


def penalty(reg: Regularizer, u) -> float:
    return reg.penalty(u)


def prox(reg: Regularizer, v, step: float) -> np.ndarray:
    return reg.prox(v, step)
