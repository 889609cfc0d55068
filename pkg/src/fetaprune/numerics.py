"""Dense linear algebra primitives shared by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 and ndim 2.
``as_matrix`` is the single entry point that enforces that contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible or empty shapes."""


class ValidationError(ValueError):
    """Input values violate a precondition (non-finite entries, bad ranges)."""


class DivergenceError(RuntimeError):
    """An iterative method produced non-finite values.

    ``last_iterate`` holds the last finite iterate so callers can inspect or
    resume from it.
    """

    def __init__(self, message, last_iterate=None, trace=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.trace = list(trace) if trace is not None else []


def as_matrix(x, name="matrix", allow_empty=False) -> np.ndarray:
    """Return ``x`` as a finite 2-D float64 array (no copy when possible)."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not allow_empty and m.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return as_matrix(a).T.copy()


def axpy(alpha: float, x, y) -> np.ndarray:
    """alpha * x + y."""
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"axpy shape mismatch {x.shape} vs {y.shape}")
    return alpha * x + y


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a, allow_empty=True)))


def row_slice(a, rows) -> np.ndarray:
    """Rows of ``a`` selected by an index array or slice, as a new matrix."""
    a = as_matrix(a)
    out = a[rows]
    if out.ndim == 1:
        out = out.reshape(1, -1)
    return out


def spectral_norm(m, tol: float = 1e-8, max_iter: int = 1000) -> float:
    """Largest singular value by power iteration on ``M^T M``.

    The start vector is the normalized all-ones vector so the result is
    reproducible. If that vector happens to lie in the null space of ``M``
    its first coordinate is nudged by 1e-12 and iteration continues.
    """
    m = as_matrix(m, "M")
    n = m.shape[1]
    v = np.full(n, 1.0 / np.sqrt(n))
    mv = m @ v
    if not np.any(mv):
        if not np.any(m):
            return 0.0
        v[0] += 1e-12
        v /= np.linalg.norm(v)
        mv = m @ v
    sigma = np.linalg.norm(mv)
    for _ in range(max_iter):
        w = m.T @ mv
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
        mv = m @ v
        new_sigma = np.linalg.norm(mv)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(sigma)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = left @ diag(singular_values) @ right.T``."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self, rank: int | None = None) -> np.ndarray:
        r = len(self.singular_values) if rank is None else rank
        return (self.left[:, :r] * self.singular_values[:r]) @ self.right[:, :r].T


def svd(m) -> SvdResult:
    """Thin SVD backed by LAPACK (``numpy.linalg.svd``)."""
    m = as_matrix(m, "M")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return SvdResult(u, s, vt.T.copy())


def _complete_orthonormal(q: np.ndarray, filled: np.ndarray) -> np.ndarray:
    # Replace columns not marked in `filled` by unit vectors orthogonal to
    # everything already present (Gram-Schmidt against the standard basis).
    q = q.copy()
    d = q.shape[0]
    basis_idx = 0
    for j in np.flatnonzero(~filled):
        while basis_idx < d:
            e = np.zeros(d)
            e[basis_idx] = 1.0
            basis_idx += 1
            for _ in range(2):
                others = q[:, filled]
                e -= others @ (others.T @ e)
            ne = np.linalg.norm(e)
            if ne > 1e-8:
                q[:, j] = e / ne
                filled = filled.copy()
                filled[j] = True
                break
    return q


def jacobi_svd(m, tol: float = 1e-15, max_sweeps: int = 60) -> SvdResult:
    """One-sided (Hestenes) Jacobi SVD.

    Slower than LAPACK but short and independent of it, which makes it a
    useful cross-check for ``svd`` and ``spectral_norm``.
    """
    m = as_matrix(m, "M")
    flipped = m.shape[0] < m.shape[1]
    g = (m.T if flipped else m).copy()
    rows, n = g.shape
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                gi, gj = g[:, i], g[:, j]
                alpha = gi @ gi
                beta = gj @ gj
                gamma = gi @ gj
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                g[:, [i, j]] = np.column_stack((c * gi - s * gj, s * gi + c * gj))
                vi, vj = v[:, i].copy(), v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            break
    sigma = np.linalg.norm(g, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    g = g[:, order]
    v = v[:, order]
    cutoff = max(sigma[0], 1.0) * 1e-14 if n else 0.0
    nonzero = sigma > cutoff
    u = np.zeros_like(g)
    u[:, nonzero] = g[:, nonzero] / sigma[nonzero]
    u = _complete_orthonormal(u, nonzero)
    if flipped:
        return SvdResult(v, sigma, u)
    return SvdResult(u, sigma, v)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))
