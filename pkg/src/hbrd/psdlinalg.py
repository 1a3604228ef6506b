"""Dense symmetric / positive-semidefinite matrix algebra at desk scale.

Everything here operates on small (k <= ~10) dense symmetric matrices stored
as plain ``numpy`` arrays.  Conventions used throughout the package:

* Loewner comparisons are tolerance-based: ``A <= B`` holds when the minimum
  eigenvalue of ``B - A`` is at least ``-tol * max(1, ||B - A||_2)``.
* Determinants of positive-definite matrices are computed as sums of log
  eigenvalues (never via LU of near-singular factors).
* Inverses of positive-definite matrices go through the symmetric
  eigendecomposition so results stay exactly symmetric.
* Empty (0 x 0) blocks have determinant 1 (log-determinant 0); all block
  operations degrade gracefully to that case.

All functions are pure and accept/return immutable values, so they are safe
to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveDefinite, OrderingViolation

# Relative eigenvalue tolerance for semidefiniteness checks.
PSD_RTOL = 1e-9
# Relative eigenvalue floor below which a matrix counts as singular.
PD_RTOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return ``(M + M^T) / 2`` as a float array, validating shape and finiteness."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (m + m.T)


def spectral_norm(m: np.ndarray) -> float:
    m = symmetrize(m)
    if m.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(m))))


def loewner_leq(a: np.ndarray, b: np.ndarray, tol: float = PSD_RTOL) -> bool:
    """True iff ``a <= b`` in the Loewner order, up to a relative tolerance.

    The test is ``min_eig(b - a) >= -tol * max(1, ||b - a||_2)``.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    d = symmetrize(b - a)
    if d.shape[0] == 0:
        return True
    ev = np.linalg.eigvalsh(d)
    return bool(ev[0] >= -tol * max(1.0, float(np.max(np.abs(ev)))))


@dataclass(frozen=True)
class BlockSplit:
    """Sizes of the leading (l1) and trailing (l2) diagonal blocks."""

    l1: int
    l2: int

    def __post_init__(self) -> None:
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("block sizes must be nonnegative")

    @property
    def dim(self) -> int:
        return self.l1 + self.l2


def block_parts(m: np.ndarray, split: BlockSplit):
    """Split ``m`` into (upper-left, lower-right, off-diagonal) blocks."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if split.dim != m.shape[0]:
        raise DimensionMismatch(
            f"split {split.l1}+{split.l2} inconsistent with dimension {m.shape[0]}"
        )
    l1 = split.l1
    return m[:l1, :l1].copy(), m[l1:, l1:].copy(), m[:l1, l1:].copy()


def diag_min(e: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Entrywise minimum of two diagonal matrices given as 1-D entry vectors."""
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    if e.shape != f.shape or e.ndim != 1:
        raise DimensionMismatch(f"diagonal shape mismatch {e.shape} vs {f.shape}")
    return np.minimum(e, f)


def eigh_pd(m: np.ndarray, what: str = "matrix"):
    """Eigendecomposition of a symmetric matrix required to be positive definite."""
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    if m.shape[0] and w[0] <= PD_RTOL * max(1.0, float(w[-1])):
        raise NonPositiveDefinite(f"{what} is not positive definite (min eig {w[0]:.3e})")
    return w, v


def inv_pd(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Inverse of a positive-definite matrix, exactly symmetric on output."""
    w, v = eigh_pd(m, what)
    return symmetrize((v / w) @ v.T)


def logdet_pd(m: np.ndarray, what: str = "matrix") -> float:
    """Log-determinant of a positive-definite matrix via eigenvalues (0 for 0x0)."""
    w, _ = eigh_pd(m, what)
    return float(np.sum(np.log(w)))


def sqrt_psd(m: np.ndarray, tol: float = PSD_RTOL, what: str = "matrix") -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clipped to zero."""
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    if m.shape[0] and w[0] < -tol * max(1.0, float(np.max(np.abs(w)))):
        raise NonPositiveDefinite(f"{what} is not PSD (min eig {w[0]:.3e})")
    w = np.maximum(w, 0.0)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def check_psd(s: np.ndarray, tol: float = PSD_RTOL, what: str = "increment") -> np.ndarray:
    """Validate a PSD matrix (min eigenvalue >= -tol * max(1, max eigenvalue))."""
    s = symmetrize(s)
    if s.shape[0]:
        w = np.linalg.eigvalsh(s)
        if w[0] < -tol * max(1.0, float(w[-1])):
            raise NonPositiveDefinite(f"{what} is not PSD (min eig {w[0]:.3e})")
    return s


def apply_increment(k_cond: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Condition on one extra Gaussian observation with precision increment ``s``.

    Returns ``(k_cond^{-1} + s)^{-1}``; the result is positive definite and
    Loewner-below ``k_cond`` whenever ``s`` is PSD.
    """
    k_cond = np.asarray(k_cond, dtype=float)
    s = np.asarray(s, dtype=float)
    if k_cond.shape != s.shape:
        raise DimensionMismatch(f"shape mismatch {k_cond.shape} vs {s.shape}")
    return inv_pd(inv_pd(k_cond, "conditional covariance") + symmetrize(s))


def mutual_info_nats(
    k_prior: np.ndarray, k_post: np.ndarray, tol: float = PSD_RTOL
) -> float:
    """``0.5 * ln(det(k_prior) / det(k_post))`` with the ordering k_post <= k_prior enforced."""
    if not loewner_leq(k_post, k_prior, tol):
        raise OrderingViolation("posterior covariance is not below the prior")
    val = 0.5 * (logdet_pd(k_prior, "prior") - logdet_pd(k_post, "posterior"))
    return max(val, 0.0)


def orthogonal_diagonalizer(m: np.ndarray):
    """Orthogonal ``Q`` and eigenvalues (descending) with ``Q m Q^T`` diagonal.

    Row signs are normalized so each eigenvector's first nonzero entry is
    positive, making the output deterministic for distinct eigenvalues.
    """
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    q = v[:, order].T.copy()
    for i in range(q.shape[0]):
        nz = np.nonzero(np.abs(q[i]) > 1e-12)[0]
        if nz.size and q[i, nz[0]] < 0:
            q[i] = -q[i]
    return q, w
