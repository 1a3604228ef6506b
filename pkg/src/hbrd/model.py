"""Problem instances, distortion constraint families, and the canonical basis.

A problem instance is the Gaussian triple (X, Y1, Y2) represented through the
two conditional covariances K_{X|Y1}, K_{X|Y2} (and optionally K_X, which is
needed only by the enhancement module's explicit observation matrix).

The canonical form rotates coordinates with an orthogonal Q so that the
precision difference K_{X|Y2,c}^{-1} - K_{X|Y1,c}^{-1} becomes diag(A, B)
with A >= 0 (size l1, where decoder 2's side information is stronger) and
B < 0 (size l2, where decoder 1's is stronger).  Scaled-identity and trace
constraints are invariant under the rotation; componentwise MSE constraints
require the conditionals to be diagonal already, in which case Q is a signed
permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import psdlinalg as pl
from .errors import (
    CanonicalizationError,
    DimensionMismatch,
    FamilyMismatch,
    MseRequiresDiagonal,
    ValidationError,
)

# Eigenvalues of the precision difference above -CANON_RTOL * spectral norm
# are assigned to the nonnegative block A; strictly below go to B.
CANON_RTOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemInstance:
    """Source/side-information covariances of the two-decoder problem."""

    k_x_given_y1: np.ndarray
    k_x_given_y2: np.ndarray
    k_x: np.ndarray | None = None

    def __post_init__(self) -> None:
        k1 = pl.symmetrize(self.k_x_given_y1)
        k2 = pl.symmetrize(self.k_x_given_y2)
        if k1.shape != k2.shape:
            raise DimensionMismatch(
                f"conditional covariances disagree: {k1.shape} vs {k2.shape}"
            )
        kx = None
        if self.k_x is not None:
            kx = pl.symmetrize(self.k_x)
            if kx.shape != k1.shape:
                raise DimensionMismatch(
                    f"source covariance shape {kx.shape} != {k1.shape}"
                )
        object.__setattr__(self, "k_x_given_y1", _freeze(k1))
        object.__setattr__(self, "k_x_given_y2", _freeze(k2))
        object.__setattr__(self, "k_x", _freeze(kx) if kx is not None else None)

    @property
    def k(self) -> int:
        return self.k_x_given_y1.shape[0]


@dataclass(frozen=True)
class MseDiag:
    """Componentwise MSE constraints: diagonal targets given by entry vectors."""

    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self) -> None:
        d1 = np.atleast_1d(np.asarray(self.d1, dtype=float))
        d2 = np.atleast_1d(np.asarray(self.d2, dtype=float))
        if d1.ndim != 1 or d2.ndim != 1 or d1.shape != d2.shape:
            raise DimensionMismatch("MSE targets must be matching 1-D entry vectors")
        object.__setattr__(self, "d1", _freeze(d1))
        object.__setattr__(self, "d2", _freeze(d2))


@dataclass(frozen=True)
class ScaledIdentity:
    """Error-covariance constraints by scaled identities d1*I, d2*I."""

    d1: float
    d2: float


@dataclass(frozen=True)
class Trace:
    """Scalar bounds on the trace of each decoder's error covariance."""

    d1: float
    d2: float


DistortionSpec = MseDiag | ScaledIdentity | Trace


def family_name(spec: DistortionSpec) -> str:
    if isinstance(spec, MseDiag):
        return "mse"
    if isinstance(spec, ScaledIdentity):
        return "scaled_identity"
    if isinstance(spec, Trace):
        return "trace"
    raise FamilyMismatch(f"unknown distortion spec {type(spec).__name__}")


@dataclass(frozen=True)
class ValidationIssue:
    code: str  # NonPositiveDefinite | DistortionInfeasible | DimensionMismatch
    message: str
    decoder: int | None = None

    def __str__(self) -> str:
        where = f" (decoder {self.decoder})" if self.decoder else ""
        return f"{self.code}{where}: {self.message}"


def validate(inst: ProblemInstance, spec: DistortionSpec) -> list[ValidationIssue]:
    """Check all standing assumptions; empty list means the pair is valid."""
    issues: list[ValidationIssue] = []
    k = inst.k
    conds = [(1, inst.k_x_given_y1), (2, inst.k_x_given_y2)]
    for dec, m in conds:
        ev = np.linalg.eigvalsh(m)
        if ev[0] <= pl.PD_RTOL * max(1.0, float(ev[-1])):
            issues.append(
                ValidationIssue(
                    "NonPositiveDefinite",
                    f"K_X_given_Y{dec} is not positive definite (min eig {ev[0]:.3e})",
                    dec,
                )
            )
    if inst.k_x is not None:
        for dec, m in conds:
            if not pl.loewner_leq(m, inst.k_x):
                issues.append(
                    ValidationIssue(
                        "NonPositiveDefinite",
                        f"K_X - K_X_given_Y{dec} is not PSD",
                        dec,
                    )
                )

    if isinstance(spec, MseDiag):
        if spec.d1.shape[0] != k:
            issues.append(
                ValidationIssue(
                    "DimensionMismatch", f"D1 has {spec.d1.shape[0]} entries, expected {k}"
                )
            )
            return issues
        for dec, dvec, m in [(1, spec.d1, inst.k_x_given_y1), (2, spec.d2, inst.k_x_given_y2)]:
            if np.any(dvec <= 0):
                issues.append(
                    ValidationIssue(
                        "DistortionInfeasible", f"D{dec} must be positive definite", dec
                    )
                )
            elif not pl.loewner_leq(np.diag(dvec), m):
                issues.append(
                    ValidationIssue(
                        "DistortionInfeasible",
                        f"D{dec} is not dominated by K_X_given_Y{dec}",
                        dec,
                    )
                )
    elif isinstance(spec, (ScaledIdentity, Trace)):
        for dec, d, m in [(1, spec.d1, inst.k_x_given_y1), (2, spec.d2, inst.k_x_given_y2)]:
            if not d > 0:
                issues.append(
                    ValidationIssue("DistortionInfeasible", f"d{dec} must be positive", dec)
                )
                continue
            lam_min = float(np.linalg.eigvalsh(m)[0])
            scale = pl.spectral_norm(m)
            if d > lam_min + pl.PSD_RTOL * max(1.0, scale):
                issues.append(
                    ValidationIssue(
                        "DistortionInfeasible",
                        f"d{dec}={d:.6g} exceeds the smallest eigenvalue "
                        f"{lam_min:.6g} of K_X_given_Y{dec}",
                        dec,
                    )
                )
    else:
        raise FamilyMismatch(f"unknown distortion spec {type(spec).__name__}")
    return issues


def validate_or_raise(inst: ProblemInstance, spec: DistortionSpec) -> None:
    issues = validate(inst, spec)
    if issues:
        raise ValidationError(issues)


@dataclass(frozen=True)
class CanonicalForm:
    """Orthogonal change of basis splitting the precision difference into A and B."""

    q: np.ndarray
    l1: int
    l2: int
    a: np.ndarray  # l1 nonnegative diagonal entries
    b: np.ndarray  # l2 strictly negative diagonal entries
    k1c: np.ndarray  # K_{X|Y1} in canonical coordinates
    k2c: np.ndarray  # K_{X|Y2} in canonical coordinates

    def __post_init__(self) -> None:
        for name in ("q", "a", "b", "k1c", "k2c"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    @property
    def k(self) -> int:
        return self.l1 + self.l2

    @property
    def kdiag(self) -> np.ndarray:
        """Diagonal entries of diag(A, B), length k."""
        return np.concatenate([self.a, self.b])

    @property
    def split(self) -> pl.BlockSplit:
        return pl.BlockSplit(self.l1, self.l2)


def _offdiag_scale(m: np.ndarray) -> float:
    if m.shape[0] < 2:
        return 0.0
    od = m - np.diag(np.diag(m))
    return float(np.max(np.abs(od)))


def is_diagonal(m: np.ndarray, rtol: float = 1e-9) -> bool:
    return _offdiag_scale(m) <= rtol * max(1.0, pl.spectral_norm(m))


def canonicalize(inst: ProblemInstance, spec: DistortionSpec) -> CanonicalForm:
    """Compute the canonical decomposition for a validated instance/spec pair."""
    validate_or_raise(inst, spec)
    k = inst.k
    p1 = pl.inv_pd(inst.k_x_given_y1, "K_X_given_Y1")
    p2 = pl.inv_pd(inst.k_x_given_y2, "K_X_given_Y2")
    delta = pl.symmetrize(p2 - p1)
    scale = pl.spectral_norm(delta)
    thr = CANON_RTOL * scale

    if isinstance(spec, MseDiag):
        if not (is_diagonal(inst.k_x_given_y1) and is_diagonal(inst.k_x_given_y2)):
            raise MseRequiresDiagonal(
                "componentwise MSE constraints need diagonal conditional covariances"
            )
        d = np.diag(delta).copy()
        order = np.argsort(-d, kind="stable")
        q = np.eye(k)[order]
        eigs = d[order]
    else:
        q, eigs = pl.orthogonal_diagonalizer(delta)

    l1 = int(np.sum(eigs >= -thr))
    a = np.clip(eigs[:l1], 0.0, None)
    b = eigs[l1:]
    k1c = pl.symmetrize(q @ inst.k_x_given_y1 @ q.T)
    k2c = pl.symmetrize(q @ inst.k_x_given_y2 @ q.T)

    resid = pl.inv_pd(k2c) - pl.inv_pd(k1c) - np.diag(np.concatenate([a, b]))
    if np.max(np.abs(resid)) > 1e-9 * max(1.0, scale):
        raise CanonicalizationError(
            f"decomposition residual {np.max(np.abs(resid)):.3e} too large"
        )
    return CanonicalForm(q=q, l1=l1, l2=k - l1, a=a, b=b, k1c=k1c, k2c=k2c)


def distortion_diag_vectors(canon: CanonicalForm, spec: DistortionSpec):
    """Diagonal distortion targets (D1, D2) in canonical coordinates.

    Only meaningful for the two families whose targets are matrices; trace
    constraints are scalars and have no diagonal representation.
    """
    if isinstance(spec, ScaledIdentity):
        ones = np.ones(canon.k)
        return spec.d1 * ones, spec.d2 * ones
    if isinstance(spec, MseDiag):
        out = []
        for dvec in (spec.d1, spec.d2):
            m = canon.q @ np.diag(dvec) @ canon.q.T
            if not is_diagonal(m):
                raise MseRequiresDiagonal(
                    "distortion matrix is not diagonal in canonical coordinates"
                )
            out.append(np.diag(m).copy())
        return out[0], out[1]
    raise FamilyMismatch("trace constraints have no diagonal target vectors")


def detect_degraded(inst: ProblemInstance) -> tuple[int, int] | None:
    """Return the Markov order (stronger, weaker) if one decoder dominates.

    (1, 2) means Y1 is at least as informative as Y2 everywhere; ties
    (equal conditionals) also report (1, 2).  None when the precision
    difference has mixed signs.
    """
    p1 = pl.inv_pd(inst.k_x_given_y1, "K_X_given_Y1")
    p2 = pl.inv_pd(inst.k_x_given_y2, "K_X_given_Y2")
    delta = pl.symmetrize(p2 - p1)
    ev = np.linalg.eigvalsh(delta) if inst.k else np.zeros(0)
    thr = CANON_RTOL * (float(np.max(np.abs(ev))) if ev.size else 0.0)
    if np.all(ev <= thr):
        return (1, 2)
    if np.all(ev >= -thr):
        return (2, 1)
    return None
