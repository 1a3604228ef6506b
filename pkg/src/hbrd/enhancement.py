"""Construction of the enhanced side information used by the converse bounds.

The enhanced variable Y is at least as informative as both decoders' side
information and satisfies, in canonical coordinates,

    K_{X|Y}^{-1} = K_{X|Y1}^{-1} + Khat = K_{X|Y2}^{-1} + Ktil,

with Khat = diag(A, 0) and Ktil = diag(0, -B).  Y is never materialized as a
random variable: every downstream formula depends on it only through
K_{X|Y} and the two precision increments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import psdlinalg as pl
from .errors import InvariantViolation, MRequiresKx
from .model import CanonicalForm, _freeze


@dataclass(frozen=True)
class EnhancedSideInfo:
    k_x_given_y: np.ndarray
    k_hat: np.ndarray  # diagonal entries of diag(A, 0)
    k_tilde: np.ndarray  # diagonal entries of diag(0, -B)
    m: np.ndarray | None = None  # explicit observation matrix, optional

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_x_given_y", _freeze(self.k_x_given_y))
        object.__setattr__(self, "k_hat", _freeze(self.k_hat))
        object.__setattr__(self, "k_tilde", _freeze(self.k_tilde))
        if self.m is not None:
            object.__setattr__(self, "m", _freeze(self.m))


def build_enhanced(
    canon: CanonicalForm,
    k_x: np.ndarray | None = None,
    require_m: bool = False,
) -> EnhancedSideInfo:
    """Build K_{X|Y}, the increments Khat/Ktil, and (optionally) M.

    ``k_x`` is the source covariance in the original coordinates; when given,
    M is the symmetric PSD square root of
    ``K_{X|Y1,c}^{-1} - K_{X,c}^{-1} + Khat`` so that an observation
    ``Y = M X + N`` (unit noise) realizes the enhancement.
    """
    if require_m and k_x is None:
        raise MRequiresKx("explicit observation matrix requested without K_X")
    l1 = canon.l1
    k = canon.k
    k_hat = np.concatenate([canon.a, np.zeros(canon.l2)])
    k_tilde = np.concatenate([np.zeros(l1), -canon.b])

    p_y_via_1 = pl.inv_pd(canon.k1c, "K_X_given_Y1") + np.diag(k_hat)
    p_y_via_2 = pl.inv_pd(canon.k2c, "K_X_given_Y2") + np.diag(k_tilde)
    scale = max(1.0, pl.spectral_norm(p_y_via_1))
    if np.max(np.abs(p_y_via_1 - p_y_via_2)) > 1e-9 * scale:
        raise InvariantViolation(
            "the two precision expressions for the enhanced side information disagree"
        )
    k_x_given_y = pl.inv_pd(p_y_via_1, "enhanced precision")

    m = None
    if k_x is not None:
        k_xc = pl.symmetrize(canon.q @ np.asarray(k_x, dtype=float) @ canon.q.T)
        t = pl.symmetrize(
            pl.inv_pd(canon.k1c) - pl.inv_pd(k_xc, "K_X") + np.diag(k_hat)
        )
        m = pl.sqrt_psd(t, what="observation Gram matrix")
        resid = np.max(np.abs(m @ m - t)) if k else 0.0
        if resid > 1e-9 * max(1.0, pl.spectral_norm(t)):
            raise InvariantViolation(f"observation factor residual {resid:.3e}")
    return EnhancedSideInfo(k_x_given_y=k_x_given_y, k_hat=k_hat, k_tilde=k_tilde, m=m)


def build_hat_observation(canon: CanonicalForm, which: int) -> np.ndarray:
    """Precision increment of the surrogate observation for one decoder.

    Applying the returned PSD matrix to K_{X|Y_which} via ``apply_increment``
    reproduces K_{X|Y} exactly.
    """
    if which not in (1, 2):
        raise ValueError("decoder index must be 1 or 2")
    if which == 1:
        return np.diag(np.concatenate([canon.a, np.zeros(canon.l2)]))
    return np.diag(np.concatenate([np.zeros(canon.l1), -canon.b]))
