"""Achievable rates: explicit test-channel constructions and closed forms.

The general achievable rate for a jointly Gaussian common/private message
triple (W, U, V) is

    R1 = 1/2 ln( |K_{X|Y1}| / |K_{X|W,U,Y1}| * |K_{X|W,Y2}| / |K_{X|W,V,Y2}| )
    R2 = 1/2 ln( |K_{X|Y2}| / |K_{X|W,V,Y2}| * |K_{X|W,Y1}| / |K_{X|W,U,Y1}| )
    R  = max(R1, R2).

For componentwise-MSE and scaled-identity constraints the optimal scheme has
a closed form built from Dhat1 = (D1^{-1} + K)^{-1} and Dtil2 = (D2^{-1} - K)^{-1}
with entrywise minima selecting each decoder's binding region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import psdlinalg as pl
from .errors import InfeasibleConstruction, MseRequiresDiagonal, SchemeInfeasible
from .model import (
    CanonicalForm,
    DistortionSpec,
    MseDiag,
    ScaledIdentity,
    Trace,
    _freeze,
    distortion_diag_vectors,
    is_diagonal,
)

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class RateReport:
    """Computed rate values in nats with labeled sub-terms and diagnostics."""

    r1: float
    r2: float
    components: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def r(self) -> float:
        return max(self.r1, self.r2)

    @property
    def r_bits(self) -> float:
        return self.r / LN2


@dataclass(frozen=True)
class AchievableScheme:
    """Conditional covariances defining a jointly Gaussian (W, U, V) scheme."""

    k_w_y1: np.ndarray  # K_{X|W,Y1}
    k_w_y2: np.ndarray  # K_{X|W,Y2}
    k_wu_y1: np.ndarray  # K_{X|W,U,Y1}
    k_wv_y2: np.ndarray  # K_{X|W,V,Y2}

    def __post_init__(self) -> None:
        for name in ("k_w_y1", "k_w_y2", "k_wu_y1", "k_wv_y2"):
            object.__setattr__(self, name, _freeze(pl.symmetrize(getattr(self, name))))


def validate_scheme(canon: CanonicalForm, scheme: AchievableScheme, tol: float = pl.PSD_RTOL) -> None:
    """Check the Loewner chain and the canonical precision relation; raise otherwise."""
    chain = [
        ("K_X_given_WUY1 <= K_X_given_WY1", scheme.k_wu_y1, scheme.k_w_y1),
        ("K_X_given_WY1 <= K_X_given_Y1", scheme.k_w_y1, canon.k1c),
        ("K_X_given_WVY2 <= K_X_given_WY2", scheme.k_wv_y2, scheme.k_w_y2),
        ("K_X_given_WY2 <= K_X_given_Y2", scheme.k_w_y2, canon.k2c),
    ]
    for label, lo, hi in chain:
        if not pl.loewner_leq(lo, hi, tol):
            raise SchemeInfeasible(f"violated relation: {label}")
    for label, m in [("K_X_given_WUY1", scheme.k_wu_y1), ("K_X_given_WVY2", scheme.k_wv_y2)]:
        ev = np.linalg.eigvalsh(m)
        if m.shape[0] and ev[0] <= pl.PD_RTOL * max(1.0, float(ev[-1])):
            raise SchemeInfeasible(f"violated relation: {label} > 0")
    resid = pl.inv_pd(scheme.k_w_y2) - pl.inv_pd(scheme.k_w_y1) - np.diag(canon.kdiag)
    scale = max(1.0, pl.spectral_norm(np.diag(canon.kdiag)))
    if resid.size and np.max(np.abs(resid)) > 1e-9 * scale:
        raise SchemeInfeasible(
            "violated relation: K_X_given_WY2^-1 - K_X_given_WY1^-1 = diag(A, B)"
        )


def rate_ach_general(canon: CanonicalForm, scheme: AchievableScheme) -> RateReport:
    """Evaluate the general achievable-rate pair at a feasible scheme."""
    validate_scheme(canon, scheme)
    i_wu_y1 = pl.mutual_info_nats(canon.k1c, scheme.k_wu_y1)
    i_wv_y2 = pl.mutual_info_nats(canon.k2c, scheme.k_wv_y2)
    i_v_given_w = pl.mutual_info_nats(scheme.k_w_y2, scheme.k_wv_y2)
    i_u_given_w = pl.mutual_info_nats(scheme.k_w_y1, scheme.k_wu_y1)
    r1 = i_wu_y1 + i_v_given_w
    r2 = i_wv_y2 + i_u_given_w
    return RateReport(
        r1=r1,
        r2=r2,
        components={
            "common_private_1": i_wu_y1,
            "refine_2_given_w": i_v_given_w,
            "common_private_2": i_wv_y2,
            "refine_1_given_w": i_u_given_w,
        },
    )


def _hat_til(canon: CanonicalForm, d1v: np.ndarray, d2v: np.ndarray):
    """Entrywise Dhat1 = (D1^{-1}+K)^{-1} and Dtil2 = (D2^{-1}-K)^{-1}."""
    kd = canon.kdiag
    inv_hat = 1.0 / d1v + kd
    inv_til = 1.0 / d2v - kd
    if np.any(inv_hat <= 0):
        raise InfeasibleConstruction("D1^{-1} + diag(A,B) lost positivity")
    if np.any(inv_til <= 0):
        raise InfeasibleConstruction("D2^{-1} - diag(A,B) lost positivity")
    return 1.0 / inv_hat, 1.0 / inv_til


def _construct_scheme(canon: CanonicalForm, d1v: np.ndarray, d2v: np.ndarray) -> AchievableScheme:
    l1 = canon.l1
    d1hat, d2til = _hat_til(canon, d1v, d2v)
    k_w_y2 = np.concatenate([d1hat[:l1], d2v[l1:]])
    k_w_y1 = np.concatenate([d1v[:l1], d2til[l1:]])
    k_wv_y2 = np.concatenate([pl.diag_min(d1hat[:l1], d2v[:l1]), d2v[l1:]])
    k_wu_y1 = np.concatenate([d1v[:l1], pl.diag_min(d1v[l1:], d2til[l1:])])
    scheme = AchievableScheme(
        k_w_y1=np.diag(k_w_y1),
        k_w_y2=np.diag(k_w_y2),
        k_wu_y1=np.diag(k_wu_y1),
        k_wv_y2=np.diag(k_wv_y2),
    )
    # The common message must be realizable from decoder 2's vantage point.
    if not pl.loewner_leq(scheme.k_w_y2, canon.k2c):
        raise InfeasibleConstruction("common-message covariance exceeds K_X_given_Y2")
    try:
        validate_scheme(canon, scheme)
    except SchemeInfeasible as exc:
        raise InfeasibleConstruction(str(exc)) from exc
    return scheme


def construct_scheme_mse(canon: CanonicalForm, spec: MseDiag) -> AchievableScheme:
    """Optimal test channels for componentwise MSE targets (diagonal conditionals)."""
    if not (is_diagonal(canon.k1c) and is_diagonal(canon.k2c)):
        raise MseRequiresDiagonal("MSE construction needs diagonal conditionals")
    d1v, d2v = distortion_diag_vectors(canon, spec)
    return _construct_scheme(canon, d1v, d2v)


def construct_scheme_sc(canon: CanonicalForm, spec: ScaledIdentity) -> AchievableScheme:
    """Optimal test channels for scaled-identity error-covariance targets."""
    d1v, d2v = distortion_diag_vectors(canon, spec)
    scheme = _construct_scheme(canon, d1v, d2v)
    # Either d1 <= d2 or d2 <= d1; verify the matching dominance argument for
    # G = K_{X|W,Y2} in whichever case applies.
    l1 = canon.l1
    d1hat, _ = _hat_til(canon, d1v, d2v)
    g_inv = 1.0 / np.concatenate([d1hat[:l1], d2v[l1:]])
    if spec.d1 <= spec.d2:
        floor = np.full(canon.k, 1.0 / spec.d2)
    else:
        floor = 1.0 / d1hat
    ok = np.all(g_inv >= floor * (1.0 - pl.PSD_RTOL))
    if not ok:
        raise InfeasibleConstruction("scaled-identity dominance case check failed")
    return scheme


def _closed_form(canon: CanonicalForm, d1v: np.ndarray, d2v: np.ndarray) -> RateReport:
    l1 = canon.l1
    d1hat, d2til = _hat_til(canon, d1v, d2v)
    min_l1 = pl.diag_min(d1hat[:l1], d2v[:l1])
    min_l2 = pl.diag_min(d1v[l1:], d2til[l1:])
    ld1 = pl.logdet_pd(canon.k1c, "K_X_given_Y1")
    ld2 = pl.logdet_pd(canon.k2c, "K_X_given_Y2")
    r1 = 0.5 * (ld1 - np.sum(np.log(d1v[:l1])) - np.sum(np.log(min_l2))) + 0.5 * (
        np.sum(np.log(d1hat[:l1])) - np.sum(np.log(min_l1))
    )
    r2 = 0.5 * (ld2 - np.sum(np.log(d2v[l1:])) - np.sum(np.log(min_l1))) + 0.5 * (
        np.sum(np.log(d2til[l1:])) - np.sum(np.log(min_l2))
    )
    return RateReport(
        r1=float(r1),
        r2=float(r2),
        components={
            "dhat1_upper": d1hat[:l1].tolist(),
            "dtil2_lower": d2til[l1:].tolist(),
            "binding_upper": min_l1.tolist(),
            "binding_lower": min_l2.tolist(),
        },
    )


def rate_mse_closed(canon: CanonicalForm, spec: MseDiag) -> RateReport:
    """Closed-form optimal rate for componentwise MSE targets."""
    if not (is_diagonal(canon.k1c) and is_diagonal(canon.k2c)):
        raise MseRequiresDiagonal("MSE closed form needs diagonal conditionals")
    d1v, d2v = distortion_diag_vectors(canon, spec)
    return _closed_form(canon, d1v, d2v)


def rate_sc_closed(canon: CanonicalForm, spec: ScaledIdentity) -> RateReport:
    """Closed-form optimal rate for scaled-identity targets."""
    d1v, d2v = distortion_diag_vectors(canon, spec)
    return _closed_form(canon, d1v, d2v)


def _rand_psd(rng: np.random.Generator, k: int, scale: float) -> np.ndarray:
    g = rng.normal(size=(k, k))
    return pl.symmetrize(scale * (g @ g.T) / k)


def _gamma_ok(spec: DistortionSpec, decoder: int, m: np.ndarray, d_diag) -> bool:
    if isinstance(spec, MseDiag):
        return bool(np.all(np.diag(m) <= d_diag + pl.PSD_RTOL))
    if isinstance(spec, ScaledIdentity):
        d = spec.d1 if decoder == 1 else spec.d2
        return pl.loewner_leq(m, d * np.eye(m.shape[0]))
    d = spec.d1 if decoder == 1 else spec.d2
    return float(np.trace(m)) <= d + pl.PSD_RTOL


def sample_feasible_scheme(
    canon: CanonicalForm, spec: DistortionSpec, rng: np.random.Generator
) -> AchievableScheme:
    """Draw a random feasible scheme by sampling increments and scaling them up.

    The private increments are scaled (bisection) until each decoder's
    distortion constraint holds, which is monotone in the scale factor.
    """
    k = canon.k
    p1 = pl.inv_pd(canon.k1c)
    p2 = pl.inv_pd(canon.k2c)
    if isinstance(spec, Trace):
        d_diag1 = d_diag2 = None
    else:
        d_diag1, d_diag2 = distortion_diag_vectors(canon, spec)

    s_w = _rand_psd(rng, k, scale=float(rng.uniform(0.1, 4.0)))
    base1 = p1 + s_w
    base2 = p2 + s_w
    out = []
    for decoder, base, d_diag in [(1, base1, d_diag1), (2, base2, d_diag2)]:
        s0 = _rand_psd(rng, k, scale=1.0) + 1e-3 * np.eye(k)

        def feasible(alpha: float) -> bool:
            m = pl.inv_pd(base + alpha * s0)
            return _gamma_ok(spec, decoder, m, d_diag)

        lo, hi = 0.0, 1.0
        while not feasible(hi):
            lo, hi = hi, hi * 2.0
            if hi > 1e12:
                raise InfeasibleConstruction("could not scale increment to feasibility")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        # Land strictly inside the feasible region.
        out.append((1.0 + rng.uniform(0.0, 1.0)) * hi * s0)
    s_u, s_v = out
    return AchievableScheme(
        k_w_y1=pl.inv_pd(base1),
        k_w_y2=pl.inv_pd(base2),
        k_wu_y1=pl.inv_pd(base1 + s_u),
        k_wv_y2=pl.inv_pd(base2 + s_v),
    )
