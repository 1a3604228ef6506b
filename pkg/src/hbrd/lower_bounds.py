"""Evaluators and feasibility sets for the hierarchy of converse bounds.

Auxiliary triples (W, U, V) jointly Gaussian with the source are represented
by PSD precision increments (S_W, S_U, S_V): conditioning on W alongside any
base observation adds S_W to the conditional precision, so the Markov chain
(W, U, V) <-> X <-> (Y1, Y2, Y) and PSD-validity hold by construction.

The shared objective pair is

    R_lo1 = 1/2 ln(|K_{X|Y1}| / |K_{X|W,U,Y1}|) + 1/2 ln(|K_{X|W,U,Y}| / |K_{X|W,U,V,Y}|)
    R_lo2 = 1/2 ln(|K_{X|Y2}| / |K_{X|W,V,Y2}|) + 1/2 ln(|K_{X|W,V,Y}| / |K_{X|W,U,V,Y}|)

and the four bound kinds differ only in which conditionals their distortion
constraints inspect:

* enhancement (weakest): decoder constraints on enhanced-side conditionals,
* enhanced-enhancement: one true-side constraint plus a corrected enhanced
  constraint through (K_{X|W,U,V,Y}^{-1} - Ktil)^{-1} (resp. Khat),
* maximin / minimax (strongest): both constraints on true-side conditionals.

Only certified evaluators are exposed; the inner-infimum search is a
clearly-labeled heuristic upper estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize

from . import psdlinalg as pl
from .achievability import RateReport
from .errors import (
    FamilyMismatch,
    NoFeasiblePointFound,
    SingularCorrection,
)
from .model import (
    CanonicalForm,
    DistortionSpec,
    MseDiag,
    ScaledIdentity,
    Trace,
    _freeze,
    distortion_diag_vectors,
)


class BoundTag(str, Enum):
    ELB = "elb"
    E2LB = "e2lb"
    MLB = "mlb"
    MLB_TRACE = "mlb-trace"


@dataclass(frozen=True)
class BoundKind:
    tag: BoundTag
    branch: int = 1

    def __post_init__(self) -> None:
        if self.branch not in (1, 2):
            raise ValueError("branch must be 1 or 2")


@dataclass(frozen=True)
class AuxTriple:
    """PSD precision increments for the common and two private messages."""

    s_w: np.ndarray
    s_u: np.ndarray
    s_v: np.ndarray

    def __post_init__(self) -> None:
        for name in ("s_w", "s_u", "s_v"):
            object.__setattr__(
                self, name, _freeze(pl.check_psd(getattr(self, name), what=name))
            )


def zero_aux(k: int) -> AuxTriple:
    z = np.zeros((k, k))
    return AuxTriple(z, z, z)


def derived_conditionals(
    canon: CanonicalForm, k_x_given_y: np.ndarray, aux: AuxTriple
) -> dict[str, np.ndarray]:
    """All conditional covariances induced by an auxiliary triple."""
    p1 = pl.inv_pd(canon.k1c, "K_X_given_Y1")
    p2 = pl.inv_pd(canon.k2c, "K_X_given_Y2")
    py = pl.inv_pd(k_x_given_y, "K_X_given_Y")
    sw, su, sv = aux.s_w, aux.s_u, aux.s_v
    return {
        "w_y1": pl.inv_pd(p1 + sw),
        "w_y2": pl.inv_pd(p2 + sw),
        "wu_y1": pl.inv_pd(p1 + sw + su),
        "wv_y2": pl.inv_pd(p2 + sw + sv),
        "wu_y": pl.inv_pd(py + sw + su),
        "wv_y": pl.inv_pd(py + sw + sv),
        "wuv_y": pl.inv_pd(py + sw + su + sv),
    }


def r_lo_pair(
    canon: CanonicalForm, k_x_given_y: np.ndarray, aux: AuxTriple
) -> tuple[float, float]:
    """Gaussian evaluation of the shared converse objective pair (nats)."""
    c = derived_conditionals(canon, k_x_given_y, aux)
    r1 = pl.mutual_info_nats(canon.k1c, c["wu_y1"]) + pl.mutual_info_nats(
        c["wu_y"], c["wuv_y"]
    )
    r2 = pl.mutual_info_nats(canon.k2c, c["wv_y2"]) + pl.mutual_info_nats(
        c["wv_y"], c["wuv_y"]
    )
    return r1, r2


def _gamma_violation(spec: DistortionSpec, decoder: int, m: np.ndarray, d_diag) -> float:
    """Nonnegative amount by which decoder's distortion constraint is violated."""
    if isinstance(spec, MseDiag):
        return float(np.max(np.append(np.diag(m) - d_diag, 0.0)))
    if isinstance(spec, ScaledIdentity):
        d = spec.d1 if decoder == 1 else spec.d2
        ev = np.linalg.eigvalsh(pl.symmetrize(m - d * np.eye(m.shape[0])))
        return float(max(ev[-1], 0.0)) if ev.size else 0.0
    d = spec.d1 if decoder == 1 else spec.d2
    return float(max(np.trace(m) - d, 0.0))


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[str, ...] = ()


def _constraint_matrices(
    kind: BoundKind,
    canon: CanonicalForm,
    conds: dict[str, np.ndarray],
) -> list[tuple[int, np.ndarray, str]]:
    k_hat = np.diag(np.concatenate([canon.a, np.zeros(canon.l2)]))
    k_til = np.diag(np.concatenate([np.zeros(canon.l1), -canon.b]))

    def corrected(sub: np.ndarray, label: str) -> np.ndarray:
        prec = pl.inv_pd(conds["wuv_y"]) - sub
        ev = np.linalg.eigvalsh(pl.symmetrize(prec))
        if prec.shape[0] and ev[0] <= pl.PD_RTOL * max(1.0, float(ev[-1])):
            raise SingularCorrection(f"corrected precision for {label} is not PD")
        return pl.inv_pd(prec)

    tag, branch = kind.tag, kind.branch
    if tag in (BoundTag.MLB, BoundTag.MLB_TRACE):
        return [
            (1, conds["wu_y1"], "decoder1: K_X_given_WUY1"),
            (2, conds["wv_y2"], "decoder2: K_X_given_WVY2"),
        ]
    if tag is BoundTag.ELB:
        if branch == 1:
            return [
                (1, conds["wu_y1"], "decoder1: K_X_given_WUY1"),
                (2, conds["wuv_y"], "decoder2: K_X_given_WUVY"),
            ]
        return [
            (1, conds["wuv_y"], "decoder1: K_X_given_WUVY"),
            (2, conds["wv_y2"], "decoder2: K_X_given_WVY2"),
        ]
    if tag is BoundTag.E2LB:
        if branch == 1:
            return [
                (1, conds["wu_y1"], "decoder1: K_X_given_WUY1"),
                (2, corrected(k_til, "decoder 2"), "decoder2: corrected enhanced"),
            ]
        return [
            (1, corrected(k_hat, "decoder 1"), "decoder1: corrected enhanced"),
            (2, conds["wv_y2"], "decoder2: K_X_given_WVY2"),
        ]
    raise ValueError(f"unknown bound tag {tag}")


def check_feasible(
    kind: BoundKind,
    canon: CanonicalForm,
    k_x_given_y: np.ndarray,
    aux: AuxTriple,
    spec: DistortionSpec,
    tol: float = pl.PSD_RTOL,
) -> FeasibilityReport:
    """Evaluate exactly the named constraint set at an auxiliary triple."""
    conds = derived_conditionals(canon, k_x_given_y, aux)
    if isinstance(spec, Trace):
        d_diags = {1: None, 2: None}
    else:
        d1v, d2v = distortion_diag_vectors(canon, spec)
        d_diags = {1: d1v, 2: d2v}
    violations = []
    for decoder, m, label in _constraint_matrices(kind, canon, conds):
        v = _gamma_violation(spec, decoder, m, d_diags[decoder])
        if v > tol * max(1.0, pl.spectral_norm(m)):
            violations.append(f"{label} exceeds D{decoder} by {v:.3e}")
    return FeasibilityReport(feasible=not violations, violations=tuple(violations))


def analytic_converse(canon: CanonicalForm, spec: DistortionSpec) -> RateReport:
    """Closed-form converse value for the MSE / scaled-identity families.

    Recomputed through the enhancement route (the |I + A (D1)_{l1}| and
    |I - B [D2]_{l2}| determinants), independently of the achievability
    module's closed forms, which it provably equals.
    """
    if isinstance(spec, Trace):
        raise FamilyMismatch("trace constraints use the structured minimax program")
    d1v, d2v = distortion_diag_vectors(canon, spec)
    kd = canon.kdiag
    l1 = canon.l1
    inv_hat = 1.0 / d1v + kd
    inv_til = 1.0 / d2v - kd
    if np.any(inv_hat <= 0) or np.any(inv_til <= 0):
        raise FamilyMismatch("distortion targets violate the standing assumptions")
    d1hat = 1.0 / inv_hat
    d2til = 1.0 / inv_til
    shared = -0.5 * (
        np.sum(np.log(pl.diag_min(d1hat[:l1], d2v[:l1])))
        + np.sum(np.log(pl.diag_min(d1v[l1:], d2til[l1:])))
    )
    r1 = 0.5 * (
        pl.logdet_pd(canon.k1c) - np.sum(np.log1p(canon.a * d1v[:l1]))
    ) + shared
    r2 = 0.5 * (
        pl.logdet_pd(canon.k2c) - np.sum(np.log1p(-canon.b * d2v[l1:]))
    ) + shared
    return RateReport(r1=float(r1), r2=float(r2), components={"shared": float(shared)})


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the heuristic inner-infimum search."""

    seed: int = 0
    restarts: int = 32
    max_iterations: int = 2500
    kind: BoundKind | None = None  # None: minimax objective over the maximin set

    def __post_init__(self) -> None:
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be positive")


@dataclass(frozen=True)
class SearchResult:
    value: float
    aux: AuxTriple
    diagnostics: dict = field(default_factory=dict)


def _violation_of(
    kind: BoundKind,
    canon: CanonicalForm,
    k_x_given_y: np.ndarray,
    aux: AuxTriple,
    spec: DistortionSpec,
    decoder: int,
) -> float:
    if isinstance(spec, Trace):
        d_diag = None
    else:
        d1v, d2v = distortion_diag_vectors(canon, spec)
        d_diag = d1v if decoder == 1 else d2v
    conds = derived_conditionals(canon, k_x_given_y, aux)
    for dec, m, _ in _constraint_matrices(kind, canon, conds):
        if dec == decoder:
            return _gamma_violation(spec, decoder, m, d_diag)
    raise ValueError(f"no decoder-{decoder} constraint in {kind}")


def _project_feasible(
    kind: BoundKind,
    canon: CanonicalForm,
    k_x_given_y: np.ndarray,
    aux: AuxTriple,
    spec: DistortionSpec,
) -> AuxTriple | None:
    """Scale up private increments, one constraint at a time, until feasible.

    Each decoder's constraint is monotone in one private increment once the
    other is fixed; the decoder-1 constraint never depends on S_V alone, so
    projecting in the kind-appropriate order leaves earlier constraints
    satisfied.
    """
    eye = np.eye(canon.k)
    # (increment-name, decoder) in dependency order for this kind/branch.
    if kind.tag in (BoundTag.MLB, BoundTag.MLB_TRACE):
        order = [("s_u", 1), ("s_v", 2)]
    elif kind.branch == 1:
        order = [("s_u", 1), ("s_v", 2)]
    else:
        order = [("s_v", 2), ("s_u", 1)]

    current = aux
    for name, decoder in order:
        base = getattr(current, name)

        def scaled(alpha: float) -> AuxTriple:
            parts = {
                "s_w": current.s_w,
                "s_u": current.s_u,
                "s_v": current.s_v,
            }
            parts[name] = alpha * base + max(alpha - 1.0, 0.0) * 1e-3 * eye
            return AuxTriple(**parts)

        def violated(alpha: float) -> bool:
            try:
                return (
                    _violation_of(kind, canon, k_x_given_y, scaled(alpha), spec, decoder)
                    > 0.0
                )
            except SingularCorrection:
                return True

        if not violated(1.0):
            continue
        lo, hi = 1.0, 2.0
        while violated(hi):
            lo, hi = hi, hi * 2.0
            if hi > 1e10:
                return None
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if violated(mid):
                lo = mid
            else:
                hi = mid
        current = scaled(hi)
    try:
        if not check_feasible(kind, canon, k_x_given_y, current, spec).feasible:
            return None
    except SingularCorrection:
        return None
    return current


def mlb_inner_search(
    canon: CanonicalForm,
    k_x_given_y: np.ndarray,
    spec: DistortionSpec,
    cfg: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Best-effort multi-start search for an inner-infimum upper estimate.

    Minimizes the branch objective (or max of both, for the minimax set) over
    Cholesky-parameterized increments with a hinge penalty on constraint
    violation; the best candidate is projected back to exact feasibility, so
    the returned value is evaluated at a feasible triple.  This is an upper
    estimate of the true infimum; it is certified only where a closed form
    exists.
    """
    k = canon.k
    rows, cols = np.tril_indices(k)
    ntri = rows.size
    kind = cfg.kind if cfg.kind is not None else BoundKind(BoundTag.MLB_TRACE, 1)
    minimax_objective = cfg.kind is None
    # For a single branch the same-side private message can be lumped into the
    # common one without changing the objective or shrinking the feasible set,
    # so those searches run over two increments instead of three.
    lumped = not minimax_objective
    nblocks = 2 if lumped else 3

    def split(p: np.ndarray) -> AuxTriple:
        return AuxTriple(*increments_from(p))

    if isinstance(spec, Trace):
        d_diags = {1: None, 2: None}
    else:
        d1v, d2v = distortion_diag_vectors(canon, spec)
        d_diags = {1: d1v, 2: d2v}

    # Hot path: plain inverses/slogdets, no per-call eigendecompositions.
    # The increments guarantee the orderings that the public evaluators check.
    p1 = pl.inv_pd(canon.k1c, "K_X_given_Y1")
    p2 = pl.inv_pd(canon.k2c, "K_X_given_Y2")
    py = pl.inv_pd(k_x_given_y, "K_X_given_Y")
    ld1 = pl.logdet_pd(canon.k1c)
    ld2 = pl.logdet_pd(canon.k2c)
    k_hat = np.diag(np.concatenate([canon.a, np.zeros(canon.l2)]))
    k_til = np.diag(np.concatenate([np.zeros(canon.l1), -canon.b]))

    def increments_from(p: np.ndarray):
        nb = p.size // ntri
        low = np.zeros((nb, k, k))
        for blk in range(nb):
            low[blk][rows, cols] = p[blk * ntri : (blk + 1) * ntri]
        zero = np.zeros((k, k))
        sw = low[0] @ low[0].T
        if nb == 1:  # common message only
            return sw, zero, zero
        if nb == 2:  # branch mode: same-side private lumped into the common
            other = low[1] @ low[1].T
            if kind.branch == 1:
                return sw, zero, other
            return sw, other, zero
        return sw, low[1] @ low[1].T, low[2] @ low[2].T

    def penalized(p: np.ndarray, boost: float = 1.0) -> float:
        sw, su, sv = increments_from(p)
        prec_wu1 = p1 + sw + su
        prec_wv2 = p2 + sw + sv
        prec_wuy = py + sw + su
        prec_wvy = py + sw + sv
        prec_wuvy = py + sw + su + sv
        c_wu1 = np.linalg.inv(prec_wu1)
        c_wv2 = np.linalg.inv(prec_wv2)
        viol = 0.0
        tag = kind.tag
        if tag in (BoundTag.MLB, BoundTag.MLB_TRACE):
            mats = [(1, c_wu1), (2, c_wv2)]
        elif tag is BoundTag.ELB:
            c_wuvy = np.linalg.inv(prec_wuvy)
            mats = [(1, c_wu1), (2, c_wuvy)] if kind.branch == 1 else [
                (1, c_wuvy),
                (2, c_wv2),
            ]
        else:  # E2LB: corrected precisions stay PD for PSD increments
            if kind.branch == 1:
                corr = prec_wuvy - k_til
                if np.linalg.eigvalsh(corr)[0] <= 0:
                    return 1e6
                mats = [(1, c_wu1), (2, np.linalg.inv(corr))]
            else:
                corr = prec_wuvy - k_hat
                if np.linalg.eigvalsh(corr)[0] <= 0:
                    return 1e6
                mats = [(1, np.linalg.inv(corr)), (2, c_wv2)]
        for decoder, m in mats:
            viol += _gamma_violation(spec, decoder, m, d_diags[decoder])
        base = 0.0
        if minimax_objective or kind.branch == 1:
            r1 = 0.5 * (
                ld1
                - np.linalg.slogdet(c_wu1)[1]
                - np.linalg.slogdet(prec_wuy)[1]
                + np.linalg.slogdet(prec_wuvy)[1]
            )
            base = r1
        if minimax_objective or kind.branch == 2:
            r2 = 0.5 * (
                ld2
                - np.linalg.slogdet(c_wv2)[1]
                - np.linalg.slogdet(prec_wvy)[1]
                + np.linalg.slogdet(prec_wuvy)[1]
            )
            base = max(base, r2) if minimax_objective else r2
        return base + boost * (200.0 * viol + 2000.0 * viol * viol)

    def exact_value(aux: AuxTriple) -> float:
        pair = r_lo_pair(canon, k_x_given_y, aux)
        return max(pair) if minimax_objective else pair[kind.branch - 1]

    rng = np.random.default_rng(cfg.seed)
    zero = np.zeros((k, k))
    best: tuple[float, int, AuxTriple] | None = None
    values = []
    for restart in range(cfg.restarts):
        # Odd restarts search over the common message alone; the optimum of
        # the tight families needs no private refinement, and the reduced
        # space converges far more sharply.
        nb = 1 if restart % 2 else nblocks
        p0 = rng.normal(scale=1.5, size=nb * ntri)
        res = minimize(
            penalized,
            p0,
            method="Nelder-Mead",
            options=dict(
                maxiter=cfg.max_iterations,
                xatol=1e-10,
                fatol=1e-12,
                adaptive=True,
            ),
        )
        # Escalated penalty keeps the polish stage pinned to the boundary.
        res2 = minimize(
            lambda p: penalized(p, 100.0),
            res.x,
            method="Nelder-Mead",
            options=dict(
                maxiter=cfg.max_iterations,
                xatol=1e-11,
                fatol=1e-13,
                adaptive=True,
            ),
        )
        candidates = []
        for x in (res2.x, res.x):
            aux = split(x)
            candidates.append(aux)
            # The optimum often has trivial private refinements; try them zeroed.
            candidates.append(AuxTriple(aux.s_w, zero, zero))
        found = None
        for raw in candidates:
            cand = _project_feasible(kind, canon, k_x_given_y, raw, spec)
            if cand is None:
                continue
            val = exact_value(cand)
            if found is None or val < found[0]:
                found = (val, cand)
        if found is None:
            continue
        val, cand = found
        values.append(val)
        if best is None or (val, restart) < (best[0], best[1]):
            best = (val, restart, cand)
    if best is None:
        raise NoFeasiblePointFound(
            f"no feasible triple found in {cfg.restarts} restarts"
        )
    return SearchResult(
        value=best[0],
        aux=best[2],
        diagnostics={
            "certified": False,
            "restarts": cfg.restarts,
            "feasible_restarts": len(values),
            "spread": float(max(values) - min(values)) if values else 0.0,
            "seed": cfg.seed,
        },
    )
