"""Structured minimax program for trace-constrained distortion.

In canonical coordinates the feasible configurations are parameterized by
positive vectors

    w  (k entries)   diagonal of K_{X|W,Y1}
    u  (l2 entries)  lower-right diagonal of K_{X|W,U,Y1}
    v  (l1 entries)  upper-left diagonal of K_{X|W,V,Y2}

with w2_i = 1 / (1/w_i + K_ii) the induced diagonal of K_{X|W,Y2}.  The
constraint set is

    diag(1/w) >= K_{X|Y1,c}^{-1}   (a jointly Gaussian W must exist)
    u_i <= w_{l1+i},  v_i <= w2_i             (private refines common)
    sum(w[:l1]) + sum(u) <= d1                (decoder-1 trace budget)
    sum(v) + sum(w2[l1:]) <= d2               (decoder-2 trace budget)

and the branch objectives are

    R1 = 1/2 [ ln|K_{X|Y1}| - sum ln(1 + A_i w_i) - sum ln v - sum ln u ]
    R2 = 1/2 [ ln|K_{X|Y2}| - sum ln(1 - B_i w2_i) - sum ln v - sum ln u ].

Both objectives share the -1/2 sum ln u - 1/2 sum ln v term, so for fixed w
the optimal (u, v) is an exact capped water-fill allocation; each restart of
the solver therefore descends over log w only and completes (u, v) exactly,
which keeps the returned argmin exactly feasible.  The grid oracle
deliberately shares none of this structure: it exhaustively grids all of
(w, u, v) and refines locally.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import psdlinalg as pl
from .achievability import RateReport
from .errors import DimensionTooLarge, DomainViolation, NonConvergence
from .model import CanonicalForm, Trace, _freeze

# Objective value returned at infeasible penalty evaluations, plus slope.
_PENALTY_BASE = 1e3
_PENALTY_SLOPE = 1e4


@dataclass(frozen=True)
class TraceVars:
    """One candidate configuration of the structured program."""

    w: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        for name in ("w", "u", "v"):
            object.__setattr__(
                self, name, _freeze(np.atleast_1d(np.asarray(getattr(self, name), float)))
            )

    def flat(self) -> tuple:
        return tuple(np.concatenate([self.w, self.u, self.v]))


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    restarts: int = 64
    max_iterations: int = 4000
    tol: float = 1e-7  # objective tolerance of the reported optimum
    grid_resolution: int = 60

    def __post_init__(self) -> None:
        if min(self.restarts, self.max_iterations, self.grid_resolution) < 1:
            raise ValueError("config values must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class TraceFeasibility:
    feasible: bool
    violations: tuple[str, ...] = ()


class _Ctx:
    """Precomputed quantities shared by every objective evaluation."""

    def __init__(self, canon: CanonicalForm, spec: Trace):
        self.canon = canon
        self.spec = spec
        self.k = canon.k
        self.l1 = canon.l1
        self.l2 = canon.l2
        self.kd = canon.kdiag
        self.a = canon.a
        self.b = canon.b
        self.p1 = pl.inv_pd(canon.k1c, "K_X_given_Y1")
        self.p1_diag = np.diag(self.p1)
        self.ld1 = pl.logdet_pd(canon.k1c, "K_X_given_Y1")
        self.ld2 = pl.logdet_pd(canon.k2c, "K_X_given_Y2")
        self.lam_min_1 = float(np.linalg.eigvalsh(canon.k1c)[0])


def _check_shapes(canon: CanonicalForm, tv: TraceVars) -> None:
    if tv.w.shape[0] != canon.k or tv.u.shape[0] != canon.l2 or tv.v.shape[0] != canon.l1:
        raise DomainViolation(
            f"variable sizes (w={tv.w.shape[0]}, u={tv.u.shape[0]}, v={tv.v.shape[0]}) "
            f"do not match blocks (k={canon.k}, l2={canon.l2}, l1={canon.l1})"
        )


def trace_objectives(canon: CanonicalForm, tv: TraceVars) -> tuple[float, float]:
    """Branch rates (R1, R2) in nats at a variable assignment."""
    _check_shapes(canon, tv)
    if np.any(tv.w <= 0) or np.any(tv.u <= 0) or np.any(tv.v <= 0):
        raise DomainViolation("all variables must be strictly positive")
    l1 = canon.l1
    inv2 = 1.0 / tv.w + canon.kdiag
    if np.any(inv2 <= 0):
        raise DomainViolation("K_X_given_WY2 diagonal left the positive domain")
    w2 = 1.0 / inv2
    shared = -0.5 * (np.sum(np.log(tv.u)) + np.sum(np.log(tv.v)))
    r1 = 0.5 * (
        pl.logdet_pd(canon.k1c, "K_X_given_Y1") - np.sum(np.log1p(canon.a * tv.w[:l1]))
    )
    r2 = 0.5 * (
        pl.logdet_pd(canon.k2c, "K_X_given_Y2") - np.sum(np.log1p(-canon.b * w2[l1:]))
    )
    return float(r1 + shared), float(r2 + shared)


def check_trace_feasible(
    canon: CanonicalForm, tv: TraceVars, spec: Trace, tol: float = pl.PSD_RTOL
) -> TraceFeasibility:
    """Exact membership test for the structured constraint set."""
    _check_shapes(canon, tv)
    violations = []
    l1 = canon.l1
    if np.any(tv.w <= 0) or np.any(tv.u <= 0) or np.any(tv.v <= 0):
        violations.append("variables must be strictly positive")
        return TraceFeasibility(False, tuple(violations))
    inv2 = 1.0 / tv.w + canon.kdiag
    if np.any(inv2 <= 0):
        violations.append("K_X_given_WY2 diagonal is not positive")
        return TraceFeasibility(False, tuple(violations))
    w2 = 1.0 / inv2

    gram = np.diag(1.0 / tv.w) - pl.inv_pd(canon.k1c)
    ev = np.linalg.eigvalsh(pl.symmetrize(gram))
    if ev.size and ev[0] < -tol * max(1.0, float(np.max(np.abs(ev)))):
        violations.append("no jointly Gaussian common message: diag(1/w) < K_X_given_Y1^-1")
    bad_u = np.nonzero(tv.u > tv.w[l1:] + tol * np.maximum(1.0, tv.w[l1:]))[0]
    if bad_u.size:
        violations.append(f"u exceeds the common-message diagonal at index {bad_u[0]}")
    bad_v = np.nonzero(tv.v > w2[:l1] + tol * np.maximum(1.0, w2[:l1]))[0]
    if bad_v.size:
        violations.append(f"v exceeds the common-message diagonal at index {bad_v[0]}")
    t1 = float(np.sum(tv.w[:l1]) + np.sum(tv.u))
    if t1 > spec.d1 + tol * max(1.0, spec.d1):
        violations.append(f"decoder 1 trace budget exceeded: {t1:.6g} > {spec.d1:.6g}")
    t2 = float(np.sum(tv.v) + np.sum(w2[l1:]))
    if t2 > spec.d2 + tol * max(1.0, spec.d2):
        violations.append(f"decoder 2 trace budget exceeded: {t2:.6g} > {spec.d2:.6g}")
    return TraceFeasibility(not violations, tuple(violations))


def _waterfill(caps: np.ndarray, budget: float) -> np.ndarray | None:
    """Maximize sum(log x) subject to 0 < x <= caps and sum(x) <= budget."""
    if caps.size == 0:
        return caps.copy()
    if budget <= 0:
        return None
    if float(np.sum(caps)) <= budget:
        return caps.copy()
    c = np.sort(caps)
    consumed = 0.0
    for j in range(c.size):
        level = (budget - consumed) / (c.size - j)
        if level <= c[j]:
            return np.minimum(caps, level)
        consumed += c[j]
    return caps.copy()


def _complete(ctx: _Ctx, w: np.ndarray):
    """Exact optimal (u, v, w2) given w, or None when w is infeasible."""
    if np.any(w <= 0):
        return None
    inv2 = 1.0 / w + ctx.kd
    if np.any(inv2 <= 0):
        return None
    w2 = 1.0 / inv2
    gram = np.diag(1.0 / w) - ctx.p1
    ev = np.linalg.eigvalsh(gram)
    if ev.size and ev[0] < -pl.PSD_RTOL * max(1.0, float(np.max(np.abs(ev)))):
        return None
    l1 = ctx.l1
    u = _waterfill(w[l1:], ctx.spec.d1 - float(np.sum(w[:l1])))
    v = _waterfill(w2[:l1], ctx.spec.d2 - float(np.sum(w2[l1:])))
    if u is None or v is None or np.any(u <= 0) or np.any(v <= 0):
        return None
    if ctx.l2 == 0 and float(np.sum(w[:l1])) > ctx.spec.d1 * (1 + pl.PSD_RTOL):
        return None
    if l1 == 0 and float(np.sum(w2)) > ctx.spec.d2 * (1 + pl.PSD_RTOL):
        return None
    return u, v, w2


def _objective(ctx: _Ctx, w: np.ndarray, which: str):
    comp = _complete(ctx, w)
    if comp is None:
        return None
    u, v, w2 = comp
    l1 = ctx.l1
    shared = -0.5 * (np.sum(np.log(u)) + np.sum(np.log(v)))
    r1 = float(0.5 * (ctx.ld1 - np.sum(np.log1p(ctx.a * w[:l1]))) + shared)
    if which == "r1":
        return r1
    r2 = float(0.5 * (ctx.ld2 - np.sum(np.log1p(-ctx.b * w2[l1:]))) + shared)
    if which == "r2":
        return r2
    return max(r1, r2)


def _infeasibility(ctx: _Ctx, w: np.ndarray) -> float:
    """Violation measure steering penalty evaluations back to feasibility."""
    pen = float(np.sum(np.maximum(-w, 0.0)))
    wpos = np.maximum(w, 1e-300)
    inv2 = 1.0 / wpos + ctx.kd
    pen += float(np.sum(np.maximum(-inv2, 0.0)))
    ev = np.linalg.eigvalsh(np.diag(1.0 / wpos) - ctx.p1)
    if ev.size:
        pen += max(0.0, -float(ev[0]))
    pen += max(0.0, float(np.sum(wpos[: ctx.l1])) - ctx.spec.d1)
    w2 = 1.0 / np.maximum(inv2, 1e-12)
    pen += max(0.0, float(np.sum(w2[ctx.l1 :])) - ctx.spec.d2)
    return pen


def _feasible_seed(ctx: _Ctx) -> np.ndarray:
    w = np.full(ctx.k, 0.5 * ctx.lam_min_1)
    for _ in range(200):
        if _complete(ctx, w) is not None:
            return w
        w = 0.5 * w
    raise NonConvergence("could not seed a feasible point; constraint set looks empty")


def _descend(ctx: _Ctx, which: str, cfg: SolverConfig):
    """Multi-start log-domain descent over w; returns (value, TraceVars, diagnostics)."""
    rng = np.random.default_rng(cfg.seed)
    w_seed = _feasible_seed(ctx)

    def penalized(x: np.ndarray) -> float:
        w = np.exp(x)
        val = _objective(ctx, w, which)
        if val is None:
            return _PENALTY_BASE + _PENALTY_SLOPE * _infeasibility(ctx, w)
        return val

    def improved(val: float, w: np.ndarray, incumbent) -> bool:
        if incumbent is None:
            return True
        if val < incumbent[0] - 1e-12:
            return True
        if val > incumbent[0] + 1e-12:
            return False
        # Numerically tied: prefer the lexicographically smaller variables.
        return tuple(w) < tuple(incumbent[1])

    best = None  # (value, w, restart)
    finals = []
    for restart in range(cfg.restarts):
        if restart == 0:
            w0 = w_seed
        else:
            w0 = np.exp(
                rng.uniform(
                    np.log(1e-3 * ctx.lam_min_1),
                    np.log(0.999 * ctx.lam_min_1),
                    size=ctx.k,
                )
            )
            if _complete(ctx, w0) is None:
                w0 = w_seed * np.exp(rng.uniform(-1.0, 0.5, size=ctx.k))
            if _complete(ctx, w0) is None:
                w0 = w_seed
        res = minimize(
            penalized,
            np.log(w0),
            method="Nelder-Mead",
            options=dict(
                maxiter=cfg.max_iterations, xatol=1e-12, fatol=1e-14, adaptive=True
            ),
        )
        w_fin = np.exp(res.x)
        val = _objective(ctx, w_fin, which)
        if val is None:
            continue
        finals.append(val)
        if improved(val, w_fin, best):
            best = (val, w_fin, restart)
    if best is None:
        raise NonConvergence(f"no restart converged to a feasible point ({which})")

    # Polish pass from the incumbent with a fresh simplex.
    res = minimize(
        penalized,
        np.log(best[1]),
        method="Nelder-Mead",
        options=dict(maxiter=cfg.max_iterations, xatol=1e-13, fatol=1e-15, adaptive=True),
    )
    w_pol = np.exp(res.x)
    val = _objective(ctx, w_pol, which)
    if val is not None and improved(val, w_pol, best):
        best = (val, w_pol, best[2])

    u, v, _ = _complete(ctx, best[1])
    tv = TraceVars(w=best[1], u=u, v=v)
    diagnostics = {
        "objective": which,
        "restarts": cfg.restarts,
        "feasible_restarts": len(finals),
        "restart_spread": float(max(finals) - min(finals)) if finals else 0.0,
        "best_restart": best[2],
        "seed": cfg.seed,
    }
    return best[0], tv, diagnostics


def solve_minimax(
    canon: CanonicalForm, spec: Trace, cfg: SolverConfig = SolverConfig()
) -> tuple[RateReport, TraceVars]:
    """Minimize max(R1, R2) over the structured constraint set."""
    t0 = time.perf_counter()
    ctx = _Ctx(canon, spec)
    val, tv, diag = _descend(ctx, "max", cfg)
    r1, r2 = trace_objectives(canon, tv)
    if abs(max(r1, r2) - val) > 1e-9:
        raise NonConvergence("re-evaluation residual at the argmin exceeds 1e-9")
    feas = check_trace_feasible(canon, tv, spec)
    if not feas.feasible:
        raise NonConvergence(f"argmin infeasible: {feas.violations}")
    w2 = 1.0 / (1.0 / tv.w + canon.kdiag)
    diag.update(
        {
            "elapsed_s": time.perf_counter() - t0,
            "trace_budget_1": float(np.sum(tv.w[: canon.l1]) + np.sum(tv.u)),
            "trace_budget_2": float(np.sum(tv.v) + np.sum(w2[canon.l1 :])),
        }
    )
    report = RateReport(r1=r1, r2=r2, components={"minimax": float(val)}, diagnostics=diag)
    return report, tv


def solve_maximin_swapped(
    canon: CanonicalForm, spec: Trace, cfg: SolverConfig = SolverConfig()
) -> RateReport:
    """Swapped order: max over branches of the branch-wise minimum."""
    t0 = time.perf_counter()
    ctx = _Ctx(canon, spec)
    v1, tv1, diag1 = _descend(ctx, "r1", cfg)
    v2, tv2, diag2 = _descend(ctx, "r2", cfg)
    value = max(v1, v2)
    diagnostics = {
        "elapsed_s": time.perf_counter() - t0,
        "branch_1": diag1,
        "branch_2": diag2,
        "argmin_1": {"w": tv1.w.tolist(), "u": tv1.u.tolist(), "v": tv1.v.tolist()},
        "argmin_2": {"w": tv2.w.tolist(), "u": tv2.u.tolist(), "v": tv2.v.tolist()},
    }
    return RateReport(
        r1=float(v1),
        r2=float(v2),
        components={"maximin_swapped": float(value)},
        diagnostics=diagnostics,
    )


def _grid_bounds(ctx: _Ctx):
    """Per-axis upper bounds implied by the diagonal necessary conditions."""
    spec, kd, l1 = ctx.spec, ctx.kd, ctx.l1
    w_hi = np.empty(ctx.k)
    for i in range(ctx.k):
        hi = 1.0 / ctx.p1_diag[i]
        if i < l1:
            hi = min(hi, spec.d1)
        else:
            hi = min(hi, 1.0 / (1.0 / spec.d2 - kd[i]))
        w_hi[i] = hi
    u_hi = np.minimum(w_hi[l1:], spec.d1)
    w2_hi = 1.0 / (1.0 / w_hi[:l1] + kd[:l1])
    v_hi = np.minimum(w2_hi, spec.d2)
    return w_hi, u_hi, v_hi


def _grid_eval(ctx: _Ctx, cols: list[np.ndarray]) -> np.ndarray:
    """Vectorized objective over stacked variable columns; +inf when infeasible."""
    k, l1, l2, spec = ctx.k, ctx.l1, ctx.l2, ctx.spec
    w = np.stack(cols[:k], axis=-1)
    u = np.stack(cols[k : k + l2], axis=-1) if l2 else np.zeros(w.shape[:-1] + (0,))
    v = np.stack(cols[k + l2 :], axis=-1) if l1 else np.zeros(w.shape[:-1] + (0,))
    inv2 = 1.0 / w + ctx.kd
    ok = np.all(inv2 > 0, axis=-1)
    w2 = 1.0 / np.where(inv2 > 0, inv2, 1.0)

    diff_diag = 1.0 / w - ctx.p1_diag
    ok &= np.all(diff_diag >= -pl.PSD_RTOL, axis=-1)
    if k == 2:
        off = ctx.p1[0, 1]
        ok &= diff_diag[..., 0] * diff_diag[..., 1] >= off * off * (1 - 1e-12)
    elif k > 2:
        raise DimensionTooLarge("grid oracle PSD test implemented for k <= 2")

    if l2:
        ok &= np.all(u <= w[..., l1:] * (1 + 1e-12), axis=-1)
    if l1:
        ok &= np.all(v <= w2[..., :l1] * (1 + 1e-12), axis=-1)
    ok &= w[..., :l1].sum(axis=-1) + u.sum(axis=-1) <= spec.d1 * (1 + pl.PSD_RTOL)
    ok &= v.sum(axis=-1) + w2[..., l1:].sum(axis=-1) <= spec.d2 * (1 + pl.PSD_RTOL)

    shared = -0.5 * (np.log(u).sum(axis=-1) + np.log(v).sum(axis=-1))
    f1 = 0.5 * (ctx.ld1 - np.log1p(ctx.a * w[..., :l1]).sum(axis=-1))
    f2 = 0.5 * (ctx.ld2 - np.log1p(-ctx.b * w2[..., l1:]).sum(axis=-1))
    val = np.maximum(f1, f2) + shared
    return np.where(ok, val, np.inf)


def grid_oracle(canon: CanonicalForm, spec: Trace, resolution: int = 60) -> RateReport:
    """Brute-force referee: exhaustive log-spaced grid plus local refinement.

    The returned value is attained at an exactly feasible point, so it upper
    bounds the true optimum and sits within the refined grid spacing of it.
    """
    ctx = _Ctx(canon, spec)
    k, l1, l2 = ctx.k, ctx.l1, ctx.l2
    nvars = k + l1 + l2
    if nvars > 5:
        raise DimensionTooLarge(f"{nvars} grid axes exceed the desk-scale cap of 5")
    w_hi, u_hi, v_hi = _grid_bounds(ctx)
    his = np.concatenate([w_hi, u_hi, v_hi])
    axes = [np.geomspace(h * 1e-4, h, resolution) for h in his]

    # Chunk over the first axis to bound memory.
    best_val, best_x = np.inf, None
    rest = np.meshgrid(*axes[1:], indexing="ij") if nvars > 1 else []
    for x0 in axes[0]:
        cols = [np.full(rest[0].shape if rest else (1,), x0)] + list(rest)
        val = _grid_eval(ctx, cols)
        j = int(np.argmin(val))
        if val.flat[j] < best_val:
            best_val = float(val.flat[j])
            best_x = np.array([c.flat[j] for c in cols])
    if best_x is None or not np.isfinite(best_val):
        raise NonConvergence("grid found no feasible point")

    span = float((1e4) ** (1.0 / max(resolution - 1, 1)))
    span = max(span, 1.05)
    x = best_x.copy()
    for _ in range(30):
        local = [
            np.geomspace(x[i] / span, min(x[i] * span, his[i]), 7) for i in range(nvars)
        ]
        grids = np.meshgrid(*local, indexing="ij")
        val = _grid_eval(ctx, list(grids))
        j = int(np.argmin(val))
        if val.flat[j] < best_val:
            best_val = float(val.flat[j])
            x = np.array([g.flat[j] for g in grids])
        span = max(span**0.7, 1.0 + 1e-7)

    tv = TraceVars(w=x[:k], u=x[k : k + l2], v=x[k + l2 :])
    r1, r2 = trace_objectives(canon, tv)
    return RateReport(
        r1=r1,
        r2=r2,
        components={"grid_value": best_val},
        diagnostics={"resolution": resolution, "axes": nvars},
    )
