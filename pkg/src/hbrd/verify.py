"""Randomized property suites for the supporting matrix lemmas and bounds.

Each check draws seeded random configurations, tests an exact algebraic or
Loewner claim against an independent route (Schur-complement conditioning,
Monte-Carlo estimation, water-level bisection, or brute-force search), and
reports a ``PropertyResult``.  A passing suite has ``failures == 0`` and
``worst_violation`` below the per-check tolerance; all suites are
deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import psdlinalg as pl
from .achievability import rate_mse_closed, rate_sc_closed
from .enhancement import build_enhanced
from .errors import NoFeasiblePointFound, SingularCorrection
from .lower_bounds import (
    AuxTriple,
    BoundKind,
    BoundTag,
    SearchConfig,
    _project_feasible,
    analytic_converse,
    check_feasible,
    mlb_inner_search,
)
from .model import (
    CanonicalForm,
    DistortionSpec,
    MseDiag,
    ProblemInstance,
    ScaledIdentity,
    Trace,
    canonicalize,
)
from .trace_solver import SolverConfig, solve_minimax


@dataclass(frozen=True)
class PropertyResult:
    name: str
    trials: int
    failures: int
    worst_violation: float
    seed: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _rand_spd(rng: np.random.Generator, n: int, spread: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n))
    base = g @ g.T / n
    return pl.symmetrize(base + spread * np.diag(rng.uniform(0.1, 1.0, size=n)))


def check_diag_inverse_lemma(trials: int = 1000, seed: int = 0) -> PropertyResult:
    """[(M_diag)^-1 + A]^-1 >= ([M^-1 + A]^-1)_diag for diagonal A >= 0, M > 0.

    Zero entries of A are drawn with positive probability so the
    block-partitioned branch of the statement is exercised.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for _ in range(trials):
        m_dim = int(rng.integers(1, 6))
        m = _rand_spd(rng, m_dim)
        a = rng.uniform(0.0, 3.0, size=m_dim) * (rng.random(m_dim) < 0.7)
        lhs = np.diag(1.0 / (1.0 / np.diag(m) + a))
        rhs_full = pl.inv_pd(pl.inv_pd(m) + np.diag(a))
        gap = lhs - np.diag(np.diag(rhs_full))
        min_eig = float(np.linalg.eigvalsh(pl.symmetrize(gap))[0])
        worst = max(worst, -min_eig)
        if min_eig < -1e-9:
            failures += 1
    return PropertyResult("diag-inverse", trials, failures, worst, seed)


def _mixture_setup(rng: np.random.Generator, n: int):
    """Random ambient (X, Z, Zhat) precisions plus a two-component mixture W."""
    k_x = _rand_spd(rng, n)
    p_x = pl.inv_pd(k_x)
    a_z = rng.normal(size=(n, n))
    s_z = pl.symmetrize(a_z.T @ pl.inv_pd(_rand_spd(rng, n)) @ a_z)
    a_hat = rng.normal(size=(n, n))
    k_nhat = _rand_spd(rng, n)
    s_hat = pl.symmetrize(a_hat.T @ pl.inv_pd(k_nhat) @ a_hat)
    p_z = p_x + s_z
    sigma = [_rand_spd(rng, n, spread=2.0), _rand_spd(rng, n, spread=2.0)]
    branch_err_z = [pl.inv_pd(p_z + pl.inv_pd(s)) for s in sigma]
    d_avg = pl.symmetrize(0.5 * (branch_err_z[0] + branch_err_z[1]))
    return k_x, p_x, s_z, a_hat, k_nhat, s_hat, p_z, sigma, d_avg


def check_variance_drop(
    trials: int = 500,
    seed: int = 0,
    mc_trials: int = 3,
    mc_samples: int = 100_000,
) -> PropertyResult:
    """Gaussian auxiliaries maximize the refined error covariance.

    Per trial:
    (a) the linear-estimate precision identity
        K_{(X|Xhat,Zhat)_L}^{-1} = K_{X|W,Z}^{-1} + K_{X|Zhat}^{-1} - K_X^{-1}
        is verified against an independent Schur-complement computation
        (relative 1e-8);
    (b) a Gaussian auxiliary matched to a two-component mixture has a larger
        refined error covariance (Loewner, 1e-8), with exact equality when
        both auxiliaries are Gaussian with the same increment.

    On ``mc_trials`` of the trials the mixture's refined error covariance is
    re-estimated by Monte Carlo (the independent oracle), entrywise within
    three standard errors.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for trial in range(trials):
        n = int(rng.integers(1, 4))
        k_x, p_x, s_z, a_hat, k_nhat, s_hat, p_z, sigma, d_avg = _mixture_setup(rng, n)

        # (a) identity, Gaussian W via a full-rank square observation.
        a_w = rng.normal(size=(n, n))
        s_w = pl.symmetrize(a_w.T @ pl.inv_pd(_rand_spd(rng, n)) @ a_w)
        err_wz = pl.inv_pd(p_z + s_w)
        k_xhat = pl.symmetrize(k_x - err_wz)
        top = np.block([[k_xhat, k_x @ a_hat.T]])
        gram = np.block(
            [
                [k_xhat, k_xhat @ a_hat.T],
                [a_hat @ k_xhat, a_hat @ k_x @ a_hat.T + k_nhat],
            ]
        )
        k_lin = pl.symmetrize(k_x - top @ np.linalg.solve(gram, top.T))
        lhs = pl.inv_pd(k_lin)
        rhs = pl.inv_pd(err_wz) + s_hat
        rel = float(np.max(np.abs(lhs - rhs))) / max(1.0, pl.spectral_norm(rhs))
        worst = max(worst, rel)
        ok = rel <= 1e-8

        # (b) matched Gaussian vs two-component mixture.
        s_gauss = pl.symmetrize(pl.inv_pd(d_avg) - p_z)
        refined_mix = pl.symmetrize(
            0.5
            * (
                pl.inv_pd(p_z + pl.inv_pd(sigma[0]) + s_hat)
                + pl.inv_pd(p_z + pl.inv_pd(sigma[1]) + s_hat)
            )
        )
        refined_gauss = pl.inv_pd(p_z + s_gauss + s_hat)
        min_eig = float(np.linalg.eigvalsh(pl.symmetrize(refined_gauss - refined_mix))[0])
        worst = max(worst, -min_eig)
        ok &= min_eig >= -1e-8

        if trial < mc_trials:
            est, se = _mc_mixture_refined(
                rng, k_x, p_x, s_z, a_hat, k_nhat, sigma, mc_samples
            )
            dev = np.abs(est - refined_mix)
            ok &= bool(np.all(dev <= 3.0 * se + 1e-12))
            worst = max(worst, float(np.max(dev - 3.0 * se)))
        if not ok:
            failures += 1
    return PropertyResult("variance-drop", trials, failures, worst, seed)


def _mc_mixture_refined(rng, k_x, p_x, s_z, a_hat, k_nhat, sigma, n_samples):
    """Monte-Carlo estimate of the mixture auxiliary's refined error covariance.

    The coarse channel enters through a square-root observation realizing the
    increment s_z; the branch label is part of the auxiliary, so the
    per-sample conditional mean is the Gaussian one of the active branch.
    """
    n = k_x.shape[0]
    lx = np.linalg.cholesky(k_x + 1e-12 * np.eye(n))
    x = rng.normal(size=(n_samples, n)) @ lx.T
    branch = rng.integers(0, 2, size=n_samples)
    m_z = pl.sqrt_psd(s_z)
    s_hat = pl.symmetrize(a_hat.T @ np.linalg.solve(k_nhat, a_hat))
    errs = np.empty((n_samples, n))
    for b in (0, 1):
        idx = np.nonzero(branch == b)[0]
        if idx.size == 0:
            continue
        sig_inv = pl.inv_pd(sigma[b])
        cov = pl.inv_pd(p_x + sig_inv + s_z + s_hat)
        xg = x[idx]
        g = xg + rng.normal(size=(idx.size, n)) @ np.linalg.cholesky(sigma[b]).T
        z = xg @ m_z.T + rng.normal(size=(idx.size, n))
        zh = xg @ a_hat.T + rng.normal(size=(idx.size, n)) @ np.linalg.cholesky(k_nhat).T
        score = g @ sig_inv + z @ m_z + zh @ np.linalg.solve(k_nhat, a_hat)
        errs[idx] = xg - score @ cov.T
    outer = errs[:, :, None] * errs[:, None, :]
    est = pl.symmetrize(outer.mean(axis=0))
    se = outer.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return est, se


def check_corollary_enhanced_distortion(trials: int = 500, seed: int = 0) -> PropertyResult:
    """K_{X|W,Z} = D implies K_{X|W,Ztil} <= (D^-1 + K_{X|Ztil}^-1 - K_{X|Z}^-1)^-1.

    The refined side information Ztil is physically degraded into Z
    (Z = C Ztil + noise) so the Markov chain holds by construction; both
    conditionals are computed by Schur complements, independently of the
    precision-increment algebra being tested.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    for trial in range(trials):
        n = int(rng.integers(1, 4))
        k_x = _rand_spd(rng, n)
        a = rng.normal(size=(n, n))
        k_n1 = _rand_spd(rng, n)
        c = rng.normal(size=(n, n))
        k_n2 = _rand_spd(rng, n)

        cov_zt = a @ k_x @ a.T + k_n1
        cov_x_zt = k_x @ a.T
        k_x_zt = pl.symmetrize(k_x - cov_x_zt @ np.linalg.solve(cov_zt, cov_x_zt.T))
        cov_z = c @ cov_zt @ c.T + k_n2
        cov_x_z = cov_x_zt @ c.T
        k_x_z = pl.symmetrize(k_x - cov_x_z @ np.linalg.solve(cov_z, cov_x_z.T))

        p_zt = pl.inv_pd(k_x_zt)
        p_z = pl.inv_pd(k_x_z)

        # Mixture auxiliary with matched coarse error covariance D.
        sigma = [_rand_spd(rng, n, spread=2.0), _rand_spd(rng, n, spread=2.0)]
        d = pl.symmetrize(
            0.5 * (pl.inv_pd(p_z + pl.inv_pd(sigma[0])) + pl.inv_pd(p_z + pl.inv_pd(sigma[1])))
        )
        d_til = pl.inv_pd(pl.inv_pd(d) + p_zt - p_z)
        refined_mix = pl.symmetrize(
            0.5
            * (pl.inv_pd(p_zt + pl.inv_pd(sigma[0])) + pl.inv_pd(p_zt + pl.inv_pd(sigma[1])))
        )
        min_eig = float(np.linalg.eigvalsh(pl.symmetrize(d_til - refined_mix))[0])
        worst = max(worst, -min_eig)
        ok = min_eig >= -1e-8

        # Gaussian auxiliary achieving D exactly: equality within 1e-9.
        s_w = pl.symmetrize(pl.inv_pd(d) - p_z)
        refined_gauss = pl.inv_pd(p_zt + s_w)
        gap = float(np.max(np.abs(refined_gauss - d_til)))
        rel = gap / max(1.0, pl.spectral_norm(d_til))
        worst = max(worst, rel if rel > 1e-9 else 0.0)
        ok &= rel <= 1e-9
        if not ok:
            failures += 1
    return PropertyResult("corollary-enhanced-distortion", trials, failures, worst, seed)


def _sample_mlb_feasible(
    canon: CanonicalForm,
    k_x_given_y: np.ndarray,
    spec: DistortionSpec,
    rng: np.random.Generator,
) -> AuxTriple | None:
    k = canon.k
    g = lambda s: pl.symmetrize(s @ s.T / k)
    aux = AuxTriple(
        g(rng.normal(size=(k, k)) * rng.uniform(0.2, 2.0)),
        g(rng.normal(size=(k, k))) + 1e-3 * np.eye(k),
        g(rng.normal(size=(k, k))) + 1e-3 * np.eye(k),
    )
    return _project_feasible(
        BoundKind(BoundTag.MLB, 1), canon, k_x_given_y, aux, spec
    )


def check_bound_ordering(
    instances: list[tuple[CanonicalForm, DistortionSpec]],
    seed: int = 0,
    triples: int = 500,
    search_restarts: int = 10,
    search_iterations: int = 1500,
    search_tol: float = 1e-3,
    search_instances: int | None = 2,
) -> PropertyResult:
    """Feasible-set inclusions and monotonicity of the inner-infimum estimates.

    (i) every maximin-feasible triple is enhanced-enhancement feasible and
        enhancement feasible, on ``triples`` random draws per instance;
    (ii) per-branch search estimates are monotone across the three nested
         sets, and the enhanced-enhancement / maximin estimates match the
         closed form within ``search_tol`` on MSE / scaled-identity
         instances (where those two bounds are exactly the optimum; the
         enhancement bound is weaker and only the ordering is required).
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    total = 0
    for inst_idx, (canon, spec) in enumerate(instances):
        kxy = build_enhanced(canon).k_x_given_y
        for _ in range(triples):
            total += 1
            aux = _sample_mlb_feasible(canon, kxy, spec, rng)
            if aux is None:
                failures += 1
                continue
            ok = True
            for tag in (BoundTag.E2LB, BoundTag.ELB):
                for branch in (1, 2):
                    try:
                        rep = check_feasible(
                            BoundKind(tag, branch), canon, kxy, aux, spec
                        )
                    except SingularCorrection:
                        ok = False
                        break
                    ok &= rep.feasible
            if not ok:
                failures += 1

        if search_instances is not None and inst_idx >= search_instances:
            continue
        estimates = {}
        for tag in (BoundTag.ELB, BoundTag.E2LB, BoundTag.MLB):
            branch_vals = []
            for branch in (1, 2):
                cfg = SearchConfig(
                    seed=seed + 17 * inst_idx + branch,
                    restarts=search_restarts,
                    max_iterations=search_iterations,
                    kind=BoundKind(tag, branch),
                )
                try:
                    branch_vals.append(mlb_inner_search(canon, kxy, spec, cfg).value)
                except NoFeasiblePointFound:
                    branch_vals.append(float("inf"))
            estimates[tag] = max(branch_vals)
        total += 1
        gap1 = estimates[BoundTag.ELB] - estimates[BoundTag.E2LB]
        gap2 = estimates[BoundTag.E2LB] - estimates[BoundTag.MLB]
        mono_viol = max(gap1, gap2, 0.0)
        worst = max(worst, mono_viol)
        ok = mono_viol <= search_tol
        if not isinstance(spec, Trace):
            target = analytic_converse(canon, spec).r
            for tag in (BoundTag.E2LB, BoundTag.MLB):
                dev = abs(estimates[tag] - target)
                worst = max(worst, dev)
                ok &= dev <= search_tol
        if not ok:
            failures += 1
    return PropertyResult("bound-ordering", total, failures, worst, seed)


def reverse_waterfill_rate(eigenvalues: np.ndarray, budget: float) -> float:
    """Single-decoder trace-constrained rate by water-level bisection (nats)."""
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam <= 0) or budget <= 0:
        raise ValueError("eigenvalues and budget must be positive")
    if budget >= float(np.sum(lam)):
        return 0.0
    lo, hi = 0.0, float(np.max(lam))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.sum(np.minimum(lam, mid))) > budget:
            hi = mid
        else:
            lo = mid
    level = 0.5 * (lo + hi)
    alloc = np.minimum(lam, level)
    return float(0.5 * np.sum(np.log(lam / alloc)))


def _random_degraded(rng: np.random.Generator, kdim: int, rotated: bool):
    """Random instance with equal conditionals (rotated) or single-sign blocks."""
    kind = rng.integers(0, 2)
    base = np.sort(rng.uniform(0.3, 2.0, size=kdim))[::-1]
    if kind == 0:  # equal conditionals
        delta = np.zeros(kdim)
    else:  # decoder 2 uniformly stronger
        delta = rng.uniform(0.2, 2.0, size=kdim)
    k1_diag = base
    k2_diag = 1.0 / (1.0 / base + delta)
    if rotated:
        g = rng.normal(size=(kdim, kdim))
        q, _ = np.linalg.qr(g)
        k1 = pl.symmetrize(q @ np.diag(k1_diag) @ q.T)
        k2 = pl.symmetrize(q @ np.diag(k2_diag) @ q.T)
    else:
        k1 = np.diag(k1_diag)
        k2 = np.diag(k2_diag)
    return ProblemInstance(k_x_given_y1=k1, k_x_given_y2=k2), k1_diag, k2_diag, delta


def check_degraded_reduction(
    trials: int = 50,
    seed: int = 0,
    solver_cfg: SolverConfig | None = None,
) -> PropertyResult:
    """Degraded instances collapse to single-decoder rate-distortion values.

    Closed forms are compared against scalar formulas re-derived from scratch
    for an empty lower-right block (1e-10); the trace solver is compared
    against an independent reverse-water-filling bisection oracle (1e-4) on
    equal-conditional instances.
    """
    rng = np.random.default_rng(seed)
    cfg = solver_cfg or SolverConfig(seed=seed, restarts=12, max_iterations=1500)
    failures = 0
    worst = 0.0
    for trial in range(trials):
        kdim = int(rng.integers(1, 4))
        ok = True

        # Componentwise MSE collapse on a diagonal degraded instance.
        inst, k1d, k2d, delta = _random_degraded(rng, kdim, rotated=False)
        d1 = k1d * rng.uniform(0.3, 0.95, size=kdim)
        d2 = k2d * rng.uniform(0.3, 0.95, size=kdim)
        spec_mse = MseDiag(d1=d1, d2=d2)
        canon = canonicalize(inst, spec_mse)
        got = rate_mse_closed(canon, spec_mse)
        d1hat = 1.0 / (1.0 / d1 + delta)
        binding = np.minimum(d1hat, d2)
        want1 = 0.5 * float(np.sum(np.log(k1d / d1)) + np.sum(np.log(d1hat / binding)))
        want2 = 0.5 * float(np.sum(np.log(k2d / binding)))
        dev = max(abs(got.r1 - want1), abs(got.r2 - want2))
        worst = max(worst, dev)
        ok &= dev <= 1e-10

        # Scaled-identity collapse on a rotated degraded instance.
        inst_r, k1d_r, k2d_r, delta_r = _random_degraded(rng, kdim, rotated=True)
        s1 = float(np.min(k1d_r) * rng.uniform(0.3, 0.95))
        s2 = float(np.min(k2d_r) * rng.uniform(0.3, 0.95))
        spec_sc = ScaledIdentity(d1=s1, d2=s2)
        canon_r = canonicalize(inst_r, spec_sc)
        got_sc = rate_sc_closed(canon_r, spec_sc)
        d1hat_r = 1.0 / (1.0 / s1 + delta_r)
        binding_r = np.minimum(d1hat_r, s2)
        want1 = 0.5 * float(
            np.sum(np.log(k1d_r)) - kdim * np.log(s1) + np.sum(np.log(d1hat_r / binding_r))
        )
        want2 = 0.5 * float(np.sum(np.log(k2d_r)) - np.sum(np.log(binding_r)))
        dev = max(abs(got_sc.r1 - want1), abs(got_sc.r2 - want2))
        worst = max(worst, dev)
        ok &= dev <= 1e-10

        # Distortion at the feasibility boundary: zero rate.
        spec_edge = MseDiag(d1=k1d, d2=k2d)
        dev = abs(rate_mse_closed(canonicalize(inst, spec_edge), spec_edge).r)
        worst = max(worst, dev)
        ok &= dev <= 1e-10

        # Trace solver vs the bisection oracle on equal conditionals.
        lam = np.sort(rng.uniform(0.3, 2.0, size=kdim))
        g = rng.normal(size=(kdim, kdim))
        q, _ = np.linalg.qr(g)
        kc = pl.symmetrize(q @ np.diag(lam) @ q.T)
        inst_tr = ProblemInstance(k_x_given_y1=kc, k_x_given_y2=kc.copy())
        d_lo = float(lam[0] * rng.uniform(0.2, 0.9))
        d_hi = float(lam[0] * rng.uniform(0.2, 0.9))
        spec_tr = Trace(d1=d_lo, d2=d_hi)
        canon_tr = canonicalize(inst_tr, spec_tr)
        report, _ = solve_minimax(canon_tr, spec_tr, cfg)
        oracle = reverse_waterfill_rate(lam, min(d_lo, d_hi))
        dev = abs(report.r - oracle)
        worst = max(worst, dev)
        ok &= dev <= 1e-4

        if not ok:
            failures += 1
    return PropertyResult("degraded-reduction", trials, failures, worst, seed)
