import numpy as np
import pytest

from hbrd import psdlinalg as pl
from hbrd.achievability import construct_scheme_mse, rate_mse_closed, rate_sc_closed
from hbrd.enhancement import build_enhanced
from hbrd.errors import FamilyMismatch, SingularCorrection
from hbrd.lower_bounds import (
    AuxTriple,
    BoundKind,
    BoundTag,
    SearchConfig,
    analytic_converse,
    check_feasible,
    mlb_inner_search,
    r_lo_pair,
    zero_aux,
)
from hbrd.model import MseDiag, Trace, canonicalize
from hbrd.trace_solver import SolverConfig, solve_minimax


def scheme_to_aux(canon, scheme):
    """Increments reproducing a constructed scheme's conditionals."""
    p1 = pl.inv_pd(canon.k1c)
    p2 = pl.inv_pd(canon.k2c)
    s_w = pl.inv_pd(scheme.k_w_y1) - p1
    s_u = pl.inv_pd(scheme.k_wu_y1) - pl.inv_pd(scheme.k_w_y1)
    s_v = pl.inv_pd(scheme.k_wv_y2) - pl.inv_pd(scheme.k_w_y2)
    return AuxTriple(s_w, s_u, s_v)


class TestRLoPair:
    def test_zero_increments(self, mismatched_mse):
        _, _, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        assert r_lo_pair(canon, kxy, zero_aux(canon.k)) == (0.0, 0.0)

    def test_construction_attains_closed_form(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        aux = scheme_to_aux(canon, construct_scheme_mse(canon, spec))
        r1, r2 = r_lo_pair(canon, kxy, aux)
        closed = rate_mse_closed(canon, spec)
        np.testing.assert_allclose(r1, closed.r1, atol=1e-9)
        np.testing.assert_allclose(r2, closed.r2, atol=1e-9)

    def test_no_private_refinement_drops_second_term(self, mismatched_mse):
        _, _, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        rng = np.random.default_rng(51)
        g = rng.normal(size=(2, 2))
        s_w = g @ g.T
        aux = AuxTriple(s_w, np.zeros((2, 2)), np.zeros((2, 2)))
        r1, _ = r_lo_pair(canon, kxy, aux)
        expect = pl.mutual_info_nats(canon.k1c, pl.inv_pd(pl.inv_pd(canon.k1c) + s_w))
        np.testing.assert_allclose(r1, expect, atol=1e-12)


class TestCheckFeasible:
    def test_construction_point_is_maximin_feasible(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        aux = scheme_to_aux(canon, construct_scheme_mse(canon, spec))
        rep = check_feasible(BoundKind(BoundTag.MLB, 1), canon, kxy, aux, spec)
        assert rep.feasible

    def test_zero_increments_infeasible_for_strict_targets(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        rep = check_feasible(
            BoundKind(BoundTag.MLB, 1), canon, kxy, zero_aux(canon.k), spec
        )
        assert not rep.feasible
        assert rep.violations

    def test_maximin_implies_enhanced_sets(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        rng = np.random.default_rng(52)
        from hbrd.lower_bounds import _project_feasible

        checked = 0
        while checked < 30:
            g = lambda: pl.symmetrize(
                (lambda m: m @ m.T)(rng.normal(size=(2, 2))) / 2
            )
            aux = _project_feasible(
                BoundKind(BoundTag.MLB, 1),
                canon,
                kxy,
                AuxTriple(g(), g() + 1e-3 * np.eye(2), g() + 1e-3 * np.eye(2)),
                spec,
            )
            if aux is None:
                continue
            checked += 1
            for tag in (BoundTag.E2LB, BoundTag.ELB):
                for branch in (1, 2):
                    rep = check_feasible(BoundKind(tag, branch), canon, kxy, aux, spec)
                    assert rep.feasible, (tag, branch, rep.violations)

    def test_objective_shared_across_kinds(self, mismatched_mse):
        # The bounds differ only through their feasible sets.
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        aux = scheme_to_aux(canon, construct_scheme_mse(canon, spec))
        pair = r_lo_pair(canon, kxy, aux)
        for tag in (BoundTag.ELB, BoundTag.E2LB, BoundTag.MLB):
            check_feasible(BoundKind(tag, 1), canon, kxy, aux, spec)
            assert r_lo_pair(canon, kxy, aux) == pair

    def test_singular_correction_reported(self, mixed_trace):
        _, spec, canon = mixed_trace
        # A much weaker Y than the canonical one makes the corrected
        # precision indefinite instead of being silently clamped.
        weak_y = 100.0 * np.eye(2)
        with pytest.raises(SingularCorrection):
            check_feasible(
                BoundKind(BoundTag.E2LB, 1), canon, weak_y, zero_aux(2), spec
            )


class TestAnalyticConverse:
    def test_matches_mse_closed_form(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        conv = analytic_converse(canon, spec)
        closed = rate_mse_closed(canon, spec)
        np.testing.assert_allclose(conv.r, closed.r, atol=1e-10)

    def test_matches_sc_closed_form(self, mixed_sc):
        _, spec, canon = mixed_sc
        conv = analytic_converse(canon, spec)
        closed = rate_sc_closed(canon, spec)
        np.testing.assert_allclose(conv.r, closed.r, atol=1e-10)

    def test_zero_at_boundary_targets(self):
        from hbrd.model import ProblemInstance

        inst = ProblemInstance(
            k_x_given_y1=np.diag([0.5, 0.5]), k_x_given_y2=np.diag([0.5, 0.5])
        )
        spec = MseDiag(d1=np.array([0.5, 0.5]), d2=np.array([0.5, 0.5]))
        canon = canonicalize(inst, spec)
        assert abs(analytic_converse(canon, spec).r) <= 1e-12

    def test_family_mismatch(self, mixed_trace):
        _, spec, canon = mixed_trace
        with pytest.raises(FamilyMismatch):
            analytic_converse(canon, spec)


class TestInnerSearch:
    def test_mse_minimax_search_reaches_closed_form(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        cfg = SearchConfig(seed=0, restarts=16, max_iterations=2000)
        res = mlb_inner_search(canon, kxy, spec, cfg)
        target = analytic_converse(canon, spec).r
        assert abs(res.value - target) <= 1e-3
        assert res.diagnostics["certified"] is False

    def test_boundary_targets_reach_zero(self):
        from hbrd.model import ProblemInstance

        inst = ProblemInstance(
            k_x_given_y1=np.diag([0.5, 0.5]), k_x_given_y2=np.diag([0.5, 0.5])
        )
        spec = MseDiag(d1=np.array([0.5, 0.5]), d2=np.array([0.5, 0.5]))
        canon = canonicalize(inst, spec)
        kxy = build_enhanced(canon).k_x_given_y
        cfg = SearchConfig(seed=0, restarts=4, max_iterations=600)
        res = mlb_inner_search(canon, kxy, spec, cfg)
        assert res.value <= 1e-6

    def test_trace_search_upper_bounds_structured_optimum(self, mixed_trace):
        _, spec, canon = mixed_trace
        kxy = build_enhanced(canon).k_x_given_y
        cfg = SearchConfig(seed=2, restarts=12, max_iterations=1500)
        res = mlb_inner_search(canon, kxy, spec, cfg)
        structured, _ = solve_minimax(canon, spec, SolverConfig(seed=0, restarts=24))
        assert res.value >= structured.r - 1e-3

    def test_deterministic_for_fixed_seed(self, mismatched_mse):
        _, spec, canon = mismatched_mse
        kxy = build_enhanced(canon).k_x_given_y
        cfg = SearchConfig(seed=5, restarts=3, max_iterations=400)
        a = mlb_inner_search(canon, kxy, spec, cfg)
        b = mlb_inner_search(canon, kxy, spec, cfg)
        assert a.value == b.value
