import numpy as np
import pytest

from hbrd import psdlinalg as pl
from hbrd.enhancement import build_enhanced, build_hat_observation
from hbrd.errors import MRequiresKx
from hbrd.model import ProblemInstance, ScaledIdentity, Trace, canonicalize

from conftest import rand_spd


class TestBuildEnhanced:
    def test_mixed_instance_values(self, mixed_trace):
        _, _, canon = mixed_trace
        enh = build_enhanced(canon)
        np.testing.assert_allclose(enh.k_hat, [2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(enh.k_tilde, [0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(
            pl.inv_pd(enh.k_x_given_y), np.diag([17 / 4, 9 / 4]), atol=1e-9
        )

    def test_equal_conditionals_degenerate(self):
        inst = ProblemInstance(k_x_given_y1=0.5 * np.eye(2), k_x_given_y2=0.5 * np.eye(2))
        canon = canonicalize(inst, Trace(d1=0.2, d2=0.2))
        enh = build_enhanced(canon)
        np.testing.assert_allclose(enh.k_hat, np.zeros(2), atol=1e-12)
        np.testing.assert_allclose(enh.k_tilde, np.zeros(2), atol=1e-12)
        np.testing.assert_allclose(enh.k_x_given_y, canon.k1c, atol=1e-12)

    def test_mismatched_instance_entrywise_min(self, mismatched_mse):
        _, _, canon = mismatched_mse
        enh = build_enhanced(canon)
        np.testing.assert_allclose(np.diag(enh.k_x_given_y), [0.25, 0.25], atol=1e-12)

    def test_enhanced_below_both_decoders(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            k = int(rng.integers(1, 5))
            inst = ProblemInstance(
                k_x_given_y1=rand_spd(rng, k), k_x_given_y2=rand_spd(rng, k)
            )
            lam1 = np.linalg.eigvalsh(inst.k_x_given_y1)[0]
            lam2 = np.linalg.eigvalsh(inst.k_x_given_y2)[0]
            canon = canonicalize(inst, ScaledIdentity(d1=0.5 * lam1, d2=0.5 * lam2))
            enh = build_enhanced(canon)
            assert pl.loewner_leq(enh.k_x_given_y, canon.k1c)
            assert pl.loewner_leq(enh.k_x_given_y, canon.k2c)

    def test_double_identity_on_random_instances(self):
        # Both precision expressions must reproduce the same enhanced Y.
        rng = np.random.default_rng(32)
        for _ in range(30):
            k = int(rng.integers(1, 5))
            inst = ProblemInstance(
                k_x_given_y1=rand_spd(rng, k), k_x_given_y2=rand_spd(rng, k)
            )
            lam1 = np.linalg.eigvalsh(inst.k_x_given_y1)[0]
            lam2 = np.linalg.eigvalsh(inst.k_x_given_y2)[0]
            canon = canonicalize(inst, ScaledIdentity(d1=0.5 * lam1, d2=0.5 * lam2))
            enh = build_enhanced(canon)
            via_1 = pl.inv_pd(canon.k1c) + np.diag(enh.k_hat)
            via_2 = pl.inv_pd(canon.k2c) + np.diag(enh.k_tilde)
            scale = max(1.0, pl.spectral_norm(via_1))
            assert np.max(np.abs(via_1 - via_2)) <= 1e-9 * scale


class TestObservationMatrix:
    def test_m_requires_source_covariance(self, mixed_sc):
        _, _, canon = mixed_sc
        with pytest.raises(MRequiresKx):
            build_enhanced(canon, require_m=True)

    def test_m_gram_residual(self, mixed_trace):
        inst, _, canon = mixed_trace
        enh = build_enhanced(canon, k_x=inst.k_x, require_m=True)
        t = pl.inv_pd(canon.k1c) - pl.inv_pd(np.eye(2)) + np.diag(enh.k_hat)
        np.testing.assert_allclose(enh.m @ enh.m, t, atol=1e-9)

    def test_m_on_random_instances(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            k = int(rng.integers(1, 4))
            k1 = rand_spd(rng, k)
            k2 = rand_spd(rng, k)
            k_x = k1 + k2 + rand_spd(rng, k)  # dominates both conditionals
            inst = ProblemInstance(k_x_given_y1=k1, k_x_given_y2=k2, k_x=k_x)
            lam1 = np.linalg.eigvalsh(k1)[0]
            lam2 = np.linalg.eigvalsh(k2)[0]
            canon = canonicalize(inst, ScaledIdentity(d1=0.5 * lam1, d2=0.5 * lam2))
            enh = build_enhanced(canon, k_x=k_x)
            k_xc = canon.q @ k_x @ canon.q.T
            t = pl.inv_pd(canon.k1c) - pl.inv_pd(k_xc) + np.diag(enh.k_hat)
            resid = np.max(np.abs(enh.m @ enh.m - t))
            assert resid <= 1e-9 * max(1.0, pl.spectral_norm(t))


class TestHatObservation:
    def test_decoder_1_reaches_enhanced(self, mixed_trace):
        _, _, canon = mixed_trace
        s = build_hat_observation(canon, 1)
        np.testing.assert_allclose(s, np.diag([2.0, 0.0]), atol=1e-12)
        out = pl.apply_increment(np.diag([4 / 9, 4 / 9]), s)
        np.testing.assert_allclose(out, np.diag([4 / 17, 4 / 9]), atol=1e-12)

    def test_decoder_2_reaches_same_point(self, mixed_trace):
        _, _, canon = mixed_trace
        s = build_hat_observation(canon, 2)
        np.testing.assert_allclose(s, np.diag([0.0, 1.0]), atol=1e-12)
        out = pl.apply_increment(np.diag([4 / 17, 4 / 5]), s)
        np.testing.assert_allclose(out, np.diag([4 / 17, 4 / 9]), atol=1e-12)

    def test_degraded_zero_increment(self):
        inst = ProblemInstance(k_x_given_y1=0.5 * np.eye(2), k_x_given_y2=0.5 * np.eye(2))
        canon = canonicalize(inst, Trace(d1=0.2, d2=0.2))
        s = build_hat_observation(canon, 1)
        np.testing.assert_allclose(s, np.zeros((2, 2)), atol=1e-12)

    def test_bad_decoder_index(self, mixed_trace):
        _, _, canon = mixed_trace
        with pytest.raises(ValueError):
            build_hat_observation(canon, 3)
