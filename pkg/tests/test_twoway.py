import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tenslink.core.errors import IdentifiabilityError, ValidationError
from tenslink.twoway import (
    TwoWayFactorization,
    amari_index,
    blind_identify,
    column_congruence,
    cumulant_tensor,
    lagged_covariances,
    nmf,
    pca,
    smca,
)
from tenslink.twoway.nmf import nmf_objective
from tenslink.twoway.smca import _smooth_solve, apply_difference, difference_norm
from tenslink.twoway.sobi import joint_diagonalize


class TestFactorization:
    def test_column_mismatch(self):
        with pytest.raises(ValidationError):
            TwoWayFactorization(np.ones((3, 2)), np.ones((4, 3)), "x")

    def test_column_congruence(self, rng):
        truth = rng.standard_normal((6, 3))
        est = truth[:, [1, 2, 0]] * np.array([2.0, -1.0, 0.5])
        match = column_congruence(est, truth)
        assert match.permutation == (1, 2, 0)
        assert_allclose(match.scales, [2.0, -1.0, 0.5], atol=1e-12)
        assert_allclose(match.mean_congruence, 1.0, atol=1e-12)


class TestPCA:
    def test_residual_and_orthonormal_mixing(self, rng):
        x = rng.standard_normal((8, 20))
        fact = pca(x, 3)
        assert_allclose(fact.mixing.T @ fact.mixing, np.eye(3), atol=1e-12)
        assert_allclose(np.sum((x - fact.reconstruct()) ** 2), fact.objective_trace[0], rtol=1e-10)

    def test_rank_bounds(self, rng):
        with pytest.raises(ValidationError):
            pca(rng.standard_normal((3, 5)), 4)

    def test_orthogonal_columns(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        norms = np.array([3.0, 1.0, 2.0, 0.5])
        fact = pca(q * norms, 4)
        assert_allclose(fact.metadata["explained_variance"], [9.0, 4.0, 1.0, 0.25], rtol=1e-12)
        overlap = np.abs(fact.mixing.T @ q)
        assert_allclose(overlap, np.eye(4)[:, [0, 2, 1, 3]].T, atol=1e-12)
        assert fact.objective_trace[0] == pytest.approx(0.0, abs=1e-20)


class TestNMF:
    def test_rank_one_is_exact(self, rng):
        x = np.outer(rng.uniform(0.5, 1.5, 8), rng.uniform(0.5, 1.5, 12))
        fact = nmf(x, 1, seed=0)
        assert np.linalg.norm(x - fact.reconstruct()) / np.linalg.norm(x) < 1e-6

    def test_separable_factors_are_identified(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(size=(10, 3))
        a[:3] = np.eye(3)
        b = rng.uniform(size=(30, 3))
        b[:3] = np.eye(3)
        x = a @ b.T
        fits = [nmf(x, 3, seed=seed, max_iter=3000) for seed in range(5)]
        best = min(fits, key=lambda f: f.objective_trace[-1])
        assert column_congruence(best.sources, b).mean_congruence >= 0.99
        assert column_congruence(best.mixing, a).mean_congruence >= 0.99

    def test_orthogonality_penalty_form(self):
        a = np.ones((2, 2))
        x = np.zeros((2, 3))
        b = np.eye(3)[:, :2]
        assert nmf_objective(x, a, b, 0.0, 1.0) == pytest.approx(float(np.sum((a @ b.T) ** 2)))
        # BᵀB = 4I, so ‖BᵀB − I‖² = 2·9
        assert nmf_objective(x, np.zeros((2, 2)), 2.0 * b, 0.0, 0.5) == pytest.approx(9.0)

    def test_orthogonal_variant_decorrelates_sources(self, rng):
        x = rng.uniform(size=(10, 3)) @ rng.uniform(size=(3, 25))
        plain = nmf(x, 3, seed=3)
        ortho = nmf(x, 3, seed=3, orthogonal=True, orthogonality=5.0)
        def gap(f):
            g = f.sources.T @ f.sources
            d = np.sqrt(np.diag(g))
            return np.abs(g / np.outer(d, d) - np.eye(3)).max()
        assert ortho.method == "nmf-orthogonal"
        assert np.all(ortho.sources >= 0)
        assert gap(ortho) < gap(plain)

    def test_monotone_and_nonnegative(self, rng):
        x = rng.uniform(size=(10, 4)) @ rng.uniform(size=(4, 30))
        fact = nmf(x, 4, seed=0)
        assert np.all(fact.mixing >= 0) and np.all(fact.sources >= 0)
        assert np.all(np.diff(fact.objective_trace) <= 1e-9 * fact.objective_trace[0])

    def test_penalized_variants_stay_monotone(self, rng):
        x = rng.uniform(size=(10, 3)) @ rng.uniform(size=(3, 25))
        for kwargs in ({"sparsity": 0.5}, {"orthogonal": True, "orthogonality": 0.5}):
            fact = nmf(x, 3, seed=1, **kwargs)
            assert np.all(np.diff(fact.objective_trace) <= 1e-9 * fact.objective_trace[0])

    def test_sparsity_shrinks_sources(self, rng):
        x = rng.uniform(size=(10, 3)) @ rng.uniform(size=(3, 25))
        plain = nmf(x, 3, seed=2)
        sparse = nmf(x, 3, seed=2, sparsity=5.0)
        assert np.sum(sparse.sources) < np.sum(plain.sources)

    def test_negative_input(self, rng):
        with pytest.raises(ValidationError):
            nmf(rng.standard_normal((3, 4)), 2)


class TestSMCA:
    def test_square_difference_operator(self, rng):
        m = rng.standard_normal((6, 2))
        lmat = np.eye(6) - np.eye(6, k=1)
        assert_allclose(apply_difference(m), lmat @ m, atol=1e-14)
        assert difference_norm(np.ones((3, 1))) == pytest.approx(1.0)
        rhs = rng.standard_normal(6)
        assert_allclose(_smooth_solve(2.0, 0.7, rhs), np.linalg.solve(2.0 * np.eye(6) + 0.7 * lmat.T @ lmat, rhs), atol=1e-12)
        assert_allclose(_smooth_solve(2.0, 0.5, np.array([5.0])), [2.0])

    def test_no_penalty_matches_pca(self, rng):
        x = rng.standard_normal((12, 40))
        fact = smca(x, 2)
        assert_allclose(fact.objective_trace[-1], pca(x, 2).objective_trace[0], rtol=1e-8)

    def test_objective_nonincreasing(self, rng):
        x = rng.standard_normal((12, 40))
        trace = np.asarray(smca(x, 2, gamma1=1.0, gamma2=2.0).objective_trace)
        assert np.all(np.diff(trace) <= 1e-9 * trace[0])

    def test_smoothing_reduces_roughness(self, rng):
        t = np.linspace(0, 1, 60)
        x = np.outer(rng.standard_normal(10), np.sin(2 * np.pi * t)) + 0.3 * rng.standard_normal((10, 60))
        rough = smca(x, 1)
        smooth = smca(x, 1, gamma2=20.0)
        def roughness(f):
            return difference_norm(f.sources) / np.linalg.norm(f.sources)
        assert roughness(smooth) < roughness(rough)

    def test_negative_penalty(self, rng):
        with pytest.raises(ValidationError):
            smca(rng.standard_normal((4, 5)), 1, gamma1=-1.0)


class TestSecondOrderStatistics:
    def test_lagged_covariances(self, rng):
        x = rng.standard_normal((3, 100))
        c = lagged_covariances(x, [0, 1, 2])
        assert c.shape == (3, 3, 3)
        assert_allclose(c[:, :, 0], x @ x.T / 100)
        for k in range(3):
            assert_allclose(c[:, :, k], c[:, :, k].T)

    def test_white_noise_lags(self):
        x = np.random.default_rng(3).standard_normal((3, 10000))
        c = lagged_covariances(x, [0, 1, 5])
        assert_allclose(c[:, :, 0], np.eye(3), atol=0.1)
        assert np.abs(c[:, :, 1:]).max() < 0.1

    def test_lag_range(self, rng):
        with pytest.raises(ValidationError):
            lagged_covariances(rng.standard_normal((2, 10)), [10])
        with pytest.raises(ValidationError):
            lagged_covariances(rng.standard_normal((2, 10)), [])

    def test_joint_diagonalization_exact(self, rng):
        v, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        stack = np.array([v @ np.diag(rng.standard_normal(4)) @ v.T for _ in range(5)])
        _, rotated = joint_diagonalize(stack)
        off = rotated - np.array([np.diag(np.diag(m)) for m in rotated])
        assert np.max(np.abs(off)) < 1e-10

    def test_cumulant_symmetry(self, rng):
        q = cumulant_tensor(rng.exponential(size=(3, 500)))
        for perm in itertools.permutations(range(4)):
            assert_allclose(q.transpose(perm), q, atol=1e-12)

    def test_uniform_kurtosis(self):
        s = np.random.default_rng(6).uniform(-1.0, 1.0, size=(1, 200000))
        q = cumulant_tensor(s)
        assert q[0, 0, 0, 0] == pytest.approx(-1.2 * (1.0 / 3.0) ** 2, rel=0.1)

    def test_cumulant_of_gaussian_is_small(self, rng):
        q = cumulant_tensor(rng.standard_normal((2, 20000)))
        assert q.shape == (2, 2, 2, 2)
        assert np.max(np.abs(q)) < 0.2


class TestBlindIdentification:
    def test_ar_sources_are_separated(self, ar_sources):
        good = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            s = ar_sources(5000, seed)
            a = rng.standard_normal((4, 3))
            fact = blind_identify(a @ s, 3)
            good += amari_index(fact.mixing, a) < 0.05
        assert good >= 18

    def test_cumulant_statistic(self, rng):
        s = rng.uniform(-1.0, 1.0, size=(3, 5000))
        a = rng.standard_normal((3, 3))
        fact = blind_identify(a @ s, 3, statistic="cumulant")
        assert fact.method == "cumulant-jd"
        assert amari_index(fact.mixing, a) < 0.1

    def test_source_order_does_not_matter(self, ar_sources):
        rng = np.random.default_rng(21)
        s = ar_sources(5000, 21)
        a = rng.standard_normal((4, 3))
        perm = [2, 0, 1]
        permuted = blind_identify(a[:, perm] @ s[perm], 3)
        original = blind_identify(a @ s, 3)
        assert abs(amari_index(permuted.mixing, a[:, perm]) - amari_index(permuted.mixing, a)) < 1e-10
        assert abs(amari_index(permuted.mixing, a) - amari_index(original.mixing, a)) < 1e-8

    def test_white_sources_are_not_identifiable(self, rng):
        x = rng.standard_normal((2, 2)) @ rng.standard_normal((2, 5000))
        with pytest.raises(IdentifiabilityError):
            blind_identify(x, 2)

    def test_source_count_bounds(self, rng):
        with pytest.raises(ValidationError):
            blind_identify(rng.standard_normal((2, 100)), 3)


class TestAmariIndex:
    def test_zero_for_scaled_permutation(self, rng):
        a = rng.standard_normal((4, 3))
        est = a[:, [2, 0, 1]] * np.array([3.0, -0.5, 2.0])
        assert amari_index(est, a) < 1e-12

    def test_bounded(self, rng):
        value = amari_index(rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
        assert 0.0 <= value <= 1.0

    def test_rank_deficient(self, rng):
        a = rng.standard_normal((4, 1))
        with pytest.raises(ValidationError):
            amari_index(np.hstack([a, a]), rng.standard_normal((4, 2)))
