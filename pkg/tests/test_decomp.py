import numpy as np
import pytest
from numpy.testing import assert_allclose

from tenslink.core.errors import ValidationError
from tenslink.decomp import (
    KruskalTensor,
    TuckerTensor,
    congruence_match,
    cp_als,
    cp_nonneg,
    cp_uniqueness_check,
    hooi,
    hosvd,
    kruskal_rank,
    mode_singular_values,
    reconstruct_kruskal,
    reconstruct_tucker,
)
from tenslink.decomp.cp import mttkrp, solve_normal_equations
from tenslink.core.tensor import khatri_rao, unfold
from tenslink.pipelines.synth import planted_cp, planted_tucker


def _fit(x, approx):
    return 1.0 - np.linalg.norm(x - approx) / np.linalg.norm(x)


class TestKruskalTensor:
    def test_from_factors_normalizes(self, rng):
        k = KruskalTensor.from_factors([rng.standard_normal((s, 3)) for s in (4, 5, 6)])
        assert np.all(np.diff(k.weights) <= 0)
        for f in k.factors:
            assert_allclose(np.linalg.norm(f, axis=0), 1.0)

    def test_from_factors_preserves_tensor(self, rng):
        raw = [rng.standard_normal((s, 2)) for s in (3, 4, 5)]
        expected = np.einsum("ir,jr,kr->ijk", *raw)
        assert_allclose(KruskalTensor.from_factors(raw).full(), expected, atol=1e-12)

    def test_invalid_weights_or_columns(self, rng):
        unit = [np.linalg.qr(rng.standard_normal((s, 2)))[0] for s in (3, 4)]
        KruskalTensor(np.array([2.0, 1.0]), tuple(unit))
        with pytest.raises(ValidationError, match="descending"):
            KruskalTensor(np.array([1.0, 2.0]), tuple(unit))
        with pytest.raises(ValidationError, match="nonnegative"):
            KruskalTensor(np.array([1.0, -1.0]), tuple(unit))
        with pytest.raises(ValidationError, match="non-unit"):
            KruskalTensor(np.array([2.0, 1.0]), (unit[0] * 2.0, unit[1]))

    def test_zero_weight_columns_are_unconstrained(self, rng):
        unit = [np.linalg.qr(rng.standard_normal((s, 2)))[0] for s in (3, 4)]
        loose = unit[1].copy()
        loose[:, 1] *= 5.0
        k = KruskalTensor(np.array([1.0, 0.0]), (unit[0], loose))
        assert_allclose(k.full(), np.outer(unit[0][:, 0], unit[1][:, 0]), atol=1e-12)

    def test_column_scaling_is_absorbed(self, rng):
        raw = [rng.standard_normal((s, 3)) for s in (3, 4, 5)]
        c = np.array([2.0, -0.5, 3.0])
        d = np.array([-1.5, 4.0, 0.25])
        scaled = [raw[0] * c, raw[1] * d, raw[2] / (c * d)]
        base = KruskalTensor.from_factors(raw)
        moved = KruskalTensor.from_factors(scaled)
        assert_allclose(moved.weights, base.weights, rtol=1e-12)
        for f, g in zip(moved.factors, base.factors):
            assert_allclose(f, g, atol=1e-12)
        assert_allclose(moved.full(), base.full(), atol=1e-12)

    def test_kruskal_reconstruction_matches_loops(self, rng):
        k = KruskalTensor.from_factors([rng.standard_normal((s, 2)) for s in (2, 3, 4)])
        expected = np.zeros(k.shape)
        for i, j, l in np.ndindex(*k.shape):
            expected[i, j, l] = sum(
                k.weights[r] * k.factors[0][i, r] * k.factors[1][j, r] * k.factors[2][l, r] for r in range(k.rank)
            )
        assert_allclose(reconstruct_kruskal(k), expected, atol=1e-12)

    def test_tucker_reconstruction_matches_loops(self, rng):
        core = rng.standard_normal((2, 3, 2))
        factors = tuple(rng.standard_normal((s, r)) for s, r in zip((3, 4, 2), core.shape))
        t = TuckerTensor(core, factors)
        expected = np.zeros(t.shape)
        for i, j, l in np.ndindex(*t.shape):
            for p, q, r in np.ndindex(*core.shape):
                expected[i, j, l] += core[p, q, r] * factors[0][i, p] * factors[1][j, q] * factors[2][l, r]
        assert_allclose(reconstruct_tucker(t), expected, atol=1e-12)

    def test_column_mismatch(self):
        with pytest.raises(ValidationError):
            KruskalTensor(np.ones(2), (np.ones((3, 2)), np.ones((3, 3))))

    def test_tucker_core_mismatch(self):
        with pytest.raises(ValidationError):
            TuckerTensor(np.ones((2, 2)), (np.ones((3, 2)), np.ones((3, 3))))


class TestTucker:
    def test_full_ranks_reproduce_input(self, rng):
        x = rng.standard_normal((4, 3, 5))
        t = hosvd(x, x.shape)
        assert_allclose(t.full(), x, atol=1e-10)

    def test_full_ranks_on_flat_shape(self, rng):
        x = rng.standard_normal((10, 2, 2))
        assert_allclose(hosvd(x, x.shape).full(), x, atol=1e-10)

    def test_truncation_bound_holds(self):
        rng = np.random.default_rng(7)
        violations = 0
        for _ in range(200):
            x = rng.standard_normal((5, 5, 5))
            ranks = rng.integers(1, 6, size=3)
            t = hosvd(x, ranks)
            bound = 0.0
            for n in range(3):
                mat = np.moveaxis(x, n, 0).reshape(5, -1)
                bound += float(np.sum(np.linalg.svd(mat, compute_uv=False)[ranks[n]:] ** 2))
            resid = float(np.sum((x - t.full()) ** 2))
            violations += resid > bound * (1 + 1e-10) + 1e-12
        assert violations == 0

    def test_factors_are_orthonormal(self, rng):
        t = hooi(rng.standard_normal((6, 5, 4)), (3, 2, 2))
        for f in t.factors:
            assert_allclose(f.T @ f, np.eye(f.shape[1]), atol=1e-10)

    def test_hooi_does_not_lose_fit(self, rng):
        x = rng.standard_normal((6, 5, 4))
        ranks = (2, 2, 2)
        assert _fit(x, hooi(x, ranks).full()) >= _fit(x, hosvd(x, ranks).full()) - 1e-10

    def test_planted_multilinear_rank_is_exact(self):
        t = planted_tucker((8, 7, 6), (2, 3, 2), seed=3)
        x = t.full()
        assert_allclose(hooi(x, (2, 3, 2)).full(), x, atol=1e-10)

    def test_bad_ranks(self, rng):
        with pytest.raises(ValidationError):
            hosvd(rng.standard_normal((3, 3)), (4, 1))
        with pytest.raises(ValidationError):
            hosvd(rng.standard_normal((3, 3)), (1,))

    def test_mode_singular_values(self, rng):
        x = rng.standard_normal((3, 4, 5))
        svals = mode_singular_values(x)
        assert [s.size for s in svals] == [3, 4, 5]
        for s in svals:
            assert_allclose(np.sum(s**2), np.sum(x**2))


class TestCP:
    def test_mttkrp_matches_definition(self, rng):
        x = rng.standard_normal((3, 4, 5))
        factors = [rng.standard_normal((s, 2)) for s in x.shape]
        assert_allclose(mttkrp(x, factors, 2), unfold(x, 2) @ khatri_rao(factors[2], factors[0]), atol=1e-12)

    def test_planted_rank_three_fit(self):
        truth = planted_cp((6, 7, 8), 3, seed=0)
        k = cp_als(truth.full(), 3, seed=0)
        assert 1.0 - np.linalg.norm(truth.full() - k.full()) / np.linalg.norm(truth.full()) > 0.999
        assert k.metadata["iterations"] >= 1

    def test_identifiable_models_are_recovered(self):
        good = checked = 0
        for seed in range(20):
            truth = planted_cp((6, 7, 8), 3, seed=seed)
            if not cp_uniqueness_check(truth).satisfied:
                continue
            checked += 1
            match = congruence_match(cp_als(truth.full(), 3, seed=seed), truth)
            good += match.mean_congruence >= 0.99
        assert checked >= 19
        assert good >= checked - 1

    def test_rank_must_be_positive(self, rng):
        with pytest.raises(ValidationError):
            cp_als(rng.standard_normal((3, 3, 3)), 0)

    def test_singular_normal_equations_are_ridged(self):
        v = np.array([[1.0, 1.0], [1.0, 1.0]])
        sol, ridged = solve_normal_equations(v, np.array([[1.0, 1.0]]))
        assert ridged
        assert np.all(np.isfinite(sol))

    def test_nonnegative_cp(self):
        truth = planted_cp((5, 6, 7), 2, seed=1, nonneg=True)
        x = truth.full()
        k = cp_nonneg(x, 2, seed=0)
        assert all(np.all(f >= 0) for f in k.factors)
        trace = np.asarray(k.metadata["objective_trace"])
        assert np.all(np.diff(trace) <= 1e-12)
        assert np.linalg.norm(x - k.full()) / np.linalg.norm(x) < 0.1

    def test_nonnegative_cp_recovers_components(self):
        for seed in range(10):
            truth = planted_cp((8, 9, 10), 3, seed=seed, nonneg=True)
            k = cp_nonneg(truth.full(), 3, seed=seed, max_iter=5000, tol=1e-14)
            assert congruence_match(k, truth).mean_congruence >= 0.95

    def test_nonnegative_cp_rejects_negative_data(self, rng):
        with pytest.raises(ValidationError):
            cp_nonneg(rng.standard_normal((3, 3, 3)), 2)


class TestUniqueness:
    def test_kruskal_rank(self):
        assert kruskal_rank(np.eye(3)) == 3
        assert kruskal_rank(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])) == 1
        assert kruskal_rank(np.array([[1.0, 0.0], [0.0, 0.0]])) == 0

    def test_kruskal_rank_column_limit(self):
        with pytest.raises(ValidationError):
            kruskal_rank(np.ones((10, 9)))

    def test_rank_one_is_unique(self):
        report = cp_uniqueness_check([np.ones((3, 1)), np.ones((4, 1)), np.ones((2, 1))])
        assert report.satisfied

    def test_repeated_columns_fail(self):
        a = np.ones((4, 2))
        report = cp_uniqueness_check([a, a, a])
        assert report.kruskal_ranks == (1, 1, 1)
        assert not report.satisfied
        assert report.threshold == 2 * 2 + 2

    def test_congruence_match_recovers_permutation(self):
        planted = planted_cp((5, 6, 7), 3, seed=2)
        truth = KruskalTensor(np.ones(3), planted.factors)
        perm = [2, 0, 1]
        flipped = [f[:, perm].copy() for f in truth.factors]
        flipped[0] *= -1
        flipped[1] *= -1
        est = KruskalTensor(np.ones(3), tuple(flipped))
        match = congruence_match(est, truth)
        assert match.permutation == tuple(perm)
        assert_allclose(match.congruences, 1.0, atol=1e-12)
        assert_allclose(match.scales, 1.0, atol=1e-12)
