import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from tenslink.core.errors import ValidationError
from tenslink.core.tensor import unfold
from tenslink.decomp import hooi
from tenslink.linked import (
    MultiBlockSet,
    cca,
    cifa_matrix,
    cifa_tucker,
    cobe,
    cobe_residual_curve,
    concat_vertical,
    hopls_fit,
    hopls_predict,
    joint_bss,
    mcca_maxvar,
    mlcca,
    mlpls_fit,
    pvd,
    split_vertical,
    tensor_ica_fit,
    tensor_ica_unfolding,
)
from tenslink.linked.mlcca import rank_one_directions
from tenslink.pipelines.synth import planted_cp
from tenslink.twoway import pca


def _planted_linked(seed, n_blocks=4, rows=20, samples=200, common=2, individual=2, snr_db=20.0):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((samples, common))
    blocks = []
    for _ in range(n_blocks):
        clean = rng.standard_normal((rows, common)) @ shared.T
        clean += rng.standard_normal((rows, individual)) @ rng.standard_normal((samples, individual)).T
        sigma = np.sqrt(np.mean(clean**2) / 10 ** (snr_db / 10))
        blocks.append(clean + sigma * rng.standard_normal(clean.shape))
    return blocks, shared


class TestBlocks:
    def test_multiblock_set_checks_common_mode(self):
        MultiBlockSet((np.ones((3, 4)), np.ones((3, 5))))
        with pytest.raises(ValidationError):
            MultiBlockSet((np.ones((3, 4)), np.ones((2, 4))))
        with pytest.raises(ValidationError):
            MultiBlockSet((np.ones((3, 4)),))

    def test_concat_split(self, rng):
        blocks = [rng.standard_normal((r, 7)) for r in (2, 3, 4)]
        tall, index_map = concat_vertical(blocks)
        assert tall.shape == (9, 7)
        assert index_map == ((0, 2), (2, 5), (5, 9))
        for a, b in zip(split_vertical(tall, index_map), blocks):
            assert_array_equal(a, b)

    def test_concat_rejects_ragged_samples(self):
        with pytest.raises(ValidationError):
            concat_vertical([np.ones((2, 3)), np.ones((2, 4))])

    def test_joint_bss_shares_sources(self, rng):
        sources = rng.standard_normal((50, 3))
        blocks = [rng.standard_normal((r, 3)) @ sources.T for r in (4, 5)]
        result = joint_bss(blocks, 3)
        assert [m.shape for m in result.mixings] == [(4, 3), (5, 3)]
        for m, block in zip(result.mixings, blocks):
            assert_allclose(m @ result.sources.T, block, atol=1e-10)

    def test_joint_bss_unknown_solver(self, rng):
        with pytest.raises(ValidationError):
            joint_bss([rng.standard_normal((2, 5))] * 2, 1, method="ica")

    def test_tensor_ica_structure(self):
        x = planted_cp((5, 30, 4), 2, seed=4).full()
        result = tensor_ica_fit(x, 2, seed=0)
        assert_allclose(tensor_ica_unfolding(result), unfold(x, 2).T, atol=1e-5)
        assert_allclose(result.slice(1), x[:, :, 1], atol=1e-5)

    def test_single_subject_matches_pca(self, rng):
        x = rng.standard_normal((6, 20))
        result = tensor_ica_fit(x[:, :, None], 2, seed=0, tol=1e-14, max_iter=5000)
        resid = float(np.sum((x - result.model.full()[:, :, 0]) ** 2))
        assert resid == pytest.approx(pca(x, 2).objective_trace[0], rel=1e-6)

    def test_pvd_exact(self, rng):
        a, _ = np.linalg.qr(rng.standard_normal((8, 2)))
        b, _ = np.linalg.qr(rng.standard_normal((9, 3)))
        blocks = [a @ rng.standard_normal((2, 3)) @ b.T for _ in range(5)]
        result = pvd(blocks, (2, 3))
        for k, block in enumerate(blocks):
            assert_allclose(result.reconstruct(k), block, atol=1e-10)

    def test_pvd_rank_bounds(self, rng):
        with pytest.raises(ValidationError):
            pvd([rng.standard_normal((3, 3))] * 2, (4, 1))


class TestCorrelation:
    def test_mcca_matches_cca_for_two_blocks(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            latent = rng.standard_normal((2, 200))
            x = rng.standard_normal((3, 2)) @ latent + rng.standard_normal((3, 200))
            y = rng.standard_normal((4, 2)) @ latent + rng.standard_normal((4, 200))
            ref = cca(x, y).correlations[:2]
            got = mcca_maxvar([x, y], c=2).correlations
            assert_allclose(got, ref, atol=1e-8)

    def test_cca_perfect_dependence(self, rng):
        x = rng.standard_normal((3, 100))
        y = rng.standard_normal((3, 3)) @ x
        assert_allclose(cca(x, y).correlations, 1.0, atol=1e-10)

    def test_mcca_transform_reproduces_scores(self, rng):
        blocks = [rng.standard_normal((3, 80)) for _ in range(3)]
        result = mcca_maxvar(blocks, c=2)
        for k, block in enumerate(blocks):
            assert_allclose(result.transform(k, block), result.block_scores[k], atol=1e-10)

    def test_mcca_components_match_deflation(self, rng):
        blocks = [
            rng.standard_normal((3, 2)) @ rng.standard_normal((2, 150)) + rng.standard_normal((3, 150)) for _ in range(3)
        ]
        result = mcca_maxvar(blocks, c=2)
        g = result.common_scores
        assert_allclose(g.T @ g, np.eye(2), atol=1e-10)
        assert result.eigenvalues[0] >= result.eigenvalues[1]
        white = []
        for b in blocks:
            xc = b - b.mean(axis=1, keepdims=True)
            evals, evecs = np.linalg.eigh(xc @ xc.T)
            white.append((evecs / np.sqrt(evals)) @ evecs.T @ xc)
        stack = np.vstack(white)
        first = np.linalg.svd(stack)[2][0]
        second = np.linalg.svd(stack - np.outer(stack @ first, first))[2][0]
        assert abs(first @ g[:, 0]) == pytest.approx(1.0, abs=1e-8)
        assert abs(second @ g[:, 1]) == pytest.approx(1.0, abs=1e-8)

    def test_mcca_independent_blocks(self):
        rng = np.random.default_rng(9)
        blocks = [rng.standard_normal((4, 10000)) for _ in range(3)]
        assert mcca_maxvar(blocks).correlations[0] < 0.2

    def test_mlcca_two_matrices_matches_cca(self):
        rng = np.random.default_rng(10)
        latent = rng.standard_normal(500)
        x = np.outer(rng.standard_normal(3), latent) + 0.5 * rng.standard_normal((3, 500))
        y = np.outer(rng.standard_normal(4), latent) + 0.5 * rng.standard_normal((4, 500))
        pairs = mlcca(x, y, pairs=2)
        assert pairs[0].correlation == pytest.approx(cca(x, y).correlations[0], abs=1e-6)
        u1, u2 = pairs[0].x_scores, pairs[1].x_scores
        assert abs(u1 @ u2) < 1e-8 * np.linalg.norm(u1) * np.linalg.norm(u2)

    def test_mcca_validation(self, rng):
        with pytest.raises(ValidationError):
            mcca_maxvar([rng.standard_normal((3, 10))])
        with pytest.raises(ValidationError):
            mcca_maxvar([rng.standard_normal((3, 10))] * 2, c=4)

    def test_mlcca_planted_pair(self, rng):
        s = rng.standard_normal(200)
        u1, u2 = rng.standard_normal(3), rng.standard_normal(4)
        x = np.einsum("i,j,t->ijt", u1, u2, s) + 0.1 * rng.standard_normal((3, 4, 200))
        y = np.outer(rng.standard_normal(2), s) + 0.1 * rng.standard_normal((2, 200))
        pairs = mlcca(x, y, pairs=2)
        assert len(pairs) == 2
        assert pairs[0].correlation > 0.9
        assert all(p.correlation <= 1.0 for p in pairs)
        assert pairs[0].x_scores.shape == (200,)

    def test_mlcca_sample_mismatch(self, rng):
        with pytest.raises(ValidationError):
            mlcca(rng.standard_normal((2, 3, 10)), rng.standard_normal((2, 11)))


class TestRegression:
    def _data(self, rng):
        t = rng.standard_normal((2, 60))
        x = np.einsum("ijr,rt->ijt", rng.standard_normal((5, 4, 2)), t) + 0.01 * rng.standard_normal((5, 4, 60))
        y = rng.standard_normal((3, 2)) @ t + 0.01 * rng.standard_normal((3, 60))
        return x, y

    def test_hopls_fits_and_predicts(self, rng):
        x, y = self._data(rng)
        model = hopls_fit(x, y, pairs=2, ranks=(2, 2))
        assert model.n_stages == 2
        assert np.linalg.norm(model.fitted - y) / np.linalg.norm(y) < 0.1
        assert_allclose(hopls_predict(model, x), model.fitted, atol=1e-10)
        assert hopls_predict(model, x[:, :, 0]).shape == (3,)

    def test_vector_response(self, rng):
        x, y = self._data(rng)
        model = hopls_fit(x, y[0], pairs=2, ranks=(2, 2))
        assert model.fitted.shape == (60,)
        assert hopls_predict(model, x).shape == (60,)
        assert np.ndim(hopls_predict(model, x[:, :, 3])) == 0

    def test_mlpls_is_rank_one_hopls(self, rng):
        x, y = self._data(rng)
        a = mlpls_fit(x, y, 2)
        b = hopls_fit(x, y, 2, (1, 1), (1,))
        assert a.method == "mlpls" and b.method == "hopls"
        assert_allclose(a.fitted, b.fitted, atol=1e-8)
        for sa, sb in zip(a.stages, b.stages):
            assert_allclose(np.abs(sa.scores), np.abs(sb.scores), atol=1e-8)

    def test_power_method_finds_planted_rank_one(self, rng):
        vecs = [rng.standard_normal(s) for s in (4, 5, 3)]
        vecs = [v / np.linalg.norm(v) for v in vecs]
        z = 3.0 * np.einsum("i,j,k->ijk", *vecs) + 1e-3 * rng.standard_normal((4, 5, 3))
        found = rank_one_directions(z)
        for v, w in zip(found, vecs):
            assert abs(v @ w) > 0.999
        exact = rank_one_directions(np.einsum("i,j,k->ijk", *vecs))
        for v, w in zip(exact, vecs):
            assert abs(v @ w) == pytest.approx(1.0, abs=1e-12)

    def test_realizable_response_is_fit_exactly(self, rng):
        a, b = rng.standard_normal((5, 2)), rng.standard_normal((4, 2))
        t = rng.standard_normal((2, 40))
        x = np.einsum("ir,jr,rt->ijt", a, b, t)
        y = rng.standard_normal((3, 2)) @ t
        for model in (hopls_fit(x, y, 2, (2, 2)), mlpls_fit(x, y, 2)):
            assert np.linalg.norm(model.fitted - y) / np.linalg.norm(y) < 1e-6

    def test_held_out_error_beats_mean(self):
        rng = np.random.default_rng(11)
        load_x, load_y = rng.standard_normal((5, 4, 2)), rng.standard_normal((3, 2))
        t = rng.standard_normal((2, 90))
        x = np.einsum("ijr,rt->ijt", load_x, t) + 0.05 * rng.standard_normal((5, 4, 90))
        y = load_y @ t + 0.05 * rng.standard_normal((3, 90))
        model = hopls_fit(x[:, :, :60], y[:, :60], pairs=2, ranks=(2, 2))
        test_y = y[:, 60:]
        err = np.linalg.norm(hopls_predict(model, x[:, :, 60:]) - test_y)
        baseline = np.linalg.norm(test_y - model.y_mean[:, None])
        assert err < 0.5 * baseline

    def test_mean_input_predicts_mean_response(self, rng):
        x, y = self._data(rng)
        model = hopls_fit(x, y, pairs=2, ranks=(2, 2))
        assert_allclose(hopls_predict(model, model.x_mean), model.y_mean, atol=1e-12)
        centered = hopls_fit(x - x.mean(axis=-1, keepdims=True), y, pairs=2, ranks=(2, 2))
        assert_allclose(hopls_predict(centered, np.zeros(x.shape[:-1])), centered.y_mean, atol=1e-12)

    def test_predict_shape_check(self, rng):
        x, y = self._data(rng)
        model = hopls_fit(x, y, pairs=1, ranks=(1, 1))
        with pytest.raises(ValidationError):
            hopls_predict(model, np.ones((4, 5, 2)))


class TestCIFA:
    def test_common_subspace_recovery(self, principal_angles):
        good = 0
        for seed in range(20):
            blocks, shared = _planted_linked(seed)
            model = cifa_matrix(blocks, 2, 4)
            good += np.max(principal_angles(model.common_basis, shared)) < 0.05
        assert good >= 18

    def test_tucker_and_matrix_agree(self, principal_angles):
        blocks, _ = _planted_linked(3)
        flat = cifa_matrix(blocks, 2, 4)
        cubes = [b.T[:, :, None] for b in blocks]
        tucker = cifa_tucker(cubes, 2, (4, blocks[0].shape[0], 1))
        assert np.max(principal_angles(flat.common_basis, tucker.common_basis)) < 1e-6

    def test_reconstruction_parts(self):
        blocks, _ = _planted_linked(1)
        model = cifa_matrix(blocks, 2, 4)
        assert model.n_blocks == 4 and model.n_common == 2
        for k, block in enumerate(blocks):
            approx = model.common_component(k) + model.individual_component(k)
            assert_allclose(model.reconstruct(k), approx)
            assert np.linalg.norm(block - approx) / np.linalg.norm(block) < 0.2
            assert_allclose(model.common_basis.T @ model.individual_bases[k], 0.0, atol=1e-8)

    def test_tucker_reconstruction(self, rng):
        shared = rng.standard_normal((30, 1))
        blocks = []
        for _ in range(3):
            basis = np.hstack([shared, rng.standard_normal((30, 1))])
            core = rng.standard_normal((2, 2, 2))
            side = [rng.standard_normal((4, 2)), rng.standard_normal((5, 2))]
            blocks.append(np.einsum("abc,ia,jb,kc->ijk", core, basis, *side))
        model = cifa_tucker(blocks, 1, (2, 2, 2))
        assert model.is_tensor
        for k, block in enumerate(blocks):
            assert_allclose(model.reconstruct(k), block, atol=1e-8)

    def test_residual_curve_marks_common_count(self):
        blocks, _ = _planted_linked(5)
        curve = cobe_residual_curve(blocks, 3, ranks=[4] * 4)
        assert np.all(curve[:2] < 0.1)
        assert curve[2] > 1.0

    def test_cobe_basis_is_orthonormal(self):
        blocks, _ = _planted_linked(6)
        basis = cobe(blocks, 2, ranks=[4] * 4)
        assert_allclose(basis.T @ basis, np.eye(2), atol=1e-10)

    def test_planted_common_column(self):
        rng = np.random.default_rng(12)
        shared = rng.standard_normal(50)
        blocks = [
            np.outer(rng.standard_normal(6), shared) + rng.standard_normal((6, 2)) @ rng.standard_normal((2, 50))
            for _ in range(3)
        ]
        basis = cobe(blocks, 1)
        assert abs(basis[:, 0] @ shared) / np.linalg.norm(shared) >= 0.999

    def test_common_count_above_block_rank(self, rng):
        blocks = [rng.standard_normal((5, 2)) @ rng.standard_normal((2, 30)) for _ in range(3)]
        with pytest.raises(ValidationError, match="rank"):
            cobe(blocks, 3)

    def test_block_order_does_not_matter(self, principal_angles):
        blocks, _ = _planted_linked(4)
        forward = cobe(blocks, 2, ranks=[4] * 4)
        backward = cobe(blocks[::-1], 2, ranks=[4] * 4)
        assert np.max(principal_angles(forward, backward)) < 1e-8
        a = cifa_matrix(blocks, 2, 4)
        b = cifa_matrix(blocks[::-1], 2, 4)
        assert_allclose(a.residuals, b.residuals[::-1], atol=1e-8)

    def test_tucker_without_common_part_is_hooi(self, rng):
        blocks = [rng.standard_normal((6, 5, 4)) for _ in range(3)]
        model = cifa_tucker(blocks, 0, (3, 2, 2))
        for x, resid in zip(blocks, model.residuals):
            fit = hooi(x, (3, 2, 2))
            assert resid == pytest.approx(np.linalg.norm(x - fit.full()) / np.linalg.norm(x), abs=1e-8)

    def test_no_common_components(self):
        blocks, _ = _planted_linked(2)
        model = cifa_matrix(blocks, 0, 4)
        assert model.n_common == 0
        assert_allclose(model.common_component(0), 0.0)

    def test_common_count_bound(self):
        blocks, _ = _planted_linked(2)
        with pytest.raises(ValidationError):
            cifa_matrix(blocks, 5, 4)

    def test_other_subspace_solvers(self):
        blocks, _ = _planted_linked(8)
        nonneg = [np.abs(b) for b in blocks]
        model = cifa_matrix(nonneg, 1, 3, solver="nmf", seed=0)
        assert all(np.all(p >= 0) for p in model.individual_parts)
        with pytest.raises(ValidationError):
            cifa_matrix(blocks, 1, 3, solver="ica")
