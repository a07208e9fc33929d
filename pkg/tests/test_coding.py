"""Encoder contracts: examples, KKT certificates, and solver properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcc.coding import (
    Code,
    Codebook,
    CodingConfig,
    EncodingError,
    coding_norm,
    descend_sweeps,
    encode_dataset,
    encode_lcc,
    encode_matrix,
    encode_sparse,
    encoding_objective,
    kkt_residual,
    penalty_weights,
    reconstruct,
)
from lcc.data import Dataset

from helpers import dense_grid_minimum, random_encoder_instance, weighted_l1_objective_batch


def dense(code: Code) -> np.ndarray:
    return code.to_dense()


class TestEncodeLcc:
    def test_anchor_encodes_to_itself(self):
        anchors = np.array([[1.0, 0.2], [0.1, -1.0]])
        cb = Codebook(anchors=anchors)
        code = encode_lcc(anchors[0], cb, CodingConfig(mu=0.5))
        gamma = dense(code)
        np.testing.assert_allclose(gamma, [1.0, 0.0], atol=1e-9)
        obj = encoding_objective(anchors[0], cb, gamma, CodingConfig(mu=0.5))
        assert obj <= 1e-12

    def test_two_anchor_line_example(self):
        # x = 0.5 between anchors -1 and +1: only the near anchor fires,
        # soft-thresholded to 0.5 - mu * |1 - 0.5|^2 = 0.475
        cb = Codebook(anchors=np.array([[-1.0], [1.0]]))
        config = CodingConfig(mu=0.1, p=1)
        code = encode_lcc(np.array([0.5]), cb, config)
        np.testing.assert_allclose(dense(code), [0.0, 0.475], atol=1e-9)
        # independent oracle: dense grid over [-1, 1]^2
        weights = penalty_weights(np.array([[0.5]]), cb.anchors, config)[0]
        objective = weighted_l1_objective_batch(np.array([0.5]), cb.anchors, weights)
        grid_val, grid_pt = dense_grid_minimum(objective, 2, lo=-1.0, hi=1.0, final_step=1e-3)
        assert abs(encoding_objective(np.array([0.5]), cb, dense(code), config) - grid_val) <= 1e-6
        assert kkt_residual(np.array([0.5]), cb, dense(code), config) <= 1e-8

    def test_huge_mu_zeroes_everything(self):
        cb = Codebook(anchors=np.array([[1.0, 0.0], [0.0, 1.0]]))
        code = encode_lcc(np.array([0.3, 0.4]), cb, CodingConfig(mu=1e9))
        assert code.entries == {}

    def test_rejects_sparse_config(self):
        cb = Codebook(anchors=np.eye(2))
        with pytest.raises(ValueError):
            encode_lcc(np.zeros(2), cb, CodingConfig(beta_sparse=0.5))


class TestEncodeSparse:
    def test_orthonormal_soft_threshold(self):
        cb = Codebook(anchors=np.eye(2))
        code = encode_sparse(np.array([1.0, 0.1]), cb, CodingConfig(beta_sparse=0.2))
        np.testing.assert_allclose(dense(code), [0.8, 0.0], atol=1e-9)
        weights = np.full(2, 0.2)
        objective = weighted_l1_objective_batch(np.array([1.0, 0.1]), cb.anchors, weights)
        grid_val, _ = dense_grid_minimum(objective, 2, lo=-1.0, hi=1.0, final_step=1e-3)
        got = encoding_objective(np.array([1.0, 0.1]), cb,
                                 dense(code), CodingConfig(beta_sparse=0.2))
        assert abs(got - grid_val) <= 1e-6

    def test_beta_zero_solves_exactly(self):
        rng = np.random.default_rng(11)
        anchors = rng.standard_normal((3, 3))
        cb = Codebook(anchors=anchors)
        x = rng.standard_normal(3)
        code = encode_sparse(x, cb, CodingConfig(beta_sparse=0.0, tol=1e-10))
        np.testing.assert_allclose(anchors.T @ dense(code), x, atol=1e-8)

    def test_zero_input_gives_zero_code(self):
        cb = Codebook(anchors=np.array([[1.0, 2.0], [0.5, -1.0]]))
        code = encode_sparse(np.zeros(2), cb, CodingConfig(beta_sparse=0.3))
        assert code.entries == {}

    def test_rejects_lcc_config(self):
        cb = Codebook(anchors=np.eye(2))
        with pytest.raises(ValueError):
            encode_sparse(np.zeros(2), cb, CodingConfig(mu=0.5))


class TestReconstructAndNorm:
    def test_unit_code_returns_anchor(self):
        cb = Codebook(anchors=np.array([[2.0, 3.0], [1.0, -1.0]]))
        assert np.array_equal(reconstruct(Code({0: 1.0}, 2), cb), [2.0, 3.0])

    def test_empty_code_returns_zero(self):
        cb = Codebook(anchors=np.array([[2.0, 3.0]]))
        assert np.array_equal(reconstruct(Code({}, 1), cb), [0.0, 0.0])

    def test_convex_combination(self):
        cb = Codebook(anchors=np.array([[0.0, 0.0], [2.0, 2.0]]))
        np.testing.assert_allclose(
            reconstruct(Code({0: 0.5, 1: 0.5}, 2), cb), [1.0, 1.0])

    def test_out_of_range_index(self):
        cb = Codebook(anchors=np.array([[1.0]]))
        with pytest.raises(IndexError):
            reconstruct(Code({1: 1.0}, 2), cb)

    def test_norm_345(self):
        assert coding_norm(Code({0: 0.6, 1: 0.8}, 2)) == pytest.approx(1.0)

    def test_norm_empty_and_unit(self):
        assert coding_norm(Code({}, 3)) == 0.0
        assert coding_norm(Code({2: 1.0}, 3)) == 1.0

    @given(st.lists(st.floats(-10, 10).filter(lambda v: abs(v) > 1e-12),
                    min_size=1, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_norm_matches_dense_euclidean(self, values):
        code = Code(dict(enumerate(values)), len(values))
        assert coding_norm(code) == pytest.approx(np.linalg.norm(values))


class TestSolverProperties:
    def test_grid_search_oracle_small_instances(self):
        rng = np.random.default_rng(1234)
        for trial in range(60):
            x, anchors = random_encoder_instance(rng)
            cb = Codebook(anchors=anchors)
            if trial % 2 == 0:
                config = CodingConfig(mu=float(rng.uniform(0.01, 0.5)), tol=1e-9)
            else:
                config = CodingConfig(beta_sparse=float(rng.uniform(0.01, 0.5)), tol=1e-9)
            gamma = encode_matrix(x[None, :], cb, config)[0]
            weights = penalty_weights(x[None, :], anchors, config)[0]
            objective = weighted_l1_objective_batch(x, anchors, weights)
            grid_val, _ = dense_grid_minimum(objective, anchors.shape[0])
            solver_val = encoding_objective(x, cb, gamma, config)
            assert solver_val <= grid_val + 1e-6
            assert abs(solver_val - grid_val) <= 1e-6
            assert kkt_residual(x, cb, gamma, config) <= 1e-9

    def test_objective_monotone_per_sweep(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x, anchors = random_encoder_instance(rng, d_max=4, c_max=6)
            cb = Codebook(anchors=anchors)
            config = CodingConfig(mu=float(rng.uniform(0.001, 0.3)))
            gamma = np.zeros(anchors.shape[0])
            previous = encoding_objective(x, cb, gamma, config)
            for _ in range(30):
                descend_sweeps(x, cb, gamma, config, 1)
                value = encoding_objective(x, cb, gamma, config)
                assert value <= previous + 1e-12
                previous = value

    def test_locality_penalty_monotone_in_mu(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            x, anchors = random_encoder_instance(rng, d_max=3, c_max=6)
            cb = Codebook(anchors=anchors)
            previous = np.inf
            for mu in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0]:
                config = CodingConfig(mu=mu, tol=1e-10)
                gamma = encode_matrix(x[None, :], cb, config)[0]
                dist_sq = np.sum((anchors - x) ** 2, axis=1)
                penalty = float(np.abs(gamma) @ dist_sq)
                assert penalty <= previous + 1e-7
                previous = penalty

    def test_support_screening_bound(self):
        # KKT implies mu * ||v - x||^(1+p) <= ||v|| * ||x - g(x)|| on the
        # support, so anchors beyond that radius must be silent
        rng = np.random.default_rng(7)
        for _ in range(25):
            x, anchors = random_encoder_instance(rng, d_max=3, c_max=6)
            cb = Codebook(anchors=anchors)
            config = CodingConfig(mu=float(rng.uniform(0.02, 0.5)), tol=1e-10)
            gamma = encode_matrix(x[None, :], cb, config)[0]
            recon_err = np.linalg.norm(x - anchors.T @ gamma)
            margins = config.mu * np.sum((anchors - x) ** 2, axis=1) \
                - np.linalg.norm(anchors, axis=1) * recon_err
            silent = margins > 1e-9
            assert np.all(gamma[silent] == 0.0)

    def test_batch_equals_pointwise(self):
        rng = np.random.default_rng(8)
        anchors = rng.standard_normal((6, 3))
        cb = Codebook(anchors=anchors)
        points = rng.standard_normal((15, 3))
        ds = Dataset(points=points)
        config = CodingConfig(mu=0.1)
        batch = encode_dataset(ds, cb, config)
        for i, x in enumerate(points):
            single = encode_lcc(x, cb, config)
            assert single.entries == batch[i].entries

    def test_empty_dataset_gives_empty_list(self):
        cb = Codebook(anchors=np.eye(2))
        ds = Dataset(points=np.zeros((0, 2)))
        assert encode_dataset(ds, cb, CodingConfig(mu=0.1)) == []

    def test_anchors_encode_to_identity_codes(self):
        rng = np.random.default_rng(9)
        anchors = rng.standard_normal((5, 4))
        cb = Codebook(anchors=anchors)
        codes = encode_dataset(Dataset(points=anchors.copy()), cb, CodingConfig(mu=0.2))
        for i, code in enumerate(codes):
            np.testing.assert_allclose(dense(code), np.eye(5)[i], atol=1e-9)

    def test_warm_start_preserves_fixed_point(self):
        rng = np.random.default_rng(10)
        anchors = rng.standard_normal((6, 3))
        cb = Codebook(anchors=anchors)
        points = rng.standard_normal((8, 3))
        config = CodingConfig(mu=0.05, tol=1e-9)
        cold = encode_matrix(points, cb, config)
        warm = encode_matrix(points, cb, config, warm=cold.copy())
        np.testing.assert_allclose(warm, cold, atol=1e-7)

    def test_degenerate_anchor_warns_and_skips(self):
        anchors = np.array([[0.0, 0.0], [1.0, 0.0]])
        cb = Codebook(anchors=anchors)
        config = CodingConfig(beta_sparse=0.0)
        with pytest.warns(RuntimeWarning, match="zero-norm"):
            code = encode_sparse(np.array([0.5, 0.0]), cb, config)
        assert 0 not in code.entries

    def test_non_convergence_reports_indices(self):
        # a tolerance below float resolution is unreachable, so the
        # error path must fire and carry per-point residuals
        rng = np.random.default_rng(12)
        anchors = rng.standard_normal((8, 2))
        cb = Codebook(anchors=anchors)
        ds = Dataset(points=rng.standard_normal((4, 2)))
        with pytest.raises(EncodingError) as info:
            encode_dataset(ds, cb, CodingConfig(mu=1e-7, tol=1e-300, max_iter=3))
        assert len(info.value.indices) >= 1
        assert all(r > 0 for r in info.value.residuals)


class TestCodeType:
    def test_rejects_zero_coefficient(self):
        with pytest.raises(ValueError):
            Code({0: 0.0}, 2)

    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            Code({5: 1.0}, 2)

    def test_json_round_trip_sorted(self):
        code = Code({3: -0.5, 1: 2.0}, 6)
        obj = code.to_json_dict()
        assert obj["entries"] == [[1, 2.0], [3, -0.5]]
        assert Code.from_json_dict(obj).entries == code.entries


class TestCodingConfig:
    def test_mutually_exclusive_penalties(self):
        with pytest.raises(ValueError):
            CodingConfig(mu=0.1, beta_sparse=0.1)

    def test_p_must_be_zero_or_one(self):
        with pytest.raises(ValueError):
            CodingConfig(mu=0.1, p=2)

    def test_p_zero_uses_plain_distance(self):
        anchors = np.array([[3.0, 4.0]])
        weights1 = penalty_weights(np.zeros((1, 2)), anchors, CodingConfig(mu=2.0, p=0))
        weights2 = penalty_weights(np.zeros((1, 2)), anchors, CodingConfig(mu=2.0, p=1))
        assert weights1[0, 0] == pytest.approx(10.0)
        assert weights2[0, 0] == pytest.approx(50.0)


class TestCodebook:
    def test_rejects_unit_norm_violation(self):
        from lcc.coding import UNIT_NORM_MODE
        with pytest.raises(ValueError):
            Codebook(anchors=np.array([[2.0, 0.0]]), mode=UNIT_NORM_MODE)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Codebook(anchors=np.array([[np.inf, 0.0]]))
