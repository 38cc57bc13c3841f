import numpy as np
import pytest

from endodepth.nmf import (
    build_segmentations,
    extract_features,
    make_filter_bank,
    nmf_factorize,
    one_hot,
    orthogonality_defect,
)


def random_nonneg(rng, rows=64, cols=16):
    return rng.random((rows, cols))


class TestFactorize:
    def test_error_trace_monotone(self):
        rng = np.random.default_rng(0)
        for k in (2, 3, 4):
            res = nmf_factorize(random_nonneg(rng), K=k, max_iters=100, tol=0.0)
            diffs = np.diff(res.error_trace)
            assert diffs.max(initial=-np.inf) <= 1e-12

    def test_factors_stay_nonnegative(self):
        res = nmf_factorize(random_nonneg(np.random.default_rng(1)), K=3, max_iters=50)
        assert (res.P >= 0).all()
        assert (res.Q >= 0).all()

    def test_exact_rank_recovery(self):
        rng = np.random.default_rng(103)
        V = rng.random((128, 2)) @ rng.random((2, 16))
        res = nmf_factorize(V, K=2, max_iters=500, tol=0.0, seed=1)
        assert res.error_trace[-1] < 1e-3

    def test_tolerance_stops_early(self):
        rng = np.random.default_rng(2)
        V = random_nonneg(rng)
        res = nmf_factorize(V, K=2, max_iters=500, tol=1e-3)
        assert res.iterations_run < 500

    def test_deterministic(self):
        V = random_nonneg(np.random.default_rng(3))
        a = nmf_factorize(V, K=3, max_iters=30, seed=5)
        b = nmf_factorize(V, K=3, max_iters=30, seed=5)
        np.testing.assert_array_equal(a.P, b.P)
        np.testing.assert_array_equal(a.Q, b.Q)

    def test_rejects_negative_input(self):
        V = random_nonneg(np.random.default_rng(4))
        V[0, 0] = -1.0
        with pytest.raises(ValueError):
            nmf_factorize(V, K=2)

    def test_rejects_bad_rank(self):
        V = random_nonneg(np.random.default_rng(5))
        with pytest.raises(ValueError):
            nmf_factorize(V, K=0)
        with pytest.raises(ValueError):
            nmf_factorize(V, K=17)


def test_orthogonality_defect_values():
    assert orthogonality_defect(np.eye(3)) == 0.0
    assert orthogonality_defect(2 * np.eye(2)) == pytest.approx(np.sqrt(18))


class TestFeatures:
    def test_filter_bank_shape_and_norm(self):
        bank = make_filter_bank(channels=16, size=5, seed=0)
        assert bank.kernels.shape == (16, 5, 5)
        np.testing.assert_allclose(np.linalg.norm(bank.kernels, axis=(1, 2)), 1.0)
        np.testing.assert_allclose(bank.kernels.mean(axis=(1, 2)), 0.0, atol=1e-12)

    def test_feature_matrix_shape_nonneg(self):
        rng = np.random.default_rng(0)
        images = [rng.random((16, 20)) for _ in range(3)]
        fm = extract_features(images, seed=0)
        assert fm.data.shape == (3 * 16 * 20, 16)
        assert (fm.data >= 0).all()
        assert (fm.n_views, fm.height, fm.width) == (3, 16, 20)

    def test_mixed_shapes_rejected(self):
        with pytest.raises(ValueError):
            extract_features([np.zeros((8, 8)), np.zeros((8, 9))])

    def test_rgb_reduced_to_gray(self):
        rng = np.random.default_rng(1)
        gray = rng.random((12, 12))
        rgb = np.repeat(gray[..., None], 3, axis=-1)
        np.testing.assert_allclose(
            extract_features([rgb]).data, extract_features([gray]).data, atol=1e-12
        )


def striped_pair():
    """Two views whose halves carry distinct stripe orientations."""
    v, u = np.meshgrid(np.arange(64.0), np.arange(64.0), indexing="ij")
    img = np.where(
        u < 32,
        0.5 + 0.4 * np.sin(2 * np.pi * (u + v) / 6),
        0.5 + 0.4 * np.sin(2 * np.pi * (u - v) / 6),
    )
    return [img, img.copy()], u


class TestSegmentations:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(6)
        fm = extract_features([rng.random((12, 12))], seed=0)
        res = nmf_factorize(fm, K=4, max_iters=60, seed=0)
        segs = build_segmentations(res.P, 1, 12, 12)
        np.testing.assert_allclose(segs[0].probs.sum(axis=-1), 1.0, atol=1e-9)
        assert (segs[0].probs >= 0).all()

    def test_two_texture_purity(self):
        images, u = striped_pair()
        fm = extract_features(images, seed=0)
        res = nmf_factorize(fm, K=2, max_iters=200, seed=0)
        seg = build_segmentations(res.P, 2, 64, 64)[0]
        labels = np.argmax(seg.probs, axis=-1)
        # Score each half against its majority label, away from the seam.
        left = labels[:, :29]
        right = labels[:, 35:]
        purity = 0.5 * (
            max(np.mean(left == 0), np.mean(left == 1))
            + max(np.mean(right == 0), np.mean(right == 1))
        )
        assert purity >= 0.95
        # The two halves should get opposite labels.
        assert round(np.mean(left)) != round(np.mean(right))

    def test_one_hot_rows(self):
        rng = np.random.default_rng(7)
        fm = extract_features([rng.random((10, 10))], seed=0)
        res = nmf_factorize(fm, K=3, max_iters=40, seed=0)
        hard = one_hot(build_segmentations(res.P, 1, 10, 10)[0])
        assert set(np.unique(hard.probs)) <= {0.0, 1.0}
        np.testing.assert_array_equal(hard.probs.sum(axis=-1), 1.0)

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError):
            build_segmentations(np.ones((10, 2)), 1, 3, 3)

    def test_temperature_sharpens(self):
        rng = np.random.default_rng(8)
        P = rng.random((16, 3)) * 3
        soft = build_segmentations(P, 1, 4, 4, temperature=2.0)[0].probs
        sharp = build_segmentations(P, 1, 4, 4, temperature=0.25)[0].probs
        assert sharp.max(axis=-1).mean() > soft.max(axis=-1).mean()
