import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointreg import (
    PointCloud,
    SimilarityTransform,
    apply_transform,
    compose,
    rotation_about_axis,
    random_rotation,
    svd3,
)

from helpers import random_similarity


def rz90():
    return rotation_about_axis([0.0, 0.0, 1.0], np.pi / 2)


class TestPointCloud:
    def test_default_mask_all_valid(self):
        c = PointCloud(np.zeros((4, 3)))
        assert c.n_valid == 4

    def test_rejects_nonfinite_valid_point(self):
        pts = np.array([[0.0, 0.0, np.nan]])
        with pytest.raises(ValueError):
            PointCloud(pts)

    def test_nonfinite_invalid_entry_allowed(self):
        pts = np.array([[0.0, 0.0, np.inf], [1.0, 2.0, 3.0]])
        c = PointCloud(pts, [False, True])
        assert c.n_valid == 1
        assert list(c.valid_indices()) == [1]

    def test_rejects_mask_length_mismatch(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((2, 3)), [True])

    def test_points_frozen(self):
        c = PointCloud(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            c.points[0, 0] = 1.0


class TestSimilarityTransform:
    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            SimilarityTransform(0.0, np.eye(3), np.zeros(3))

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(ValueError):
            SimilarityTransform(1.0, 2.0 * np.eye(3), np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            SimilarityTransform(1.0, np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            T = random_similarity(rng, (0.2, 5.0), 10.0)
            I = compose(T, T.inverse())
            assert abs(I.scale - 1.0) < 1e-12
            assert np.max(np.abs(I.rotation - np.eye(3))) < 1e-12
            assert np.max(np.abs(I.translation)) < 1e-10


class TestApplyTransform:
    def test_identity_is_bitwise_identity(self):
        rng = np.random.default_rng(0)
        c = PointCloud(rng.standard_normal((100, 3)))
        out = apply_transform(SimilarityTransform.identity(), c)
        assert np.array_equal(out.points, c.points)

    def test_origin_maps_to_translation(self):
        T = SimilarityTransform(2.0, np.eye(3), [1.0, 2.0, 3.0])
        out = apply_transform(T, PointCloud(np.zeros((1, 3))))
        assert np.allclose(out.points[0], [1.0, 2.0, 3.0])

    def test_hand_computed_example(self):
        # s=2, Rz(90 deg), t=(1,2,3) applied to (1,0,0): 2*(0,1,0)+(1,2,3).
        T = SimilarityTransform(2.0, rz90(), [1.0, 2.0, 3.0])
        out = apply_transform(T, PointCloud(np.array([[1.0, 0.0, 0.0]])))
        np.testing.assert_allclose(out.points[0], [1.0, 4.0, 3.0], atol=1e-12)

    def test_invalid_entries_pass_through(self):
        pts = np.array([[1.0, 0.0, 0.0], [np.nan, 0.0, 0.0], [0.0, 1.0, 0.0]])
        mask = np.array([True, False, True])
        T = SimilarityTransform(3.0, np.eye(3), np.zeros(3))
        out = apply_transform(T, PointCloud(pts, mask))
        assert len(out) == 3
        assert np.array_equal(out.valid, mask)
        assert np.isnan(out.points[1, 0])
        np.testing.assert_allclose(out.points[[0, 2]], 3.0 * pts[[0, 2]])


class TestCompose:
    def test_identity_neutral(self):
        rng = np.random.default_rng(1)
        T = random_similarity(rng)
        out = compose(SimilarityTransform.identity(), T)
        assert out.scale == T.scale
        assert np.array_equal(out.rotation, T.rotation)

    def test_arithmetic_example(self):
        T1 = SimilarityTransform(2.0, np.eye(3), [1.0, 0.0, 0.0])
        T2 = SimilarityTransform(3.0, np.eye(3), [0.0, 1.0, 0.0])
        out = compose(T2, T1)
        assert out.scale == 6.0
        np.testing.assert_allclose(out.translation, [3.0, 1.0, 0.0])

    def test_matches_sequential_application(self):
        rng = np.random.default_rng(2)
        pts = rng.standard_normal((50, 3))
        T1, T2 = random_similarity(rng, (0.5, 2.0), 5.0), random_similarity(rng, (0.5, 2.0), 5.0)
        both = compose(T2, T1).apply_to_points(pts)
        seq = T2.apply_to_points(T1.apply_to_points(pts))
        np.testing.assert_allclose(both, seq, atol=1e-12)

    def test_associative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            A, B, C = (random_similarity(rng, (0.5, 2.0), 1.0) for _ in range(3))
            left = compose(compose(A, B), C)
            right = compose(A, compose(B, C))
            assert abs(left.scale - right.scale) <= 1e-12 * left.scale
            assert np.max(np.abs(left.rotation - right.rotation)) <= 1e-12
            assert np.max(np.abs(left.translation - right.translation)) <= 1e-12 * (
                1.0 + np.max(np.abs(left.translation))
            )


class TestSvd3:
    def test_identity(self):
        U, sigma, V = svd3(np.eye(3))
        np.testing.assert_allclose(sigma, [1.0, 1.0, 1.0])
        np.testing.assert_allclose(U @ V.T @ (U @ V.T).T, np.eye(3), atol=1e-12)

    def test_already_diagonal(self):
        _, sigma, _ = svd3(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(sigma, [3.0, 2.0, 1.0])

    def test_rejects_nonfinite(self):
        M = np.eye(3)
        M[0, 0] = np.inf
        with pytest.raises(ValueError):
            svd3(M)

    def test_reconstruction_including_low_rank(self):
        rng = np.random.default_rng(4)
        n = 10_000
        for i in range(n):
            kind = i % 3
            if kind == 0:
                M = rng.standard_normal((3, 3))
            elif kind == 1:
                M = np.outer(rng.standard_normal(3), rng.standard_normal(3))
            else:
                M = sum(
                    np.outer(rng.standard_normal(3), rng.standard_normal(3))
                    for _ in range(2)
                )
            U, sigma, V = svd3(M)
            norm = max(np.linalg.norm(M), np.finfo(float).tiny)
            assert np.linalg.norm(U @ np.diag(sigma) @ V.T - M) < 1e-10 * norm
            assert sigma[0] >= sigma[1] >= sigma[2] >= 0.0
            assert np.max(np.abs(U.T @ U - np.eye(3))) < 1e-10
            assert np.max(np.abs(V.T @ V - np.eye(3))) < 1e-10


@settings(max_examples=50, deadline=None)
@given(
    s=st.floats(0.1, 10.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_transform_then_inverse_recovers_points(s, seed):
    rng = np.random.default_rng(seed)
    T = SimilarityTransform(s, random_rotation(rng), rng.standard_normal(3))
    pts = rng.standard_normal((20, 3))
    back = T.inverse().apply_to_points(T.apply_to_points(pts))
    np.testing.assert_allclose(back, pts, atol=1e-10)
