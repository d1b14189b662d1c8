import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tcfg.errors import InvalidInputError, UndefinedSimilarityError
from tcfg.linalg import cosine_similarity, jacobi_eigh, spd_sqrt_2x2, svd_thin

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def orthogonal(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def check_svd(A, res, tol=1e-9):
    n, d = A.shape
    k = min(n, d)
    s, W, V = res.singular_values, res.left_vectors, res.right_vectors
    assert s.shape == (k,) and W.shape == (n, k) and V.shape == (k, d)
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    np.testing.assert_allclose(V @ V.T, np.eye(k), atol=tol)
    np.testing.assert_allclose(W.T @ W, np.eye(k), atol=tol)
    assert np.linalg.norm(A - res.reconstruct()) <= tol * max(1.0, np.linalg.norm(A))


class TestSvdExamples:
    def test_axis_aligned_rows(self):
        res = svd_thin([[3.0, 0, 0], [0, 4.0, 0]])
        np.testing.assert_array_equal(res.singular_values, [4.0, 3.0])
        np.testing.assert_array_equal(res.right_vectors[0], [0.0, 1.0, 0.0])

    @pytest.mark.parametrize("fast", [True, False])
    def test_zero_matrix(self, fast):
        res = svd_thin(np.zeros((2, 3)), fast=fast)
        np.testing.assert_array_equal(res.singular_values, [0.0, 0.0])
        np.testing.assert_array_equal(res.reconstruct(), np.zeros((2, 3)))
        np.testing.assert_allclose(res.right_vectors @ res.right_vectors.T, np.eye(2), atol=1e-15)

    def test_random_5x8_matches_gram_eigen_oracle(self, rng):
        A = rng.standard_normal((5, 8))
        res = svd_thin(A)
        check_svd(A, res, 1e-10)
        evals, evecs = jacobi_eigh(A @ A.T)
        np.testing.assert_allclose(res.singular_values, np.sqrt(np.maximum(evals, 0)), rtol=1e-12)
        # each right vector is A^T w / sigma for the oracle's left vectors, up to sign
        for i in range(5):
            v = A.T @ evecs[:, i] / math.sqrt(evals[i])
            assert abs(abs(v @ res.right_vectors[i]) - 1.0) < 1e-10

    def test_tall_input_is_transposed(self, rng):
        A = rng.standard_normal((7, 3))
        res = svd_thin(A)
        check_svd(A, res, 1e-10)
        assert res.right_vectors.shape == (3, 3)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            svd_thin([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(InvalidInputError):
            svd_thin([1.0, 2.0])

    def test_sign_convention(self, rng):
        for _ in range(20):
            res = svd_thin(rng.standard_normal((3, 6)))
            for v in res.right_vectors:
                first = v[np.abs(v) > 1e-12 * np.abs(v).max()][0]
                assert first > 0

    def test_ties_keep_row_order(self):
        res = svd_thin([[0.0, 2.0, 0.0], [2.0, 0.0, 0.0]], fast=False)
        np.testing.assert_array_equal(res.singular_values, [2.0, 2.0])
        np.testing.assert_array_equal(res.right_vectors, [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])

    def test_rank_deficient_general_path(self, rng):
        B = rng.standard_normal((2, 9))
        A = np.vstack([B, B[0] + B[1], np.zeros(9)])
        res = svd_thin(A)
        check_svd(A, res, 1e-10)
        assert res.singular_values[2] < 1e-12 and res.singular_values[3] == 0.0


class TestSvdProperties:
    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 9)), elements=finite))
    def test_factorisation_invariants(self, A):
        check_svd(A, svd_thin(A))

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (2, 6), elements=finite), st.floats(1e-3, 1e3))
    def test_positive_scaling(self, A, c):
        s1 = svd_thin(c * A).singular_values
        s0 = svd_thin(A).singular_values
        np.testing.assert_allclose(s1, c * s0, rtol=1e-10, atol=1e-10 * c * max(1.0, s0[0]))

    def test_orthogonal_rotation(self, rng):
        for d in (2, 5, 12):
            A = rng.standard_normal((3, d))
            R = orthogonal(rng, d)
            r0, r1 = svd_thin(A), svd_thin(A @ R.T)
            np.testing.assert_allclose(r1.singular_values, r0.singular_values, rtol=1e-12)
            expected = r0.right_vectors @ R.T
            for a, b in zip(r1.right_vectors, expected):
                assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-9

    def test_fast_and_general_paths_agree_on_top_projector(self, rng):
        for i in range(10_000):
            d = (2, 3, 8, 33)[i % 4]
            A = rng.standard_normal((2, d)) * rng.uniform(1e-3, 1e3)
            if i % 7 == 0:
                A[1] = A[0] * rng.uniform(-2, 2)
            fast, slow = svd_thin(A), svd_thin(A, fast=False)
            np.testing.assert_allclose(fast.singular_values, slow.singular_values,
                                       rtol=1e-10, atol=1e-12 * fast.singular_values[0])
            if fast.singular_values[0] - fast.singular_values[1] > 1e-6 * fast.singular_values[0]:
                P1 = np.outer(fast.right_vectors[0], fast.right_vectors[0])
                P2 = np.outer(slow.right_vectors[0], slow.right_vectors[0])
                assert np.abs(P1 - P2).max() <= 1e-9

    def test_row_permutation_leaves_spectrum(self, rng):
        A = rng.standard_normal((6, 4))
        np.testing.assert_allclose(svd_thin(A[::-1]).singular_values, svd_thin(A).singular_values, rtol=1e-12)


class TestJacobiEigh:
    def test_matches_known_spectrum(self, rng):
        Q = orthogonal(rng, 6)
        lam = np.array([5.0, 3.0, 2.0, 1.0, 0.5, -1.0])
        evals, V = jacobi_eigh(Q @ np.diag(lam) @ Q.T)
        np.testing.assert_allclose(evals, lam, atol=1e-12)
        np.testing.assert_allclose(V.T @ V, np.eye(6), atol=1e-12)

    def test_diagonal_input_is_exact(self):
        evals, V = jacobi_eigh(np.diag([1.0, 3.0, 2.0]))
        np.testing.assert_array_equal(evals, [3.0, 2.0, 1.0])
        np.testing.assert_array_equal(np.abs(V), np.eye(3)[:, [1, 2, 0]])

    def test_tiny_off_diagonal_does_not_overflow(self):
        G = np.array([[1.0, 1e-300], [1e-300, 1.0]])
        evals, V = jacobi_eigh(G)
        assert np.all(np.isfinite(evals)) and np.all(np.isfinite(V))

    def test_rejects_non_square(self):
        with pytest.raises(InvalidInputError):
            jacobi_eigh(np.ones((2, 3)))


class TestCosine:
    @pytest.mark.parametrize(
        "u, v, expected",
        [((1, 0), (0, 1), 0.0), ((2, 0), (1, 0), 1.0), ((1, 1), (1, 0), math.sqrt(2) / 2)],
    )
    def test_examples(self, u, v, expected):
        assert cosine_similarity(u, v) == pytest.approx(expected, abs=1e-15)

    def test_zero_vector(self):
        with pytest.raises(UndefinedSimilarityError):
            cosine_similarity([0, 0], [1, 0])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            cosine_similarity([1, 0], [1, 0, 0])

    @given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite))
    def test_symmetric_and_bounded(self, u, v):
        if not (np.any(u) and np.any(v)):
            return
        c = cosine_similarity(u, v)
        assert -1.0 <= c <= 1.0
        assert c == cosine_similarity(v, u)


class TestSpdSqrt:
    def test_identity(self):
        np.testing.assert_array_equal(spd_sqrt_2x2(np.eye(2)), np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(spd_sqrt_2x2(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)

    def test_random_spd_multiply_back(self, rng):
        for _ in range(1000):
            B = rng.standard_normal((2, 2)) * rng.uniform(0.01, 10)
            M = B @ B.T
            R = spd_sqrt_2x2(M)
            assert np.linalg.norm(R @ R - M) <= 1e-10 * max(1.0, np.linalg.norm(M))
            np.testing.assert_array_equal(R, R.T)
            assert np.all(np.linalg.eigvalsh(R) >= -1e-12)

    def test_rank_one_and_zero(self):
        M = np.outer([1.0, 2.0], [1.0, 2.0])
        R = spd_sqrt_2x2(M)
        np.testing.assert_allclose(R @ R, M, atol=1e-10)
        np.testing.assert_array_equal(spd_sqrt_2x2(np.zeros((2, 2))), np.zeros((2, 2)))

    def test_rejects_asymmetric_and_indefinite(self):
        with pytest.raises(InvalidInputError):
            spd_sqrt_2x2([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(InvalidInputError):
            spd_sqrt_2x2([[1.0, 0.0], [0.0, -1.0]])
        spd_sqrt_2x2([[1.0, 0.0], [0.0, -1e-13]])
