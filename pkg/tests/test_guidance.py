import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tcfg.errors import InvalidInputError
from tcfg.guidance import (
    GuidanceConfig,
    GuidanceMode,
    ScorePair,
    cfg_combine,
    guide_batch,
    pooled_tcfg_project,
    tcfg_combine,
    tcfg_project,
    tcfg_project_batch,
)
from tcfg.linalg import jacobi_eigh, svd_thin

vec = arrays(np.float64, 5, elements=st.floats(-100, 100, allow_nan=False))


def oracle_project(u, c):
    """(u . v1) v1 with v1 the top eigenvector of A^T A from the Jacobi oracle."""
    A = np.stack([u, c])
    _, V = jacobi_eigh(A.T @ A)
    v1 = V[:, 0]
    return (u @ v1) * v1


def well_separated(u, c, gap=1e-6):
    s = np.linalg.svd(np.stack([u, c]), compute_uv=False)
    return s[0] > 0 and s[0] - s[1] > gap * s[0]


class TestCfg:
    def test_examples(self):
        pair = ScorePair([1.0, 0.0], [0.0, 1.0])
        np.testing.assert_array_equal(cfg_combine(pair, 2.0), [-1.0, 2.0])
        np.testing.assert_array_equal(cfg_combine(pair, 1.0), pair.cond)
        np.testing.assert_array_equal(cfg_combine(pair, 0.0), pair.uncond)

    def test_pair_validation(self):
        with pytest.raises(InvalidInputError):
            ScorePair([1.0, 0.0], [1.0])
        with pytest.raises(InvalidInputError):
            ScorePair([1.0, np.nan], [1.0, 0.0])

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            GuidanceConfig(GuidanceMode.CFG, np.inf)
        with pytest.raises(InvalidInputError):
            GuidanceConfig(GuidanceMode.TCFG, 2.0, -1.0)
        assert GuidanceConfig("tcfg-pooled").mode is GuidanceMode.POOLED_TCFG


class TestTcfgExamples:
    def test_parallel_pair_unchanged(self):
        np.testing.assert_array_equal(tcfg_project(ScorePair([2.0, 0.0], [1.0, 0.0])), [2.0, 0.0])

    def test_orthogonal_with_dominant_cond(self):
        np.testing.assert_array_equal(tcfg_project(ScorePair([1.0, 0.0], [0.0, 2.0])), [0.0, 0.0])

    def test_against_gram_eigenvector(self):
        evals, V = jacobi_eigh(np.array([[2.0, 1.0], [1.0, 1.0]]))
        v1 = V[:, 0]
        np.testing.assert_allclose(tcfg_project(ScorePair([1.0, 0.0], [1.0, 1.0])), v1[0] * v1, atol=1e-14)

    def test_tie_returns_uncond(self):
        u = np.array([1.0, 0.0, 0.0])
        np.testing.assert_array_equal(tcfg_project(ScorePair(u, [0.0, 1.0, 0.0])), u)

    def test_zero_pair(self):
        np.testing.assert_array_equal(tcfg_project(ScorePair(np.zeros(3), np.zeros(3))), np.zeros(3))

    def test_combine_special_scales(self, rng):
        u, c = rng.standard_normal((2, 4))
        pair = ScorePair(u, c)
        np.testing.assert_array_equal(tcfg_combine(pair, 1.0), c)
        np.testing.assert_array_equal(tcfg_combine(pair, 0.0), tcfg_project(pair))
        np.testing.assert_array_equal(tcfg_combine(ScorePair(u, 3 * u), 2.5), cfg_combine(ScorePair(u, 3 * u), 2.5))


class TestTcfgProperties:
    @settings(max_examples=300, deadline=None)
    @given(vec, vec, st.floats(1e-3, 1e3))
    def test_scale_equivariance(self, u, c, k):
        assume(well_separated(u, c))
        base = tcfg_project(ScorePair(u, c))
        np.testing.assert_allclose(tcfg_project(ScorePair(k * u, k * c)), k * base,
                                   rtol=1e-10, atol=1e-10 * k * max(1.0, np.abs(base).max()))

    @settings(max_examples=300, deadline=None)
    @given(vec, vec)
    def test_contraction_span_and_idempotence(self, u, c):
        s = tcfg_project(ScorePair(u, c))
        assert np.linalg.norm(s) <= np.linalg.norm(u) * (1 + 1e-12) + 1e-300
        Q, _ = np.linalg.qr(np.stack([u, c]).T)
        assert np.linalg.norm(s - Q @ (Q.T @ s)) <= 1e-10 * max(1.0, np.linalg.norm(u))
        if well_separated(u, c):
            np.testing.assert_allclose(s, oracle_project(u, c), atol=1e-9 * max(1.0, np.linalg.norm(u)))

    @settings(max_examples=300, deadline=None)
    @given(vec, vec)
    def test_row_order_and_sign_invariance(self, u, c):
        a = tcfg_project(ScorePair(u, c))
        # swapping the rows of A does not change its right singular vectors
        svd = svd_thin(np.stack([c, u]))
        if svd.singular_values[0] > 0 and well_separated(u, c, 1e-9):
            v1 = svd.right_vectors[0]
            np.testing.assert_allclose(a, (u @ v1) * v1, atol=1e-9 * max(1.0, np.linalg.norm(u)))
            np.testing.assert_allclose(a, (u @ -v1) * -v1, atol=1e-9 * max(1.0, np.linalg.norm(u)))

    def test_rotation_equivariance(self, rng):
        for _ in range(500):
            d = int(rng.integers(2, 9))
            u, c = rng.standard_normal((2, d))
            R, _ = np.linalg.qr(rng.standard_normal((d, d)))
            np.testing.assert_allclose(tcfg_project(ScorePair(R @ u, R @ c)), R @ tcfg_project(ScorePair(u, c)),
                                       atol=1e-9)

    def test_batch_matches_per_pair(self, rng):
        for d in (2, 3, 16):
            U, C = rng.standard_normal((2, 400, d))
            U[:10] = C[:10] * 2.0  # parallel rows
            U[10:20] = 0.0
            expected = np.stack([tcfg_project(ScorePair(u, c)) for u, c in zip(U, C)])
            np.testing.assert_allclose(tcfg_project_batch(U, C), expected, atol=1e-12)

    def test_batch_shape_check(self):
        with pytest.raises(InvalidInputError):
            tcfg_project_batch(np.zeros((3, 2)), np.zeros((2, 2)))


class TestPooled:
    def test_single_pair_with_rank_one_gap_equals_per_pair(self):
        u, c = np.array([1.0, 0.1, 0.0]), np.array([3.0, 0.0, 0.05])
        pooled = pooled_tcfg_project([ScorePair(u, c)])
        np.testing.assert_allclose(pooled[0], tcfg_project(ScorePair(u, c)), atol=1e-12)

    def test_identical_pairs_repeat_single_result(self):
        pair = ScorePair([1.0, 0.1, 0.0], [3.0, 0.0, 0.05])
        out = pooled_tcfg_project([pair] * 5)
        single = pooled_tcfg_project([pair])[0]
        np.testing.assert_allclose(out, np.tile(single, (5, 1)), atol=1e-12)

    def test_outputs_in_retained_subspace(self, rng):
        basis = rng.standard_normal((3, 8))
        U = rng.standard_normal((40, 3)) @ basis + 1e-4 * rng.standard_normal((40, 8))
        C = rng.standard_normal((40, 3)) @ basis + 1e-4 * rng.standard_normal((40, 8))
        out = pooled_tcfg_project((U, C))
        V = svd_thin(np.concatenate([U, C])).right_vectors[:3]
        assert np.abs(out - (out @ V.T) @ V).max() <= 1e-9

    def test_no_gap_returns_inputs(self):
        U = np.eye(3)
        np.testing.assert_array_equal(pooled_tcfg_project((U, -U)), U)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            pooled_tcfg_project([])


class TestGuideBatch:
    @pytest.mark.parametrize("mode", list(GuidanceMode))
    def test_scale_one_gives_cond_exactly(self, mode, rng):
        U, C = rng.standard_normal((2, 30, 2))
        np.testing.assert_array_equal(guide_batch(U, C, GuidanceConfig(mode, 1.0)), C)

    def test_modes(self, rng):
        U, C = rng.standard_normal((2, 30, 3))
        np.testing.assert_array_equal(guide_batch(U, C, GuidanceConfig("cond", 5.0)), C)
        np.testing.assert_array_equal(guide_batch(U, C, GuidanceConfig("cfg", 2.0)), -U + 2 * C)
        s = tcfg_project_batch(U, C)
        np.testing.assert_array_equal(guide_batch(U, C, GuidanceConfig("tcfg", 2.0)), -s + 2 * C)
