import numpy as np
import pytest

from ironreg.errors import NoConsensusError, ParameterError
from ironreg.geometry import CorrespondenceSet, SimilarityTransform
from ironreg.ransic import (
    KnownScale,
    RansicParams,
    complete_compatibility,
    default_ransic_params,
    estimate_scale,
    first_compatibility,
    ransic,
    unique_index_set,
)
from ironreg.synthetic import ProblemSpec, make_problem
from util import random_transform

RNG = np.random.default_rng


def make_params(sigma=0.01, **kw):
    return default_ransic_params(sigma, **kw)


def inlier_triple(rng, transform, sigma=0.0):
    src = rng.normal(size=(3, 3))
    dst = transform.apply(src) + sigma * rng.normal(size=(3, 3))
    return src, dst


class TestDefaultParams:
    def test_midpoint_values_at_sigma_001(self):
        p = default_ransic_params(0.01)
        assert abs(p.alpha - 0.0495) < 1e-12
        assert abs(p.beta - 0.0595) < 1e-12
        assert abs(p.gamma - 2.97) < 1e-12
        assert p.x_min == 2

    def test_extreme_raises_x(self):
        assert default_ransic_params(0.01, extreme=True).x_min == 3

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ParameterError):
            default_ransic_params(0.0)

    def test_gamma_capped_at_three(self):
        assert default_ransic_params(0.1).gamma == 3.0

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            RansicParams(alpha=-1.0, beta=1.0, gamma=1.0)
        with pytest.raises(ParameterError):
            RansicParams(alpha=1.0, beta=1.0, gamma=3.5)
        with pytest.raises(ParameterError):
            KnownScale(scale=1.0, lo=1.1, hi=1.2)


class TestFirstCompatibility:
    def test_noiseless_scale_two_triple_accepted(self):
        rng = RNG(0)
        T = SimilarityTransform(2.0, np.eye(3), np.array([0.3, -0.1, 0.5]))
        src, dst = inlier_triple(rng, T)
        tps = first_compatibility(src, dst, make_params())
        assert tps is not None
        assert np.allclose(tps.scale_invariants, 2.0, atol=1e-12)
        assert abs(tps.local_scale - 2.0) < 1e-12

    def test_radial_displacement_flips_scale_gate(self):
        # oracle: evaluate the printed inequality directly on the displaced
        # triple; first_compatibility must agree on both sides of the flip
        rng = RNG(1)
        T = random_transform(rng)
        src, dst = inlier_triple(rng, T)
        params = make_params()

        def gate_holds(delta):
            d = dst.copy()
            center = d.mean(axis=0)
            direction = d[0] - center
            d[0] = d[0] + delta * direction / np.linalg.norm(direction)
            p_dm = src - src.mean(axis=0)
            q_dm = d - d.mean(axis=0)
            s = np.linalg.norm(q_dm, axis=1) / np.linalg.norm(p_dm, axis=1)
            inv = 1.0 / np.linalg.norm(p_dm, axis=1)
            ok = all(
                abs(s[i] - s[j]) <= params.alpha * (inv[i] + inv[j])
                for i, j in ((0, 1), (0, 2), (1, 2))
            )
            return ok, d

        small_ok, _ = gate_holds(0.0)
        assert small_ok
        delta = 0.01
        while gate_holds(delta)[0]:
            delta *= 2.0
            assert delta < 1e6
        _, displaced = gate_holds(delta)
        assert first_compatibility(src, displaced, params) is None

    def test_symmetric_weighted_mean_local_scale(self):
        # src: equilateral triangle (equal centroid distances); dst: triangle
        # with centroid distances 1.9, 2.0, 2.1 -> weighted mean is exactly 2
        angles = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        src = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(3)])
        lengths = np.array([1.9, 2.0, 2.1])
        # place dst vertices as the edge vectors of a 1.9/2.0/2.1 triangle,
        # which sum to zero so the centroid is the origin; the angle between
        # a and b satisfies |a+b| = |c|
        cos_ab = (2.1**2 - 1.9**2 - 2.0**2) / (2 * 1.9 * 2.0)
        a = np.array([1.9, 0.0, 0.0])
        b = np.array([2.0 * cos_ab, 2.0 * np.sqrt(1 - cos_ab**2), 0.0])
        c = -(a + b)
        dst = np.vstack([a, b, c])
        assert np.allclose(dst.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(np.sort(np.linalg.norm(dst, axis=1)), lengths)
        params = RansicParams(alpha=0.2, beta=100.0, gamma=0.1)
        tps = first_compatibility(src, dst, params)
        assert tps is not None
        assert abs(tps.local_scale - 2.0) < 1e-12

    def test_degenerate_triad_returns_none(self):
        src = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
        dst = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
        assert first_compatibility(src, dst, make_params(sigma=1.0)) is None

    def test_known_scale_window_rejects_other_scale(self):
        rng = RNG(2)
        T = SimilarityTransform(2.0, np.eye(3), np.zeros(3))
        src, dst = inlier_triple(rng, T)
        params = make_params(known_scale=KnownScale(1.0))
        assert first_compatibility(src, dst, params) is None
        params2 = make_params(known_scale=KnownScale(2.0))
        assert first_compatibility(src, dst, params2) is not None


class TestInvariantProperties:
    def test_scale_invariant_equals_true_scale_noiseless(self):
        rng = RNG(3)
        for _ in range(100):
            T = random_transform(rng, scale_range=(0.2, 8.0), t_max=3.0)
            src, dst = inlier_triple(rng, T)
            tps = first_compatibility(
                src, dst, RansicParams(alpha=1e-6, beta=1e-6, gamma=3.0)
            )
            if tps is None:
                continue  # near-degenerate draw
            assert np.allclose(tps.scale_invariants, T.s, atol=1e-9)

    def test_translation_invariant_equals_true_translation_noiseless(self):
        rng = RNG(4)
        hits = 0
        for _ in range(100):
            T = random_transform(rng, scale_range=(0.2, 8.0), t_max=3.0)
            src, dst = inlier_triple(rng, T)
            tps = first_compatibility(
                src, dst, RansicParams(alpha=1e-6, beta=1e-6, gamma=3.0)
            )
            if tps is None:
                continue
            hits += 1
            assert np.allclose(tps.translation_invariants, T.t, atol=1e-8)
        assert hits > 50

    def test_acceptance_monotone_in_bounds(self):
        rng = RNG(5)
        checked = 0
        for _ in range(300):
            T = random_transform(rng)
            src, dst = inlier_triple(rng, T, sigma=0.05)
            base = RansicParams(alpha=0.1, beta=0.3, gamma=2.0)
            loose = RansicParams(alpha=0.2, beta=0.6, gamma=1.0)
            if first_compatibility(src, dst, base) is not None:
                checked += 1
                assert first_compatibility(src, dst, loose) is not None
        assert checked > 20


class TestCompleteCompatibility:
    def _two_sets(self, rng, T, sigma=0.0):
        src = rng.normal(size=(6, 3))
        dst = T.apply(src) + sigma * rng.normal(size=(6, 3))
        corr = CorrespondenceSet(src, dst)
        params = make_params(sigma=max(sigma, 0.01))
        a = first_compatibility(src[:3], dst[:3], params, indices=(0, 1, 2))
        b = first_compatibility(src[3:], dst[3:], params, indices=(3, 4, 5))
        return a, b, params, corr

    def test_two_exact_inlier_sets_compatible(self):
        rng = RNG(6)
        T = random_transform(rng)
        a, b, params, corr = self._two_sets(rng, T)
        assert a is not None and b is not None
        assert complete_compatibility(a, b, params, corr)
        assert np.trace(a.local_rotation.T @ b.local_rotation) > 2.999999

    def test_different_rotation_fails_trace_gate(self):
        rng = RNG(7)
        T1 = random_transform(rng, scale_range=(1.0, 1.0))
        T2 = SimilarityTransform(T1.s, random_transform(rng).R, T1.t)
        src = rng.normal(size=(6, 3))
        dst = np.vstack([T1.apply(src[:3]), T2.apply(src[3:])])
        corr = CorrespondenceSet(src, dst)
        params = make_params()
        a = first_compatibility(src[:3], dst[:3], params, indices=(0, 1, 2))
        b = first_compatibility(src[3:], dst[3:], params, indices=(3, 4, 5))
        assert a is not None and b is not None
        assert not complete_compatibility(a, b, params, corr)

    def test_noisy_inlier_sets_usually_compatible(self):
        # Monte-Carlo: both sets from the same transform at sigma=0.01
        rng = RNG(8)
        agree = total = 0
        while total < 1000:
            T = random_transform(rng, scale_range=(1.0, 3.0))
            a, b, params, corr = self._two_sets(rng, T, sigma=0.01)
            if a is None or b is None:
                continue
            total += 1
            agree += complete_compatibility(a, b, params, corr)
        assert agree / total > 0.95

    def test_shared_indices_skipped(self):
        rng = RNG(9)
        T = random_transform(rng)
        src = rng.normal(size=(4, 3))
        dst = T.apply(src)
        corr = CorrespondenceSet(src, dst)
        params = make_params()
        a = first_compatibility(src[:3], dst[:3], params, indices=(0, 1, 2))
        b = first_compatibility(src[1:], dst[1:], params, indices=(1, 2, 3))
        assert a is not None and b is not None
        assert complete_compatibility(a, b, params, corr)


class TestRansic:
    def test_noiseless_exact_scale(self):
        prob = make_problem(ProblemSpec(1000, 0.0, 0.0, (3.0, 3.0), seed=0))
        result = ransic(prob.correspondences, make_params(sigma=0.01), rng_seed=1)
        assert abs(result.scale_hat - 3.0) < 1e-12
        assert len(result.inlier_indices) >= 6
        assert result.pool_size_at_exit >= 0

    def test_extreme_outliers_unknown_scale(self):
        prob = make_problem(ProblemSpec(1000, 0.99, 0.01, (1.0, 5.0), seed=11))
        result = ransic(prob.correspondences, make_params(), rng_seed=2)
        assert abs(result.scale_hat - prob.ground_truth.s) < 0.05
        assert prob.inlier_mask[result.inlier_indices].mean() > 0.5

    def test_too_few_correspondences(self):
        rng = RNG(10)
        corr = CorrespondenceSet(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)))
        with pytest.raises(ParameterError):
            ransic(corr, make_params(), rng_seed=0)

    def test_no_consensus_error_carries_counters(self):
        prob = make_problem(ProblemSpec(100, 0.0, 0.01, (1.0, 1.0), seed=3))
        params = RansicParams(alpha=1e-9, beta=1e-9, gamma=3.0, max_samples=2000)
        with pytest.raises(NoConsensusError) as err:
            ransic(prob.correspondences, params, rng_seed=4)
        assert err.value.samples_drawn == 2000
        assert err.value.pool_size == 0

    def test_deterministic_given_seed(self):
        prob = make_problem(ProblemSpec(500, 0.8, 0.01, (1.0, 3.0), seed=5))
        r1 = ransic(prob.correspondences, make_params(), rng_seed=42)
        r2 = ransic(prob.correspondences, make_params(), rng_seed=42)
        assert r1.scale_hat == r2.scale_hat
        assert np.array_equal(r1.inlier_indices, r2.inlier_indices)
        assert r1.samples_drawn == r2.samples_drawn
        assert r1.pool_size_at_exit == r2.pool_size_at_exit

    def test_inlier_indices_sorted_unique(self):
        prob = make_problem(ProblemSpec(300, 0.5, 0.01, (1.0, 2.0), seed=6))
        result = ransic(prob.correspondences, make_params(), rng_seed=7)
        idx = result.inlier_indices
        assert np.array_equal(idx, np.unique(idx))

    def test_final_scale_recomputed_over_inliers(self):
        prob = make_problem(ProblemSpec(400, 0.7, 0.01, (1.0, 4.0), seed=8))
        params = make_params()
        result = ransic(prob.correspondences, params, rng_seed=9)
        expected = estimate_scale(
            prob.correspondences, result.inlier_indices, params.alpha
        )
        assert result.scale_hat == expected


def test_unique_index_set():
    out = unique_index_set([np.array([5, 1, 3]), np.array([3, 2, 5])])
    assert np.array_equal(out, [1, 2, 3, 5])
