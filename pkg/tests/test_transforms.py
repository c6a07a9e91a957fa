"""Equivalent transforms: smoothing, rotation, and the hybrid."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from smoothrot import (
    EquivalentTransform,
    HadamardRotator,
    IdentityTransform,
    OrthogonalityError,
    Smoother,
    SmoothRotator,
    TransformSpec,
    alpha_sweep,
    apply_rotation,
    apply_smoothing,
    apply_transform,
    hadamard,
    make_transform,
    smooth_rotate,
    smoothing_scale,
    verify_equivalence,
)
from smoothrot.quant import QuantConfig, layer_error
from smoothrot.transforms import TRANSFORM_KINDS


def random_pair(rng, n=5, c_in=8, c_out=3):
    return rng.normal(size=(n, c_in)), rng.normal(size=(c_in, c_out))


class TestTransformSpec:
    def test_defaults(self):
        spec = TransformSpec()
        assert (spec.kind, spec.alpha, spec.epsilon_clamp) == ("none", 0.5, 1e-8)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            TransformSpec(kind="reflect")

    @pytest.mark.parametrize("alpha", [-0.1, 0.0, 1.0, 1.1])
    def test_alpha_outside_open_unit_interval_rejected(self, alpha):
        with pytest.raises(ValueError):
            TransformSpec(kind="smooth", alpha=alpha)

    def test_nonpositive_epsilon_rejected(self):
        with pytest.raises(ValueError):
            TransformSpec(epsilon_clamp=0.0)


class TestSmoothingScale:
    def test_documented_square_root(self):
        x = np.array([[16.0], [-8.0]])
        w = np.array([[4.0, -2.0]])
        assert smoothing_scale(x, w, alpha=0.5) == [2.0]

    def test_documented_three_quarters(self):
        x = np.array([[16.0]])
        w = np.array([[1.0]])
        assert smoothing_scale(x, w, alpha=0.75) == [8.0]

    def test_equal_maxima_is_identity(self):
        x = np.array([[3.0, -5.0]])
        w = np.array([[3.0], [5.0]])
        np.testing.assert_array_equal(smoothing_scale(x, w, alpha=0.5), [1.0, 1.0])

    def test_zero_channel_clamped(self):
        x = np.array([[0.0, 1.0]])
        w = np.array([[1.0], [1.0]])
        s = smoothing_scale(x, w, alpha=0.5)
        assert np.all(np.isfinite(s)) and np.all(s > 0)


class TestApplySmoothing:
    def test_unit_scales_are_identity(self, rng):
        x, w = random_pair(rng)
        xt, wt = apply_smoothing(x, w, np.ones(x.shape[1]))
        np.testing.assert_array_equal(xt, x)
        np.testing.assert_array_equal(wt, w)

    def test_documented_channel_arithmetic(self):
        x = np.array([[16.0], [2.0]])
        w = np.array([[4.0, 1.0]])
        xt, wt = apply_smoothing(x, w, np.array([2.0]))
        np.testing.assert_array_equal(xt, [[8.0], [1.0]])
        np.testing.assert_array_equal(wt, [[8.0, 2.0]])

    def test_alpha_half_equalizes_channel_maxima(self, rng):
        x, w = random_pair(rng, n=6, c_in=5, c_out=4)
        s = smoothing_scale(x, w, alpha=0.5)
        xt, wt = apply_smoothing(x, w, s)
        x_maxima = np.abs(xt).max(axis=0)
        w_maxima = np.abs(wt).max(axis=1)
        target = np.sqrt(np.abs(x).max(axis=0) * np.abs(w).max(axis=1))
        np.testing.assert_allclose(x_maxima, target, rtol=1e-9)
        np.testing.assert_allclose(w_maxima, target, rtol=1e-9)

    def test_product_preserved_to_machine_precision(self, rng):
        x, w = random_pair(rng)
        s = smoothing_scale(x, w, alpha=0.3)
        xt, wt = apply_smoothing(x, w, s)
        baseline = np.linalg.norm(x @ w)
        residual = np.linalg.norm(x @ w - xt @ wt) / baseline
        assert residual < 1e-12


class TestApplyRotation:
    def test_identity_rotation_is_noop(self, rng):
        x, w = random_pair(rng, c_in=4)
        xt, wt = apply_rotation(x, w, np.eye(4))
        np.testing.assert_array_equal(xt, x)
        np.testing.assert_array_equal(wt, w)

    def test_one_hot_token_flattens(self):
        d = 8
        x = np.zeros((1, d))
        x[0, 0] = 3.0
        w = np.eye(d)
        xt, _ = apply_rotation(x, w, hadamard(d))
        np.testing.assert_allclose(np.abs(xt), 3.0 / np.sqrt(d), rtol=1e-12)

    def test_non_orthogonal_rotation_rejected(self, rng):
        x, w = random_pair(rng, c_in=4)
        with pytest.raises(OrthogonalityError):
            apply_rotation(x, w, np.diag([1.0, 2.0, 1.0, 1.0]))

    def test_check_flag_skips_validation(self, rng):
        x, w = random_pair(rng, c_in=4)
        xt, wt = apply_rotation(x, w, np.diag([1.0, 2.0, 1.0, 1.0]), check=False)
        assert xt.shape == x.shape and wt.shape == w.shape

    def test_product_preserved(self, rng):
        x, w = random_pair(rng, c_in=64)
        xt, wt = apply_rotation(x, w, hadamard(64))
        residual = np.linalg.norm(x @ w - xt @ wt) / np.linalg.norm(x @ w)
        assert residual < 1e-10

    def test_token_norms_preserved(self, rng):
        x, w = random_pair(rng, c_in=16)
        xt, _ = apply_rotation(x, w, hadamard(16))
        np.testing.assert_allclose(
            np.linalg.norm(xt, axis=1), np.linalg.norm(x, axis=1), rtol=1e-12
        )


class TestSmoothRotate:
    def test_equal_maxima_reduces_to_pure_rotation(self, rng):
        x = rng.normal(size=(5, 8))
        w = x.T.copy()  # per-channel maxima of X and W match exactly
        spec = TransformSpec(kind="smooth-rotate", alpha=0.5)
        xt, wt = smooth_rotate(x, w, spec)
        xr, wr = apply_rotation(x, w, hadamard(8))
        np.testing.assert_allclose(xt, xr, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(wt, wr, rtol=1e-12, atol=1e-15)

    def test_single_outlier_documented_maxima(self):
        # d=4, o=100, max|W|=1 everywhere: rotation alone spreads the
        # outlier to 100/2 = 50; smoothing first brings it to √(100/4) = 5.
        x = np.zeros((1, 4))
        x[0, 0] = 100.0
        w = np.ones((4, 2))
        rot_x, _ = apply_transform(x, w, TransformSpec(kind="rotate"))
        hyb_x, _ = apply_transform(x, w, TransformSpec(kind="smooth-rotate", alpha=0.5))
        assert np.abs(rot_x).max() == pytest.approx(50.0, rel=1e-12)
        assert np.abs(hyb_x).max() == pytest.approx(5.0, rel=1e-9)


class TestApplyTransform:
    def test_none_is_identity(self, rng):
        x, w = random_pair(rng)
        xt, wt = apply_transform(x, w, TransformSpec(kind="none"))
        np.testing.assert_array_equal(xt, x)
        np.testing.assert_array_equal(wt, w)

    @pytest.mark.parametrize("kind", TRANSFORM_KINDS)
    @pytest.mark.parametrize("c_in", [2, 4, 8, 64])
    def test_equivalence_all_kinds(self, rng, kind, c_in):
        x = rng.normal(size=(5, c_in))
        w = rng.normal(size=(c_in, 3))
        xt, wt = apply_transform(x, w, TransformSpec(kind=kind, alpha=0.5))
        residual = np.linalg.norm(x @ w - xt @ wt) / np.linalg.norm(x @ w)
        assert residual < 1e-10

    def test_rotation_impossible_size_propagates(self, rng):
        x = rng.normal(size=(2, 6))
        w = rng.normal(size=(6, 2))
        from smoothrot import UnsupportedSizeError

        with pytest.raises(UnsupportedSizeError):
            apply_transform(x, w, TransformSpec(kind="rotate"))


class TestVerifyEquivalence:
    def test_identical_pairs_are_zero(self, rng):
        x, w = random_pair(rng)
        assert verify_equivalence(x, w, x, w) == 0.0

    def test_smoothing_residual_below_1e12(self, rng):
        for _ in range(5):
            x, w = random_pair(rng)
            xt, wt = apply_transform(x, w, TransformSpec(kind="smooth", alpha=0.4))
            assert verify_equivalence(x, w, xt, wt) < 1e-12

    def test_rotation_residual_below_1e10(self, rng):
        x, w = random_pair(rng, c_in=32)
        xt, wt = apply_transform(x, w, TransformSpec(kind="rotate"))
        assert verify_equivalence(x, w, xt, wt) < 1e-10

    def test_detects_broken_pair(self, rng):
        x, w = random_pair(rng)
        assert verify_equivalence(x, w, 2.0 * x, w) > 0.1


class TestAlphaSweep:
    def test_returns_pair_per_alpha(self, rng):
        x, w = random_pair(rng, c_in=8)
        cfg_a = QuantConfig(bits=4)
        cfg_w = QuantConfig(bits=4, granularity="per-channel")
        alphas = [0.1, 0.25, 0.5, 0.75, 0.9]
        sweep = alpha_sweep(x, w, alphas, cfg_a, cfg_w)
        assert [a for a, _ in sweep] == alphas
        xt, wt = apply_transform(x, w, TransformSpec(kind="smooth", alpha=0.5))
        expected = layer_error(xt, wt, cfg_a, cfg_w)
        assert dict(sweep)[0.5] == pytest.approx(expected, rel=1e-12)

    def test_smooth_rotate_kind(self, rng):
        x, w = random_pair(rng, c_in=8)
        cfg_a = QuantConfig(bits=4)
        cfg_w = QuantConfig(bits=4, granularity="per-channel")
        sweep = alpha_sweep(x, w, [0.5], cfg_a, cfg_w, kind="smooth-rotate")
        assert len(sweep) == 1 and sweep[0][1] >= 0.0


class TestEstimators:
    def test_make_transform_dispatch(self):
        kinds = {
            "none": IdentityTransform,
            "smooth": Smoother,
            "rotate": HadamardRotator,
            "smooth-rotate": SmoothRotator,
        }
        for kind, cls in kinds.items():
            est = make_transform(TransformSpec(kind=kind, alpha=0.5))
            assert isinstance(est, cls)
            assert isinstance(est, EquivalentTransform)

    def test_unfitted_transform_raises(self, rng):
        x, _ = random_pair(rng)
        with pytest.raises(NotFittedError):
            Smoother().transform(x)

    def test_transform_pair_matches_functional_path(self, rng):
        x, w = random_pair(rng, c_in=8)
        for kind in TRANSFORM_KINDS:
            spec = TransformSpec(kind=kind, alpha=0.5)
            est = make_transform(spec)
            xt_est, wt_est = est.transform_pair(x, w)
            xt_fn, wt_fn = apply_transform(x, w, spec)
            np.testing.assert_allclose(xt_est, xt_fn, rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(wt_est, wt_fn, rtol=1e-12, atol=1e-15)

    def test_fitted_state_reusable(self, rng):
        x, w = random_pair(rng, c_in=8)
        est = Smoother(alpha=0.5).fit(x, w)
        xt = est.transform(x)
        wt = est.transform_weights(w)
        residual = np.linalg.norm(x @ w - xt @ wt) / np.linalg.norm(x @ w)
        assert residual < 1e-12
        assert est.scales_.shape == (8,)

    def test_rotator_exposes_rotation(self, rng):
        x, w = random_pair(rng, c_in=4)
        est = HadamardRotator().fit(x, w)
        assert est.rotation_.shape == (4, 4)
        np.testing.assert_array_equal(est.rotation_, hadamard(4))

    def test_get_params_and_clone(self):
        est = SmoothRotator(alpha=0.25)
        assert est.get_params() == {"alpha": 0.25, "epsilon_clamp": 1e-8}
        assert clone(est).get_params() == est.get_params()

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_equivalence_property_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 8))
        w = rng.normal(size=(8, 2))
        xt, wt = apply_transform(x, w, TransformSpec(kind="smooth-rotate", alpha=0.5))
        residual = np.linalg.norm(x @ w - xt @ wt) / max(np.linalg.norm(x @ w), 1e-300)
        assert residual < 1e-10
