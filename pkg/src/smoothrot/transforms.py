"""Equivalent transformations of (activation, weight) pairs.

A transform rewrites X and W so that the layer output X @ W is preserved
while the tensors become easier to quantize:

- smoothing: divide activation channel j by s_j and multiply weight row j
  by the same factor, s_j = max|X_j|^α / max|W_j|^{1-α};
- rotation: X̂ = X R, Ŵ = Rᵀ W with R an orthogonal Hadamard matrix;
- smooth-rotate: smoothing first, then rotation of the smoothed pair.

All statistics are computed online from the given X — there is no
calibration set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import OrthogonalityError, ShapeError
from .hadamard import hadamard, orthogonality_residual
from .quant import QuantConfig, layer_error
from .validation import check_compatible, check_matrix, check_vector

__all__ = [
    "TRANSFORM_KINDS",
    "TransformSpec",
    "smoothing_scale",
    "apply_smoothing",
    "apply_rotation",
    "smooth_rotate",
    "apply_transform",
    "verify_equivalence",
    "alpha_sweep",
    "EquivalentTransform",
    "IdentityTransform",
    "Smoother",
    "HadamardRotator",
    "SmoothRotator",
    "make_transform",
]

TRANSFORM_KINDS = ("none", "smooth", "rotate", "smooth-rotate")

_ROTATION_TOL = 1e-8


@dataclass(frozen=True)
class TransformSpec:
    """Which transform to apply and with what knobs.

    Attributes:
        kind: One of "none", "smooth", "rotate", "smooth-rotate".
        alpha: Migration strength in (0, 1); how much quantization
            difficulty moves from activations onto weights. Only smoothing
            kinds read it. 0.5 is a robust default.
        epsilon_clamp: Per-channel maxima below this are clamped to it when
            computing smoothing scales, guarding dead channels.
    """

    kind: str = "none"
    alpha: float = 0.5
    epsilon_clamp: float = 1e-8

    def __post_init__(self) -> None:
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(
                f"kind must be one of {TRANSFORM_KINDS}, got {self.kind!r}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.epsilon_clamp > 0.0:
            raise ValueError(
                f"epsilon_clamp must be > 0, got {self.epsilon_clamp}"
            )


def smoothing_scale(x, w, alpha: float, epsilon_clamp: float = 1e-8) -> np.ndarray:
    """Per-channel smoothing factors s_j = max|X_j|^α / max|W_j|^{1-α}.

    X_j is column j of the activations, W_j is row j of the weights. A
    channel whose max on either side falls below ``epsilon_clamp`` uses the
    clamp value in that factor, so the result is always strictly positive.
    """
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    check_compatible(x, w)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not epsilon_clamp > 0.0:
        raise ValueError(f"epsilon_clamp must be > 0, got {epsilon_clamp}")
    act_max = np.maximum(np.abs(x).max(axis=0), epsilon_clamp)
    wt_max = np.maximum(np.abs(w).max(axis=1), epsilon_clamp)
    return act_max**alpha / wt_max ** (1.0 - alpha)


def apply_smoothing(x, w, s) -> tuple[np.ndarray, np.ndarray]:
    """Scale the pair: X̂ = X · diag(s)⁻¹, Ŵ = diag(s) · W.

    The product is preserved exactly up to floating-point rounding.
    """
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    s = check_vector(s, "s")
    check_compatible(x, w)
    if s.shape[0] != x.shape[1]:
        raise ShapeError(
            f"scale length {s.shape[0]} does not match channel count {x.shape[1]}"
        )
    if not (s > 0).all():
        raise ValueError("smoothing scales must be strictly positive")
    return x / s[None, :], w * s[:, None]


def apply_rotation(x, w, r, *, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Rotate the pair: X̂ = X R, Ŵ = Rᵀ W.

    Args:
        x: Activations (tokens × channels).
        w: Weights (channels × out).
        r: Orthogonal matrix of size channels × channels.
        check: Verify ‖R Rᵀ − I‖_F ≤ 1e-8 before applying. Internal callers
            pass False for rotations that were validated at construction
            (the check is O(d³) and dominates at large d).

    Raises:
        OrthogonalityError: If ``check`` and r is not orthogonal.
    """
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    r = check_matrix(r, "r")
    check_compatible(x, w)
    if r.shape[0] != r.shape[1] or r.shape[0] != x.shape[1]:
        raise ShapeError(
            f"rotation shape {r.shape} does not match channel count {x.shape[1]}"
        )
    if check:
        residual = orthogonality_residual(r)
        if residual > _ROTATION_TOL:
            raise OrthogonalityError(
                f"rotation is not orthogonal: ‖RRᵀ − I‖_F = {residual:.3e}"
            )
    return x @ r, r.T @ w


def smooth_rotate(x, w, spec: TransformSpec) -> tuple[np.ndarray, np.ndarray]:
    """Smoothing at ``spec.alpha`` followed by Hadamard rotation.

    Smoothing pulls each outlier channel down to the geometric middle
    ground between activations and weights; the rotation then spreads what
    remains across all channels. Each step preserves the product, so the
    composition does too.
    """
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    scales = smoothing_scale(x, w, spec.alpha, spec.epsilon_clamp)
    xs, ws = apply_smoothing(x, w, scales)
    rotation = hadamard(x.shape[1])
    return apply_rotation(xs, ws, rotation, check=False)


def apply_transform(x, w, spec: TransformSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch on ``spec.kind`` and return the transformed pair."""
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    check_compatible(x, w)
    if spec.kind == "none":
        return x, w
    if spec.kind == "smooth":
        scales = smoothing_scale(x, w, spec.alpha, spec.epsilon_clamp)
        return apply_smoothing(x, w, scales)
    if spec.kind == "rotate":
        return apply_rotation(x, w, hadamard(x.shape[1]), check=False)
    return smooth_rotate(x, w, spec)


def verify_equivalence(x, w, xt, wt) -> float:
    """Relative residual ‖XW − X̂Ŵ‖_F / max(‖XW‖_F, tiny).

    Callers compare against their tolerance; exact transforms land below
    1e-12 (smoothing) or 1e-10 (rotation) in double precision.
    """
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    xt = check_matrix(xt, "xt")
    wt = check_matrix(wt, "wt")
    check_compatible(x, w)
    check_compatible(xt, wt)
    reference = x @ w
    transformed = xt @ wt
    if reference.shape != transformed.shape:
        raise ShapeError(
            f"products have different shapes: {reference.shape} vs {transformed.shape}"
        )
    gap = float(np.linalg.norm(reference - transformed, "fro"))
    denom = max(float(np.linalg.norm(reference, "fro")), float(np.finfo(np.float64).tiny))
    return gap / denom


def alpha_sweep(
    x,
    w,
    alphas,
    cfg_act: QuantConfig,
    cfg_wt: QuantConfig,
    kind: str = "smooth",
) -> list[tuple[float, float]]:
    """Layer error across a grid of migration strengths.

    Plumbing for picking per-module alphas empirically: returns
    ``[(alpha, layer_error), ...]`` for the requested smoothing-family
    transform ("smooth" or "smooth-rotate").
    """
    if kind not in ("smooth", "smooth-rotate"):
        raise ValueError(f"alpha_sweep supports smoothing kinds, got {kind!r}")
    results = []
    for alpha in alphas:
        spec = TransformSpec(kind=kind, alpha=float(alpha))
        xt, wt = apply_transform(x, w, spec)
        results.append((float(alpha), layer_error(xt, wt, cfg_act, cfg_wt)))
    return results


class EquivalentTransform(BaseEstimator):
    """Base class for fitted product-preserving transforms.

    Subclasses implement ``fit(X, W)`` to derive their state from a
    concrete pair, then ``transform`` / ``transform_weights`` apply the two
    halves. ``transform_pair`` is the one-shot convenience.
    """

    kind = "none"

    def fit(self, X, W=None):
        check_matrix(X, "X")
        if W is not None:
            check_compatible(check_matrix(X, "X"), check_matrix(W, "W"))
        self.n_channels_ = np.asarray(X).shape[1]
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "n_channels_"):
            raise NotFittedError(
                f"{type(self).__name__} is not fitted; call fit(X, W) first"
            )

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        return check_matrix(X, "X")

    def transform_weights(self, W) -> np.ndarray:
        self._check_fitted()
        return check_matrix(W, "W")

    def transform_pair(self, X, W) -> tuple[np.ndarray, np.ndarray]:
        """Fit on (X, W) and return the transformed pair."""
        self.fit(X, W)
        return self.transform(X), self.transform_weights(W)


class IdentityTransform(EquivalentTransform):
    """The no-op transform; useful as a baseline row in reports."""


class Smoother(EquivalentTransform):
    """Channel-wise scaling transform (diagonal equivalent transform).

    After ``fit``, ``scales_`` holds s_j = max|X_j|^α / max|W_j|^{1-α}.
    At alpha = 0.5 the transformed pair has equal per-channel maxima on
    both sides wherever neither original max was clamped.
    """

    kind = "smooth"

    def __init__(self, alpha: float = 0.5, epsilon_clamp: float = 1e-8):
        self.alpha = alpha
        self.epsilon_clamp = epsilon_clamp

    def fit(self, X, W=None):
        if W is None:
            raise ValueError("Smoother.fit requires the weight matrix W")
        self.scales_ = smoothing_scale(X, W, self.alpha, self.epsilon_clamp)
        self.n_channels_ = self.scales_.shape[0]
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_channels_:
            raise ShapeError(
                f"X has {X.shape[1]} channels, fitted for {self.n_channels_}"
            )
        return X / self.scales_[None, :]

    def transform_weights(self, W) -> np.ndarray:
        self._check_fitted()
        W = check_matrix(W, "W")
        if W.shape[0] != self.n_channels_:
            raise ShapeError(
                f"W has {W.shape[0]} rows, fitted for {self.n_channels_}"
            )
        return W * self.scales_[:, None]


class HadamardRotator(EquivalentTransform):
    """Hadamard rotation transform; ``rotation_`` is set at fit time."""

    kind = "rotate"

    def fit(self, X, W=None):
        X = check_matrix(X, "X")
        if W is not None:
            check_compatible(X, check_matrix(W, "W"))
        self.n_channels_ = X.shape[1]
        self.rotation_ = hadamard(self.n_channels_)
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_channels_:
            raise ShapeError(
                f"X has {X.shape[1]} channels, fitted for {self.n_channels_}"
            )
        return X @ self.rotation_

    def transform_weights(self, W) -> np.ndarray:
        self._check_fitted()
        W = check_matrix(W, "W")
        if W.shape[0] != self.n_channels_:
            raise ShapeError(
                f"W has {W.shape[0]} rows, fitted for {self.n_channels_}"
            )
        return self.rotation_.T @ W


class SmoothRotator(EquivalentTransform):
    """Smoothing followed by Hadamard rotation (the hybrid transform)."""

    kind = "smooth-rotate"

    def __init__(self, alpha: float = 0.5, epsilon_clamp: float = 1e-8):
        self.alpha = alpha
        self.epsilon_clamp = epsilon_clamp

    def fit(self, X, W=None):
        if W is None:
            raise ValueError("SmoothRotator.fit requires the weight matrix W")
        self.scales_ = smoothing_scale(X, W, self.alpha, self.epsilon_clamp)
        self.n_channels_ = self.scales_.shape[0]
        self.rotation_ = hadamard(self.n_channels_)
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_channels_:
            raise ShapeError(
                f"X has {X.shape[1]} channels, fitted for {self.n_channels_}"
            )
        return (X / self.scales_[None, :]) @ self.rotation_

    def transform_weights(self, W) -> np.ndarray:
        self._check_fitted()
        W = check_matrix(W, "W")
        if W.shape[0] != self.n_channels_:
            raise ShapeError(
                f"W has {W.shape[0]} rows, fitted for {self.n_channels_}"
            )
        return self.rotation_.T @ (W * self.scales_[:, None])


def make_transform(spec: TransformSpec) -> EquivalentTransform:
    """Estimator for a TransformSpec."""
    if spec.kind == "none":
        return IdentityTransform()
    if spec.kind == "smooth":
        return Smoother(alpha=spec.alpha, epsilon_clamp=spec.epsilon_clamp)
    if spec.kind == "rotate":
        return HadamardRotator()
    return SmoothRotator(alpha=spec.alpha, epsilon_clamp=spec.epsilon_clamp)
