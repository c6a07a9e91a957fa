"""Synthetic outlier generators and the analytic predictions they satisfy.

Two outlier regimes are modeled:

- massive: a single token carries extreme values o_j at a few dimensions
  j ∈ O, everything else is N(0, σ²) noise;
- systematic: a few channels are scaled up across all tokens.

For the massive regime under a Sylvester Hadamard rotation the rotated
token is fully characterized analytically: its entries cluster around
2^{|O|-1} absolute centroids |Σ σ_i o_i|/√d, its max is Σ|o_i|/√d when the
outliers share a sign, and after smoothing at α = 0.5 the max drops to
Σ √(|o_i|·max|W_i|/d). The functions here compute those predictions so
tests and the verify command can check them against brute-force multiplies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .validation import check_vector

__all__ = [
    "splitmix64_stream",
    "normal_stream",
    "uniform_stream",
    "OutlierTokenSpec",
    "SystematicSpec",
    "synth_massive_token",
    "synth_systematic",
    "predict_centroids",
    "predict_rot_max",
    "predict_smooth_rot_max",
    "ClusterCheck",
    "cluster_check",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of SplitMix64 seeded with ``seed``.

    SplitMix64 advances its 64-bit state by the golden-ratio constant
    0x9E3779B97F4A7C15 and scrambles it with two xor-multiply rounds
    (constants 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB, shifts 30/27/31).
    The additive state recurrence makes the whole stream computable in one
    vectorized pass. Output k is identical on every platform and language
    that implements the same algorithm.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    state0 = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    steps = np.arange(1, count + 1, dtype=np.uint64)
    z = state0 + steps * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def normal_stream(seed: int, count: int) -> np.ndarray:
    """``count`` standard normal draws from a portable generator.

    Algorithm (fixed; do not change without versioning the suites): take
    2·ceil(count/2) SplitMix64 outputs, map the first half to uniforms
    u1 = ((z >> 11) + 1) · 2⁻⁵³ ∈ (0, 1] and the second half to
    u2 = (z >> 11) · 2⁻⁵³ ∈ [0, 1), then apply the Box–Muller transform:
    r = √(−2 ln u1), pairs (r·cos 2πu2, r·sin 2πu2) interleaved cos-half
    first. Bit-reproducible for a given seed.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return np.zeros(0)
    half = (count + 1) // 2
    raw = splitmix64_stream(seed, 2 * half)
    scale = float(2.0**-53)
    u1 = ((raw[:half] >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * scale
    u2 = (raw[half:] >> np.uint64(11)).astype(np.float64) * scale
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]


def uniform_stream(seed: int, count: int) -> np.ndarray:
    """``count`` uniform draws on [-1, 1) from a portable generator.

    Algorithm (fixed; do not change without versioning the suites): map
    each SplitMix64 output to u = (z >> 11) · 2⁻⁵³ ∈ [0, 1) and return
    2u − 1. Bit-reproducible for a given seed.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    raw = splitmix64_stream(seed, count)
    u = (raw >> np.uint64(11)).astype(np.float64) * float(2.0**-53)
    return 2.0 * u - 1.0


@dataclass(frozen=True)
class OutlierTokenSpec:
    """A single token with massive outliers.

    Attributes:
        dim: Token dimensionality d.
        outlier_dims: Indices in [0, d) carrying the outliers (set O).
        outlier_values: Map j → o_j for every j in O.
        noise_sigma: Standard deviation σ of the background noise.
        seed: Generator seed for the noise.

    The outliers must strictly dominate the noise (min|o_j| > 10σ) so the
    cluster analysis downstream is well-posed.
    """

    dim: int
    outlier_dims: tuple[int, ...]
    outlier_values: Mapping[int, float] = field(default_factory=dict)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        dims = tuple(sorted(int(j) for j in self.outlier_dims))
        object.__setattr__(self, "outlier_dims", dims)
        if not dims:
            raise ValueError("outlier_dims must be nonempty")
        if len(set(dims)) != len(dims):
            raise ValueError("outlier_dims must be distinct")
        if dims[0] < 0 or dims[-1] >= self.dim:
            raise ValueError(f"outlier_dims must lie in [0, {self.dim})")
        values = {int(j): float(v) for j, v in self.outlier_values.items()}
        object.__setattr__(self, "outlier_values", values)
        if set(values) != set(dims):
            raise ValueError("outlier_values keys must equal outlier_dims")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        magnitudes = [abs(v) for v in values.values()]
        if min(magnitudes) <= 10.0 * self.noise_sigma:
            raise ValueError(
                "outlier magnitudes must strictly dominate noise: "
                f"min |o_j| = {min(magnitudes)} <= 10σ = {10.0 * self.noise_sigma}"
            )


@dataclass(frozen=True)
class SystematicSpec:
    """Gaussian tokens with a few amplified channels.

    ``channel_scale`` > 1 multiplies the listed channels across all tokens;
    everything else is N(0, base_sigma²).
    """

    tokens: int
    dim: int
    outlier_channels: tuple[int, ...]
    channel_scale: float
    base_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tokens < 1:
            raise ValueError(f"tokens must be >= 1, got {self.tokens}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        channels = tuple(sorted(int(j) for j in self.outlier_channels))
        object.__setattr__(self, "outlier_channels", channels)
        if not channels:
            raise ValueError("outlier_channels must be nonempty")
        if len(set(channels)) != len(channels):
            raise ValueError("outlier_channels must be distinct")
        if channels[0] < 0 or channels[-1] >= self.dim:
            raise ValueError(f"outlier_channels must lie in [0, {self.dim})")
        if not self.channel_scale > 1.0:
            raise ValueError(f"channel_scale must be > 1, got {self.channel_scale}")
        if not self.base_sigma > 0.0:
            raise ValueError(f"base_sigma must be > 0, got {self.base_sigma}")


def synth_massive_token(spec: OutlierTokenSpec) -> np.ndarray:
    """Generate the massive-outlier token: exact o_j at O, noise elsewhere."""
    token = normal_stream(spec.seed, spec.dim) * spec.noise_sigma
    for j, value in spec.outlier_values.items():
        token[j] = value
    return token


def synth_systematic(spec: SystematicSpec) -> np.ndarray:
    """Generate the systematic-outlier activation matrix (tokens × dim)."""
    matrix = normal_stream(spec.seed, spec.tokens * spec.dim).reshape(
        spec.tokens, spec.dim
    )
    matrix *= spec.base_sigma
    matrix[:, list(spec.outlier_channels)] *= spec.channel_scale
    return matrix


def _rotation_dim(spec: OutlierTokenSpec, d: int | None) -> int:
    dim = spec.dim if d is None else int(d)
    if dim < 1:
        raise ValueError(f"rotation dimension must be >= 1, got {dim}")
    return dim


def predict_centroids(spec: OutlierTokenSpec, d: int | None = None) -> np.ndarray:
    """Absolute centroid values the rotated token clusters around.

    Under a ±1/√d rotation each output dimension sees Σ_i σ_i o_i / √d for
    some sign pattern σ ∈ {±1}^|O|, so the absolute values concentrate on
    the set {|Σ σ_i o_i|/√d} — at most 2^{|O|-1} distinct reals (fewer when
    sums coincide). Returned sorted ascending, duplicates removed.

    Args:
        spec: Outlier description.
        d: Rotation dimension; defaults to ``spec.dim``.
    """
    if len(spec.outlier_dims) > 20:
        raise ValueError("centroid enumeration is limited to |O| <= 20")
    dim = _rotation_dim(spec, d)
    values = np.array([spec.outlier_values[j] for j in spec.outlier_dims])
    sums = {
        abs(float(np.dot(signs, values))) / np.sqrt(dim)
        for signs in itertools.product((1.0, -1.0), repeat=values.size)
    }
    return np.array(sorted(sums))


def predict_rot_max(spec: OutlierTokenSpec, d: int | None = None) -> float:
    """Predicted max |entry| of the rotated token: Σ|o_i| / √d.

    Exact (up to the ±3σ noise band) when all outliers share a sign, since
    some Hadamard column then matches every sign; an upper bound otherwise.
    """
    dim = _rotation_dim(spec, d)
    return float(sum(abs(v) for v in spec.outlier_values.values()) / np.sqrt(dim))


def predict_smooth_rot_max(
    spec: OutlierTokenSpec,
    w_channel_max: Mapping[int, float] | np.ndarray,
    d: int | None = None,
) -> float:
    """Predicted max after smoothing (α = 0.5) then rotation.

    Smoothing replaces |o_i| with √(|o_i|·max|W_i|), so the rotated max
    becomes Σ_i √(|o_i|·max|W_i| / d).

    Args:
        spec: Outlier description.
        w_channel_max: Per-channel weight maxima — a mapping j → max|W_j|
            covering O, or a full length-d vector.
        d: Rotation dimension; defaults to ``spec.dim``.
    """
    dim = _rotation_dim(spec, d)
    total = 0.0
    for j in spec.outlier_dims:
        if isinstance(w_channel_max, Mapping):
            if j not in w_channel_max:
                raise ValueError(f"w_channel_max is missing outlier channel {j}")
            wmax = float(w_channel_max[j])
        else:
            wmax = float(np.asarray(w_channel_max).ravel()[j])
        if not wmax > 0:
            raise ValueError(f"w_channel_max must be positive on channel {j}, got {wmax}")
        total += np.sqrt(abs(spec.outlier_values[j]) * wmax / dim)
    return float(total)


@dataclass
class ClusterCheck:
    """Result of :func:`cluster_check`.

    Attributes:
        fraction: Share of entries whose |value| lies within 4σ (plus a
            machine-precision allowance) of the nearest centroid.
        counts: Entries assigned to each centroid by nearest-|value|,
            keyed by centroid value.
    """

    fraction: float
    counts: dict[float, int]


def cluster_check(rotated, centroids, sigma: float) -> ClusterCheck:
    """Assess how tightly a rotated token clusters around predicted centroids.

    Every entry is assigned to its nearest centroid (by absolute value);
    the fraction counts entries within 4σ of their centroid, with a small
    absolute allowance so the σ = 0 case tolerates rounding.
    """
    rotated = check_vector(rotated, "rotated")
    centroids = np.asarray(sorted(float(c) for c in np.asarray(centroids).ravel()))
    if centroids.size == 0:
        raise ValueError("centroids must be nonempty")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    magnitudes = np.abs(rotated)
    distances = np.abs(magnitudes[:, None] - centroids[None, :])
    nearest = np.argmin(distances, axis=1)
    best = distances[np.arange(magnitudes.size), nearest]
    slack = 1e-12 * max(1.0, float(centroids.max()))
    within = best <= 4.0 * sigma + slack
    counts = {float(c): 0 for c in centroids}
    for index in nearest:
        counts[float(centroids[index])] += 1
    return ClusterCheck(fraction=float(np.mean(within)), counts=counts)
