"""Symmetric integer round-to-nearest (RTN) fake quantization.

The grid for a bit width ``b`` is the symmetric integer range
[-(2^{b-1}-1), 2^{b-1}-1]; each group (token row or weight column) gets one
step size Δ = max|group| / (2^{b-1}-1), so no value is ever clipped.
Quantization is "fake": values are rounded onto the grid and immediately
rescaled, which is exactly what is needed to measure the error the grid
would introduce.

Weight granularity note: "per-channel" means per OUTPUT channel — one Δ per
column of W in the ``X @ W`` orientation. This is the standard convention
and is assumed everywhere a weight config appears.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_bits, check_compatible, check_matrix, check_vector

__all__ = [
    "GRANULARITIES",
    "ROUNDINGS",
    "QuantConfig",
    "QuantResult",
    "RTNQuantizer",
    "compute_steps",
    "quantize_rtn",
    "layer_error",
    "quant_noise_variance",
    "effective_bins",
]

GRANULARITIES = ("per-token", "per-channel")
ROUNDINGS = ("half-even", "half-away")


@dataclass(frozen=True)
class QuantConfig:
    """Immutable quantizer settings.

    Attributes:
        bits: Bit width b >= 2; the grid spans [-(2^{b-1}-1), 2^{b-1}-1].
        granularity: "per-token" (one step per row) or "per-channel"
            (one step per column).
        rounding: "half-even" (ties to the even integer) or "half-away"
            (ties away from zero).
    """

    bits: int = 4
    granularity: str = "per-token"
    rounding: str = "half-even"

    def __post_init__(self) -> None:
        check_bits(self.bits)
        if self.granularity not in GRANULARITIES:
            raise ValueError(
                f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}"
            )
        if self.rounding not in ROUNDINGS:
            raise ValueError(
                f"rounding must be one of {ROUNDINGS}, got {self.rounding!r}"
            )

    @property
    def max_level(self) -> int:
        """Largest integer grid value, 2^{b-1} - 1."""
        return 2 ** (self.bits - 1) - 1


@dataclass
class QuantResult:
    """Output of :func:`quantize_rtn`.

    Attributes:
        integer_grid: Integer matrix X_INT, entries in [-max_level, max_level].
        steps: One step size Δ per group (row or column per the config).
        dequantized: Q(X) = X_INT · Δ broadcast back over groups.
    """

    integer_grid: np.ndarray
    steps: np.ndarray
    dequantized: np.ndarray
    config: QuantConfig = field(default_factory=QuantConfig)


def _round_ties(values: np.ndarray, rounding: str) -> np.ndarray:
    if rounding == "half-even":
        return np.rint(values)
    # half-away: sign(x) * floor(|x| + 0.5)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def compute_steps(x, cfg: QuantConfig) -> np.ndarray:
    """Per-group step sizes Δ = max|group| / (2^{b-1} - 1).

    Groups are rows for "per-token" and columns for "per-channel". An
    all-zero group gets Δ = 0.
    """
    x = check_matrix(x, "x")
    axis = 1 if cfg.granularity == "per-token" else 0
    return np.max(np.abs(x), axis=axis) / cfg.max_level


def quantize_rtn(x, cfg: QuantConfig | None = None) -> QuantResult:
    """Round-to-nearest quantization onto the symmetric integer grid.

    X_INT = round(X / Δ) per group with the config's tie rule; the
    dequantized matrix is X_INT · Δ. Groups with Δ = 0 (all-zero) dequantize
    to exactly zero.

    Args:
        x: Input matrix.
        cfg: Quantizer settings; defaults to 4-bit per-token half-even.

    Returns:
        QuantResult with integer grid, steps, and dequantized values.
    """
    cfg = cfg or QuantConfig()
    x = check_matrix(x, "x")
    steps = compute_steps(x, cfg)
    safe = np.where(steps > 0, steps, 1.0)
    if cfg.granularity == "per-token":
        normalized = x / safe[:, None]
    else:
        normalized = x / safe[None, :]
    grid = _round_ties(normalized, cfg.rounding).astype(np.int64)
    if cfg.granularity == "per-token":
        deq = grid * steps[:, None]
    else:
        deq = grid * steps[None, :]
    return QuantResult(integer_grid=grid, steps=steps, dequantized=deq, config=cfg)


def layer_error(x, w, cfg_act: QuantConfig, cfg_wt: QuantConfig) -> float:
    """Squared Frobenius norm of the layer output gap, ‖XW − Q(X)Q(W)‖_F².

    Activations are quantized with ``cfg_act`` (normally per-token), weights
    with ``cfg_wt`` (normally per output channel).
    """
    x = check_matrix(x, "x")
    w = check_matrix(w, "w")
    check_compatible(x, w)
    qx = quantize_rtn(x, cfg_act).dequantized
    qw = quantize_rtn(w, cfg_wt).dequantized
    gap = x @ w - qx @ qw
    return float(np.linalg.norm(gap, "fro") ** 2)


def quant_noise_variance(step: float) -> float:
    """Variance Δ²/12 of quantization noise under the uniform-noise model."""
    step = float(step)
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return step * step / 12.0


def effective_bins(token, step: float, rounding: str = "half-even") -> int:
    """Number of distinct integer grid values a token occupies at step Δ.

    A handful of effective bins on a wide token is the signature of a
    massive outlier: the outlier pins Δ so high that everything else
    collapses into the zero bin. Returns 1 when Δ = 0.
    """
    token = check_vector(token, "token")
    step = float(step)
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if rounding not in ROUNDINGS:
        raise ValueError(f"rounding must be one of {ROUNDINGS}, got {rounding!r}")
    if step == 0:
        return 1
    grid = _round_ties(token / step, rounding).astype(np.int64)
    return int(np.unique(grid).size)


class RTNQuantizer(TransformerMixin, BaseEstimator):
    """Stateless fake-quantization transformer (scikit-learn style).

    Like ``sklearn.preprocessing.Normalizer``, this estimator learns nothing
    from data — each group's step is recomputed from the matrix being
    transformed — so ``fit`` only validates parameters.

    Parameters mirror :class:`QuantConfig`.

    Example:
        >>> q = RTNQuantizer(bits=4)
        >>> deq = q.fit_transform([[7.0, -3.5, 1.0]])
    """

    def __init__(
        self,
        bits: int = 4,
        granularity: str = "per-token",
        rounding: str = "half-even",
    ):
        self.bits = bits
        self.granularity = granularity
        self.rounding = rounding

    def as_config(self) -> QuantConfig:
        """Validated QuantConfig built from the current parameters."""
        return QuantConfig(
            bits=self.bits, granularity=self.granularity, rounding=self.rounding
        )

    def fit(self, X, y=None):
        self.as_config()
        check_matrix(X, "X")
        return self

    def transform(self, X) -> np.ndarray:
        """Quantize-dequantize X, leaving it on the real-valued grid."""
        return quantize_rtn(X, self.as_config()).dequantized

    def quantize(self, X) -> QuantResult:
        """Full quantization result (integer grid, steps, dequantized)."""
        return quantize_rtn(X, self.as_config())
