"""Difficulty and distribution-shape statistics, plus the report pipeline.

The central quantity is quantization difficulty: the population standard
deviation of per-channel magnitudes. A perfectly flat tensor (all channels
equally strong) has difficulty 0 and quantizes cleanly with one step per
group; a tensor dominated by a few strong channels has high difficulty and
wastes most of its integer grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actd import LayerRecord, RecordKind
from .exceptions import ShapeError, UndefinedStatisticError
from .linalg import channel_magnitudes
from .quant import QuantConfig, layer_error, quantize_rtn
from .transforms import TransformSpec, apply_transform
from .validation import check_matrix

__all__ = [
    "DifficultyReport",
    "quantization_difficulty",
    "kurtosis",
    "pearson",
    "report_row",
    "measure_transformed",
    "pair_records",
    "build_report",
]


def quantization_difficulty(m) -> float:
    """Population standard deviation of the channel magnitudes of ``m``.

    Zero iff all channel magnitudes are equal; scales linearly with the
    matrix (difficulty(c·M) = |c|·difficulty(M)).
    """
    magnitudes = channel_magnitudes(m)
    return float(np.std(magnitudes))


def kurtosis(m) -> float:
    """Excess kurtosis of the flattened entries (normal ≈ 0).

    Raises:
        UndefinedStatisticError: If all entries are equal (zero variance).
    """
    flat = check_matrix(m, "m").ravel()
    centered = flat - flat.mean()
    variance = float(np.mean(centered**2))
    if variance == 0.0:
        raise UndefinedStatisticError("kurtosis is undefined for a constant matrix")
    fourth = float(np.mean(centered**4))
    return fourth / variance**2 - 3.0


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length vectors.

    Raises:
        ShapeError: On length mismatch or fewer than 2 points.
        UndefinedStatisticError: If either vector is constant.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ShapeError("pearson requires at least 2 points")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise UndefinedStatisticError("pearson inputs must be finite")
    xc = x - x.mean()
    yc = y - y.mean()
    xx = float(np.dot(xc, xc))
    yy = float(np.dot(yc, yc))
    if xx == 0.0 or yy == 0.0:
        raise UndefinedStatisticError("pearson is undefined for constant input")
    # Single square root of the product keeps exactly linear inputs at ±1:
    # the product under the root is then a perfect square of the numerator.
    r = float(np.dot(xc, yc)) / np.sqrt(xx * yy)
    return max(-1.0, min(1.0, r))


@dataclass
class DifficultyReport:
    """One report row: a (record, transform) pair after quantization.

    ``layer_error`` is ‖XW − Q(X)Q(W)‖_F² on the transformed pair;
    ``effective_bins_min`` is the minimum over tokens of the number of
    distinct integer grid values the token occupies.
    """

    record_name: str
    transform: str
    layer_error: float
    act_difficulty: float
    wt_difficulty: float
    act_kurtosis: float
    wt_kurtosis: float
    act_max_abs: float
    effective_bins_min: int


def report_row(
    name: str,
    x,
    w,
    spec: TransformSpec,
    cfg_act: QuantConfig,
    cfg_wt: QuantConfig,
) -> DifficultyReport:
    """Apply one transform to one layer pair and measure everything."""
    xt, wt = apply_transform(x, w, spec)
    return measure_transformed(name, spec.kind, xt, wt, cfg_act, cfg_wt)


def measure_transformed(
    name: str,
    kind: str,
    xt,
    wt,
    cfg_act: QuantConfig,
    cfg_wt: QuantConfig,
) -> DifficultyReport:
    """Measure an already-transformed pair (callers that reuse xt/wt)."""
    error = layer_error(xt, wt, cfg_act, cfg_wt)
    quantized = quantize_rtn(xt, cfg_act)
    if cfg_act.granularity == "per-token":
        bins = min(np.unique(row).size for row in quantized.integer_grid)
    else:
        bins = min(np.unique(col).size for col in quantized.integer_grid.T)
    return DifficultyReport(
        record_name=name,
        transform=kind,
        layer_error=error,
        act_difficulty=quantization_difficulty(xt),
        wt_difficulty=quantization_difficulty(wt),
        act_kurtosis=kurtosis(xt),
        wt_kurtosis=kurtosis(wt),
        act_max_abs=float(np.abs(xt).max()),
        effective_bins_min=int(bins),
    )


def pair_records(records: list[LayerRecord]) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Match activation records with their weight counterparts by name.

    Returns (name, activation, weight) triples in activation-record order.

    Raises:
        ValueError: On an activation without a weight (or vice versa), or
            when the pair's inner dimensions disagree.
    """
    activations: dict[str, np.ndarray] = {}
    weights: dict[str, np.ndarray] = {}
    order: list[str] = []
    for record in records:
        bucket = activations if record.kind is RecordKind.ACTIVATION else weights
        bucket[record.name] = record.matrix
        if record.kind is RecordKind.ACTIVATION:
            order.append(record.name)
    missing_weights = [name for name in order if name not in weights]
    if missing_weights:
        raise ValueError(f"activation records without weights: {missing_weights}")
    orphans = sorted(set(weights) - set(activations))
    if orphans:
        raise ValueError(f"weight records without activations: {orphans}")
    pairs = []
    for name in order:
        x, w = activations[name], weights[name]
        if x.shape[1] != w.shape[0]:
            raise ShapeError(
                f"record {name!r}: activation cols {x.shape[1]} != weight rows {w.shape[0]}"
            )
        pairs.append((name, x, w))
    return pairs


def build_report(
    records: list[LayerRecord],
    cfg_act: QuantConfig,
    cfg_wt: QuantConfig,
    specs: list[TransformSpec],
) -> list[DifficultyReport]:
    """One DifficultyReport per (record, spec), in record × spec order.

    Records pair by name (one Activation and one Weight each). Rows are
    independent, so this could fan out across records; it runs sequentially
    and any parallel execution must match this output exactly.
    """
    if not records:
        raise ValueError("records must be nonempty")
    rows = []
    for name, x, w in pair_records(records):
        for spec in specs:
            rows.append(report_row(name, x, w, spec, cfg_act, cfg_wt))
    return rows
