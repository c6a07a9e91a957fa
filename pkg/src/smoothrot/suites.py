"""Built-in synthetic layer suites.

Each suite builder maps a master seed to a deterministic list of layer
records (activation + weight pairs) exercising a specific outlier regime:

- "massive-basic": 4 layers at d = 4096 where a single token carries
  massive outliers (up to 1000) over σ = 0.1 background noise, with benign
  flat (uniform) weights. The first layer (single outlier of 1000) is the
  canonical rotation-pathology case: rotating it makes 4-bit quantization
  *worse* than doing nothing, while smooth-rotate beats everything. Flat
  weights keep the no-transform baseline honest — they quantize almost
  losslessly as-is, whereas rotation reshapes them toward a Gaussian and
  squanders the grid on the massive token's two centroids.
- "systematic-basic": 2 layers at d = 256 where one channel is amplified
  100× across all tokens — the regime where rotation shines.
- "systematic-sweep": 8 layers with geometrically graded channel
  amplification, for difficulty-vs-error correlation studies.

Per-record seeds are drawn from the master seed's SplitMix64 stream, so a
suite is bit-reproducible given (name, seed).
"""

from __future__ import annotations

import numpy as np

from .actd import Dtype, LayerRecord, RecordKind
from .outliers import (
    OutlierTokenSpec,
    SystematicSpec,
    normal_stream,
    splitmix64_stream,
    synth_massive_token,
    synth_systematic,
    uniform_stream,
)

__all__ = ["SUITES", "build_suite", "suite_names"]

_MASSIVE_DIM = 4096
_MASSIVE_TOKENS = 32
_MASSIVE_OUT = 64
_MASSIVE_SIGMA = 0.1
# Benign weights are uniform on ±√3·0.02 (rms 0.02): flat weights are the
# easy case for direct 4-bit quantization, which is what makes the rotation
# pathology on the massive records visible at every seed.
_MASSIVE_W_RMS = 0.02

_SYSTEMATIC_DIM = 256
_SYSTEMATIC_TOKENS = 512
_SYSTEMATIC_OUT = 64
_SYSTEMATIC_W_SIGMA = 0.05


def _record_seeds(seed: int, count: int) -> list[int]:
    return [int(v) for v in splitmix64_stream(seed, count)]


def _pair(name: str, x, w) -> list[LayerRecord]:
    return [
        LayerRecord(name=name, kind=RecordKind.ACTIVATION, matrix=x, dtype_stored=Dtype.F64),
        LayerRecord(name=name, kind=RecordKind.WEIGHT, matrix=w, dtype_stored=Dtype.F64),
    ]


def _massive_basic(seed: int) -> list[LayerRecord]:
    layers = [
        ("layer.0.down_proj", {1: 1000.0}),
        ("layer.1.down_proj", {1: 1000.0, 2: 600.0}),
        ("layer.2.o_proj", {1: 900.0, 2: 500.0, 4: 300.0}),
        ("layer.3.o_proj", {3: 800.0}),
    ]
    seeds = _record_seeds(seed, 3 * len(layers))
    records: list[LayerRecord] = []
    for index, (name, outliers) in enumerate(layers):
        token_seed, noise_seed, weight_seed = seeds[3 * index : 3 * index + 3]
        spec = OutlierTokenSpec(
            dim=_MASSIVE_DIM,
            outlier_dims=tuple(outliers),
            outlier_values=outliers,
            noise_sigma=_MASSIVE_SIGMA,
            seed=token_seed,
        )
        massive = synth_massive_token(spec)
        benign = (
            normal_stream(noise_seed, (_MASSIVE_TOKENS - 1) * _MASSIVE_DIM).reshape(
                _MASSIVE_TOKENS - 1, _MASSIVE_DIM
            )
            * _MASSIVE_SIGMA
        )
        x = np.vstack([massive[None, :], benign])
        w = (
            uniform_stream(weight_seed, _MASSIVE_DIM * _MASSIVE_OUT).reshape(
                _MASSIVE_DIM, _MASSIVE_OUT
            )
            * (_MASSIVE_W_RMS * np.sqrt(3.0))
        )
        records.extend(_pair(name, x, w))
    return records


def _systematic_basic(seed: int) -> list[LayerRecord]:
    layers = [
        ("layer.0.k_proj", (7,), 100.0),
        ("layer.1.gate_proj", (100,), 100.0),
    ]
    seeds = _record_seeds(seed ^ 0x5357EE7, 2 * len(layers))
    records: list[LayerRecord] = []
    for index, (name, channels, scale) in enumerate(layers):
        act_seed, weight_seed = seeds[2 * index : 2 * index + 2]
        spec = SystematicSpec(
            tokens=_SYSTEMATIC_TOKENS,
            dim=_SYSTEMATIC_DIM,
            outlier_channels=channels,
            channel_scale=scale,
            base_sigma=1.0,
            seed=act_seed,
        )
        x = synth_systematic(spec)
        w = (
            normal_stream(weight_seed, _SYSTEMATIC_DIM * _SYSTEMATIC_OUT).reshape(
                _SYSTEMATIC_DIM, _SYSTEMATIC_OUT
            )
            * _SYSTEMATIC_W_SIGMA
        )
        records.extend(_pair(name, x, w))
    return records


def _systematic_sweep(seed: int) -> list[LayerRecord]:
    scales = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
    seeds = _record_seeds(seed ^ 0x5CA1E5, 2 * len(scales))
    records: list[LayerRecord] = []
    for index, scale in enumerate(scales):
        act_seed, weight_seed = seeds[2 * index : 2 * index + 2]
        spec = SystematicSpec(
            tokens=_SYSTEMATIC_TOKENS,
            dim=_SYSTEMATIC_DIM,
            outlier_channels=(7,),
            channel_scale=scale,
            base_sigma=1.0,
            seed=act_seed,
        )
        x = synth_systematic(spec)
        w = (
            normal_stream(weight_seed, _SYSTEMATIC_DIM * _SYSTEMATIC_OUT).reshape(
                _SYSTEMATIC_DIM, _SYSTEMATIC_OUT
            )
            * _SYSTEMATIC_W_SIGMA
        )
        records.extend(_pair(f"layer.{index}.down_proj", x, w))
    return records


SUITES = {
    "massive-basic": _massive_basic,
    "systematic-basic": _systematic_basic,
    "systematic-sweep": _systematic_sweep,
}


def suite_names() -> list[str]:
    return sorted(SUITES)


def build_suite(name: str, seed: int = 0) -> list[LayerRecord]:
    """Build a named suite; raises ValueError listing the known names."""
    try:
        builder = SUITES[name]
    except KeyError:
        known = ", ".join(suite_names())
        raise ValueError(f"unknown suite {name!r}; available suites: {known}") from None
    return builder(seed)
