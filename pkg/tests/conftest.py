"""Shared test helpers.

The brute-force quantizer here is the independent oracle for every RTN
test: it never divides by the step or calls any rounding helper from the
package — each entry is matched against every grid point by explicit
distance comparison, with ties broken by the named rule.
"""

from __future__ import annotations

import numpy as np
import pytest


def bruteforce_rtn(x, bits: int, granularity: str, rounding: str):
    """Nearest-grid-point search over all 2^b - 1 candidate levels.

    Returns (integer_grid, steps) computed without the package's rounding
    path: distances |x - k·Δ| are evaluated for every level k and the
    argmin is taken, preferring the even level (half-even) or the larger
    magnitude (half-away) on exact distance ties.
    """
    x = np.asarray(x, dtype=np.float64)
    max_level = 2 ** (bits - 1) - 1
    axis = 1 if granularity == "per-token" else 0
    maxima = np.abs(x).max(axis=axis, keepdims=True)
    steps = maxima / max_level
    levels = np.arange(-max_level, max_level + 1, dtype=np.float64)
    distance = np.abs(x[..., None] - levels * steps[..., None])
    tie = distance == distance.min(axis=-1, keepdims=True)
    if rounding == "half-even":
        preference = 2.0 - np.abs(levels) % 2  # even levels score higher
    elif rounding == "half-away":
        preference = 1.0 + np.abs(levels)  # larger magnitude scores higher
    else:
        raise ValueError(f"unknown rounding {rounding!r}")
    grid = levels[np.argmax(tie * preference, axis=-1)]
    grid = np.where(maxima == 0, 0.0, grid)  # all-zero groups pin to 0
    return grid.astype(np.int64), np.squeeze(steps, axis=axis)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
