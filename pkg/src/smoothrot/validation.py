"""Input validation helpers shared by every public entry point.

All numeric behavior in this package is defined on finite float64 matrices;
these helpers coerce and check once at the boundary so the numeric code can
assume clean inputs.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .exceptions import NotFiniteError, ShapeError

__all__ = [
    "check_matrix",
    "check_vector",
    "check_bits",
    "check_compatible",
]


def check_matrix(x: Any, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float64 array with positive dimensions.

    Args:
        x: Array-like input.
        name: Label used in error messages.

    Returns:
        A C-contiguous float64 ndarray of shape (rows, cols); a copy only
        when coercion requires one.

    Raises:
        ShapeError: If the input is not 2-D or has a zero-length axis.
        NotFiniteError: If the input contains NaN or infinities.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NotFiniteError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_vector(x: Any, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array of positive length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1:
        raise ShapeError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise NotFiniteError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_bits(bits: int) -> int:
    """Validate a bit width (integer, at least 2)."""
    if not isinstance(bits, (int, np.integer)) or isinstance(bits, bool):
        raise TypeError(f"bits must be an integer, got {type(bits).__name__}")
    if bits < 2:
        raise ValueError(f"bits must be >= 2, got {bits}")
    return int(bits)


def check_compatible(x: np.ndarray, w: np.ndarray) -> None:
    """Require that ``x @ w`` is defined (inner dimensions agree)."""
    if x.shape[1] != w.shape[0]:
        raise ShapeError(
            f"inner dimensions do not agree: ({x.shape[0]}, {x.shape[1]}) @ "
            f"({w.shape[0]}, {w.shape[1]})"
        )
