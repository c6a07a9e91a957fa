"""Dense matrix primitives used throughout the workbench.

Matrices are plain float64 ndarrays in the ``X @ W`` orientation: activations
are (tokens, channels), weights are (in_channels, out_channels). The helpers
here validate at the boundary and delegate the arithmetic to numpy.
"""

from __future__ import annotations

import numpy as np

from .validation import check_compatible, check_matrix

__all__ = [
    "matmul",
    "frobenius_norm",
    "channel_magnitudes",
    "kronecker",
]


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product ``a @ b`` with shape/finiteness validation."""
    a = check_matrix(a, "a")
    b = check_matrix(b, "b")
    check_compatible(a, b)
    return a @ b


def frobenius_norm(m: np.ndarray) -> float:
    """Frobenius norm: sqrt of the sum of squared entries."""
    m = check_matrix(m, "m")
    return float(np.linalg.norm(m, "fro"))


def channel_magnitudes(m: np.ndarray) -> np.ndarray:
    """Euclidean norm of each column.

    For an activation matrix (tokens, channels) this is the per-channel
    magnitude profile whose spread drives quantization difficulty.
    """
    m = check_matrix(m, "m")
    return np.linalg.norm(m, axis=0)


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices."""
    a = check_matrix(a, "a")
    b = check_matrix(b, "b")
    return np.kron(a, b)
