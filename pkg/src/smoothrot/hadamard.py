"""Hadamard matrix construction: Sylvester recursion plus a base table.

Supported sizes are 2^p and 2^p · m for base sizes m in {12, 20, 28, 172}.
Power-of-two blocks come from the Sylvester recursion seeded at 2×2; the
non-power-of-two bases ship as ±1 text assets that are validated exactly
(integer H Hᵀ = n·I) every time they are loaded, so a corrupted asset can
never produce a silently wrong rotation. Composite sizes are Kronecker
products with the larger base factor last (e.g. 11008 = 64 × 172).

Returned matrices are normalized to entries ±1/√d and marked read-only;
they are cached, so callers must copy before mutating.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import OrthogonalityError, UnsupportedSizeError
from .validation import check_matrix

__all__ = [
    "BASE_SIZES",
    "HadamardPlan",
    "plan_for_size",
    "hadamard",
    "load_base_matrix",
    "orthogonality_residual",
]

BASE_SIZES = (2, 12, 20, 28, 172)

# Odd part of each non-Sylvester base size; used to recognize 2^p · m plans.
_ODD_TO_BASE = {3: 12, 5: 20, 7: 28, 43: 172}


@dataclass(frozen=True)
class HadamardPlan:
    """Factorization of a size into base-matrix Kronecker factors.

    ``factors`` multiply to ``size``: (2, 2, ...) for powers of two, or
    (2^p, m) with m a base size — e.g. (64, 172) for 11008.
    """

    size: int
    factors: tuple[int, ...]


def plan_for_size(size: int) -> HadamardPlan:
    """Find a Kronecker plan for ``size`` or raise UnsupportedSizeError."""
    if not isinstance(size, (int, np.integer)) or isinstance(size, bool):
        raise TypeError(f"size must be an integer, got {type(size).__name__}")
    size = int(size)
    if size < 1:
        raise UnsupportedSizeError(f"no known Hadamard decomposition for size {size}")
    odd = size
    power = 1
    while odd % 2 == 0:
        odd //= 2
        power *= 2
    if odd == 1:
        exponent = power.bit_length() - 1
        return HadamardPlan(size=size, factors=(2,) * exponent)
    base = _ODD_TO_BASE.get(odd)
    if base is None or size % base != 0:
        raise UnsupportedSizeError(f"no known Hadamard decomposition for size {size}")
    lead = size // base
    factors = (base,) if lead == 1 else (lead, base)
    return HadamardPlan(size=size, factors=factors)


def _asset_path(size: int, data_dir: str | Path | None) -> Path:
    if data_dir is not None:
        return Path(data_dir) / f"hadamard_{size}.txt"
    return Path(resources.files("smoothrot") / "data" / f"hadamard_{size}.txt")


def load_base_matrix(size: int, data_dir: str | Path | None = None) -> np.ndarray:
    """Load and exactly validate a ±1 base Hadamard asset.

    Args:
        size: One of BASE_SIZES.
        data_dir: Override directory for the text assets (testing hook);
            defaults to the assets packaged with the library.

    Returns:
        Read-only int8 matrix with entries ±1 satisfying H Hᵀ = size·I
        exactly in integer arithmetic.

    Raises:
        UnsupportedSizeError: If ``size`` is not a base size.
        OrthogonalityError: If the asset fails validation, naming the file.
    """
    if size not in BASE_SIZES:
        raise UnsupportedSizeError(f"no base Hadamard asset for size {size}")
    path = _asset_path(size, data_dir)
    try:
        rows = [line.split() for line in path.read_text().splitlines() if line.strip()]
        matrix = np.array(rows, dtype=np.int64)
    except (OSError, ValueError) as exc:
        raise OrthogonalityError(f"cannot load Hadamard asset {path.name}: {exc}") from exc
    if matrix.shape != (size, size):
        raise OrthogonalityError(
            f"Hadamard asset {path.name} has shape {matrix.shape}, expected ({size}, {size})"
        )
    if not np.isin(matrix, (-1, 1)).all():
        raise OrthogonalityError(f"Hadamard asset {path.name} has entries outside ±1")
    gram = matrix @ matrix.T
    if not np.array_equal(gram, size * np.eye(size, dtype=np.int64)):
        raise OrthogonalityError(
            f"Hadamard asset {path.name} fails H Hᵀ = {size}·I (corrupt asset)"
        )
    core = matrix.astype(np.int8)
    core.flags.writeable = False
    return core


def _sylvester_core(size: int) -> np.ndarray:
    h = np.array([[1]], dtype=np.int8)
    block = np.array([[1, 1], [1, -1]], dtype=np.int8)
    while h.shape[0] < size:
        h = np.kron(block, h)
    return h


@functools.lru_cache(maxsize=8)
def _signed_core(size: int, data_dir_key: str | None) -> np.ndarray:
    plan = plan_for_size(size)
    if not plan.factors:
        core = np.array([[1]], dtype=np.int8)
    elif set(plan.factors) == {2}:
        core = _sylvester_core(size)
    else:
        lead, base = (1, plan.factors[0]) if len(plan.factors) == 1 else plan.factors
        core = load_base_matrix(base, data_dir_key)
        if lead > 1:
            core = np.kron(_sylvester_core(lead), core)
    core = np.ascontiguousarray(core, dtype=np.int8)
    core.flags.writeable = False
    return core


@functools.lru_cache(maxsize=4)
def _normalized(size: int, data_dir_key: str | None) -> np.ndarray:
    scaled = _signed_core(size, data_dir_key) * (1.0 / np.sqrt(size))
    scaled.flags.writeable = False
    return scaled


def hadamard(size: int, data_dir: str | Path | None = None) -> np.ndarray:
    """Orthogonal Hadamard matrix of the given size, entries ±1/√size.

    Satisfies R Rᵀ = I to double precision. Results are cached and returned
    read-only. Raises UnsupportedSizeError when no plan exists (e.g. 6).
    """
    plan = plan_for_size(size)  # raises early for unsupported sizes
    key = None if data_dir is None else str(Path(data_dir))
    return _normalized(plan.size, key)


def orthogonality_residual(r) -> float:
    """‖R Rᵀ − I‖_F, the deviation of a square matrix from orthogonality."""
    r = check_matrix(r, "r")
    if r.shape[0] != r.shape[1]:
        raise OrthogonalityError(f"rotation must be square, got {r.shape}")
    gram = r @ r.T
    return float(np.linalg.norm(gram - np.eye(r.shape[0]), "fro"))
