"""Capture pipeline: hook matching linear modules, forward once, write ACTD.

Record naming: a module found at e.g. ``blocks.0.mlp.down_proj`` is
exported as ``layer.0.down_proj`` — the layer index is the first numeric
path component, the module name is the path leaf. Filters are shell-style
glob patterns matched case-sensitively against both the leaf name
(``down_proj``) and the full record name (``layer.0.down_proj``), so
plain names select a module type across layers and qualified patterns
narrow to specific layers.

Only a module's first invocation is recorded; the capture performs a
single forward pass, matching a one-sample recording protocol.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .model import load_model
from .writer import (
    KIND_ACTIVATION,
    KIND_WEIGHT,
    CapturedRecord,
    write_actd_file,
)

DEFAULT_FILTERS = ("k_proj", "o_proj", "gate_proj", "down_proj")
DEFAULT_TEXT = "the sky above the port was the color of television"

# torch dtype → numpy storage dtype; sub-32-bit floats widen to binary32.
_WIDEN = {
    torch.float16: torch.float32,
    torch.bfloat16: torch.float32,
}


class CaptureError(Exception):
    """Base class for capture failures."""


class ModelLoadError(CaptureError):
    """The model identifier could not be resolved to a runnable model."""


class NoModulesMatchedError(CaptureError):
    """No linear module name matched any filter pattern."""


@dataclass(frozen=True)
class CaptureConfig:
    """One capture invocation.

    Attributes:
        model: ``"tiny"``, ``"tiny:<seed>"``, or a checkpoint path.
        out_path: Destination ACTD file.
        filters: Glob patterns selecting linear modules; at least one.
        text: Sample text, tokenized as UTF-8 bytes and cycled to
            ``seq_len`` (ignored when ``token_ids`` is given).
        token_ids: Explicit token ids, cycled or truncated to ``seq_len``.
        seq_len: Number of tokens fed through the model (≥ 1).
    """

    model: str
    out_path: str
    filters: tuple[str, ...] = DEFAULT_FILTERS
    text: str = DEFAULT_TEXT
    token_ids: tuple[int, ...] | None = None
    seq_len: int = 128

    def __post_init__(self) -> None:
        if not self.filters or any(not pattern for pattern in self.filters):
            raise ValueError("filters must be a nonempty tuple of nonempty patterns")
        if self.seq_len < 1:
            raise ValueError(f"seq_len must be >= 1, got {self.seq_len}")
        if self.token_ids is not None and len(self.token_ids) == 0:
            raise ValueError("token_ids must be nonempty when given")
        if self.token_ids is None and not self.text:
            raise ValueError("either text or token_ids must be nonempty")


@dataclass(frozen=True)
class CaptureSummary:
    """What a capture run produced."""

    path: str
    record_count: int
    bytes_written: int
    record_names: tuple[str, ...] = field(default=())


class FirstInputRecorder:
    """Forward-pre-hook target that keeps each module's first input only."""

    def __init__(self) -> None:
        self.inputs: dict[str, torch.Tensor] = {}

    def hook_for(self, name: str):
        def hook(module: nn.Module, args: tuple) -> None:
            if name not in self.inputs:
                self.inputs[name] = args[0].detach().clone()

        return hook


def _record_name(path: str) -> str:
    parts = path.split(".")
    index = next((part for part in parts if part.isdigit()), None)
    leaf = parts[-1]
    return f"layer.{index}.{leaf}" if index is not None else leaf


def match_linear_modules(
    model: nn.Module, filters: tuple[str, ...]
) -> list[tuple[str, nn.Linear]]:
    """(record name, module) for every linear module a filter selects."""
    matched = []
    for path, module in model.named_modules():
        if not isinstance(module, nn.Linear):
            continue
        leaf = path.split(".")[-1]
        name = _record_name(path)
        if any(
            fnmatchcase(leaf, pattern) or fnmatchcase(name, pattern)
            for pattern in filters
        ):
            matched.append((name, module))
    return matched


def _token_ids(cfg: CaptureConfig, vocab_size: int) -> torch.Tensor:
    if cfg.token_ids is not None:
        ids = list(cfg.token_ids)
        bad = [t for t in ids if not 0 <= t < vocab_size]
        if bad:
            raise ValueError(
                f"token ids out of range [0, {vocab_size}): {bad[:5]}"
            )
    else:
        ids = [b % vocab_size for b in cfg.text.encode("utf-8")]
    cycled = list(itertools.islice(itertools.cycle(ids), cfg.seq_len))
    return torch.tensor(cycled, dtype=torch.long)


def _to_matrix(tensor: torch.Tensor) -> np.ndarray:
    """Flatten leading batch dimensions; widen 16-bit floats to binary32."""
    tensor = tensor.detach().to(_WIDEN.get(tensor.dtype, tensor.dtype))
    flattened = tensor.reshape(-1, tensor.shape[-1])
    return np.ascontiguousarray(flattened.cpu().numpy())


def capture_run(cfg: CaptureConfig) -> CaptureSummary:
    """Hook, forward once, and write the ACTD file.

    Returns a summary of what was written.

    Raises:
        ModelLoadError: The model identifier did not resolve.
        NoModulesMatchedError: The filters selected nothing.
        CaptureError: The forward pass or serialization failed.
    """
    model = load_model(cfg.model)
    matched = match_linear_modules(model, cfg.filters)
    if not matched:
        raise NoModulesMatchedError(
            f"no linear modules matched filters {', '.join(cfg.filters)}"
        )

    recorder = FirstInputRecorder()
    handles = [
        module.register_forward_pre_hook(recorder.hook_for(name))
        for name, module in matched
    ]
    try:
        ids = _token_ids(cfg, model.config.vocab_size)
        with torch.no_grad():
            model(ids[None, :])
    except ValueError:
        raise
    except Exception as exc:
        raise CaptureError(f"forward pass failed: {exc}") from exc
    finally:
        for handle in handles:
            handle.remove()

    records = []
    for name, module in matched:
        if name not in recorder.inputs:
            raise CaptureError(f"module {name!r} matched but was never invoked")
        records.append(
            CapturedRecord(
                name=name, kind=KIND_ACTIVATION, matrix=_to_matrix(recorder.inputs[name])
            )
        )
        # nn.Linear stores (out_features, in_features); the file's
        # contract is activation @ weight, so store the transpose.
        records.append(
            CapturedRecord(
                name=name, kind=KIND_WEIGHT, matrix=_to_matrix(module.weight.T)
            )
        )

    byte_count = write_actd_file(records, cfg.out_path)
    return CaptureSummary(
        path=str(Path(cfg.out_path)),
        record_count=len(records),
        bytes_written=byte_count,
        record_names=tuple(record.name for record in records),
    )
