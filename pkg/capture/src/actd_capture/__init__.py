"""Export a transformer's linear-module inputs and weights as ACTD files.

The exporter registers forward hooks on the linear modules a filter
selects, runs one forward pass, and writes every captured input together
with the module's weight (in activation-times-weight orientation) to a
single ACTD v1 container. The format implementation here is deliberately
self-contained: the analysis side stays decoupled, coupled only through
the bytes on disk.
"""

from .model import DecoderConfig, TinyDecoder, build_tiny, load_model, save_checkpoint
from .run import (
    DEFAULT_FILTERS,
    CaptureConfig,
    CaptureError,
    CaptureSummary,
    FirstInputRecorder,
    ModelLoadError,
    NoModulesMatchedError,
    capture_run,
    match_linear_modules,
)
from .writer import (
    DTYPE_F32,
    DTYPE_F64,
    KIND_ACTIVATION,
    KIND_WEIGHT,
    CapturedRecord,
    WriteError,
    write_actd_file,
)

__version__ = "0.1.0"

__all__ = [
    "CaptureConfig",
    "CaptureError",
    "CaptureSummary",
    "CapturedRecord",
    "DEFAULT_FILTERS",
    "DTYPE_F32",
    "DTYPE_F64",
    "DecoderConfig",
    "FirstInputRecorder",
    "KIND_ACTIVATION",
    "KIND_WEIGHT",
    "ModelLoadError",
    "NoModulesMatchedError",
    "TinyDecoder",
    "WriteError",
    "build_tiny",
    "capture_run",
    "load_model",
    "match_linear_modules",
    "save_checkpoint",
    "write_actd_file",
    "__version__",
]
