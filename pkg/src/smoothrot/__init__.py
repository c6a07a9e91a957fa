"""smoothrot: a workbench for making LLM-style activations quantization-friendly.

The package measures how hard (activation, weight) pairs are to quantize
with symmetric integer RTN, and applies product-preserving transforms —
channel smoothing, Hadamard rotation, and their composition — to flatten
outliers before quantization. Synthetic generators reproduce the two
canonical outlier regimes (systematic channels, massive tokens) together
with closed-form predictions of how each transform reshapes them.
"""

from .actd import Dtype, LayerRecord, RecordKind, read_actd, write_actd
from .exceptions import (
    ActdError,
    BadMagicError,
    DuplicateRecordError,
    InvalidRecordError,
    NonFinitePayloadError,
    NotFiniteError,
    OrthogonalityError,
    ShapeError,
    TruncatedFileError,
    UndefinedStatisticError,
    UnsupportedSizeError,
    UnsupportedVersionError,
)
from .hadamard import (
    BASE_SIZES,
    HadamardPlan,
    hadamard,
    load_base_matrix,
    orthogonality_residual,
    plan_for_size,
)
from .linalg import channel_magnitudes, frobenius_norm, kronecker, matmul
from .metrics import (
    DifficultyReport,
    build_report,
    kurtosis,
    pair_records,
    pearson,
    quantization_difficulty,
    report_row,
)
from .outliers import (
    ClusterCheck,
    OutlierTokenSpec,
    SystematicSpec,
    cluster_check,
    normal_stream,
    predict_centroids,
    predict_rot_max,
    predict_smooth_rot_max,
    splitmix64_stream,
    synth_massive_token,
    synth_systematic,
)
from .quant import (
    QuantConfig,
    QuantResult,
    RTNQuantizer,
    compute_steps,
    effective_bins,
    layer_error,
    quant_noise_variance,
    quantize_rtn,
)
from .suites import SUITES, build_suite, suite_names
from .transforms import (
    EquivalentTransform,
    HadamardRotator,
    IdentityTransform,
    Smoother,
    SmoothRotator,
    TransformSpec,
    alpha_sweep,
    apply_rotation,
    apply_smoothing,
    apply_transform,
    make_transform,
    smooth_rotate,
    smoothing_scale,
    verify_equivalence,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # actd
    "Dtype",
    "LayerRecord",
    "RecordKind",
    "read_actd",
    "write_actd",
    # exceptions
    "ActdError",
    "BadMagicError",
    "DuplicateRecordError",
    "InvalidRecordError",
    "NonFinitePayloadError",
    "NotFiniteError",
    "OrthogonalityError",
    "ShapeError",
    "TruncatedFileError",
    "UndefinedStatisticError",
    "UnsupportedSizeError",
    "UnsupportedVersionError",
    # hadamard
    "BASE_SIZES",
    "HadamardPlan",
    "hadamard",
    "load_base_matrix",
    "orthogonality_residual",
    "plan_for_size",
    # linalg
    "channel_magnitudes",
    "frobenius_norm",
    "kronecker",
    "matmul",
    # metrics
    "DifficultyReport",
    "build_report",
    "kurtosis",
    "pair_records",
    "pearson",
    "quantization_difficulty",
    "report_row",
    # outliers
    "ClusterCheck",
    "OutlierTokenSpec",
    "SystematicSpec",
    "cluster_check",
    "normal_stream",
    "predict_centroids",
    "predict_rot_max",
    "predict_smooth_rot_max",
    "splitmix64_stream",
    "synth_massive_token",
    "synth_systematic",
    # quant
    "QuantConfig",
    "QuantResult",
    "RTNQuantizer",
    "compute_steps",
    "effective_bins",
    "layer_error",
    "quant_noise_variance",
    "quantize_rtn",
    # suites
    "SUITES",
    "build_suite",
    "suite_names",
    # transforms
    "EquivalentTransform",
    "HadamardRotator",
    "IdentityTransform",
    "Smoother",
    "SmoothRotator",
    "TransformSpec",
    "alpha_sweep",
    "apply_rotation",
    "apply_smoothing",
    "apply_transform",
    "make_transform",
    "smooth_rotate",
    "smoothing_scale",
    "verify_equivalence",
]
