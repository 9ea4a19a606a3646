"""Pulse-stream arithmetic and dithered k-bit rounding.

Values in [0, 1] become N-pulse binary sequences under four encoding
schemes (iid stochastic, two deterministic pulse patterns, and a
dithered block-plus-residual hybrid); products and scaled sums run as
bitwise ops on those sequences.  The same dither idea drives a k-bit
rounding engine for quantized matrix multiplication and MNIST softmax
inference, plus a Monte Carlo harness measuring bias, variance, and
expected mean squared error.
"""

from .bitstream import (
    SCHEMES,
    DitherParams,
    EncodingSpec,
    dither_bit_prob,
    dither_params,
    encode,
    encode_det_spread,
    encode_det_unary,
    encode_dither,
    encode_stochastic,
    spread_permutation,
    spread_positions,
    value_of,
)
from .arithmetic import (
    CONTROL_KINDS,
    ControlSequence,
    make_control,
    multiply,
    scaled_add,
)
from .stats import (
    FAMILIES,
    OPERATIONS,
    EmseReference,
    StatsRecord,
    emse_lower_bound,
    fit_loglog_slope,
    sweep,
    theoretical_emse,
    write_stats_csv,
)
from .rounding import (
    DitherRounder,
    coprime_stride,
    dither_round,
    left_schedule,
    quantize_det,
    right_schedule,
    round_stochastic,
)
from .linalg import (
    MATMUL_MODES,
    MATMUL_VARIANTS,
    MatmulRecord,
    QuantMatmulConfig,
    frobenius_error,
    matmul_exact,
    matmul_quantized,
    run_matmul_experiment,
    write_matmul_csv,
)
from .nn import (
    AccuracyStats,
    Dataset,
    IdxError,
    ModelWeights,
    SoftmaxRegression,
    download_mnist,
    find_mnist,
    forward_full,
    infer_quantized,
    load_idx,
    load_weights,
    load_weights_text,
    run_mnist_experiment,
    save_weights,
    save_weights_text,
    scale_for_quantization,
    train_softmax,
)
from .encoders import (
    DitherEncoder,
    KBitRounder,
    SpreadEncoder,
    StochasticEncoder,
    UnaryEncoder,
)
from .rng import check_rng, substream

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # bitstream
    "SCHEMES", "DitherParams", "EncodingSpec", "dither_bit_prob", "dither_params",
    "encode", "encode_det_spread", "encode_det_unary", "encode_dither",
    "encode_stochastic", "spread_permutation", "spread_positions", "value_of",
    # arithmetic
    "CONTROL_KINDS", "ControlSequence", "make_control", "multiply", "scaled_add",
    # stats
    "FAMILIES", "OPERATIONS", "EmseReference", "StatsRecord", "emse_lower_bound",
    "fit_loglog_slope", "sweep", "theoretical_emse", "write_stats_csv",
    # rounding
    "DitherRounder", "coprime_stride", "dither_round", "left_schedule",
    "quantize_det", "right_schedule", "round_stochastic",
    # linalg
    "MATMUL_MODES", "MATMUL_VARIANTS", "MatmulRecord", "QuantMatmulConfig",
    "frobenius_error", "matmul_exact", "matmul_quantized",
    "run_matmul_experiment", "write_matmul_csv",
    # nn
    "AccuracyStats", "Dataset", "IdxError", "ModelWeights", "SoftmaxRegression",
    "download_mnist", "find_mnist", "forward_full", "infer_quantized", "load_idx",
    "load_weights", "load_weights_text", "run_mnist_experiment", "save_weights",
    "save_weights_text", "scale_for_quantization", "train_softmax",
    # encoders
    "DitherEncoder", "KBitRounder", "SpreadEncoder", "StochasticEncoder",
    "UnaryEncoder",
    # rng
    "check_rng", "substream",
]
