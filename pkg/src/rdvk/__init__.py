"""rdvk: a small deterministic block-based video codec with per-sequence
configuration competition under a rate budget."""

from .codec import EncodedStream, decode_bytes, encode_sequence
from .competition import CodingChoice, evaluate_choice, fit_budget, rd_cost, select_best
from .errors import (
    BitstreamError,
    BudgetError,
    CodecError,
    ConfigError,
    DimensionError,
    ParseError,
    RangeError,
)
from .media import Frame, Sequence, load_sequence, store_sequence
from .metrics import bd_rate, ms_ssim, ms_ssim_db, psnr
from .schedule import FrameType, build_schedule, validate_schedule

__version__ = "0.1.0"

__all__ = [
    "BitstreamError", "BudgetError", "CodecError", "CodingChoice", "ConfigError",
    "DimensionError", "EncodedStream", "Frame", "FrameType", "ParseError", "RangeError",
    "Sequence", "bd_rate", "build_schedule", "decode_bytes", "encode_sequence",
    "evaluate_choice", "fit_budget", "load_sequence", "ms_ssim", "ms_ssim_db", "psnr",
    "rd_cost", "select_best", "store_sequence", "validate_schedule",
]
