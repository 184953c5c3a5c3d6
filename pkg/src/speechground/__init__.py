"""Speech decoding and grounding numerics toolkit."""

from . import ctc, decode, dsp, fft, grounding, lm, metrics, selfsup
from .errors import DataError, NumericError, SpeechGroundError, UsageError

__version__ = "0.1.0"

__all__ = [
    "DataError", "NumericError", "SpeechGroundError", "UsageError",
    "__version__", "ctc", "decode", "dsp", "fft", "grounding", "lm",
    "metrics", "selfsup",
]
