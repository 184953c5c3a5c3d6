"""Error taxonomy shared by the library and the CLI.

The CLI maps these onto process exit codes: UsageError -> 1,
DataError -> 2, NumericError -> 3.  Library code raises them directly;
anything else escaping a public entry point is a bug.
"""


class SpeechGroundError(Exception):
    """Base class for all library errors."""


class UsageError(SpeechGroundError):
    """Caller misuse: bad argument combinations, out-of-range knobs."""


class DataError(SpeechGroundError):
    """Malformed or unsupported input data (files, matrices, scenes)."""


class NumericError(SpeechGroundError):
    """Numerically infeasible request (singular system, diverged run)."""
