"""Exception hierarchy shared by all engine modules.

InputError maps to CLI exit code 1 (bad input or config), everything else
derived from EngineError maps to exit code 2 (runtime failure).
"""


class EngineError(Exception):
    """Base class for all engine failures."""


class InputError(EngineError):
    """Malformed input data, config, or arguments. CLI exit code 1."""


class BackendError(EngineError):
    """A completion backend failed after exhausting its retries."""


class SampleSkipped(EngineError):
    """Per-sample condition that excludes the sample but lets the run continue."""

    def __init__(self, sample_id: str, reason: str):
        super().__init__(f"sample {sample_id} skipped: {reason}")
        self.sample_id = sample_id
        self.reason = reason
