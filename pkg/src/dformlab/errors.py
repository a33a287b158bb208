"""Exception types shared across the package.

Error categories map to process exit codes: configuration and validation
problems exit 1, numerical failures (blow-up, NaN) exit 2.
"""

from __future__ import annotations


class DformlabError(Exception):
    """Base class for all package errors."""


class ConfigError(DformlabError):
    """Invalid configuration, parameters, or preconditions."""


class GridMismatchError(ConfigError):
    """Operands live on different grids."""


class NonzeroMeanError(ConfigError):
    """A field that must have zero spatial mean does not."""


class ProviderGapError(ConfigError):
    """A trajectory provider was queried outside its window."""


class SnapshotFormatError(ConfigError):
    """A snapshot file is structurally invalid.

    `code` states which structural check failed: "bad-magic", "bad-header",
    "truncated", or "trailing-bytes".
    """

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.code = code


class NumericalBlowupError(DformlabError):
    """Integration produced NaN/Inf or left all plausible bounds.

    Carries the time of failure and recent norm history so the caller can
    report diagnostics instead of a bare stack trace.
    """

    def __init__(self, message: str, t: float, history: list[tuple[float, float]] | None = None):
        super().__init__(message)
        self.t = t
        self.history = history or []
