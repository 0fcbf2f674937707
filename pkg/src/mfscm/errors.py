"""Exception types shared across the package."""

from __future__ import annotations


class MfscmError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MfscmError):
    """Invalid configuration value or malformed manifest."""


class PanelParseError(MfscmError):
    """Malformed panel CSV; carries the offending file and line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class PanelValidationError(MfscmError):
    """Panel violates a structural invariant; carries all diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class DomainError(MfscmError, ValueError):
    """Argument outside an operation's domain."""


class IllPosedError(MfscmError):
    """Rank-deficient or numerically singular estimation problem."""


class SampleSizeError(MfscmError):
    """Too few observations for the requested fit."""
