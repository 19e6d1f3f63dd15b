"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with inputs that violate its contract."""


class FormatError(ValueError):
    """A file does not conform to its declared format.

    Carries enough position information (byte offset or line number) to
    locate the defect.
    """

    def __init__(self, message: str, *, offset: int | None = None, line: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class ConfigError(ValueError):
    """A run configuration is malformed or out of range."""


class FeasibilityError(ValueError):
    """A scenario specification cannot be realized as stated."""


class NoTemplateError(LookupError):
    """No correctly recognized regions exist to estimate a template from."""


class PolicyUnavailableError(ValueError):
    """A selection policy requires per-observation data that is missing."""
