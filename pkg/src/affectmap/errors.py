"""Exception types shared across the package."""


class AffectMapError(Exception):
    """Base class for every error raised by affectmap."""


class ConfigurationError(AffectMapError):
    """Bad bindings or settings: unknown columns, mismatched formats, invalid manifest."""


class ParseError(AffectMapError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(AffectMapError):
    """Well-formed input whose values violate a declared invariant."""


class EmptyAlignmentError(AffectMapError):
    """Two lexicons share no words at all."""


class ContractError(AffectMapError):
    """A caller violated an operation precondition (shape, size, argument range)."""


class DegenerateInputError(AffectMapError):
    """Statistic undefined for this input, e.g. a zero-variance series."""


class DivergenceError(AffectMapError):
    """Training produced a non-finite loss. Carries the iteration index."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class EmptyOutputError(AffectMapError):
    """An operation that must produce entries produced none."""
