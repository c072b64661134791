"""Exception types shared across the package."""


class BlochgapError(Exception):
    """Base class for all package-specific errors."""


class InputError(BlochgapError, ValueError):
    """An argument or configuration value is outside its admissible domain."""


class ParseError(InputError):
    """Syntax error in a profile expression; carries the byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SchemaError(InputError):
    """Config validation failure; carries one message per offending key path."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DegenerateIntersectionError(BlochgapError):
    """Both crossing bands share the same longitudinal index (no transversal crossing)."""


class AmbiguousWindowError(BlochgapError):
    """More than two unperturbed bands meet the requested energy window."""


class ConsistencyError(BlochgapError):
    """An internal cross-check failed (non-Hermitian assembly, mismatched closed form)."""


class NotHermitianError(ConsistencyError):
    """Matrix handed to the eigensolver is not Hermitian within tolerance."""


class GapNotFoundError(BlochgapError):
    """Numerical sweep found no spectral gap where one was required."""
