"""Exception types shared across the toolkit."""


class TreeLtlError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TreeLtlError):
    """Syntax error in a guard, formula, or word; carries the input offset."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class UndeclaredSymbol(TreeLtlError):
    """A guard or formula references a constant or variable that is not declared."""


class TypeMismatch(TreeLtlError):
    """Order types that were required to agree do not."""


class PreconditionViolated(TreeLtlError):
    """An operation was called on arguments outside its contract."""


class ArityMismatch(TreeLtlError):
    """Tuple arities of configurations, automata, or words disagree."""


class ConstantMismatch(TreeLtlError):
    """Two components were combined that declare different constant sets."""


class ConstantOutOfRange(TreeLtlError):
    """A constant label falls outside {1..k} for a finite branching degree k."""


class ResourceCeiling(TreeLtlError):
    """An enumeration exceeded its configured ceiling."""


class InternalCheckFailed(TreeLtlError):
    """A self-check on a constructed witness failed; indicates a bug, never input error."""
