"""Exception types shared across the package."""


class MstepholdError(Exception):
    """Base class for all package errors."""


class MalformedLpError(MstepholdError):
    """LP data has inconsistent dimensions or non-finite entries."""


class DimensionMismatchError(MstepholdError):
    """Operands live in different ambient dimensions."""


class EmptySetError(MstepholdError):
    """Operation requires a nonempty set."""


class UnboundedSetError(MstepholdError):
    """Operation requires a bounded set."""


class UnboundedDirectionError(MstepholdError):
    """Support query is unbounded along the requested direction."""


class WrongDimensionError(MstepholdError):
    """Operation is only defined for 1-D or 2-D sets."""


class SetsNestedError(MstepholdError):
    """Counterexample search has no candidate region: the coarse set is
    already contained in the fine set."""


class ResolutionTooCoarseError(MstepholdError):
    """Grid oracle was given an empty state or input grid."""
