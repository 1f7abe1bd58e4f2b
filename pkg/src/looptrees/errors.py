"""Exception types raised by the public API.

Every error that callers are expected to catch lives here so that
`except looptrees.errors.X` works without importing internals.
"""


class LooptreesError(Exception):
    """Base class for all package-specific errors."""


class NotAFirstPassagePath(LooptreesError):
    """A degree sequence whose walk is not a first passage to -1 at the end."""


class RootHasNoTrunk(LooptreesError):
    """Trunk extraction was requested for the root vertex."""


class TreeTooLarge(LooptreesError):
    """A sampled or constructed tree exceeded the vertex cap."""


class InfeasibleSize(LooptreesError):
    """No tree of the requested size exists under the given offspring law."""


class BudgetExhausted(LooptreesError):
    """A rejection sampler ran out of attempts before accepting."""


class TooLargeToEnumerate(LooptreesError):
    """Exhaustive enumeration was requested beyond the supported size."""


class CapTooSmall(LooptreesError):
    """A truncation cap gives an error bound above the requested tolerance."""


class TailTableMissing(LooptreesError):
    """A survival-probability table is required but was not supplied."""


class NotCritical(LooptreesError):
    """An operation defined for critical laws got a non-critical one."""


class TooLarge(LooptreesError):
    """Exact Gromov-Hausdorff evaluation beyond the supported point count."""


class NoVertexAtHeight(LooptreesError):
    """A tree has no vertex at the requested height."""
