"""Exception types shared across the package.

Exit-code mapping for the CLI: ConfigError -> 2, everything else -> 3.
"""


class PhasetopError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(PhasetopError):
    """Invalid configuration, parameters, or schema."""

    exit_code = 2


class DomainError(PhasetopError):
    """Input outside an operation's mathematical domain."""


class SingularityError(PhasetopError):
    """Near-singular input where an inverse-like factor is required."""


class ResolutionError(PhasetopError):
    """Sampling too coarse; the caller may refine and retry."""


class BranchError(PhasetopError):
    """No admissible branch cut for a matrix logarithm."""


class ExtensionError(PhasetopError):
    """Relaxation failed to extend a boundary gauge into the domain."""


class TrackingError(PhasetopError):
    """Band-group tracking along a deformation path became ambiguous."""


class GapError(PhasetopError):
    """A band group is not gapped at the requested floor."""


class BoundaryZeroError(PhasetopError):
    """Pfaffian magnitude fell below the zero floor on a boundary loop."""


class DegenerateConfigurationError(PhasetopError):
    """Pfaffian zeros are not isolated; no admissible fundamental domain."""
