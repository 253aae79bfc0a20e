"""Exception types shared across the package."""


class MpsaqcError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(MpsaqcError):
    """Two objects (states, operators, circuits) have incompatible sizes."""


class NonUnitaryError(MpsaqcError):
    """A gate payload failed the unitarity check."""


class SiteRangeError(MpsaqcError):
    """A site/qubit index is out of range."""


class ConvergenceError(MpsaqcError):
    """An iterative routine failed to converge."""


class OracleCapError(MpsaqcError):
    """A dense-oracle request exceeds the configured qubit cap."""
