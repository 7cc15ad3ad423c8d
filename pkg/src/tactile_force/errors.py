"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration/usage problems
exit 2, data-integrity problems exit 3, numerical failures exit 4.
"""


class TactileForceError(Exception):
    """Base class for all package errors."""


class ConfigError(TactileForceError):
    """Invalid or incomplete configuration (missing field, bad value)."""


class SchemaError(TactileForceError):
    """Input data does not match the expected schema or shape."""


class DegenerateInputError(TactileForceError):
    """Input is in a degenerate configuration the operation cannot resolve."""


class OutOfBoundsError(TactileForceError):
    """A spatial point falls outside the configured grid bounds."""


class LayoutCollisionError(TactileForceError):
    """Two electrodes bin to the same voxel under the given grid."""


class FrameMismatchError(TactileForceError):
    """Vector frame tag does not match the transform endpoints."""


class DataIntegrityError(TactileForceError):
    """Dataset violates an integrity constraint (e.g. trial split overlap)."""


class NumericalError(TactileForceError):
    """Numerical failure: non-finite state, gradient, or loss."""
