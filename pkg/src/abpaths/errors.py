"""Exception taxonomy shared by all modules.

Errors are split along the lines callers can actually act on:
bad inputs (DomainError and subclasses), results that cannot meet a
requested tolerance (PrecisionError carries the achieved estimate),
resource guards (CapacityError), and structurally unsolvable problems
(StructuralError).  Non-convergence of an iterative solver is *not* an
exception; it is reported in the result object.
"""


class AbPathsError(Exception):
    """Base class for all package-specific errors."""


class DomainError(AbPathsError):
    """Input outside the mathematical domain of an operation."""


class ArityError(DomainError):
    """Too few (or too many) items for an operation that needs a
    specific count, e.g. a fit with fewer points than parameters."""


class RangeError(AbPathsError):
    """Input inside the domain but outside the implementation's range
    (e.g. an argument large enough to overflow the working scale)."""


class PrecisionError(AbPathsError):
    """Requested tolerance not achieved.

    Attributes
    ----------
    achieved : float
        Best error estimate actually reached.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class CapacityError(AbPathsError):
    """A configured resource limit (memory, enumeration size) would be
    exceeded; raised before any large allocation happens."""


class TopologyError(AbPathsError):
    """Path geometry makes winding numbers undefined (a segment passes
    through a puncture point)."""


class DegenerateGeometryError(AbPathsError):
    """Geometry puts the problem on a measure-zero degenerate manifold
    (e.g. classical path through the solenoid)."""


class DegenerateNormalizationError(AbPathsError):
    """A weighted average is requested but the normalizing sum of
    weights is (numerically) zero, so no average exists."""


class UnrepresentableClassError(AbPathsError):
    """No representative path exists for a homotopy class within the
    search bounds of the waypoint graph."""


class StructuralError(AbPathsError):
    """Problem instance violates a structural requirement (for example
    too few measurements for the number of unknowns); no amount of
    iteration can fix it."""


class DesignError(StructuralError):
    """Measurement design is degenerate (rank-deficient sensing system)
    and retries with fresh random draws did not fix it."""


class SchemaError(AbPathsError):
    """Scenario file failed validation.

    Attributes
    ----------
    field_path : str
        Dotted path of the offending field, e.g. ``"lattice.time_steps"``.
    """

    def __init__(self, message, field_path=""):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path
