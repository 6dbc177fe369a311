"""Exception types shared across the package."""


class SndBendersError(Exception):
    """Base class for all package errors."""


class SchemaError(SndBendersError):
    """Input document does not conform to the expected format."""


class ValidationError(SndBendersError):
    """Parsed data violates an instance invariant."""

    def __init__(self, message, entity=None):
        super().__init__(message if entity is None else f"{message} (entity: {entity})")
        self.entity = entity


class UnsupportedFeature(SndBendersError):
    """Input uses a feature this reader does not implement."""


class GenerationError(SndBendersError):
    """Synthetic instance generation produced an unusable graph."""


class NumericalError(SndBendersError):
    """LP solver hit its cycling guard or a tolerance breakdown."""


class SolverFailure(SndBendersError):
    """A subproblem or master solve failed after retry; never a feasibility claim."""


class ShapeError(SndBendersError):
    """Vector or map indexed by an unknown edge/module/variable."""


class SizeGuardExceeded(SndBendersError):
    """Compact formulation would exceed the configured size cap."""


class GrammarError(SndBendersError):
    """Configuration identifier string does not match the grammar."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class MalformedLog(SndBendersError):
    """Solve log is missing required events or ordering."""


class EmptyInput(SndBendersError):
    """Aggregation called on an empty collection."""
