"""Exception types shared across the package."""


class DdlqrError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(DdlqrError):
    """Operands have incompatible shapes."""


class DefinitenessError(DdlqrError):
    """A matrix required to be positive (semi)definite is not."""


class GenerationError(DdlqrError):
    """Random generation exhausted its retry budget."""


class DataRichnessError(DdlqrError):
    """Collected data violate the rank condition needed for the data-driven program."""


class ConvergenceError(DdlqrError):
    """An iterative scheme hit its cap without converging."""


class DegenerateSolutionError(DdlqrError):
    """An SDP solution violates the properties needed for gain recovery."""
