"""Exception types shared across xrdisk modules."""


class XRDiskError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(XRDiskError, ValueError):
    """A parameter lies outside its admissible range."""


class DomainError(XRDiskError, ValueError):
    """An argument lies outside the domain of the operation."""


class BasisIndexError(XRDiskError, IndexError):
    """A basis index (n, k) lies outside the admissible triangle."""


class ResolutionError(XRDiskError, ValueError):
    """A quadrature or grid is too coarse for the requested degree."""


class EvaluationError(XRDiskError, ValueError):
    """A field evaluated to a non-finite value."""


class SingularConfigurationError(XRDiskError, ValueError):
    """A phase point sits on the glancing set where the map is singular."""


class IntegrabilityError(XRDiskError, ValueError):
    """A fiber integral failed to converge under refinement."""


class ConditioningError(XRDiskError, ValueError):
    """A linear problem is too ill-conditioned to solve reliably."""


class PreconditionError(XRDiskError, ValueError):
    """An operation was called on inputs outside its contract."""


class ConfigError(XRDiskError, ValueError):
    """A run configuration failed validation."""


class InjectivityError(XRDiskError, ArithmeticError):
    """A transform returned numerically zero data for nonzero input."""
