"""Exception types shared across the solver."""


class ViscofemError(Exception):
    """Base class for all solver errors."""


class UnsupportedDegree(ViscofemError):
    """Requested polynomial degree is outside the supported range."""


class MeshGenerationFailure(ViscofemError):
    """Mesh generator could not produce a valid triangulation."""


class DegreeMismatch(ViscofemError):
    """Field has the wrong polynomial degree for the requested operation."""


class DegreeConstraintViolated(ViscofemError):
    """Convective variant used outside its degree hypothesis (2m <= k)."""


class NewtonDivergence(ViscofemError):
    """Newton iteration exceeded the allowed number of iterations."""

    def __init__(self, message, iterations=None, residual=None, step_index=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.step_index = step_index


class SingularLinearSystem(ViscofemError):
    """Direct solver failed to factorize the system matrix."""


class UntaggedBoundary(ViscofemError):
    """A boundary facet carries no tag."""


class ParseError(ViscofemError):
    """Config file could not be parsed."""


class ValidationError(ViscofemError):
    """Config contents failed validation."""
