"""Exception hierarchy shared by all modules."""


class SelfContractError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SelfContractError, ValueError):
    """Input violates a documented precondition."""


class GeometryError(SelfContractError):
    """A geometric construction has no (numerically) valid solution."""


class DegenerateSegmentError(GeometryError):
    pass


class SingularMidpointError(GeometryError):
    pass


class OutOfAnnulusError(GeometryError):
    pass


class MonotonicityError(GeometryError):
    pass


class ConvergenceError(SelfContractError):
    pass


class OracleCapError(SelfContractError):
    """The brute-force oracle refuses inputs above its size cap."""


class IntegrationError(SelfContractError):
    """The integrator failed; ``partial`` carries the orbit computed so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StiffnessError(IntegrationError):
    pass


class FieldEvaluationError(IntegrationError):
    pass


class ProximalSolveError(SelfContractError):
    pass


class NestingError(SelfContractError):
    pass


class GridMismatchError(SelfContractError):
    pass


class DomainError(SelfContractError, ValueError):
    pass


class PositionError(SelfContractError):
    pass
