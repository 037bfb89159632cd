class NSACError(Exception):
    """
    All exceptions of this package can be captured with this.
    """


class DomainError(NSACError, ValueError):
    """
    A constitutive function was evaluated outside of its domain.

    :ivar name: Name of the function.
    :ivar value: Offending argument (the first one found for arrays).
    """

    def __init__(self, name: str, value, expected: str):
        self.name = name
        self.value = value
        super().__init__(f"{name} is defined for {expected}, got {value!r}")


class InvalidParameter(NSACError):
    """
    A parameter invariant does not hold.

    :ivar key: Dotted configuration key of the parameter, used to cite config lines.
    :ivar msg: Human readable rule that failed.
    """

    def __init__(self, key: str, msg: str):
        self.key = key
        self.msg = msg
        super().__init__(msg)


class InvalidField(NSACError):
    """
    A field holds non-finite values or has the wrong shape for its grid.
    """


class UnknownScheme(NSACError):
    """
    An unknown selector name was given for a scheme, profile or kind.
    """

    def __init__(self, kind: str, name: str):
        self.kind = kind
        self.name = name
        super().__init__(f"Unknown {kind}: {name!r}")


class PreconditionError(NSACError):
    """
    An operation was called with arguments violating its preconditions.
    """


class SolverNotConverged(NSACError):
    """
    A linear or Newton solve did not reach its tolerance.

    :ivar solver: Name of the solve (``poisson``, ``helmholtz``, ``heat``, ...).
    :ivar iterations: Iterations spent.
    :ivar residual: Final relative residual.
    """

    def __init__(self, solver: str, iterations: int, residual: float):
        self.solver = solver
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"{solver} solve did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class StepFailure(NSACError):
    """
    A time step could not be completed.

    .. note::
        The state passed to the failing step is untouched, so callers can checkpoint it.

    :ivar report: The partially filled :class:`.model.StepReport`.
    """

    def __init__(self, msg: str, report=None):
        self.report = report
        super().__init__(msg)


class MisalignedSeries(NSACError):
    """
    Diagnostic series do not line up in length or time.
    """


class MeasurementError(NSACError):
    """
    An interface measurement is impossible (no interface, several components).
    """


class ExtinctionError(NSACError):
    """
    The radius oracle reaches zero before the requested time.
    """

    def __init__(self, t_extinct: float, t: float):
        self.t_extinct = t_extinct
        super().__init__(f"Circle vanishes at t={t_extinct:.6g}, before t={t:.6g}")


class InterfaceLost(NSACError):
    """
    A benchmark interface disappeared before the end of its window.
    """


class FrontReachedBoundary(NSACError):
    """
    A traveling front came too close to the domain boundary.
    """


class ConfigError(NSACError):
    """
    The run configuration is malformed or violates an invariant.

    :ivar line: Line number (1-based) of the offending entry, or ``None``.
    :ivar msg: Message without the location prefix.
    """

    def __init__(self, msg: str, line: int = None):
        self.line = line
        self.msg = msg
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class SnapshotFormatError(NSACError):
    """
    A snapshot or checkpoint file is not in the expected binary format.
    """


class CheckpointMismatch(NSACError):
    """
    A checkpoint was written for different parameters or a different grid.
    """
