"""Exception types raised across the package.

Every domain error derives from :class:`TransferError` so callers (the CLI in
particular) can separate domain failures from programming errors.
"""


class TransferError(Exception):
    """Base class for all domain errors."""


class InvalidDensityMatrix(TransferError, ValueError):
    """A matrix failed one of the density-matrix invariants."""

    def __init__(self, invariant: str, violation: float):
        self.invariant = invariant
        self.violation = float(violation)
        super().__init__(f"{invariant} violated (measured violation {self.violation:.3e})")


class NotHermitian(InvalidDensityMatrix):
    def __init__(self, violation: float):
        super().__init__("hermiticity", violation)


class TraceNotOne(InvalidDensityMatrix):
    def __init__(self, violation: float):
        super().__init__("unit trace", violation)


class NotPSD(InvalidDensityMatrix):
    def __init__(self, violation: float):
        super().__init__("positive semidefiniteness", violation)


class ShapeMismatch(TransferError, ValueError):
    pass


class DimensionMismatch(TransferError, ValueError):
    pass


class InvalidChannel(TransferError, ValueError):
    pass


class DegenerateDraw(TransferError, RuntimeError):
    pass


class StepTooSmall(TransferError, ValueError):
    pass


class OutOfRange(TransferError, ValueError):
    pass


class InvalidConstraint(TransferError, ValueError):
    pass


class ConstraintNotSatisfied(TransferError, ValueError):
    pass


class Infeasible(TransferError, RuntimeError):
    """No admissible channel was found.

    ``proven`` is True when the constraint is inconsistent by a dimension
    (trace conservation) argument, False when the search budget ran out.
    """

    def __init__(self, message: str, proven: bool = False):
        self.proven = proven
        reason = "constraint proven inconsistent by dimension rule" if proven else "hit restart budget"
        super().__init__(f"{message} [{reason}]")


class BoundViolation(TransferError):
    """A channel exceeded a closed-form memory bound. Never swallow this."""

    def __init__(self, reports, channel=None):
        self.reports = list(reports)
        self.channel = channel
        worst = min(self.reports, key=lambda r: r.slack)
        super().__init__(
            f"memory bound violated for pair {worst.pair}: achieved {worst.achieved:.12g} "
            f"> bound {worst.theoretical:.12g} (slack {worst.slack:.3e})"
        )


class CastroViolated(TransferError, ValueError):
    pass


class StatesCommute(TransferError, ValueError):
    pass


class DegenerateStates(TransferError, ValueError):
    pass
