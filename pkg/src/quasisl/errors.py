"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes):
``PreconditionError`` for inputs that violate an operation's contract and
``NumericalError`` for computations that failed to reach their tolerance.
"""


class QuasiSLError(Exception):
    """Base class for all library errors."""


class PreconditionError(QuasiSLError):
    pass


class NumericalError(QuasiSLError):
    pass


# coefficients / parsing

class ExprSyntaxError(PreconditionError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprSyntaxError):
    pass


class ProblemSpecError(PreconditionError, ValueError):
    pass


class HypothesisViolation(PreconditionError):
    pass


class NonIntegrable(PreconditionError):
    def __init__(self, coefficient, endpoint, detail=""):
        msg = f"coefficient {coefficient!r} is not integrable near {endpoint}"
        super().__init__(msg + (f": {detail}" if detail else ""))
        self.coefficient = coefficient
        self.endpoint = endpoint


class NonConvergent(NumericalError):
    pass


class IntegrationFailure(NumericalError):
    pass


# integrator

class StepSizeUnderflow(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


# boundary conditions

class RankDeficient(PreconditionError):
    pass


class NotSelfAdjoint(PreconditionError):
    def __init__(self, residual):
        super().__init__(f"B_a J B_a* - B_b J B_b* has norm {residual:.3e}")
        self.residual = residual


# spectra

class WindowTooCoarse(NumericalError):
    pass


class ZeroClusterUnresolved(NumericalError):
    pass


class OscillatoryAtEndpoint(PreconditionError):
    pass


class ZeroInWindow(PreconditionError):
    pass


class AtEigenvalue(PreconditionError):
    pass


class ExtrapolationDiverged(NumericalError):
    pass


class DenominatorVanishes(PreconditionError):
    pass


class TraceImaginaryTooSmall(PreconditionError):
    pass


# extensions

class NotStrictlyPositive(PreconditionError):
    pass


class DegenerateShooting(NumericalError):
    pass


class DomainViolation(PreconditionError):
    pass


class ComplexCouplingUnsupported(PreconditionError):
    pass


class NegativeExtension(PreconditionError):
    pass
