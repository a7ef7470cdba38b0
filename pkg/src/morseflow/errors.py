"""Exception types shared across the package.

Every error that a pipeline can surface to a caller (or the CLI) lives here,
so machine-readable error codes stay in one place.
"""


class MorseflowError(Exception):
    """Base class; `code` is the stable machine-readable identifier."""

    code = "error"


class PrecisionError(MorseflowError):
    """A truncated-series computation ran out of known coefficients."""

    code = "precision"


class PrecisionExhausted(PrecisionError):
    """A decision (pivot, comparison) needed more coefficients than stored."""

    code = "precision-exhausted"


class NotAUnit(MorseflowError):
    """Leading coefficient is not +-1, so the element is not invertible over Z((t))."""

    code = "not-a-unit"


class NonIntegralSeries(MorseflowError):
    """exp produced a non-integer coefficient; signals an inconsistent count."""

    code = "non-integral"


class BoundarySquareNonzero(MorseflowError):
    code = "boundary-square-nonzero"


class SignInconsistency(BoundarySquareNonzero):
    """d^2 != 0 in a geometrically built complex; a sign-convention bug."""

    code = "sign-inconsistency"


class NotAcyclic(MorseflowError):
    code = "not-acyclic"


class ChainMapViolation(MorseflowError):
    code = "chain-map-violation"


class TransversalityFailure(MorseflowError):
    code = "transversality"


class RegularValueError(MorseflowError):
    """The requested level is within tolerance of a critical value."""

    code = "regular-value"


class EvaluationFailure(MorseflowError):
    code = "evaluation"


class StepCollapse(MorseflowError):
    """Integrator step size underflowed; carries the location."""

    code = "step-collapse"

    def __init__(self, msg, location=None):
        super().__init__(msg)
        self.location = location


class MaxLengthExceeded(MorseflowError):
    code = "max-length"


class ValidationLost(MorseflowError):
    """A perturbed field no longer passes gradient validation."""

    code = "validation-lost"


class DegenerateFixedPoint(MorseflowError):
    """|(Phi^n)'(x) - 1| below tolerance at a located fixed point."""

    code = "degenerate-fixed-point"

    def __init__(self, msg, location=None):
        super().__init__(msg)
        self.location = location


class ResolutionTooCoarse(MorseflowError):
    code = "resolution"


class LiftAmbiguity(MorseflowError):
    """A covering-space lift was required but no basepoint image was declared."""

    code = "lift-ambiguity"


class MismatchError(MorseflowError):
    """Two constructions that must agree entrywise do not; carries first diff."""

    code = "mismatch"

    def __init__(self, msg, first_diff=None):
        super().__init__(msg)
        self.first_diff = first_diff


class SceneError(MorseflowError):
    """Bad scene family, parameters, or config file."""

    code = "scene-config"
