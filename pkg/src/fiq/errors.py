"""Exception hierarchy.

Every failure mode that callers are expected to handle gets its own class;
plain ValueError/TypeError are reserved for programming errors.
"""


class FiqError(Exception):
    """Base class for all library errors."""


class BadParameter(FiqError):
    """Parameter outside the admissible range of an operation."""


class NonIntegrable(FiqError):
    """Unnormalized density has a divergent integral."""


class Unsupported(FiqError):
    """Operation not available for this measure (dimension/shape limits)."""


class OscillationUnavailable(FiqError):
    """Potential oscillation over a ball cannot be computed."""


class CertificateInvalid(FiqError):
    """Drift certificate failed verification or has wrong variant."""


class FarFieldViolated(FiqError):
    """Far-field drift inequality fails on the verification grid."""


class PhiUNotPositive(FiqError):
    """Perturbed dissipation is not positive outside the certificate ball."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotApplicable(FiqError):
    """Transform's proviso fails (e.g. candidate rate not non-increasing)."""


class TrickInapplicable(FiqError):
    """Direct-to-converse change of functions requires C * grad_bound^2 < 1."""


class PerturbationTooLarge(FiqError):
    """Smallness condition s < 1 fails for every admissible free parameter."""


class IntegralDiverges(FiqError):
    """An auxiliary integral (e.g. exponential moment) does not converge."""


class RateBoundedAtZero(FiqError):
    """Rate stays bounded as s -> 0; weight construction degenerates."""


class WeightNotIntegrable(FiqError):
    """1/omega^2 is not mu-integrable."""


class RatioUnbounded(FiqError):
    """Density ratio grows without saturating on the comparison grid."""


class GridTooCoarse(FiqError):
    """Discretization refinement changed the answer by more than 1%."""


class Infeasible(FiqError):
    """Constrained problem has no admissible function (e.g. mu(A) > 1/2)."""


class StepTooLarge(FiqError):
    """Taming activated on more than 1% of SDE steps."""


class DifferentiationFailure(FiqError):
    """Derivative of a field could not be evaluated at the requested point."""


class ExprSyntaxError(FiqError):
    """Malformed potential expression; carries the byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ExprDomainError(FiqError):
    """Expression evaluated outside its domain (e.g. ln of non-positive)."""


class ConfigError(FiqError):
    """Bad CLI configuration or measure-spec text."""
