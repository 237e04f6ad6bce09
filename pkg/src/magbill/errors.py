"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`MagBillError`,
so callers (the CLI in particular) can tell numerical/precondition failures
apart from programming errors.
"""


class MagBillError(Exception):
    """Base class for all package errors."""


class InvalidVelocity(MagBillError, ValueError):
    pass


class InvalidState(MagBillError, ValueError):
    pass


class OffCircle(MagBillError, ValueError):
    pass


class CuspSingularity(MagBillError, ArithmeticError):
    pass


class InadmissibleField(MagBillError, ValueError):
    """beta is not below the minimal curvature of the boundary."""


class BoundarySpecError(MagBillError, ValueError):
    pass


class NoImpact(MagBillError):
    """The Larmor circle does not cross the boundary."""


class GrazingImpact(MagBillError):
    """Impact is (numerically) tangential to the boundary."""


class FixedBoundaryPoint(GrazingImpact):
    """Center lies on a parallel curve, where the center map is the identity."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class OutsideAnnulus(MagBillError, ValueError):
    pass


class NotAnnular(MagBillError):
    pass


class NoTangency(MagBillError):
    pass


class OnBoundary(MagBillError):
    """Point lies on the boundary of the outer-billiard annulus (T is the identity)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NoRoots(MagBillError, ValueError):
    pass


class VanishingGradient(MagBillError, ArithmeticError):
    pass


class NotOnCurve(MagBillError, ValueError):
    pass


class CertificationFailed(MagBillError):
    pass


class OutsideRegime(MagBillError, ValueError):
    """Parameters outside the range where a closed form is claimed."""
