"""Exception hierarchy shared by all billiard-lab modules."""


class BlabError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(BlabError, ValueError):
    """Invalid user input: curve specs, polynomial text, run configuration."""


class NumericalError(BlabError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer."""


class CurveError(ConfigError):
    """Curve parameters do not describe a strictly convex oval."""


class PolynomialSyntaxError(ConfigError):
    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class SingularPoint(NumericalError):
    """Gradient vanishes where a regular point was required."""


class BranchTraceFailed(NumericalError):
    def __init__(self, message, branch=None, radius_reached=None):
        super().__init__(message)
        self.branch = branch
        self.radius_reached = radius_reached


class TangentialStart(NumericalError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class AtPole(NumericalError):
    """A point coinciding with the pole has no dual line."""


class ThroughPole(NumericalError):
    """A line through the pole has no dual point."""


class OnExclusionSet(NumericalError):
    """The reflected ray is parallel to the tangent line; the angular map is undefined."""


class InsideCurve(NumericalError):
    """A point that must be exterior to the curve lies inside it."""


class NotHomogeneous(ConfigError):
    pass


class MuSingular(NumericalError):
    pass


class NoIntersection(NumericalError):
    """The Larmor circle misses the boundary: its center is outside the center annulus."""


class TangentCircle(NumericalError):
    """The Larmor circle touches the boundary tangentially."""


class WeakFieldViolation(ConfigError):
    """Larmor radius does not exceed the maximal curvature radius of the boundary."""


class SingularGradient(NumericalError):
    pass


class BothDegenerate(NumericalError):
    """Neither F1 + F2 nor (F1 - F2)^2 is a non-constant function."""


class NoOffsetModel(ConfigError):
    """No closed-form offset polynomial is available for this curve kind."""
