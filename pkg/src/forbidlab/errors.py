"""Exception and warning types shared across the package."""


class ForbidLabError(Exception):
    """Base class for all domain errors."""


class ConfigError(ForbidLabError):
    pass


# geometry
class EmptyForbiddenRegion(ForbidLabError):
    pass


class FullForbiddenRegion(ForbidLabError):
    pass


class DegenerateCurve(ForbidLabError):
    pass


class MarginViolation(ForbidLabError):
    pass


class NonPositiveFactor(ForbidLabError):
    pass


# eigensolve
class ResolutionError(ForbidLabError):
    def __init__(self, msg, required_n=None):
        super().__init__(msg)
        self.required_n = required_n


class ConvergenceFailure(ForbidLabError):
    def __init__(self, msg, best_residual=None):
        super().__init__(msg)
        self.best_residual = best_residual


class DegenerateCluster(UserWarning):
    pass


# agmon
class CurveLeavesForbidden(ForbidLabError):
    pass


# nodal
class UndersampledCurve(UserWarning):
    pass


class AllBelowTolerance(UserWarning):
    pass


class RegionNotForbidden(ForbidLabError):
    pass


# trace
class ZeroTrace(ForbidLabError):
    pass


class NonAnalyticTrace(UserWarning):
    pass


class StripExceeded(ForbidLabError):
    pass


class ContourZero(ForbidLabError):
    pass


# greens
class DiagonalSingularity(ForbidLabError):
    pass


class QuadratureDivergence(ForbidLabError):
    pass


class NonPositiveKernel(ForbidLabError):
    pass


class BranchViolation(ForbidLabError):
    pass


class TaylorDivergence(ForbidLabError):
    pass


class GeometryViolation(ForbidLabError):
    pass


# revolution
class PoleLeak(UserWarning):
    pass


class ForbiddenViolation(ForbidLabError):
    pass


class NullRadialValue(ForbidLabError):
    pass


# harness
class InsufficientData(ForbidLabError):
    pass


class SolverBudget(ForbidLabError):
    pass


class QuadratureFailure(ForbidLabError):
    pass
