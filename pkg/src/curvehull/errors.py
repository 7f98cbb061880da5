"""Exception types shared across the package."""


class CurveHullError(Exception):
    """Base class for domain failures (CLI exit code 1)."""


class ShapeMismatch(CurveHullError, ValueError):
    pass


class SingularJacobian(CurveHullError):
    """Parameter lies on the boundary of its domain, where the Jacobian may vanish."""


class NotInterior(CurveHullError):
    pass


class OutsideHull(CurveHullError):
    pass


class NoConvergence(CurveHullError):
    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class DegeneratePivot(CurveHullError):
    pass


class Infeasible(CurveHullError):
    pass


class IntegrandError(CurveHullError):
    """Raised for non-finite samples, indefinite Gram matrices or sign failures."""
