"""Error taxonomy shared by the grid, geometry, flow and IO layers."""

from __future__ import annotations


class ConvexFlowError(Exception):
    """Base class for every error raised by convexflow."""


class InvalidConfig(ConvexFlowError):
    """A configuration value, grid resolution or shape parameter is out of range."""

    def __init__(self, message: str, *, line: int | None = None, key: str | None = None) -> None:
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class GridMismatch(ConvexFlowError):
    """Two fields sampled on different grids were combined."""


class ConvexityError(ConvexFlowError):
    """The sampled support function does not describe a strictly convex body."""

    def __init__(self, message: str, *, min_radius: float | None = None) -> None:
        self.min_radius = min_radius
        super().__init__(message)


class NonConvexInput(ConvexityError):
    """The initial body fails the strict convexity check."""


class LossOfConvexity(ConvexityError):
    """The evolving body left the strictly convex class (or the step was too large)."""


class ConstraintViolation(ConvexFlowError):
    """An externally supplied global term is below the volume-monotonicity bound."""


class DegenerateConstraint(ConvexFlowError):
    """Both partial derivatives of the constraint function vanish."""


class ProjectionFailure(ConvexFlowError):
    """The constraint projection could not bracket a root within its bound."""


class MonitorViolation(ConvexFlowError):
    """A hard runtime invariant (e.g. the global-term sandwich) failed."""


class ExportError(ConvexFlowError):
    """Writing an output artifact failed."""

    def __init__(self, path: object, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")

    def __reduce__(self) -> tuple:
        # sweep workers send errors back through pickle
        return type(self), (self.path, self.reason)
