"""
Exception hierarchy for the lagcal library.
"""

from typing import Any, Dict, Optional, Sequence, Tuple


class LagCalError(Exception):
    """Base class for every error raised by lagcal."""


class DegreeError(LagCalError):
    """Form degrees incompatible with the requested operation."""

    def __init__(self, message: str, degrees: Tuple[int, ...] = ()):
        super().__init__(message)
        self.degrees = tuple(degrees)


class SingularFormError(LagCalError):
    """Symplectic matrix is singular at a sampled point."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(p) for p in point)


class MissingStructureError(LagCalError):
    """A model structure (J, Omega, lambda, gamma, c, beta) is absent."""

    def __init__(self, structure: str, model: str = ""):
        super().__init__(f"model '{model}' has no {structure}")
        self.structure = structure
        self.model = model


class InconsistentStructureError(LagCalError):
    """Model structures violate one of their defining identities."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateImmersionError(LagCalError):
    """Tangent frame lost rank, or Omega vanishes on it."""

    def __init__(self, message: str, worst_node: Optional[Tuple[int, ...]] = None):
        super().__init__(message)
        self.worst_node = worst_node


class MeshError(LagCalError):
    """Malformed mesh or a mesh of the wrong kind for the operation."""


class NotExactError(LagCalError):
    """A mesh one-form has non-vanishing loop sums."""

    def __init__(self, cycle_integrals: Sequence[float], tolerance: float):
        values = ", ".join(f"{c:.6g}" for c in cycle_integrals)
        super().__init__(f"one-form is not exact: cycle integrals [{values}] exceed {tolerance:g}")
        self.cycle_integrals = tuple(float(c) for c in cycle_integrals)
        self.tolerance = tolerance


class NormalizationError(LagCalError):
    """Integral that must vanish for the normalization does not."""

    def __init__(self, message: str, value: float = float("nan")):
        super().__init__(message)
        self.value = value


class FlowDegradedError(LagCalError):
    """Lagrangian defect or collar drift exceeded the flow threshold."""

    def __init__(self, time: float, defect: float, threshold: float):
        super().__init__(
            f"flow degraded at t={time:.6g}: defect {defect:.3e} exceeds {threshold:.1e}"
        )
        self.time = time
        self.defect = defect
        self.threshold = threshold


class LeavesAlmostCalibratedError(LagCalError):
    """Some node has cos(theta) below the floor."""

    def __init__(self, worst_node: Tuple[int, ...], cos_theta: float, cos_floor: float):
        super().__init__(
            f"mesh leaves the almost calibrated set at node {worst_node}: "
            f"cos(theta)={cos_theta:.4f} < {cos_floor}"
        )
        self.worst_node = worst_node
        self.cos_theta = cos_theta
        self.cos_floor = cos_floor


class PartialPathError(LagCalError):
    """Geodesic integration stopped early; the samples computed so far are attached."""

    def __init__(self, exit_time: float, path: Any, cause: Optional[Exception] = None):
        super().__init__(f"geodesic left the almost calibrated set at t={exit_time:.6g}")
        self.exit_time = exit_time
        self.path = path
        self.cause = cause


class NonCriticalError(LagCalError):
    """Second-variation formula requested away from a critical point."""

    def __init__(self, message: str, defect: float):
        super().__init__(f"{message} (defect {defect:.3e}); use finite differences instead")
        self.defect = defect


class NotHomogeneousError(LagCalError):
    """No constant c with L_xi beta = c beta."""

    def __init__(self, ratios: Sequence[float]):
        super().__init__("beta is not homogeneous under the Liouville flow")
        self.ratios = tuple(float(r) for r in ratios)


class PreconditionError(LagCalError):
    """Generic contract violation."""


class ExpressionError(LagCalError):
    """Expression string could not be parsed or uses disallowed names."""

    def __init__(self, text: str, reason: str):
        super().__init__(f"cannot parse expression '{text}': {reason}")
        self.text = text
        self.reason = reason


class ConfigError(LagCalError):
    """Invalid scenario configuration or manifest."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}
