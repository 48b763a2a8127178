"""
Hamiltonian flows of meshes, path velocity forms and two-parameter family checks.
"""

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from scipy.interpolate import CubicSpline

from ..utils.config import TOLERANCES
from ..utils.errors import FlowDegradedError, MeshError, PreconditionError
from ..utils.expressions import FAMILY, TIME, coordinate_symbols, parse_expression
from ..utils.logging_config import get_logger
from .geom_core import (
    AmbientFunction,
    DifferentialForm,
    contract_field,
    exterior_derivative,
    hamiltonian_field,
    poisson_bracket_values,
    solve_hamiltonian_system,
    symbolic_solve,
)
from .lag_mesh import (
    LagMesh,
    MeshOneForm,
    default_normalization,
    integrate_top_form,
    lagrangian_defect,
)
from .models import AmbientModel

logger = get_logger("lagcal.isotopy")

SUPPORTS = ("compact", "normalized")


def _time_function(expr: sp.Expr) -> Callable[[float], float]:
    func = sp.lambdify((TIME,), expr, modules="numpy")
    return lambda t: float(func(t))


@dataclass(frozen=True, eq=False)
class HamiltonianFamily:
    """H_t on the ambient chart, optionally plus a constant translation field rate(t)·d."""

    function: AmbientFunction
    support: str = "compact"
    interval: Tuple[float, float] = (0.0, 1.0)
    box: Optional[Tuple[Tuple[float, float], ...]] = None
    translation: Optional[np.ndarray] = None
    rate: sp.Expr = sp.Integer(1)
    name: str = ""

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise PreconditionError(f"unknown support kind '{self.support}'")
        t0, t1 = (float(v) for v in self.interval)
        if not t1 > t0:
            raise PreconditionError(f"empty time interval {self.interval}")
        object.__setattr__(self, "interval", (t0, t1))
        if self.translation is not None:
            d = np.array(self.translation, dtype=float).reshape(-1)
            if d.size != self.function.dim:
                raise PreconditionError("translation vector has the wrong dimension")
            d.setflags(write=False)
            object.__setattr__(self, "translation", d)
        object.__setattr__(self, "rate", sp.sympify(self.rate))

    @classmethod
    def from_expression(cls, text, dim: int, **kwargs) -> "HamiltonianFamily":
        return cls(AmbientFunction.coerce(text, dim), **kwargs)

    @classmethod
    def zero(cls, dim: int, **kwargs) -> "HamiltonianFamily":
        return cls(AmbientFunction(dim, expr=sp.Integer(0)), **kwargs)

    @property
    def dim(self) -> int:
        return self.function.dim

    @property
    def expr(self) -> Optional[sp.Expr]:
        return self.function.expr

    @property
    def is_symbolic(self) -> bool:
        return self.function.is_symbolic

    def values(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.function.values(points, t)

    def vector_field(self, model: AmbientModel, points: np.ndarray, t: float) -> np.ndarray:
        """xi_{H_t} plus the translation, at (M, dim) points."""
        pts = np.atleast_2d(points)
        if self.is_symbolic and self.expr == 0:
            field = np.zeros_like(pts)
        else:
            field = solve_hamiltonian_system(model.omega_matrix(pts), self.function.gradient(pts, t))
        if self.translation is not None:
            field = field + float(self.rate.subs(TIME, t)) * self.translation
        return field

    def _with(self, expr: Optional[sp.Expr] = None, func=None, **changes) -> "HamiltonianFamily":
        function = AmbientFunction(self.dim, expr=expr) if func is None else AmbientFunction(self.dim, func=func)
        return replace(self, function=function, **changes)

    def reparametrized(self, sigma) -> "HamiltonianFamily":
        """The family generating t -> phi_{sigma(t)}: sigma'(t) H_{sigma(t)}."""
        s_expr = parse_expression(sigma, (TIME,))
        ds = sp.diff(s_expr, TIME)
        rate = sp.simplify(ds * self.rate.subs(TIME, s_expr))
        if self.is_symbolic:
            return self._with(ds * self.expr.subs(TIME, s_expr), rate=rate)
        s_val, ds_val = _time_function(s_expr), _time_function(ds)
        inner = self.function.func
        return self._with(func=lambda pts, t: ds_val(t) * inner(pts, s_val(t)), rate=rate)

    def shifted(self, c) -> "HamiltonianFamily":
        """H_t + c(t); generates the same flow."""
        c_expr = parse_expression(c, (TIME,))
        if self.is_symbolic:
            return self._with(self.expr + c_expr)
        c_val = _time_function(c_expr)
        inner = self.function.func
        return self._with(func=lambda pts, t: inner(pts, t) + c_val(t))

    def reversed(self) -> "HamiltonianFamily":
        """-H_{t0+t1-t}; flows back along the same curve."""
        t0, t1 = self.interval
        back = t0 + t1 - TIME
        rate = self.rate.subs(TIME, back)
        translation = None if self.translation is None else -self.translation
        if self.is_symbolic:
            return self._with(-self.expr.subs(TIME, back), rate=rate, translation=translation)
        inner = self.function.func
        return self._with(func=lambda pts, t: -inner(pts, t0 + t1 - t), rate=rate, translation=translation)

    def scaled(self, k: float) -> "HamiltonianFamily":
        translation = None if self.translation is None else k * self.translation
        if self.is_symbolic:
            return self._with(sp.sympify(k) * self.expr, translation=translation)
        inner = self.function.func
        return self._with(func=lambda pts, t: k * inner(pts, t), translation=translation)

    def over(self, t0: float, t1: float) -> "HamiltonianFamily":
        return replace(self, interval=(t0, t1))

    def validate_support(self, model: AmbientModel, samples: int = 2048, times: int = 5,
                         tol: Optional[float] = None) -> float:
        """Check compact support outside the declared box, or zero mean on a torus."""
        tol = TOLERANCES["normalization"] if tol is None else tol
        t_samples = np.linspace(*self.interval, times)
        residual = 0.0
        if self.support == "compact" and self.box is not None:
            rng = np.random.default_rng(3)
            lo = np.array([a for a, _ in self.box])
            hi = np.array([b for _, b in self.box])
            span = hi - lo
            pts = rng.uniform(lo - span, hi + span, (samples, self.dim))
            outside = np.any((pts < lo) | (pts > hi), axis=1)
            for t in t_samples:
                if outside.any():
                    residual = max(residual, float(np.max(np.abs(self.values(pts[outside], t)))))
        elif self.support == "normalized" and model.is_torus:
            per_axis = max(4, int(round(65536 ** (1.0 / self.dim))))
            axes = [np.arange(per_axis) / per_axis * p for p in model.periods]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
            for t in t_samples:
                values = self.values(grid, t)
                residual = max(residual, abs(float(np.mean(values))) / max(1.0, float(np.max(np.abs(values)))))
        if residual > tol:
            raise PreconditionError(f"Hamiltonian family violates its {self.support} support ({residual:.3e})")
        return residual


def _time_derivative(positions: np.ndarray, times: np.ndarray) -> np.ndarray:
    """d/dt of sampled positions: fourth order on uniform runs of >= 5 samples."""
    count = len(times)
    if count < 2:
        return np.zeros_like(positions)
    steps = np.diff(times)
    uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)
    if uniform and count >= 5:
        h = steps[0]
        p = positions
        d = np.empty_like(p)
        d[2:-2] = (p[:-4] - 8.0 * p[1:-3] + 8.0 * p[3:-1] - p[4:]) / (12.0 * h)
        d[0] = (-25.0 * p[0] + 48.0 * p[1] - 36.0 * p[2] + 16.0 * p[3] - 3.0 * p[4]) / (12.0 * h)
        d[1] = (-3.0 * p[0] - 10.0 * p[1] + 18.0 * p[2] - 6.0 * p[3] + p[4]) / (12.0 * h)
        d[-2] = (3.0 * p[-1] + 10.0 * p[-2] - 18.0 * p[-3] + 6.0 * p[-4] - p[-5]) / (12.0 * h)
        d[-1] = (25.0 * p[-1] - 48.0 * p[-2] + 36.0 * p[-3] - 16.0 * p[-4] + 3.0 * p[-5]) / (12.0 * h)
        return d
    return np.gradient(positions, times, axis=0, edge_order=2 if count >= 3 else 1)


@dataclass(frozen=True, eq=False)
class IsotopyPath:
    """Time samples of a Lagrangian path with node-correspondent meshes.

    ``breaks`` lists interior sample indices where smooth segments meet;
    time derivatives and quadratures are taken per segment.
    """

    times: np.ndarray
    meshes: Tuple[LagMesh, ...]
    hamiltonian: Optional[HamiltonianFamily] = None
    breaks: Tuple[int, ...] = ()
    defects: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        meshes = tuple(self.meshes)
        if times.ndim != 1 or len(times) != len(meshes) or not meshes:
            raise PreconditionError("a path needs one mesh per time sample")
        if np.any(np.diff(times) <= 0):
            raise PreconditionError("path times must increase strictly")
        first = meshes[0]
        for mesh in meshes[1:]:
            if mesh.shape != first.shape or mesh.model is not first.model or mesh.domain != first.domain:
                raise MeshError("path meshes must share model, domain and grid")
        breaks = tuple(sorted(int(b) for b in self.breaks))
        if any(b <= 0 or b >= len(times) - 1 for b in breaks):
            raise PreconditionError(f"breaks {breaks} must be interior sample indices")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "meshes", meshes)
        object.__setattr__(self, "breaks", breaks)

    @property
    def model(self) -> AmbientModel:
        return self.meshes[0].model

    @property
    def mesh0(self) -> LagMesh:
        return self.meshes[0]

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def normalization(self) -> str:
        return default_normalization(self.meshes[0])

    @cached_property
    def positions(self) -> np.ndarray:
        return np.stack([mesh.points for mesh in self.meshes])

    def segments(self) -> List[Tuple[int, int]]:
        """Inclusive (start, stop) sample indices of the smooth pieces."""
        edges = [0, *self.breaks, self.steps]
        return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    @cached_property
    def _segment_velocities(self) -> List[np.ndarray]:
        return [_time_derivative(self.positions[a:b + 1], self.times[a:b + 1]) for a, b in self.segments()]

    def segment_velocities(self, k: int) -> np.ndarray:
        return self._segment_velocities[k]

    def velocity(self, j: int, side: str = "right") -> np.ndarray:
        """Node velocities at sample j; at a break, from the segment on ``side``."""
        if not 0 <= j <= self.steps:
            raise PreconditionError(f"sample {j} outside 0..{self.steps}")
        for k, (a, b) in enumerate(self.segments()):
            inside = a <= j < b if side == "right" else a < j <= b
            if inside or (j == b == self.steps) or (j == a == 0):
                return self._segment_velocities[k][j - a]
        return np.zeros_like(self.positions[j])

    def prefix(self, j: int) -> "IsotopyPath":
        """The path restricted to samples 0..j."""
        if not 1 <= j <= self.steps:
            raise PreconditionError(f"prefix length {j} outside 1..{self.steps}")
        return IsotopyPath(
            self.times[:j + 1], self.meshes[:j + 1], self.hamiltonian,
            tuple(b for b in self.breaks if b < j),
            None if self.defects is None else self.defects[:j + 1], self.label,
        )


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def flow_points(model: AmbientModel, family: HamiltonianFamily, points: np.ndarray,
                t0: float, t1: float, steps: int) -> List[np.ndarray]:
    """Classic fixed-step RK4; returns the steps + 1 sampled positions."""
    if steps < 1:
        raise PreconditionError("flows need at least one step")
    dt = (t1 - t0) / steps
    p = np.array(points, dtype=float)
    out = [p]
    for k in range(steps):
        t = t0 + k * dt
        k1 = family.vector_field(model, p, t)
        k2 = family.vector_field(model, p + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = family.vector_field(model, p + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = family.vector_field(model, p + dt * k3, t + dt)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(p)
    return out


def flow_mesh(mesh: LagMesh, family: HamiltonianFamily, t0: Optional[float] = None,
              t1: Optional[float] = None, steps: int = 16) -> LagMesh:
    """The mesh moved by the flow of ``family`` from t0 to t1."""
    t0 = family.interval[0] if t0 is None else t0
    t1 = family.interval[1] if t1 is None else t1
    final = flow_points(mesh.model, family, mesh.flat_points, t0, t1, steps)[-1]
    return mesh.with_points(final.reshape(mesh.points.shape))


def _collar_drift(mesh: LagMesh, points: np.ndarray) -> float:
    if mesh.reference is None or not mesh.collar_mask.any():
        return 0.0
    mask = mesh.collar_mask
    return float(np.max(np.abs(points[mask] - mesh.reference[mask])))


def flow_path(mesh0: LagMesh, H: HamiltonianFamily, steps: int,
              defect_threshold: Optional[float] = None, label: str = "") -> IsotopyPath:
    """Advect every node through xi_H with RK4, monitoring the Lagrangian defect."""
    if steps < 1:
        raise PreconditionError("flow_path needs steps >= 1")
    if H.dim != mesh0.dim:
        raise PreconditionError("Hamiltonian and mesh live in different dimensions")
    threshold = TOLERANCES["flow_degraded"] if defect_threshold is None else defect_threshold
    t0, t1 = H.interval
    times = np.linspace(t0, t1, steps + 1)
    positions = flow_points(mesh0.model, H, mesh0.flat_points, t0, t1, steps)
    meshes, defects = [], []
    for t, flat in zip(times, positions):
        points = flat.reshape(mesh0.points.shape)
        drift = _collar_drift(mesh0, points)
        if drift > TOLERANCES["collar_drift"]:
            raise FlowDegradedError(float(t), drift, TOLERANCES["collar_drift"])
        mesh = mesh0.with_points(points)
        defect = lagrangian_defect(mesh)
        if defect > threshold:
            raise FlowDegradedError(float(t), defect, threshold)
        if defect > TOLERANCES["lagrangian_defect_flow"]:
            logger.warning("Lagrangian defect %.3e at t=%.4f", defect, t)
        meshes.append(mesh)
        defects.append(defect)
    logger.debug("flowed %d nodes over %d steps, max defect %.3e", mesh0.node_count, steps, max(defects))
    return IsotopyPath(times, tuple(meshes), H, defects=np.asarray(defects), label=label or H.name)


def translation_path(mesh0: LagMesh, displacement: Sequence[float], steps: int = 8,
                     interval: Tuple[float, float] = (0.0, 1.0)) -> IsotopyPath:
    """Rigid translation of a torus mesh by ``displacement`` over the interval."""
    if mesh0.domain != "torus":
        raise MeshError("translations are only symplectic isotopies of closed meshes here")
    t0, t1 = interval
    family = HamiltonianFamily.zero(mesh0.dim, interval=interval,
                                    translation=np.asarray(displacement, dtype=float) / (t1 - t0),
                                    support="normalized", name="translation")
    return flow_path(mesh0, family, steps, label="translation")


def concatenate_paths(first: IsotopyPath, second: IsotopyPath, tol: float = 1e-10) -> IsotopyPath:
    """first then second, rescaled to [0, 1/2] and [1/2, 1] with a break between."""
    if first.mesh0.shape != second.mesh0.shape or first.model is not second.model:
        raise MeshError("paths live on different grids or models")
    gap = float(np.max(np.abs(second.meshes[0].points - first.meshes[-1].points)))
    if gap > tol:
        raise PreconditionError(f"paths do not join (gap {gap:.3e})")

    def rescale(times, lo):
        return lo + 0.5 * (times - times[0]) / (times[-1] - times[0])

    joint = first.steps
    times = np.concatenate([rescale(first.times, 0.0), rescale(second.times, 0.5)[1:]])
    breaks = first.breaks + (joint,) + tuple(joint + b for b in second.breaks)
    defects = None
    if first.defects is not None and second.defects is not None:
        defects = np.concatenate([first.defects, second.defects[1:]])
    return IsotopyPath(times, first.meshes + second.meshes[1:], None, breaks, defects,
                       f"{first.label}*{second.label}")


def reparametrize_path(path: IsotopyPath, sigma) -> IsotopyPath:
    """Resample node trajectories at sigma(t) with cubic splines."""
    if path.breaks:
        raise PreconditionError("reparametrize each smooth segment separately")
    s_expr = parse_expression(sigma, (TIME,))
    s_func = sp.lambdify((TIME,), s_expr, modules="numpy")
    t0, t1 = path.times[0], path.times[-1]
    if abs(float(s_func(t0)) - t0) > 1e-12 or abs(float(s_func(t1)) - t1) > 1e-12:
        raise PreconditionError("sigma must fix the endpoints of the interval")
    count = len(path.times)
    spline = CubicSpline(path.times, path.positions.reshape(count, -1), axis=0)
    resampled = spline(np.asarray([float(s_func(t)) for t in path.times]))
    shape = path.mesh0.points.shape
    meshes = tuple(path.mesh0.with_points(row.reshape(shape)) for row in resampled)
    family = path.hamiltonian.reparametrized(s_expr) if path.hamiltonian is not None else None
    return IsotopyPath(path.times, meshes, family, label=f"{path.label} reparametrized")


# ---------------------------------------------------------------------------
# velocity forms
# ---------------------------------------------------------------------------

def path_velocity_form(path: IsotopyPath, j: int, side: str = "right") -> MeshOneForm:
    """alpha = f*(i_v omega) at sample j, with the residual against d(H_t|Lambda) when H is known."""
    mesh = path.meshes[j]
    v = path.velocity(j, side).reshape(-1, mesh.dim)
    W = mesh.model.omega_matrix(mesh.flat_points)
    F = mesh.flat_frames
    comps = np.einsum("md,mde,mie->mi", v, W, F)
    residual = None
    family = path.hamiltonian
    if family is not None and family.translation is None:
        grad = family.function.gradient(mesh.flat_points, float(path.times[j]))
        direct = np.einsum("md,mid->mi", grad, F)
        residual = float(np.max(np.abs(comps - direct)))
    return MeshOneForm(mesh, comps.reshape(mesh.shape + (mesh.n,)), residual)


def velocity_form_residual(path: IsotopyPath, j: int) -> float:
    """||alpha_t - d(H_t|Lambda)||_inf at sample j."""
    residual = path_velocity_form(path, j).residual
    if residual is None:
        raise PreconditionError("path has no generating Hamiltonian to compare against")
    return residual


# ---------------------------------------------------------------------------
# two-parameter families and the bracket identity
# ---------------------------------------------------------------------------

class TwoParamResidual(NamedTuple):
    deviation: float
    constant: float


def two_param_residual(
    H,
    K,
    model: AmbientModel,
    points: np.ndarray,
    parameters: Sequence[Tuple[float, float]] = ((0.3, 0.6),),
) -> TwoParamResidual:
    """Spatial deviation and value of dH/ds - dK/dt - {H, K} for symbolic families in (s, t, x)."""
    symbols = coordinate_symbols(model.dim)
    variables = symbols + (TIME, FAMILY)
    H_expr = parse_expression(H, variables)
    K_expr = parse_expression(K, variables)
    xi_H = symbolic_solve(model.omega, [sp.diff(H_expr, s) for s in symbols])
    bracket = sum(xi * sp.diff(K_expr, s) for xi, s in zip(xi_H, symbols))
    field = sp.diff(H_expr, FAMILY) - sp.diff(K_expr, TIME) - bracket
    func = sp.lambdify((FAMILY, TIME) + symbols, field, modules="numpy")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    deviation, constant = 0.0, 0.0
    for s, t in parameters:
        with np.errstate(all="ignore"):
            values = np.broadcast_to(np.asarray(func(s, t, *pts.T), dtype=float), (pts.shape[0],))
        mean = float(np.mean(values))
        deviation = max(deviation, float(np.max(np.abs(values - mean))))
        if abs(mean) >= abs(constant):
            constant = mean
    logger.debug("two-parameter residual: deviation %.3e, constant %.6g", deviation, constant)
    return TwoParamResidual(deviation, constant)


def lemma_ob_residual(mesh: LagMesh, H, K, beta: Optional[DifferentialForm] = None) -> float:
    """|int {H,K} beta - int (H d i_zeta beta - K d i_xi beta)| over the mesh."""
    model = mesh.model
    beta = beta if beta is not None else model.require("beta")
    if beta.degree != mesh.n:
        raise PreconditionError("beta must be a top-degree form on the Lagrangian")
    Hf = AmbientFunction.coerce(H, model.dim)
    Kf = AmbientFunction.coerce(K, model.dim)
    nodes = mesh.flat_points
    bracket = poisson_bracket_values(model, Hf, Kf, nodes).reshape(mesh.shape)
    lhs = integrate_top_form(mesh, beta, weight=bracket)

    xi = hamiltonian_field(model, Hf)
    zeta = hamiltonian_field(model, Kf)
    d_zeta = exterior_derivative(contract_field(zeta, beta))
    d_xi = exterior_derivative(contract_field(xi, beta))
    H_nodes = Hf.values(nodes).reshape(mesh.shape)
    K_nodes = Kf.values(nodes).reshape(mesh.shape)
    rhs = integrate_top_form(mesh, d_zeta, weight=H_nodes) - integrate_top_form(mesh, d_xi, weight=K_nodes)
    return float(abs(lhs - rhs))
