"""
Almost Calabi-Yau structure on meshes.

Phase and log-density fields, special Lagrangian and calibration checks,
the first and second variations of C and of volume, horizontal lifts,
geodesic shooting and the energy of paths under proper exact perturbations.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
import sympy as sp

from ..utils.config import DEFAULTS, TOLERANCES
from ..utils.errors import (
    DegenerateImmersionError,
    InconsistentStructureError,
    LeavesAlmostCalibratedError,
    MeshError,
    NonCriticalError,
    PartialPathError,
    PreconditionError,
)
from ..utils.expressions import TIME, parse_expression
from ..utils.logging_config import get_logger, log_performance
from .functionals import _default_beta, energy, sample_potential
from .geom_core import DifferentialForm, wedge, wedge_power
from .isotopy import HamiltonianFamily, IsotopyPath, flow_mesh
from .lag_mesh import (
    LagMesh,
    ScalarField,
    holomorphic_values,
    induced_metric,
    induced_volume,
    integrate_top_form,
    lagrangian_defect,
    mesh_gradient,
)
from .models import AmbientModel, top_coefficient

logger = get_logger("lagcal.slag")

FieldLike = Union[ScalarField, np.ndarray]


def _field_values(mesh: LagMesh, field: FieldLike) -> np.ndarray:
    values = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)
    if values.shape != mesh.shape:
        raise MeshError(f"field of shape {values.shape} does not live on a {mesh.shape} grid")
    return values


# ---------------------------------------------------------------------------
# phase and density
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _density_forms(model: AmbientModel) -> Tuple[DifferentialForm, DifferentialForm]:
    holo = model.holo_volume
    n = model.n
    volume_form = wedge_power(model.omega, n).scaled(sp.Rational(1, math.factorial(n)))
    factor = sp.Integer(-1) ** (n * (n - 1) // 2) * (sp.I / 2) ** n
    return volume_form, wedge(holo, holo.conjugate()).scaled(factor)


def rho_field(model: AmbientModel, points: np.ndarray) -> np.ndarray:
    """rho with e^rho omega^n/n! = (-1)^(n(n-1)/2) (i/2)^n Omega ∧ conj(Omega)."""
    model.require("complex_structure")
    model.require("holo_volume")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    volume_form, density_form = _density_forms(model)
    ratio = top_coefficient(density_form, pts) / top_coefficient(volume_form, pts)
    ratio = np.asarray(ratio, dtype=complex)
    if np.max(np.abs(ratio.imag)) > 1e-10 * max(1.0, float(np.max(np.abs(ratio)))) or np.min(ratio.real) <= 0.0:
        raise InconsistentStructureError(
            f"Omega ∧ conj(Omega) is not a positive multiple of the volume on {model.name}",
            float(np.min(ratio.real)),
        )
    return np.log(ratio.real)


def _unwrap_tree(theta: np.ndarray) -> np.ndarray:
    """Continue a wrapped angle along grid lines, anchored at node 0."""
    if theta.ndim == 1:
        return np.unwrap(theta)
    head = _unwrap_tree(theta[..., 0])
    lines = np.unwrap(theta, axis=-1)
    return lines + (head - lines[..., 0])[..., None]


def _cycle_winding(theta: np.ndarray, axis: int) -> int:
    steps = np.angle(np.exp(1j * (np.roll(theta, -1, axis=axis) - theta)))
    turns = np.sum(steps, axis=axis) / (2.0 * np.pi)
    return int(np.round(np.ravel(turns)[0]))


def _holomorphic_frame_values(mesh: LagMesh) -> np.ndarray:
    values = holomorphic_values(mesh)
    magnitude = np.abs(values)
    if np.min(magnitude) < 1e-12:
        worst = np.unravel_index(int(np.argmin(magnitude)), mesh.shape)
        raise DegenerateImmersionError("Omega vanishes on the tangent frame", tuple(int(i) for i in worst))
    return values


def _cos_theta(mesh: LagMesh, values: np.ndarray, cos_floor: float) -> np.ndarray:
    cos_theta = np.real(values) / np.abs(values)
    if np.min(cos_theta) < cos_floor:
        worst = np.unravel_index(int(np.argmin(cos_theta)), mesh.shape)
        raise LeavesAlmostCalibratedError(tuple(int(i) for i in worst), float(np.min(cos_theta)), cos_floor)
    return cos_theta


@dataclass(frozen=True)
class PhaseData:
    """Phase theta and log-density rho on a mesh."""

    theta: ScalarField
    rho_on_mesh: ScalarField
    cos_floor: float = DEFAULTS["cos_floor"]
    winding: Tuple[int, ...] = ()

    @property
    def cos_theta(self) -> np.ndarray:
        return np.cos(self.theta.values)

    @property
    def in_positive_cone(self) -> bool:
        return bool(np.min(self.cos_theta) >= self.cos_floor)


def phase_field(mesh: LagMesh, cos_floor: float = DEFAULTS["cos_floor"]) -> PhaseData:
    defect = lagrangian_defect(mesh)
    if defect > TOLERANCES["flow_degraded"]:
        raise PreconditionError(f"phase needs a Lagrangian mesh (defect {defect:.3e})")
    values = _holomorphic_frame_values(mesh)
    theta = _unwrap_tree(np.angle(values))
    winding: Tuple[int, ...] = ()
    if mesh.domain == "torus":
        winding = tuple(_cycle_winding(theta, axis) for axis in range(mesh.n))
        if any(winding):
            logger.warning("phase winds around the torus cycles: %s", winding)
    rho = rho_field(mesh.model, mesh.flat_points).reshape(mesh.shape)
    return PhaseData(ScalarField(theta), ScalarField(rho), cos_floor, winding)


def special_defect(mesh: LagMesh) -> float:
    """max |im Omega| / |Omega| over the nodes."""
    values = _holomorphic_frame_values(mesh)
    return float(np.max(np.abs(np.imag(values)) / np.abs(values)))


def calibration_residual(mesh: LagMesh) -> float:
    """Relative pointwise gap in |Omega(frame)|^2 = e^rho vol^2."""
    values = _holomorphic_frame_values(mesh)
    rho = rho_field(mesh.model, mesh.flat_points).reshape(mesh.shape)
    expected = np.exp(rho) * induced_volume(mesh) ** 2
    return float(np.max(np.abs(np.abs(values) ** 2 - expected) / expected))


def volume_bound_gap(mesh: LagMesh) -> float:
    """int e^(rho/2) vol - int re Omega; never negative, zero on special meshes."""
    rho = rho_field(mesh.model, mesh.flat_points).reshape(mesh.shape)
    weighted = float(np.sum(mesh.weights * np.exp(0.5 * rho) * induced_volume(mesh)))
    calibrated = float(np.real(integrate_top_form(mesh, mesh.model.require("holo_volume").real_part())))
    return weighted - calibrated


# ---------------------------------------------------------------------------
# metric calculus on meshes
# ---------------------------------------------------------------------------

def _inverse_metric(mesh: LagMesh) -> np.ndarray:
    return np.linalg.inv(induced_metric(mesh))


def _metric_pairing(mesh: LagMesh, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...ij,...j->...", a, _inverse_metric(mesh), b)


def _phase_differential(mesh: LagMesh) -> np.ndarray:
    """d theta from Omega(frame) directly; periodic even when theta winds."""
    values = _holomorphic_frame_values(mesh)
    comps = [np.imag(mesh.differentiate(values, axis) / values) for axis in range(mesh.n)]
    return np.stack(comps, axis=-1)


def _divergence(mesh: LagMesh, covector: np.ndarray) -> np.ndarray:
    sqrt_g = induced_volume(mesh)
    flux = sqrt_g[..., None] * np.einsum("...ij,...j->...i", _inverse_metric(mesh), covector)
    total = sum(mesh.differentiate(flux[..., i], i) for i in range(mesh.n))
    return total / sqrt_g


def laplace_beltrami(mesh: LagMesh, h: FieldLike) -> ScalarField:
    """Delta h = (1/sqrt g) d_i (sqrt g g^ij d_j h)."""
    dh = mesh_gradient(mesh, _field_values(mesh, h)).components
    return ScalarField(_divergence(mesh, dh))


def _rho_weight(mesh: LagMesh) -> np.ndarray:
    if mesh.model.holo_volume is None:
        return np.ones(mesh.shape)
    return np.exp(0.5 * rho_field(mesh.model, mesh.flat_points).reshape(mesh.shape))


# ---------------------------------------------------------------------------
# variations
# ---------------------------------------------------------------------------

def cc_first_variation(mesh: LagMesh, k: FieldLike, beta: Optional[DifferentialForm] = None) -> float:
    """d/ds C at the end of a path moving with potential k: int k beta."""
    beta = beta if beta is not None else _default_beta(mesh.model)
    return float(np.real(integrate_top_form(mesh, beta, weight=_field_values(mesh, k))))


def cc_second_variation_critical(mesh: LagMesh, k: FieldLike) -> float:
    """int |dk|^2 e^(rho/2) vol at a special Lagrangian."""
    defect = special_defect(mesh)
    if defect > TOLERANCES["critical"]:
        raise NonCriticalError("second variation formula holds at special Lagrangians only", defect)
    dk = mesh_gradient(mesh, _field_values(mesh, k)).components
    density = _metric_pairing(mesh, dk, dk) * _rho_weight(mesh) * induced_volume(mesh)
    return float(np.sum(mesh.weights * density))


def vol_first_variation(mesh: LagMesh, h: FieldLike) -> float:
    """int <dh, d theta> vol."""
    dh = mesh_gradient(mesh, _field_values(mesh, h)).components
    density = _metric_pairing(mesh, dh, _phase_differential(mesh)) * induced_volume(mesh)
    return float(np.sum(mesh.weights * density))


def vol_second_variation(mesh: LagMesh, h: FieldLike) -> float:
    """int |Delta h|^2 vol, valid where d theta is harmonic."""
    harmonic = float(np.max(np.abs(_divergence(mesh, _phase_differential(mesh)))))
    if harmonic > TOLERANCES["harmonic_phase"]:
        raise NonCriticalError("second variation of volume needs a harmonic phase differential", harmonic)
    delta = laplace_beltrami(mesh, h).values
    return float(np.sum(mesh.weights * delta ** 2 * induced_volume(mesh)))


# ---------------------------------------------------------------------------
# horizontal lifts and geodesics
# ---------------------------------------------------------------------------

class HorizontalLift(NamedTuple):
    velocity: np.ndarray
    symplectic_residual: float
    calibration_residual: float


def _lift_residuals(mesh: LagMesh, v: np.ndarray, dh: np.ndarray) -> Tuple[float, float]:
    F = mesh.flat_frames
    W = mesh.model.omega_matrix(mesh.flat_points)
    symplectic = float(np.max(np.abs(np.einsum("md,mde,mie->mi", v, W, F) - dh)))
    re_omega = mesh.model.holo_volume.real_part()
    calibration = 0.0
    for i in range(mesh.n):
        others = [F[:, a, :] for a in range(mesh.n) if a != i]
        vectors = np.stack([v] + others, axis=1)
        values = mesh.orientation * re_omega.evaluate(mesh.flat_points, vectors)
        calibration = max(calibration, float(np.max(np.abs(values))))
    return symplectic, calibration


def horizontal_velocity(mesh: LagMesh, h: FieldLike, cos_floor: float = DEFAULTS["cos_floor"],
                        residuals: bool = True) -> HorizontalLift:
    """v = -J grad h - tan(theta) grad h with i_v omega = dh and i_v re Omega = 0."""
    J = mesh.model.require("complex_structure")
    values = _holomorphic_frame_values(mesh)
    _cos_theta(mesh, values, cos_floor)
    tan_theta = (np.imag(values) / np.real(values)).ravel()
    dh = mesh_gradient(mesh, _field_values(mesh, h)).components.reshape(-1, mesh.n)
    inverse = _inverse_metric(mesh).reshape(-1, mesh.n, mesh.n)
    grad = np.einsum("mi,mid->md", np.einsum("mij,mj->mi", inverse, dh), mesh.flat_frames)
    v = -grad @ J.T - tan_theta[:, None] * grad
    if mesh.domain == "box":
        v[mesh.collar_mask.ravel()] = 0.0
    symplectic, calibration = _lift_residuals(mesh, v, dh) if residuals else (float("nan"), float("nan"))
    return HorizontalLift(v.reshape(mesh.points.shape), symplectic, calibration)


@dataclass(frozen=True, eq=False)
class GeodesicRecord:
    """A shot geodesic: the path plus its frozen node-indexed generator."""

    path: IsotopyPath
    generator: ScalarField
    duration: float

    @property
    def times(self) -> np.ndarray:
        return self.path.times

    def prefix(self, j: int) -> IsotopyPath:
        return self.path.prefix(j)

    def mesh_at(self, j: int) -> LagMesh:
        return self.path.meshes[j]


def _check_mean_zero(mesh: LagMesh, values: np.ndarray):
    if mesh.domain != "torus":
        return
    w = mesh.weights * np.real(holomorphic_values(mesh))
    mean = float(np.sum(w * values) / np.sum(w))
    if abs(mean) > TOLERANCES["normalization"] * max(1.0, float(np.max(np.abs(values)))):
        raise PreconditionError(f"geodesic generator is not mean-zero against re Omega (mean {mean:.3e})")


@log_performance("slag.geodesic_shoot")
def geodesic_shoot(mesh0: LagMesh, h: FieldLike, T: float = 1.0, steps: int = DEFAULTS["flow_steps"],
                   cos_floor: float = DEFAULTS["cos_floor"]) -> GeodesicRecord:
    """RK4 along the horizontal lift with h held fixed at every node."""
    if steps < 1 or not T > 0:
        raise PreconditionError("geodesic_shoot needs steps >= 1 and T > 0")
    values = _field_values(mesh0, h)
    _cos_theta(mesh0, _holomorphic_frame_values(mesh0), cos_floor)
    _check_mean_zero(mesh0, values)
    times = np.linspace(0.0, T, steps + 1)
    dt = T / steps

    def field(points):
        return horizontal_velocity(mesh0.with_points(points), values, cos_floor, residuals=False).velocity

    points = np.asarray(mesh0.points)
    meshes = [mesh0]
    for k in range(steps):
        try:
            k1 = field(points)
            k2 = field(points + 0.5 * dt * k1)
            k3 = field(points + 0.5 * dt * k2)
            k4 = field(points + dt * k3)
            points = points + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            mesh = mesh0.with_points(points)
            _cos_theta(mesh, _holomorphic_frame_values(mesh), cos_floor)
        except (LeavesAlmostCalibratedError, DegenerateImmersionError) as exc:
            partial = IsotopyPath(times[:k + 1], tuple(meshes), label="geodesic (partial)")
            logger.warning("geodesic stopped at t=%.4f: %s", times[k], exc)
            raise PartialPathError(float(times[k]), partial, exc) from exc
        meshes.append(mesh)
    logger.debug("shot geodesic over %d steps to T=%g", steps, T)
    path = IsotopyPath(times, tuple(meshes), label="geodesic")
    return GeodesicRecord(path, ScalarField(values), float(T))


def _sample_index(record: GeodesicRecord, s: float) -> int:
    j = int(np.argmin(np.abs(record.times - s)))
    if abs(record.times[j] - s) > 1e-9 * max(1.0, record.duration):
        raise PreconditionError(f"s = {s} is not a sample of the geodesic")
    return j


def geodesic_cc_convexity(record: GeodesicRecord, s: float = 0.0,
                          cos_floor: float = DEFAULTS["cos_floor"]) -> float:
    """d^2/ds^2 C along the geodesic: int (|dk|^2 / cos theta) e^(rho/2) vol on Lambda_s."""
    mesh = record.mesh_at(_sample_index(record, s))
    cos_theta = _cos_theta(mesh, _holomorphic_frame_values(mesh), cos_floor)
    dk = mesh_gradient(mesh, record.generator).components
    density = _metric_pairing(mesh, dk, dk) / cos_theta * _rho_weight(mesh) * induced_volume(mesh)
    return float(np.sum(mesh.weights * density))


def horizontal_transport_residual(record: GeodesicRecord) -> float:
    """max over samples and nodes of |f_t* re Omega - f_0* re Omega|."""
    reference = np.real(holomorphic_values(record.mesh_at(0)))
    return max(float(np.max(np.abs(np.real(holomorphic_values(mesh)) - reference)))
               for mesh in record.path.meshes)


def geodesic_potential_residual(record: GeodesicRecord) -> float:
    """max over samples of |h_t recovered from the velocity form - transported generator|."""
    worst = 0.0
    for j in range(record.path.steps + 1):
        h = sample_potential(record.path, j)
        worst = max(worst, float(np.max(np.abs(h.values - record.generator.values))))
    return worst


# ---------------------------------------------------------------------------
# energy under proper exact perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Perturbation:
    """Move the mesh at time t by the flow of K for time delta * profile(t).

    Without a profile the bump sin(pi (t - t0) / (t1 - t0)) over the sampled
    interval [t0, t1] is used, so the endpoints stay fixed on any interval.
    """

    hamiltonian: HamiltonianFamily
    profile: Optional[Union[str, sp.Expr]] = None
    substeps: int = 4

    def __post_init__(self):
        if self.profile is not None:
            object.__setattr__(self, "profile", parse_expression(self.profile, (TIME,)))

    def profile_values(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.profile is None:
            t0, t1 = float(times.flat[0]), float(times.flat[-1])
            if not t1 > t0:
                raise PreconditionError("the default profile needs an increasing time interval")
            values = np.sin(np.pi * (times - t0) / (t1 - t0))
            values[[0, -1]] = 0.0
            return values
        func = sp.lambdify((TIME,), self.profile, modules="numpy")
        return np.broadcast_to(np.asarray(func(times), dtype=float), np.shape(times))

    def endpoint_residual(self, times: np.ndarray) -> float:
        values = self.profile_values(np.asarray([times[0], times[-1]]))
        return float(np.max(np.abs(values)))


def perturbed_path(path: IsotopyPath, perturbation: Perturbation, delta: float) -> IsotopyPath:
    sigma = perturbation.profile_values(path.times)
    meshes = []
    for mesh, amount in zip(path.meshes, sigma):
        if delta * amount == 0.0:
            meshes.append(mesh)
        else:
            meshes.append(flow_mesh(mesh, perturbation.hamiltonian, 0.0, delta * amount, perturbation.substeps))
    return IsotopyPath(path.times, tuple(meshes), None, path.breaks, label=f"{path.label} perturbed")


def energy_stationarity_residual(path: Union[GeodesicRecord, IsotopyPath], perturbation: Perturbation,
                                 delta: float = 1e-3, cos_floor: float = DEFAULTS["cos_floor"]) -> float:
    """|dE/ds| at s = 0 across the perturbed family, by central differences."""
    path = path.path if isinstance(path, GeodesicRecord) else path
    endpoints = perturbation.endpoint_residual(path.times)
    if endpoints > 1e-12:
        raise PreconditionError(f"perturbation does not vanish at the endpoints ({endpoints:.3e})")
    plus = energy(perturbed_path(path, perturbation, delta), cos_floor)
    minus = energy(perturbed_path(path, perturbation, -delta), cos_floor)
    residual = abs(plus - minus) / (2.0 * delta)
    logger.log_functional("energy_stationarity", residual, delta=delta, label=path.label)
    return residual
