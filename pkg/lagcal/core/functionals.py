"""
Global functionals of Lagrangian paths: the invariant C, its closed form in the
exact case, the Calabi homomorphism on products, flux, volume and energy.
"""

from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.integrate import simpson

from ..utils.config import DEFAULTS, TOLERANCES
from ..utils.errors import (
    LeavesAlmostCalibratedError,
    MeshError,
    MissingStructureError,
    NormalizationError,
    NotHomogeneousError,
    PreconditionError,
)
from ..utils.expressions import coordinate_symbols
from ..utils.logging_config import get_logger, log_performance
from .geom_core import (
    AmbientFunction,
    DifferentialForm,
    contract_field,
    lie_derivative,
    liouville_field,
    pullback_by_projection,
    standard_liouville_form,
    standard_symplectic_form,
    wedge,
    wedge_power,
)
from .isotopy import HamiltonianFamily, IsotopyPath, flow_path, path_velocity_form
from .lag_mesh import (
    LagMesh,
    ScalarField,
    holomorphic_values,
    induced_volume,
    integrate_top_form,
    product_graph_mesh,
    recover_potential,
)
from .models import AmbientModel, product_beta_form, product_model, top_coefficient

logger = get_logger("lagcal.functionals")


def _segment_series(path: IsotopyPath, sample: Callable[[int, str], object]) -> List[np.ndarray]:
    """Per smooth segment, ``sample(j, side)`` at each of its samples.

    A break sample is evaluated twice: from the left as the end of one
    segment and from the right as the start of the next.
    """
    out = []
    for a, b in path.segments():
        values = []
        for j in range(a, b + 1):
            side = "left" if (j == b and b != path.steps) else "right"
            values.append(sample(j, side))
        out.append(np.asarray(values, dtype=float))
    return out


def _segment_quadrature(path: IsotopyPath, series: Sequence[np.ndarray]) -> float:
    """Composite Simpson over each smooth segment of the path."""
    return sum(float(simpson(values, x=path.times[a:b + 1]))
               for values, (a, b) in zip(series, path.segments()))


def _default_beta(model: AmbientModel) -> DifferentialForm:
    if model.beta is not None:
        return model.beta
    if model.holo_volume is not None:
        return model.holo_volume.imag_part()
    raise MissingStructureError("beta", model.name)


def _check_closed_beta(mesh: LagMesh, beta: DifferentialForm, tol: float):
    if mesh.domain != "torus":
        return
    value = integrate_top_form(mesh, beta)
    if abs(value) > tol:
        raise NormalizationError(f"integral of beta over a closed mesh is {value:.3e}", float(abs(value)))


class IntegrandSeries(NamedTuple):
    times: np.ndarray
    values: np.ndarray
    residuals: np.ndarray


# ---------------------------------------------------------------------------
# the invariant C
# ---------------------------------------------------------------------------

def sample_potential(path: IsotopyPath, j: int, side: str = "right",
                     normalization: Optional[str] = None, tol: Optional[float] = None) -> ScalarField:
    """h_t at sample j, recovered from the velocity form."""
    alpha = path_velocity_form(path, j, side)
    return recover_potential(path.meshes[j], alpha, normalization or path.normalization, tol=tol)


def cc_integrand_series(
    path: IsotopyPath,
    beta: Optional[DifferentialForm] = None,
    normalization: Optional[str] = None,
    tol: Optional[float] = None,
) -> List[IntegrandSeries]:
    """Per smooth segment, the samples t -> int_{Lambda_t} h_t beta."""
    beta = beta if beta is not None else _default_beta(path.model)
    for mesh in path.meshes:
        _check_closed_beta(mesh, beta, TOLERANCES["closed_beta"])

    def sample(j, side):
        h = sample_potential(path, j, side, normalization, tol)
        return float(np.real(integrate_top_form(path.meshes[j], beta, weight=h))), h.residual

    series = []
    for rows, (a, b) in zip(_segment_series(path, sample), path.segments()):
        series.append(IntegrandSeries(path.times[a:b + 1].copy(), rows[:, 0], rows[:, 1]))
    return series


@log_performance("functionals.cc_invariant")
def cc_invariant(
    path: IsotopyPath,
    beta: Optional[DifferentialForm] = None,
    normalization: Optional[str] = None,
    tol: Optional[float] = None,
) -> float:
    """C(path) = int_0^1 int_{Lambda_t} h_t beta dt."""
    if path.steps == 0:
        return 0.0
    series = cc_integrand_series(path, beta, normalization, tol)
    value = sum(float(simpson(s.values, x=s.times)) for s in series)
    worst = max(float(np.max(s.residuals)) for s in series)
    logger.log_functional("cc_invariant", value, potential_residual=worst, steps=path.steps)
    return value


def cc_prefix_values(path: IsotopyPath, beta: Optional[DifferentialForm] = None,
                     normalization: Optional[str] = None) -> np.ndarray:
    """C of every prefix [t_0, t_j] of a single-segment path, from one integrand series."""
    if path.breaks:
        raise PreconditionError("prefix values need a single smooth segment")
    series = cc_integrand_series(path, beta, normalization)[0]
    out = np.zeros(len(series.times))
    for j in range(1, len(series.times)):
        out[j] = float(simpson(series.values[:j + 1], x=series.times[:j + 1]))
    return out


def cc_exact_closed_form(mesh0: LagMesh, mesh1: LagMesh, model: Optional[AmbientModel] = None) -> float:
    """(int_{Lambda_0} lambda ∧ gamma - int_{Lambda_1} lambda ∧ gamma) / (c + 1)."""
    model = model or mesh0.model
    lam = model.require("liouville_primitive")
    gamma = model.require("gamma_primitive")
    c = model.require("scaling_constant")
    if abs(c + 1.0) < 1e-14:
        raise PreconditionError("the closed form is undefined for c = -1")
    form = wedge(lam, gamma)
    value = (integrate_top_form(mesh0, form) - integrate_top_form(mesh1, form)) / (c + 1.0)
    logger.log_functional("cc_exact_closed_form", float(value), c=c)
    return float(value)


class LiouvilleData(NamedTuple):
    gamma: DifferentialForm
    c: float
    model: AmbientModel


def liouville_gamma(model: AmbientModel, beta: Optional[DifferentialForm] = None,
                    samples: int = 64, tol: Optional[float] = None) -> LiouvilleData:
    """Detect c with L_xi beta = c beta and return gamma = i_xi beta / c installed on the model."""
    tol = TOLERANCES["homogeneity"] if tol is None else tol
    beta = beta if beta is not None else model.require("beta")
    xi = liouville_field(model)
    lie = lie_derivative(xi, beta)
    points = model.sample_points(samples, seed=5)
    lie_values = lie.coefficient_values(points)
    beta_values = beta.coefficient_values(points)
    ratios, leftover = [], 0.0
    for index in set(lie_values) | set(beta_values):
        b = np.real(beta_values.get(index, np.zeros(samples)))
        value = np.real(lie_values.get(index, np.zeros(samples)))
        mask = np.abs(b) > 1e-8
        ratios.extend((value[mask] / b[mask]).tolist())
        if (~mask).any():
            leftover = max(leftover, float(np.max(np.abs(value[~mask]))))
    ratios = np.asarray(ratios)
    if ratios.size == 0:
        raise NotHomogeneousError(ratios)
    c = float(np.mean(ratios))
    if abs(c) < tol or float(np.max(np.abs(ratios - c))) > tol * max(1.0, abs(c)) or leftover > tol:
        raise NotHomogeneousError(ratios)
    exact_c = sp.nsimplify(round(c, 10), rational=True)
    c = float(exact_c)
    scaled = contract_field(xi, beta).scaled(1 / exact_c)
    gamma = DifferentialForm(model.dim, beta.degree - 1, scaled.coefficients, name="gamma")
    installed = model.with_primitives(gamma, c, beta=beta)
    logger.info("Liouville scaling constant for %s: c = %g", model.name, c)
    return LiouvilleData(gamma, c, installed)


def product_beta(m: int, tol: float = 1e-12) -> DifferentialForm:
    """The closed form on M x M, checked against omega ∧ beta = 0."""
    beta = product_beta_form(m)
    model = product_model(m)
    residual = wedge(model.omega, beta).max_abs(model.sample_points(100, seed=13))
    if residual > tol:
        raise PreconditionError(f"omega ∧ beta does not vanish ({residual:.3e})")
    return beta


# ---------------------------------------------------------------------------
# Calabi homomorphism
# ---------------------------------------------------------------------------

def _factor_box(H: HamiltonianFamily, m: int, bounds) -> Tuple[Tuple[float, float], ...]:
    if bounds is not None:
        return tuple(tuple(b) for b in bounds)
    if H.box is not None:
        return H.box
    return ((-1.0, 1.0),) * (2 * m)


@log_performance("functionals.classical_calabi")
def classical_calabi(H: HamiltonianFamily, steps: int = DEFAULTS["flow_steps"],
                     resolution: int = DEFAULTS["resolution"], bounds=None) -> float:
    """cal = int_0^1 int_M H_t omega_M^m dt by Simpson in time and space."""
    if H.dim % 2:
        raise PreconditionError("Hamiltonian must live on an even-dimensional M")
    m = H.dim // 2
    box = _factor_box(H, m, bounds)
    axes = [np.linspace(a, b, resolution) for a, b in box]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, H.dim)
    density = np.real(top_coefficient(wedge_power(standard_symplectic_form(m), m), grid))
    times = np.linspace(*H.interval, steps + 1)
    spatial = []
    for t in times:
        values = (H.values(grid, t) * density).reshape((resolution,) * H.dim)
        for axis in reversed(range(H.dim)):
            values = simpson(values, x=axes[axis], axis=axis)
        spatial.append(float(values))
    value = float(simpson(np.asarray(spatial), x=times))
    logger.log_functional("classical_calabi", value, resolution=resolution, steps=steps)
    return value


def lift_to_product(H: HamiltonianFamily, m: Optional[int] = None) -> HamiltonianFamily:
    """H∘p2 on M x M."""
    m = m or H.dim // 2
    source = coordinate_symbols(2 * m)
    target = coordinate_symbols(4 * m)[2 * m:]
    if H.is_symbolic:
        expr = H.expr.xreplace(dict(zip(source, target)))
        function = AmbientFunction(4 * m, expr=expr)
    else:
        inner = H.function.func
        function = AmbientFunction(4 * m, func=lambda pts, t: inner(np.atleast_2d(pts)[:, 2 * m:], t))
    return HamiltonianFamily(function, support="compact", interval=H.interval, name=f"{H.name} lifted")


def calabi_product_path(H: HamiltonianFamily, m: int = 1, resolution: int = DEFAULTS["resolution"],
                        steps: int = DEFAULTS["flow_steps"], bounds=None) -> IsotopyPath:
    """Graphs of phi_t in M x M, starting from the diagonal."""
    model = product_model(m)
    mesh0 = product_graph_mesh(model, resolution, bounds=_factor_box(H, m, bounds))
    return flow_path(mesh0, lift_to_product(H, m), steps, label="calabi product")


def banyaga_value(path: IsotopyPath) -> float:
    """-(1/(m+1)) int_M phi_1^* lambda_M ∧ lambda_M ∧ omega_M^(m-1) on the final graph."""
    model = path.model
    m = model.require("product_factor")
    mesh1 = path.meshes[-1]
    base = mesh1.parameter_grid
    if mesh1.domain != "box" or np.max(np.abs(mesh1.points[..., :2 * m] - base)) > 1e-9:
        raise MeshError("Banyaga's formula needs a graph over the first factor")
    lam = standard_liouville_form(m)
    omega = standard_symplectic_form(m)
    form = wedge(
        wedge(pullback_by_projection(lam, 2, m), pullback_by_projection(lam, 1, m)),
        pullback_by_projection(wedge_power(omega, m - 1), 1, m),
    )
    value = -float(integrate_top_form(mesh1, form)) / (m + 1)
    logger.log_functional("banyaga_value", value, m=m)
    return value


# ---------------------------------------------------------------------------
# flux
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridLoop:
    """The loop along torus axis ``axis`` through the node with the given other indices."""

    axis: int
    offset: Tuple[int, ...] = ()

    def index(self, mesh: LagMesh) -> Tuple:
        if mesh.domain != "torus":
            raise MeshError("loops are cycles of torus grids")
        if not 0 <= self.axis < mesh.n:
            raise MeshError(f"axis {self.axis} outside 0..{mesh.n - 1}")
        others = list(self.offset) + [0] * (mesh.n - 1 - len(self.offset))
        if len(others) != mesh.n - 1:
            raise MeshError("loop offset has too many entries")
        index: List = []
        for axis in range(mesh.n):
            index.append(slice(None) if axis == self.axis else int(others.pop(0)) % mesh.shape[axis])
        return tuple(index)


def _loop_pairing(mesh: LagMesh, velocity: np.ndarray, loop: GridLoop) -> float:
    """oint_loop omega(d_u f, v) du with the periodic trapezoid rule."""
    index = loop.index(mesh)
    points = mesh.points[index]
    tangent = mesh.frames[index][:, loop.axis, :]
    W = mesh.model.omega_matrix(points)
    return float(np.mean(np.einsum("md,mde,me->m", tangent, W, velocity[index])))


def _bilinear_flux(path: IsotopyPath, loop: GridLoop) -> float:
    index = loop.index(path.mesh0)
    traces = path.positions[(slice(None),) + index]
    W = path.model.omega_matrix(np.zeros((1, path.model.dim)))[0]
    closing = path.mesh0.winding[loop.axis]
    total = 0.0
    for j in range(path.steps):
        lower, upper = traces[j], traces[j + 1]
        lower_next = np.roll(lower, -1, axis=0)
        upper_next = np.roll(upper, -1, axis=0)
        lower_next[-1] += closing
        upper_next[-1] += closing
        diag_a = upper_next - lower
        diag_b = upper - lower_next
        total += 0.5 * float(np.sum(np.einsum("md,de,me->m", diag_a, W, diag_b)))
    return total


def flux_pairing(path: IsotopyPath, loop: GridLoop, scheme: str = "spectral") -> float:
    """Integral of omega over the cylinder (u, t) -> f_t(loop(u)), oriented by du ∧ dt.

    Equals -int_0^1 oint_loop alpha_t dt, so lifting {y = 0} to {y = a t} gives +a
    against the loop traversed in +x.
    """
    if path.mesh0.domain != "torus":
        raise MeshError("flux needs a closed mesh with loops")
    if scheme == "bilinear":
        if not path.model.omega.is_symbolic or any(
            not c.is_number for c in path.model.omega.coefficients.values()
        ):
            raise PreconditionError("bilinear flux needs a constant symplectic form")
        value = _bilinear_flux(path, loop)
    else:
        series = _segment_series(
            path, lambda j, side: _loop_pairing(path.meshes[j], path.velocity(j, side), loop))
        value = _segment_quadrature(path, series) if path.steps else 0.0
    logger.log_functional("flux", value, axis=loop.axis, scheme=scheme)
    return value


class FluxVariation(NamedTuple):
    finite_difference: float
    loop_integral: float


def flux_variation(family: Callable[[float], IsotopyPath], loop: GridLoop, s: float = 0.0,
                   eps: float = 1e-3) -> FluxVariation:
    """d/ds flux by central differences and oint omega(d_u f_1, d_s f_1) at s."""
    plus, minus, centre = family(s + eps), family(s - eps), family(s)
    derivative = (flux_pairing(plus, loop) - flux_pairing(minus, loop)) / (2.0 * eps)
    w = (plus.meshes[-1].points - minus.meshes[-1].points) / (2.0 * eps)
    loop_integral = _loop_pairing(centre.meshes[-1], w, loop)
    return FluxVariation(derivative, loop_integral)


# ---------------------------------------------------------------------------
# volume and energy
# ---------------------------------------------------------------------------

def volume(mesh: LagMesh) -> float:
    """Riemannian volume of the mesh under the induced metric."""
    return float(np.sum(mesh.weights * induced_volume(mesh)))


def _calibrated_density(mesh: LagMesh, cos_floor: float) -> np.ndarray:
    omega = holomorphic_values(mesh)
    magnitude = np.abs(omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_theta = np.where(magnitude > 0, np.real(omega) / magnitude, -1.0)
    if np.min(cos_theta) < cos_floor:
        worst = np.unravel_index(int(np.argmin(cos_theta)), mesh.shape)
        raise LeavesAlmostCalibratedError(tuple(int(i) for i in worst), float(np.min(cos_theta)), cos_floor)
    return np.real(omega)


def energy_series(path: IsotopyPath, cos_floor: float = DEFAULTS["cos_floor"],
                  normalization: Optional[str] = None) -> List[np.ndarray]:
    """Per smooth segment, the samples t -> int h_t^2 re Omega."""
    def sample(j, side):
        mesh = path.meshes[j]
        h = sample_potential(path, j, side, normalization)
        return float(np.sum(mesh.weights * h.values ** 2 * _calibrated_density(mesh, cos_floor)))

    return _segment_series(path, sample)


def energy(path: IsotopyPath, cos_floor: float = DEFAULTS["cos_floor"],
           normalization: Optional[str] = None) -> float:
    """E = int_0^1 int_{Lambda_t} h_t^2 re Omega dt."""
    if path.steps == 0:
        return 0.0
    value = _segment_quadrature(path, energy_series(path, cos_floor, normalization))
    logger.log_functional("energy", value, steps=path.steps)
    return value
