"""
Discretized Lagrangian submanifolds.

A mesh is a parametrization f: grid -> X on either a periodic n-torus grid
(parameters in [0, 1)^n, immersion lifted to the universal cover with a
lattice winding per axis) or a compact box with a frozen boundary collar.
Torus grids differentiate spectrally, box grids with fourth-order
differences; quadrature is the periodic trapezoid rule or tensor Simpson.
"""

import json
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache, reduce
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sparse
import sympy as sp
from scipy.integrate import simpson
from scipy.sparse.linalg import factorized

from ..utils.config import DEFAULTS, TOLERANCES
from ..utils.errors import (
    DegenerateImmersionError,
    DegreeError,
    MeshError,
    NormalizationError,
    NotExactError,
    PreconditionError,
)
from ..utils.expressions import coordinate_names, coordinate_symbols, parse_expression
from ..utils.logging_config import get_logger
from .geom_core import AmbientFunction, DifferentialForm, TangentVectorAtPoint
from .models import AmbientModel, load_model

logger = get_logger("lagcal.lag_mesh")

DOMAINS = ("torus", "box")
SCHEMES = ("spectral", "fd4", "fd2")
NORMALIZATIONS = ("compact-support", "mean-zero")

Resolution = Union[int, Sequence[int]]


# ---------------------------------------------------------------------------
# one-dimensional operators
# ---------------------------------------------------------------------------

def _wavenumbers(N: int) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=1.0 / N)
    if N % 2 == 0:
        k[N // 2] = 0.0
    return k


def _torus_symbol(N: int, scheme: str) -> np.ndarray:
    """Fourier multiplier of the derivative on a unit-period grid."""
    h = 1.0 / N
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=h)
    if scheme == "spectral":
        return 1j * _wavenumbers(N)
    if scheme == "fd2":
        return 1j * np.sin(k * h) / h
    return 1j * (8.0 * np.sin(k * h) - np.sin(2.0 * k * h)) / (6.0 * h)


@lru_cache(maxsize=64)
def _box_operator(N: int, h: float, scheme: str) -> sparse.csr_matrix:
    """Sparse first-derivative matrix on a uniform non-periodic grid."""
    D = sparse.lil_matrix((N, N))
    if scheme == "fd2":
        for i in range(1, N - 1):
            D[i, i - 1] = -0.5 / h
            D[i, i + 1] = 0.5 / h
        D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
        D[N - 1, N - 3:N] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
        return D.tocsr()
    for i in range(2, N - 2):
        D[i, i - 2:i + 3] = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    D[0, 0:5] = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    D[1, 0:5] = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    D[N - 2, N - 5:N] = np.array([-1.0, 6.0, -18.0, 10.0, 3.0]) / (12.0 * h)
    D[N - 1, N - 5:N] = np.array([3.0, -16.0, 36.0, -48.0, 25.0]) / (12.0 * h)
    return D.tocsr()


@lru_cache(maxsize=64)
def _simpson_weights(N: int, a: float, b: float) -> np.ndarray:
    x = np.linspace(a, b, N)
    return simpson(np.eye(N), x=x, axis=-1)


def _apply_axis(op, values: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(values, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = np.asarray(op @ flat)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def _periodic_fd(values: np.ndarray, axis: int, h: float, scheme: str) -> np.ndarray:
    plus1 = np.roll(values, -1, axis=axis)
    minus1 = np.roll(values, 1, axis=axis)
    if scheme == "fd2":
        return (plus1 - minus1) / (2.0 * h)
    plus2 = np.roll(values, -2, axis=axis)
    minus2 = np.roll(values, 2, axis=axis)
    return (-plus2 + 8.0 * plus1 - 8.0 * minus1 + minus2) / (12.0 * h)


def _spectral_derivative(values: np.ndarray, axis: int) -> np.ndarray:
    N = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = N
    spectrum = np.fft.fft(values, axis=axis) * (1j * _wavenumbers(N)).reshape(shape)
    out = np.fft.ifft(spectrum, axis=axis)
    return out.real if np.isrealobj(values) else out


def _box_collar_mask(shape: Tuple[int, ...], bounds, fraction: float) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for axis, (N, (a, b)) in enumerate(zip(shape, bounds)):
        u = np.linspace(a, b, N)
        width = fraction * (b - a)
        eps = 1e-12 * (b - a)
        line = (u <= a + width + eps) | (u >= b - width - eps)
        view = [1] * len(shape)
        view[axis] = N
        mask |= line.reshape(view)
    return mask


def _resolution(resolution: Resolution, n: int) -> Tuple[int, ...]:
    if isinstance(resolution, (int, np.integer)):
        return (int(resolution),) * n
    shape = tuple(int(r) for r in resolution)
    if len(shape) != n:
        raise MeshError(f"resolution {shape} does not match parameter dimension {n}")
    return shape


def _grid_axes(domain: str, shape: Tuple[int, ...], bounds) -> list:
    if domain == "torus":
        return [np.arange(N) / N for N in shape]
    return [np.linspace(a, b, N) for N, (a, b) in zip(shape, bounds)]


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LagMesh:
    """Parametrized discretized Lagrangian; immutable after construction."""

    model: AmbientModel
    domain: str
    points: np.ndarray
    bounds: Tuple[Tuple[float, float], ...]
    winding: Optional[np.ndarray] = None
    orientation: int = 1
    reference: Optional[np.ndarray] = None
    collar_fraction: float = DEFAULTS["collar_fraction"]
    scheme: Optional[str] = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise MeshError(f"unknown domain '{self.domain}'")
        pts = np.array(self.points, dtype=float)
        if pts.ndim < 2 or pts.shape[-1] != self.model.dim:
            raise MeshError(f"points must have shape (*grid, {self.model.dim}), got {pts.shape}")
        n = pts.ndim - 1
        if n != self.model.n:
            raise MeshError(f"Lagrangians of {self.model.name} have dimension {self.model.n}, grid has {n}")
        if not np.all(np.isfinite(pts)):
            raise MeshError("immersion has non-finite values")
        if self.orientation not in (1, -1):
            raise MeshError("orientation must be +1 or -1")
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if len(bounds) != n or any(b <= a for a, b in bounds):
            raise MeshError(f"bounds {self.bounds} invalid for a {n}-dimensional grid")

        scheme = self.scheme or ("spectral" if self.domain == "torus" else "fd4")
        if scheme not in SCHEMES or (scheme == "spectral" and self.domain == "box"):
            raise MeshError(f"scheme '{scheme}' not available on {self.domain} grids")
        minimum = 5 if self.domain == "box" else 4
        if min(pts.shape[:-1]) < minimum:
            raise MeshError(f"{self.domain} grids need at least {minimum} nodes per axis")

        winding = None
        reference = None
        if self.domain == "torus":
            if bounds != ((0.0, 1.0),) * n:
                raise MeshError("torus grids use the unit parameter cube")
            winding = np.zeros((n, self.model.dim)) if self.winding is None else np.array(self.winding, dtype=float)
            if winding.shape != (n, self.model.dim):
                raise MeshError(f"winding must have shape {(n, self.model.dim)}")
            self._check_lattice(winding)
            winding.setflags(write=False)
        else:
            if self.winding is not None and np.any(np.asarray(self.winding) != 0):
                raise MeshError("box grids carry no winding")
            if self.reference is not None:
                reference = np.array(self.reference, dtype=float)
                if reference.shape != pts.shape:
                    raise MeshError("reference immersion has the wrong shape")
                mask = _box_collar_mask(pts.shape[:-1], bounds, self.collar_fraction)
                drift = float(np.max(np.abs(pts[mask] - reference[mask]))) if mask.any() else 0.0
                if drift > TOLERANCES["collar_drift"]:
                    raise MeshError(f"immersion leaves the frozen collar (drift {drift:.3e})")
                pts[mask] = reference[mask]
                reference.setflags(write=False)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "winding", winding)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "scheme", scheme)

    def _check_lattice(self, winding: np.ndarray):
        if self.model.periods is None:
            if np.any(np.abs(winding) > 1e-12):
                raise MeshError(f"{self.model.name} has no lattice; closed meshes must have zero winding")
            return
        ratios = winding / np.asarray(self.model.periods)
        if np.any(np.abs(ratios - np.round(ratios)) > 1e-9):
            raise MeshError("torus winding is not a lattice vector")

    # -- basic geometry -------------------------------------------------

    @property
    def n(self) -> int:
        return self.points.ndim - 1

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.points.shape[:-1]

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(-1, self.dim)

    @property
    def spacing(self) -> Tuple[float, ...]:
        if self.domain == "torus":
            return tuple(1.0 / N for N in self.shape)
        return tuple((b - a) / (N - 1) for N, (a, b) in zip(self.shape, self.bounds))

    @cached_property
    def axes(self) -> list:
        return _grid_axes(self.domain, self.shape, self.bounds)

    @cached_property
    def parameter_grid(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(grids, axis=-1)

    @cached_property
    def collar_mask(self) -> np.ndarray:
        if self.domain == "torus":
            return np.zeros(self.shape, dtype=bool)
        return _box_collar_mask(self.shape, self.bounds, self.collar_fraction)

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights of the parameter domain, one per node."""
        if self.domain == "torus":
            return np.full(self.shape, float(np.prod(self.spacing)))
        factors = [_simpson_weights(N, a, b) for N, (a, b) in zip(self.shape, self.bounds)]
        return reduce(np.multiply.outer, factors)

    def with_points(self, points: np.ndarray) -> "LagMesh":
        return replace(self, points=points)

    # -- differentiation --------------------------------------------------

    def differentiate(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Parameter derivative along a grid axis of node values (any trailing shape)."""
        values = np.asarray(values)
        if values.shape[:self.n] != self.shape:
            raise MeshError(f"values of shape {values.shape} do not live on a {self.shape} grid")
        if self.domain == "torus":
            if self.scheme == "spectral":
                return _spectral_derivative(values, axis)
            return _periodic_fd(values, axis, self.spacing[axis], self.scheme)
        op = _box_operator(self.shape[axis], self.spacing[axis], self.scheme)
        return _apply_axis(op, values, axis)

    @cached_property
    def periodic_part(self) -> np.ndarray:
        if self.domain != "torus":
            return np.asarray(self.points)
        return self.points - np.einsum("...a,ad->...d", self.parameter_grid, self.winding)

    @cached_property
    def frames(self) -> np.ndarray:
        """Tangent frames, shape (*grid, n, dim); rank checked."""
        columns = []
        for axis in range(self.n):
            derivative = self.differentiate(self.periodic_part, axis)
            if self.domain == "torus":
                derivative = derivative + self.winding[axis]
            columns.append(derivative)
        frames = np.stack(columns, axis=-2)
        gram = np.einsum("...id,...jd->...ij", frames, frames)
        lengths = np.prod(np.einsum("...ii->...i", gram), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            quality = np.where(lengths > 0, np.linalg.det(gram) / np.where(lengths > 0, lengths, 1.0), 0.0)
        if np.min(quality) < 1e-12:
            worst = np.unravel_index(int(np.argmin(quality)), self.shape)
            raise DegenerateImmersionError("tangent frame is rank deficient", tuple(int(i) for i in worst))
        frames.setflags(write=False)
        return frames

    @property
    def flat_frames(self) -> np.ndarray:
        return self.frames.reshape(-1, self.n, self.dim)


def default_normalization(mesh: LagMesh) -> str:
    return "compact-support" if mesh.domain == "box" else "mean-zero"


# ---------------------------------------------------------------------------
# fields on meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    """One real value per mesh node."""

    values: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise PreconditionError("scalar field has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class MeshOneForm:
    """Per node, the n grid components of a 1-form on the mesh."""

    mesh: LagMesh
    components: np.ndarray
    residual: Optional[float] = None

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        if comps.shape != self.mesh.shape + (self.mesh.n,):
            raise MeshError(f"one-form components have shape {comps.shape}")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    def closedness_residual(self) -> float:
        """max |D_i a_j - D_j a_i| over nodes and axis pairs."""
        worst = 0.0
        for i in range(self.mesh.n):
            for j in range(i + 1, self.mesh.n):
                mixed = (self.mesh.differentiate(self.components[..., j], i)
                         - self.mesh.differentiate(self.components[..., i], j))
                worst = max(worst, float(np.max(np.abs(mixed))))
        return worst

    def cycle_integrals(self) -> np.ndarray:
        """Per torus axis, the loop integral of largest magnitude among parallel loops."""
        if self.mesh.domain != "torus":
            return np.zeros(0)
        out = np.zeros(self.mesh.n)
        for axis in range(self.mesh.n):
            loops = np.mean(self.components[..., axis], axis=axis)
            flat = np.ravel(loops)
            out[axis] = flat[int(np.argmax(np.abs(flat)))]
        return out


def restrict_function(mesh: LagMesh, H, t: float = 0.0) -> ScalarField:
    """H restricted to the mesh nodes."""
    func = AmbientFunction.coerce(H, mesh.dim)
    return ScalarField(func.values(mesh.flat_points, t).reshape(mesh.shape))


def mesh_gradient(mesh: LagMesh, field: Union[ScalarField, np.ndarray]) -> MeshOneForm:
    values = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=float)
    comps = np.stack([mesh.differentiate(values, axis) for axis in range(mesh.n)], axis=-1)
    return MeshOneForm(mesh, comps)


# ---------------------------------------------------------------------------
# frames, defects, pullbacks, quadrature
# ---------------------------------------------------------------------------

def tangent_frame(mesh: LagMesh, node: Union[int, Sequence[int]]) -> Tuple[TangentVectorAtPoint, ...]:
    if isinstance(node, (int, np.integer)):
        node = np.unravel_index(int(node), mesh.shape)
    node = tuple(int(i) for i in node)
    if len(node) != mesh.n or any(i < 0 or i >= N for i, N in zip(node, mesh.shape)):
        raise MeshError(f"node {node} is not on the grid {mesh.shape}")
    base = mesh.points[node]
    return tuple(TangentVectorAtPoint(base, vector) for vector in mesh.frames[node])


def lagrangian_defect(mesh: LagMesh) -> float:
    """max |omega(d_i f, d_j f)| over nodes and i < j."""
    if mesh.n < 2:
        return 0.0
    W = mesh.model.omega_matrix(mesh.flat_points)
    F = mesh.flat_frames
    pairing = np.einsum("mid,mde,mje->mij", F, W, F)
    upper = np.triu_indices(mesh.n, k=1)
    return float(np.max(np.abs(pairing[:, upper[0], upper[1]])))


def pullback_values(mesh: LagMesh, form: DifferentialForm) -> np.ndarray:
    """a(d_1 f, ..., d_n f) at every node (without orientation)."""
    if form.degree != mesh.n:
        raise DegreeError(f"cannot pull back a {form.degree}-form to an {mesh.n}-dimensional mesh",
                          (form.degree, mesh.n))
    return form.evaluate(mesh.flat_points, mesh.flat_frames).reshape(mesh.shape)


def _real_if_negligible(value: complex, scale: float) -> Union[float, complex]:
    if abs(np.imag(value)) <= 1e-14 * max(scale, 1.0):
        return float(np.real(value))
    return complex(value)


def integrate_top_form(mesh: LagMesh, a: DifferentialForm, weight: Optional[np.ndarray] = None):
    """Oriented quadrature of a top-degree form, optionally times a node weight."""
    values = pullback_values(mesh, a)
    if weight is not None:
        weight = weight.values if isinstance(weight, ScalarField) else np.asarray(weight)
        values = values * weight
    total = mesh.orientation * np.sum(mesh.weights * values)
    return _real_if_negligible(total, float(np.sum(mesh.weights * np.abs(values))))


def induced_metric(mesh: LagMesh) -> np.ndarray:
    """Gram matrices of the frame under g, shape (*grid, n, n)."""
    G = mesh.model.metric_matrix(mesh.flat_points)
    F = mesh.flat_frames
    gram = np.einsum("mid,mde,mje->mij", F, G, F)
    gram = 0.5 * (gram + np.transpose(gram, (0, 2, 1)))
    return gram.reshape(mesh.shape + (mesh.n, mesh.n))


def induced_volume(mesh: LagMesh) -> np.ndarray:
    """sqrt det of the induced Gram matrix, per node."""
    return np.sqrt(np.clip(np.linalg.det(induced_metric(mesh)), 0.0, None))


def holomorphic_values(mesh: LagMesh) -> np.ndarray:
    """Omega on the oriented frame, per node."""
    omega = mesh.model.require("holo_volume")
    return mesh.orientation * pullback_values(mesh, omega)


def mean_zero_weight(mesh: LagMesh) -> np.ndarray:
    """Density for mean-zero normalization: re Omega, else induced volume, else 1."""
    if mesh.model.holo_volume is not None:
        return np.real(holomorphic_values(mesh))
    if mesh.model.complex_structure is not None:
        return induced_volume(mesh)
    return np.ones(mesh.shape)


# ---------------------------------------------------------------------------
# potential recovery
# ---------------------------------------------------------------------------

def _kron_axis(shape: Tuple[int, ...], axis: int, op) -> sparse.csr_matrix:
    factors = [sparse.identity(N, format="csr") for N in shape]
    factors[axis] = op
    return reduce(lambda a, b: sparse.kron(a, b, format="csr"), factors)


@lru_cache(maxsize=16)
def _box_solver(shape: Tuple[int, ...], bounds, scheme: str, fraction: float, fixed: str):
    ops = []
    for axis, (N, (a, b)) in enumerate(zip(shape, bounds)):
        ops.append(_kron_axis(shape, axis, _box_operator(N, (b - a) / (N - 1), scheme)))
    G = sparse.vstack(ops, format="csc")
    if fixed == "collar":
        free = ~_box_collar_mask(shape, bounds, fraction).ravel()
    else:
        free = np.ones(int(np.prod(shape)), dtype=bool)
        free[0] = False
    G_free = G[:, np.flatnonzero(free)]
    solve = factorized((G_free.T @ G_free).tocsc())
    logger.debug("factorized box normal equations for grid %s (%s)", shape, fixed)
    return G_free.T.tocsr(), solve, free


def _solve_box(mesh: LagMesh, comps: np.ndarray, fixed: str) -> np.ndarray:
    Gt, solve, free = _box_solver(mesh.shape, mesh.bounds, mesh.scheme, mesh.collar_fraction, fixed)
    rhs = np.concatenate([comps[..., axis].ravel() for axis in range(mesh.n)])
    values = np.zeros(mesh.node_count)
    values[free] = solve(Gt @ rhs)
    return values.reshape(mesh.shape)


def _solve_torus(mesh: LagMesh, comps: np.ndarray) -> np.ndarray:
    axes = tuple(range(mesh.n))
    numerator = np.zeros(mesh.shape, dtype=complex)
    denominator = np.zeros(mesh.shape)
    for axis, N in enumerate(mesh.shape):
        view = [1] * mesh.n
        view[axis] = N
        symbol = _torus_symbol(N, mesh.scheme).reshape(view)
        numerator = numerator + np.conj(symbol) * np.fft.fftn(comps[..., axis], axes=axes)
        denominator = denominator + np.abs(symbol) ** 2
    safe = denominator > 1e-14
    spectrum = np.where(safe, numerator / np.where(safe, denominator, 1.0), 0.0)
    return np.real(np.fft.ifftn(spectrum, axes=axes))


def recover_potential(
    mesh: LagMesh,
    alpha: MeshOneForm,
    normalization: Optional[str] = None,
    weight: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> ScalarField:
    """Least-squares h with dh = alpha, normalized by collar or weighted mean."""
    normalization = normalization or default_normalization(mesh)
    if normalization not in NORMALIZATIONS:
        raise PreconditionError(f"unknown normalization '{normalization}'")
    tol = TOLERANCES["exactness"] if tol is None else tol
    comps = np.asarray(alpha.components)
    scale = max(1.0, float(np.max(np.abs(comps)))) if comps.size else 1.0

    if mesh.domain == "torus":
        cycles = alpha.cycle_integrals()
        if cycles.size and np.max(np.abs(cycles)) > tol * scale:
            raise NotExactError(cycles, tol)
    closedness = alpha.closedness_residual()
    if closedness > tol * scale:
        logger.warning("velocity form closedness residual %.3e above %.1e", closedness, tol * scale)

    if normalization == "compact-support":
        if mesh.domain != "box":
            raise MeshError("compact-support normalization needs a box mesh with a collar")
        values = _solve_box(mesh, comps, "collar")
    else:
        values = _solve_torus(mesh, comps) if mesh.domain == "torus" else _solve_box(mesh, comps, "anchor")
        density = mean_zero_weight(mesh) if weight is None else np.asarray(weight, dtype=float)
        w = mesh.weights * density
        total = float(np.sum(w))
        if abs(total) < 1e-14:
            raise NormalizationError("mean-zero weight integrates to zero", total)
        values = values - float(np.sum(values * w)) / total

    gradient = mesh_gradient(mesh, values).components
    norm = float(np.linalg.norm(comps))
    residual = float(np.linalg.norm(gradient - comps)) / norm if norm > 0 else float(np.linalg.norm(gradient))
    if residual > 1e-4:
        logger.warning("potential recovery residual %.3e", residual)
    return ScalarField(values, residual)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _base_symbols(model: AmbientModel) -> Tuple[sp.Symbol, ...]:
    return coordinate_symbols(model.dim)[0::2]


def _height_function(height, symbols: Tuple[sp.Symbol, ...]) -> Callable[[np.ndarray], np.ndarray]:
    if callable(height) and not isinstance(height, sp.Basic):
        return height
    expr = parse_expression(height, symbols)
    func = sp.lambdify(symbols, expr, modules="numpy")

    def evaluate(base: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            values = func(*np.moveaxis(base, -1, 0))
        return np.broadcast_to(np.asarray(values, dtype=float), base.shape[:-1])
    return evaluate


def flat_torus_mesh(model: AmbientModel, resolution: Resolution = DEFAULTS["resolution"],
                    offset: Optional[Sequence[float]] = None, orientation: int = 1) -> LagMesh:
    """The flat sub-torus {y = const} of a torus model."""
    if not model.is_torus:
        raise MeshError(f"{model.name} has no flat closed sub-torus")
    n = model.n
    shape = _resolution(resolution, n)
    grid = np.stack(np.meshgrid(*_grid_axes("torus", shape, None), indexing="ij"), axis=-1)
    periods = np.asarray(model.periods)
    winding = np.zeros((n, model.dim))
    points = np.zeros(shape + (model.dim,))
    for j in range(n):
        points[..., 2 * j] = grid[..., j] * periods[2 * j]
        winding[j, 2 * j] = periods[2 * j]
    if offset is not None:
        points = points + np.asarray(offset, dtype=float)
    return LagMesh(model, "torus", points, ((0.0, 1.0),) * n, winding, orientation)


def tilted_circle_mesh(model: AmbientModel, resolution: int = DEFAULTS["resolution"], slope: int = 1) -> LagMesh:
    """The closed geodesic of class (1, slope) in T^2."""
    if not model.is_torus or model.n != 1:
        raise MeshError("tilted circles live in a 2-torus model")
    if int(slope) != slope:
        raise MeshError("slope must be an integer to close up")
    u = np.arange(resolution) / resolution
    px, py = model.periods
    points = np.stack([u * px, slope * u * py], axis=-1)
    return LagMesh(model, "torus", points, ((0.0, 1.0),), np.array([[px, slope * py]]))


def graph_mesh(
    model: AmbientModel,
    resolution: Resolution = DEFAULTS["resolution"],
    heights=0,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    domain: Optional[str] = None,
    collar_fraction: float = DEFAULTS["collar_fraction"],
    scheme: Optional[str] = None,
) -> LagMesh:
    """Graph {y_j = u_j(x)} over the x-coordinates; heights per axis as strings, exprs or callables."""
    n = model.n
    domain = domain or ("torus" if model.is_torus else "box")
    if not isinstance(heights, (list, tuple)):
        heights = [heights] * n if n == 1 else [heights] + [0] * (n - 1)
    if len(heights) != n:
        raise MeshError(f"need {n} heights, got {len(heights)}")
    symbols = _base_symbols(model)
    funcs = [_height_function(h, symbols) for h in heights]
    shape = _resolution(resolution, n)

    if domain == "torus":
        if not model.is_torus:
            raise MeshError(f"{model.name} has no periodic graphs")
        box = ((0.0, 1.0),) * n
        grid = np.stack(np.meshgrid(*_grid_axes("torus", shape, box), indexing="ij"), axis=-1)
        base = grid * np.asarray(model.periods[0::2])
        winding = np.zeros((n, model.dim))
        for j in range(n):
            winding[j, 2 * j] = model.periods[2 * j]
    else:
        box = tuple(bounds) if bounds is not None else ((-1.0, 1.0),) * n
        base = np.stack(np.meshgrid(*_grid_axes("box", shape, box), indexing="ij"), axis=-1)
        winding = None

    points = np.zeros(shape + (model.dim,))
    reference = np.zeros(shape + (model.dim,))
    for j in range(n):
        points[..., 2 * j] = base[..., j]
        reference[..., 2 * j] = base[..., j]
        points[..., 2 * j + 1] = funcs[j](base)
    if domain == "torus":
        return LagMesh(model, "torus", points, box, winding, scheme=scheme)
    return LagMesh(model, "box", points, box, reference=reference,
                   collar_fraction=collar_fraction, scheme=scheme)


def exact_graph_mesh(model: AmbientModel, resolution: Resolution = DEFAULTS["resolution"], potential=0,
                     **kwargs) -> LagMesh:
    """Graph of dF, Lagrangian by construction."""
    symbols = _base_symbols(model)
    F = parse_expression(potential, symbols)
    return graph_mesh(model, resolution, [sp.diff(F, s) for s in symbols], **kwargs)


def product_graph_mesh(
    model: AmbientModel,
    resolution: Resolution = DEFAULTS["resolution"],
    phi: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    collar_fraction: float = DEFAULTS["collar_fraction"],
) -> LagMesh:
    """Graph {(p, phi(p))} in M x M on a box of M; phi = None gives the diagonal."""
    m = model.require("product_factor")
    n = 2 * m
    box = tuple(bounds) if bounds is not None else ((-1.0, 1.0),) * n
    shape = _resolution(resolution, n)
    grid = np.stack(np.meshgrid(*_grid_axes("box", shape, box), indexing="ij"), axis=-1)
    image = grid if phi is None else np.asarray(phi(grid), dtype=float)
    points = np.concatenate([grid, image], axis=-1)
    reference = np.concatenate([grid, grid], axis=-1)
    return LagMesh(model, "box", points, box, reference=reference, collar_fraction=collar_fraction)


def plane_mesh(model: AmbientModel, resolution: Resolution = DEFAULTS["resolution"], angle: float = 0.0,
               bounds: Optional[Sequence[Tuple[float, float]]] = None) -> LagMesh:
    """The plane e^{i angle} R^n in C^n on a box."""
    n = model.n
    box = tuple(bounds) if bounds is not None else ((-1.0, 1.0),) * n
    shape = _resolution(resolution, n)
    grid = np.stack(np.meshgrid(*_grid_axes("box", shape, box), indexing="ij"), axis=-1)
    points = np.zeros(shape + (model.dim,))
    for j in range(n):
        points[..., 2 * j] = np.cos(angle) * grid[..., j]
        points[..., 2 * j + 1] = np.sin(angle) * grid[..., j]
    return LagMesh(model, "box", points, box, reference=points)


def mesh_from_immersion(
    model: AmbientModel,
    domain: str,
    resolution: Resolution,
    immersion: Callable[[np.ndarray], np.ndarray],
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
    winding: Optional[np.ndarray] = None,
    orientation: int = 1,
    reference: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    scheme: Optional[str] = None,
) -> LagMesh:
    """General constructor: immersion maps the (*grid, n) parameter array to points."""
    n = model.n
    shape = _resolution(resolution, n)
    box = ((0.0, 1.0),) * n if domain == "torus" else (tuple(bounds) if bounds else ((-1.0, 1.0),) * n)
    grid = np.stack(np.meshgrid(*_grid_axes(domain, shape, box), indexing="ij"), axis=-1)
    points = np.asarray(immersion(grid), dtype=float)
    ref = None if reference is None else np.asarray(reference(grid), dtype=float)
    return LagMesh(model, domain, points, box, winding, orientation, ref, scheme=scheme)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def mesh_to_text(mesh: LagMesh) -> str:
    data = {
        "format": "lagcal-mesh",
        "version": 1,
        "model": mesh.model.name,
        "domain": mesh.domain,
        "shape": list(mesh.shape),
        "bounds": [list(b) for b in mesh.bounds],
        "orientation": mesh.orientation,
        "collar_fraction": mesh.collar_fraction,
        "scheme": mesh.scheme,
        "winding": None if mesh.winding is None else mesh.winding.tolist(),
        "points": mesh.points.ravel().tolist(),
        "reference": None if mesh.reference is None else mesh.reference.ravel().tolist(),
    }
    return json.dumps(data, sort_keys=True)


def mesh_from_text(text: str, model: Optional[AmbientModel] = None) -> LagMesh:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshError(f"mesh text is not valid JSON: {exc}") from None
    if data.get("format") != "lagcal-mesh":
        raise MeshError("not a lagcal mesh description")
    model = model or load_model(data["model"])
    shape = tuple(data["shape"]) + (model.dim,)
    points = np.asarray(data["points"], dtype=float).reshape(shape)
    reference = None if data.get("reference") is None else np.asarray(data["reference"], dtype=float).reshape(shape)
    winding = None if data.get("winding") is None else np.asarray(data["winding"], dtype=float)
    return LagMesh(
        model, data["domain"], points, tuple(tuple(b) for b in data["bounds"]),
        winding, int(data.get("orientation", 1)), reference,
        float(data.get("collar_fraction", DEFAULTS["collar_fraction"])), data.get("scheme"),
    )


def export_scalar_field(mesh: LagMesh, field: Union[ScalarField, np.ndarray], path: Union[str, Path],
                        name: str = "value") -> Path:
    """Write node parameters, positions and field values as CSV."""
    values = field.values if isinstance(field, ScalarField) else np.asarray(field)
    params = mesh.parameter_grid.reshape(-1, mesh.n)
    columns = {("u" if mesh.n == 1 else f"u{a + 1}"): params[:, a] for a in range(mesh.n)}
    for c, label in enumerate(coordinate_names(mesh.dim)):
        columns[label] = mesh.flat_points[:, c]
    columns[name] = values.ravel()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.12e")
    return path
