"""
Coordinate-chart differential-form algebra and Hamiltonian vector fields on flat model manifolds.

Forms are stored by coefficients on strictly increasing multi-indices. A
coefficient is either a sympy expression in the chart coordinates (then the
exterior derivative is symbolic) or a vectorized callable ``f(points) -> values``
(then the exterior derivative uses centered differences).

Conventions: i_xi omega = dH, and {H, K} = xi_H K = omega(xi_K, xi_H).
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from ..utils.config import DEFAULTS
from ..utils.errors import DegreeError, SingularFormError
from ..utils.expressions import TIME, coordinate_symbols, parse_expression
from ..utils.logging_config import get_logger

logger = get_logger("lagcal.geom_core")

MultiIndex = Tuple[int, ...]
Coefficient = Union[sp.Expr, Callable[[np.ndarray], np.ndarray]]
ScalarLike = Union[str, int, float, sp.Expr, Callable, "AmbientFunction"]


# ---------------------------------------------------------------------------
# coefficient plumbing
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8192)
def _compile(expr: sp.Expr, dim: int, timed: bool = False) -> Callable:
    symbols = coordinate_symbols(dim)
    args = ((TIME,) + symbols) if timed else symbols
    return sp.lambdify(args, expr, modules="numpy")


def _broadcast(values, count: int) -> np.ndarray:
    return np.array(np.broadcast_to(np.asarray(values), (count,)))


def _evaluate_symbolic(expr: sp.Expr, points: np.ndarray, dim: int, t: Optional[float] = None) -> np.ndarray:
    count = points.shape[0]
    if expr.is_number:
        value = complex(expr)
        return np.full(count, value.real if value.imag == 0 else value)
    if t is None:
        func = _compile(expr, dim)
        with np.errstate(all="ignore"):
            values = func(*points.T)
    else:
        func = _compile(expr, dim, True)
        with np.errstate(all="ignore"):
            values = func(float(t), *points.T)
    return _broadcast(values, count)


def evaluate_coefficient(coeff: Coefficient, points: np.ndarray, dim: int) -> np.ndarray:
    """Evaluate one coefficient at an (M, dim) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(coeff, sp.Basic):
        return _evaluate_symbolic(coeff, pts, dim)
    return _broadcast(coeff(pts), pts.shape[0])


def _as_callable(coeff: Coefficient, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(coeff, sp.Basic):
        return lambda pts, _c=coeff: evaluate_coefficient(_c, pts, dim)
    return coeff


def _mul(a: Coefficient, b: Coefficient, dim: int) -> Coefficient:
    if isinstance(a, sp.Basic) and isinstance(b, sp.Basic):
        return a * b
    fa, fb = _as_callable(a, dim), _as_callable(b, dim)
    return lambda pts: fa(pts) * fb(pts)


def _add(a: Optional[Coefficient], b: Coefficient, dim: int) -> Coefficient:
    if a is None:
        return b
    if isinstance(a, sp.Basic) and isinstance(b, sp.Basic):
        return a + b
    fa, fb = _as_callable(a, dim), _as_callable(b, dim)
    return lambda pts: fa(pts) + fb(pts)


def _scale(a: Coefficient, factor, dim: int) -> Coefficient:
    if isinstance(a, sp.Basic):
        return sp.sympify(factor) * a
    return lambda pts: factor * a(pts)


def _permutation_sign(sequence: Sequence[int]) -> int:
    sign = 1
    seq = list(sequence)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _normalize_coefficient(value, dim: int) -> Coefficient:
    if callable(value) and not isinstance(value, sp.Basic):
        return value
    if isinstance(value, str):
        return parse_expression(value, coordinate_symbols(dim))
    if isinstance(value, complex):
        return sp.Float(value.real) + sp.I * sp.Float(value.imag)
    return sp.sympify(value)


def _symbolic_d(coefficients: Mapping[MultiIndex, sp.Expr], dim: int) -> Dict[MultiIndex, sp.Expr]:
    symbols = coordinate_symbols(dim)
    out: Dict[MultiIndex, sp.Expr] = {}
    for index, coeff in coefficients.items():
        for j in range(dim):
            if j in index:
                continue
            partial = sp.diff(coeff, symbols[j])
            if partial == 0:
                continue
            target = tuple(sorted(index + (j,)))
            sign = -1 if sum(1 for i in index if i < j) % 2 else 1
            out[target] = out.get(target, sp.Integer(0)) + sign * partial
    return {k: v for k, v in out.items() if v != 0}


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DifferentialForm:
    """Degree-k form on a 2n-dimensional chart."""

    dim: int
    degree: int
    coefficients: Mapping[MultiIndex, Coefficient]
    analytic_d: Optional[Mapping[MultiIndex, Coefficient]] = None
    name: str = ""

    def __post_init__(self):
        if self.degree < 0 or self.degree > self.dim:
            raise DegreeError(f"degree {self.degree} impossible in dimension {self.dim}", (self.degree,))
        normalized: Dict[MultiIndex, Coefficient] = {}
        for index, value in self.coefficients.items():
            index = tuple(int(i) for i in index)
            if len(index) != self.degree:
                raise DegreeError(f"multi-index {index} does not have length {self.degree}", (self.degree,))
            if any(b <= a for a, b in zip(index, index[1:])) or any(i < 0 or i >= self.dim for i in index):
                raise DegreeError(f"multi-index {index} must be strictly increasing within the chart")
            coeff = _normalize_coefficient(value, self.dim)
            if isinstance(coeff, sp.Basic) and coeff == 0:
                continue
            normalized[index] = coeff
        object.__setattr__(self, "coefficients", normalized)
        if self.analytic_d is None and self.is_symbolic and self.degree < self.dim:
            object.__setattr__(self, "analytic_d", _symbolic_d(normalized, self.dim))

    @classmethod
    def zero(cls, dim: int, degree: int) -> "DifferentialForm":
        return cls(dim, degree, {})

    @classmethod
    def constant_function(cls, dim: int, value) -> "DifferentialForm":
        return cls(dim, 0, {(): value})

    @property
    def is_symbolic(self) -> bool:
        return all(isinstance(c, sp.Basic) for c in self.coefficients.values())

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def coefficient_values(self, points: np.ndarray) -> Dict[MultiIndex, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return {index: evaluate_coefficient(c, pts, self.dim) for index, c in self.coefficients.items()}

    def at(self, point: Sequence[float]) -> Dict[MultiIndex, complex]:
        """Coefficient values at a single point."""
        values = self.coefficient_values(np.asarray(point, dtype=float)[None, :])
        return {index: v[0] for index, v in values.items()}

    def evaluate(self, points: np.ndarray, vectors: np.ndarray) -> np.ndarray:
        """Value a(v_1, ..., v_k) at every point.

        ``points`` has shape (M, dim) and ``vectors`` shape (M, k, dim).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        count = pts.shape[0]
        if self.degree == 0:
            total = np.zeros(count)
            for values in self.coefficient_values(pts).values():
                total = total + values
            return total
        vecs = np.asarray(vectors, dtype=float).reshape(count, self.degree, self.dim)
        total = np.zeros(count)
        for index, values in self.coefficient_values(pts).items():
            minors = np.linalg.det(vecs[:, :, list(index)])
            total = total + values * minors
        return total

    def real_part(self) -> "DifferentialForm":
        return self._map(lambda c: sp.re(c), np.real, "re")

    def imag_part(self) -> "DifferentialForm":
        return self._map(lambda c: sp.im(c), np.imag, "im")

    def conjugate(self) -> "DifferentialForm":
        return self._map(sp.conjugate, np.conj, "conj")

    def _map(self, symbolic, numeric, tag: str) -> "DifferentialForm":
        out = {}
        for index, coeff in self.coefficients.items():
            if isinstance(coeff, sp.Basic):
                out[index] = sp.simplify(symbolic(coeff)) if coeff.is_number else symbolic(coeff)
            else:
                out[index] = lambda pts, _c=coeff: numeric(_c(pts))
        return DifferentialForm(self.dim, self.degree, out, name=f"{tag} {self.name}".strip())

    def scaled(self, factor) -> "DifferentialForm":
        """Multiply by a constant or by a coefficient function."""
        if isinstance(factor, (int, float, complex, sp.Basic)):
            factor = _normalize_coefficient(factor, self.dim)
            out = {i: _mul(factor, c, self.dim) for i, c in self.coefficients.items()}
        else:
            out = {i: _mul(factor, c, self.dim) for i, c in self.coefficients.items()}
        return DifferentialForm(self.dim, self.degree, out, name=self.name)

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        if other.dim != self.dim or other.degree != self.degree:
            raise DegreeError("cannot add forms of different degree or dimension", (self.degree, other.degree))
        out: Dict[MultiIndex, Coefficient] = dict(self.coefficients)
        for index, coeff in other.coefficients.items():
            out[index] = _add(out.get(index), coeff, self.dim)
        return DifferentialForm(self.dim, self.degree, out)

    def __neg__(self) -> "DifferentialForm":
        return self.scaled(-1)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + (-other)

    def max_abs(self, points: np.ndarray) -> float:
        """Largest coefficient magnitude over the given points."""
        values = self.coefficient_values(points)
        return max((float(np.max(np.abs(v))) for v in values.values()), default=0.0)


@dataclass(frozen=True)
class TangentVectorAtPoint:
    """A tangent vector of the ambient chart based at a point."""

    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).reshape(-1)
        comps = np.asarray(self.components, dtype=float).reshape(-1)
        if base.shape != comps.shape:
            raise DegreeError(f"base point has {base.size} coordinates but vector has {comps.size}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.base.size


# ---------------------------------------------------------------------------
# exterior algebra
# ---------------------------------------------------------------------------

def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    """Exterior product with the shuffle-sign expansion."""
    if a.dim != b.dim:
        raise DegreeError("forms live on charts of different dimension", (a.dim, b.dim))
    degree = a.degree + b.degree
    if degree > a.dim:
        raise DegreeError(
            f"wedge of degrees {a.degree} and {b.degree} overflows dimension {a.dim}",
            (a.degree, b.degree),
        )
    out: Dict[MultiIndex, Coefficient] = {}
    for left, ca in a.coefficients.items():
        for right, cb in b.coefficients.items():
            if set(left) & set(right):
                continue
            merged = left + right
            target = tuple(sorted(merged))
            term = _mul(ca, cb, a.dim)
            if _permutation_sign(merged) < 0:
                term = _scale(term, -1, a.dim)
            out[target] = _add(out.get(target), term, a.dim)
    if all(isinstance(c, sp.Basic) for c in out.values()):
        out = {k: sp.expand(v) for k, v in out.items()}
    return DifferentialForm(a.dim, degree, out)


def wedge_power(a: DifferentialForm, k: int) -> DifferentialForm:
    """a ∧ ... ∧ a (k factors); k = 0 gives the constant function 1."""
    result = DifferentialForm.constant_function(a.dim, 1)
    for _ in range(k):
        result = wedge(result, a)
    return result


def interior_product(v: TangentVectorAtPoint, a: DifferentialForm) -> DifferentialForm:
    """i_v a as a constant-coefficient (k-1)-form holding its value at v.base."""
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form is undefined", (0,))
    if v.dim != a.dim:
        raise DegreeError("vector and form live on charts of different dimension", (v.dim, a.dim))
    out: Dict[MultiIndex, complex] = {}
    for index, value in a.at(v.base).items():
        for position, slot in enumerate(index):
            rest = index[:position] + index[position + 1:]
            term = (-1) ** position * v.components[slot] * value
            out[rest] = out.get(rest, 0.0) + term
    coefficients = {k: complex(val) if np.iscomplexobj(val) else float(val) for k, val in out.items()}
    return DifferentialForm(a.dim, a.degree - 1, coefficients)


def contract_field(field: Sequence[Coefficient], a: DifferentialForm) -> DifferentialForm:
    """i_X a for a vector field X given by coefficient functions."""
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form is undefined", (0,))
    if len(field) != a.dim:
        raise DegreeError("vector field and form live on charts of different dimension", (len(field), a.dim))
    comps = [_normalize_coefficient(c, a.dim) for c in field]
    out: Dict[MultiIndex, Coefficient] = {}
    for index, coeff in a.coefficients.items():
        for position, slot in enumerate(index):
            rest = index[:position] + index[position + 1:]
            term = _mul(comps[slot], coeff, a.dim)
            if position % 2:
                term = _scale(term, -1, a.dim)
            out[rest] = _add(out.get(rest), term, a.dim)
    return DifferentialForm(a.dim, a.degree - 1, out)


def _fd_partial(func: Callable, axis: int, step: float, dim: int) -> Callable:
    offset = np.zeros(dim)
    offset[axis] = step

    def partial(pts):
        pts = np.atleast_2d(pts)
        return (func(pts + offset) - func(pts - offset)) / (2.0 * step)
    return partial


def finite_difference_d(a: DifferentialForm, step: float = DEFAULTS["fd_step"]) -> DifferentialForm:
    """Exterior derivative by centered differences of the coefficients."""
    if a.degree >= a.dim:
        raise DegreeError("exterior derivative of a top-degree form", (a.degree,))
    out: Dict[MultiIndex, Coefficient] = {}
    for index, coeff in a.coefficients.items():
        func = _as_callable(coeff, a.dim)
        for j in range(a.dim):
            if j in index:
                continue
            target = tuple(sorted(index + (j,)))
            term = _fd_partial(func, j, step, a.dim)
            if sum(1 for i in index if i < j) % 2:
                term = _scale(term, -1, a.dim)
            out[target] = _add(out.get(target), term, a.dim)
    return DifferentialForm(a.dim, a.degree + 1, out)


def exterior_derivative(
    a: DifferentialForm,
    step: float = DEFAULTS["fd_step"],
    use_analytic: bool = True,
) -> DifferentialForm:
    """d a, from ``analytic_d`` when present, else centered differences."""
    if a.degree >= a.dim:
        raise DegreeError("exterior derivative of a top-degree form", (a.degree,))
    if use_analytic and a.analytic_d is not None:
        return DifferentialForm(a.dim, a.degree + 1, a.analytic_d)
    return finite_difference_d(a, step)


def lie_derivative(field: Sequence[Coefficient], a: DifferentialForm, step: float = DEFAULTS["fd_step"]) -> DifferentialForm:
    """Cartan's formula L_X a = d i_X a + i_X d a."""
    if a.degree == 0:
        func = a.coefficients.get((), sp.Integer(0))
        differential = exterior_derivative(DifferentialForm(a.dim, 0, {(): func}), step)
        return contract_field(field, differential)
    result = exterior_derivative(contract_field(field, a), step)
    if a.degree < a.dim:
        result = result + contract_field(field, exterior_derivative(a, step))
    return result


# ---------------------------------------------------------------------------
# functions and Hamiltonian vector fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AmbientFunction:
    """Real function of the chart coordinates and, optionally, of time."""

    dim: int
    expr: Optional[sp.Expr] = None
    func: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    step: float = DEFAULTS["fd_step"]

    def __post_init__(self):
        if (self.expr is None) == (self.func is None):
            raise ValueError("AmbientFunction needs exactly one of expr or func")

    @classmethod
    def coerce(cls, value: ScalarLike, dim: int) -> "AmbientFunction":
        if isinstance(value, AmbientFunction):
            return value
        if isinstance(value, (str, int, float, sp.Basic)):
            expr = parse_expression(value, coordinate_symbols(dim) + (TIME,))
            return cls(dim, expr=expr)
        if callable(value):
            return cls(dim, func=lambda pts, t, _f=value: _f(pts))
        raise TypeError(f"cannot interpret {value!r} as a function")

    @classmethod
    def timed(cls, func: Callable[[np.ndarray, float], np.ndarray], dim: int) -> "AmbientFunction":
        return cls(dim, func=func)

    @property
    def is_symbolic(self) -> bool:
        return self.expr is not None

    @property
    def depends_on_time(self) -> bool:
        return self.func is not None or TIME in self.expr.free_symbols

    def values(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.expr is not None:
            return np.real(_evaluate_symbolic(self.expr, pts, self.dim, t))
        return _broadcast(self.func(pts, t), pts.shape[0])

    def gradient_exprs(self) -> Tuple[sp.Expr, ...]:
        if self.expr is None:
            raise TypeError("gradient expressions need a symbolic function")
        return tuple(sp.diff(self.expr, s) for s in coordinate_symbols(self.dim))

    def gradient(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.expr is not None:
            columns = [np.real(_evaluate_symbolic(g, pts, self.dim, t)) for g in self.gradient_exprs()]
            return np.stack(columns, axis=-1)
        columns = []
        for j in range(self.dim):
            offset = np.zeros(self.dim)
            offset[j] = self.step
            columns.append((self.values(pts + offset, t) - self.values(pts - offset, t)) / (2.0 * self.step))
        return np.stack(columns, axis=-1)

    def at_time(self, t: float) -> "AmbientFunction":
        """Freeze the time argument."""
        if self.expr is not None:
            return AmbientFunction(self.dim, expr=self.expr.subs(TIME, t), step=self.step)
        return AmbientFunction(self.dim, func=lambda pts, _t, _f=self.func: _f(pts, t), step=self.step)


def omega_matrix(omega: DifferentialForm, points: np.ndarray) -> np.ndarray:
    """Matrices W[a, b] = omega(e_a, e_b) at every point, shape (M, dim, dim)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    matrices = np.zeros((pts.shape[0], omega.dim, omega.dim))
    for (i, j), values in omega.coefficient_values(pts).items():
        matrices[:, i, j] += np.real(values)
        matrices[:, j, i] -= np.real(values)
    return matrices


def solve_hamiltonian_system(matrices: np.ndarray, covectors: np.ndarray) -> np.ndarray:
    """Solve i_xi omega = covector pointwise, i.e. W^T xi = covector."""
    dets = np.linalg.det(matrices)
    scale = np.max(np.abs(matrices), axis=(1, 2)) ** matrices.shape[-1]
    bad = np.abs(dets) <= 1e-12 * np.maximum(scale, 1e-300)
    if np.any(bad):
        raise SingularFormError("symplectic matrix is singular", None)
    return np.linalg.solve(np.transpose(matrices, (0, 2, 1)), covectors[..., None])[..., 0]


def hamiltonian_field_values(model, H: ScalarLike, points: np.ndarray, t: float = 0.0) -> np.ndarray:
    """xi_H at every point, shape (M, dim)."""
    func = AmbientFunction.coerce(H, model.dim)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return solve_hamiltonian_system(model.omega_matrix(pts), func.gradient(pts, t))


def hamiltonian_vector_field(model, H: ScalarLike, p: Sequence[float], t: float = 0.0) -> TangentVectorAtPoint:
    """The vector xi with i_xi omega = dH at p."""
    point = np.asarray(p, dtype=float).reshape(1, -1)
    try:
        xi = hamiltonian_field_values(model, H, point, t)[0]
    except SingularFormError:
        raise SingularFormError("symplectic matrix is singular", point[0]) from None
    return TangentVectorAtPoint(point[0], xi)


def poisson_bracket_values(model, H: ScalarLike, K: ScalarLike, points: np.ndarray, t: float = 0.0) -> np.ndarray:
    """{H, K} = xi_H K at every point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi = hamiltonian_field_values(model, H, pts, t)
    grad_k = AmbientFunction.coerce(K, model.dim).gradient(pts, t)
    return np.einsum("md,md->m", xi, grad_k)


def poisson_bracket(model, H: ScalarLike, K: ScalarLike, p: Sequence[float], t: float = 0.0) -> float:
    return float(poisson_bracket_values(model, H, K, np.asarray(p, dtype=float).reshape(1, -1), t)[0])


def symbolic_solve(omega: DifferentialForm, covector: Sequence[sp.Expr]) -> Tuple[sp.Expr, ...]:
    """Symbolic solution of i_xi omega = covector for a symbolic omega."""
    size = omega.dim
    W = sp.zeros(size, size)
    for (i, j), coeff in omega.coefficients.items():
        W[i, j] += coeff
        W[j, i] -= coeff
    solution = W.T.LUsolve(sp.Matrix(list(covector)))
    return tuple(sp.simplify(c) if c.is_number else c for c in solution)


def hamiltonian_field(model, H: ScalarLike) -> Tuple[Coefficient, ...]:
    """Coefficient functions of xi_H (symbolic when H and omega are)."""
    func = AmbientFunction.coerce(H, model.dim)
    if func.is_symbolic and model.omega.is_symbolic:
        return symbolic_solve(model.omega, func.gradient_exprs())

    def component(j):
        return lambda pts: hamiltonian_field_values(model, func, pts)[:, j]
    return tuple(component(j) for j in range(model.dim))


def liouville_field(model) -> Tuple[Coefficient, ...]:
    """Coefficients of the Liouville field xi with i_xi omega = lambda."""
    lam = model.require("liouville_primitive")
    covector: List[Coefficient] = [lam.coefficients.get((j,), sp.Integer(0)) for j in range(model.dim)]
    if lam.is_symbolic and model.omega.is_symbolic:
        return symbolic_solve(model.omega, covector)
    funcs = [_as_callable(_normalize_coefficient(c, model.dim), model.dim) for c in covector]

    def component(j):
        def evaluate(pts):
            pts = np.atleast_2d(pts)
            cov = np.stack([f(pts) for f in funcs], axis=-1)
            return solve_hamiltonian_system(model.omega_matrix(pts), cov)[:, j]
        return evaluate
    return tuple(component(j) for j in range(model.dim))


def pullback_by_projection(form: DifferentialForm, factor: int, m: int) -> DifferentialForm:
    """p_factor^* of a form on M = R^{2m} into the product chart R^{4m}."""
    if form.dim != 2 * m:
        raise DegreeError("form does not live on the factor", (form.dim, 2 * m))
    if factor not in (1, 2):
        raise ValueError("factor must be 1 or 2")
    shift = 0 if factor == 1 else 2 * m
    source = coordinate_symbols(2 * m)
    target = coordinate_symbols(4 * m)[shift:shift + 2 * m]
    substitution = dict(zip(source, target))
    out: Dict[MultiIndex, Coefficient] = {}
    for index, coeff in form.coefficients.items():
        new_index = tuple(i + shift for i in index)
        if isinstance(coeff, sp.Basic):
            out[new_index] = coeff.xreplace(substitution)
        else:
            out[new_index] = lambda pts, _c=coeff: _c(np.atleast_2d(pts)[:, shift:shift + 2 * m])
    return DifferentialForm(4 * m, form.degree, out)


def standard_symplectic_form(n: int) -> DifferentialForm:
    """sum_j dx_j ∧ dy_j in interleaved coordinates."""
    return DifferentialForm(2 * n, 2, {(2 * j, 2 * j + 1): 1 for j in range(n)}, name="omega")


def standard_liouville_form(n: int) -> DifferentialForm:
    """1/2 sum_j (x_j dy_j - y_j dx_j), a primitive of the standard omega."""
    symbols = coordinate_symbols(2 * n)
    coefficients = {}
    for j in range(n):
        x, y = symbols[2 * j], symbols[2 * j + 1]
        coefficients[(2 * j,)] = -y / 2
        coefficients[(2 * j + 1,)] = x / 2
    return DifferentialForm(2 * n, 1, coefficients, name="lambda")


def standard_complex_structure(n: int) -> np.ndarray:
    """Block-diagonal J with J d/dx = d/dy."""
    J = np.zeros((2 * n, 2 * n))
    for j in range(n):
        J[2 * j + 1, 2 * j] = 1.0
        J[2 * j, 2 * j + 1] = -1.0
    return J


def holomorphic_volume_form(n: int, scale=1) -> DifferentialForm:
    """scale · dz_1 ∧ ... ∧ dz_n with dz_j = dx_j + i dy_j."""
    result = DifferentialForm.constant_function(2 * n, scale)
    for j in range(n):
        dz = DifferentialForm(2 * n, 1, {(2 * j,): 1, (2 * j + 1,): sp.I})
        result = wedge(result, dz)
    return DifferentialForm(2 * n, n, result.coefficients, name="Omega")
