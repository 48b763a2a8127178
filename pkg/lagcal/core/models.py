"""
Ambient model manifolds: a flat chart with symplectic, complex and Calabi-Yau data.

Models come from a small built-in catalog or from JSON files (see FORMATS.md).
"""

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import sympy as sp

from ..utils.config import TOLERANCES
from ..utils.errors import ConfigError, InconsistentStructureError, MissingStructureError
from ..utils.expressions import coordinate_names, coordinate_symbols
from ..utils.logging_config import get_logger
from .geom_core import (
    DifferentialForm,
    contract_field,
    exterior_derivative,
    holomorphic_volume_form,
    liouville_field,
    omega_matrix,
    pullback_by_projection,
    standard_complex_structure,
    standard_liouville_form,
    standard_symplectic_form,
    wedge,
    wedge_power,
)

logger = get_logger("lagcal.models")

CHARTS = ("euclidean", "torus")


@dataclass(frozen=True, eq=False)
class AmbientModel:
    """Flat model manifold X of dimension 2n with optional structure."""

    name: str
    dim: int
    omega: DifferentialForm
    chart: str = "euclidean"
    periods: Optional[Tuple[float, ...]] = None
    complex_structure: Optional[np.ndarray] = None
    holo_volume: Optional[DifferentialForm] = None
    liouville_primitive: Optional[DifferentialForm] = None
    gamma_primitive: Optional[DifferentialForm] = None
    scaling_constant: Optional[float] = None
    beta: Optional[DifferentialForm] = None
    product_factor: Optional[int] = None

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ConfigError(f"model '{self.name}' must have even positive dimension", {"dim": self.dim})
        if self.chart not in CHARTS:
            raise ConfigError(f"unknown chart '{self.chart}'", {"model": self.name})
        if self.chart == "torus":
            if self.periods is None or len(self.periods) != self.dim:
                raise ConfigError(f"torus model '{self.name}' needs {self.dim} periods")
            object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if self.complex_structure is not None:
            J = np.asarray(self.complex_structure, dtype=float)
            if J.shape != (self.dim, self.dim):
                raise ConfigError(f"complex structure of '{self.name}' has shape {J.shape}")
            J.setflags(write=False)
            object.__setattr__(self, "complex_structure", J)
        if self.omega.degree != 2 or self.omega.dim != self.dim:
            raise ConfigError(f"omega of '{self.name}' must be a 2-form on the chart")

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def is_torus(self) -> bool:
        return self.chart == "torus"

    @property
    def coordinates(self) -> Tuple[str, ...]:
        return coordinate_names(self.dim)

    @property
    def symbols(self) -> Tuple[sp.Symbol, ...]:
        return coordinate_symbols(self.dim)

    def require(self, structure: str):
        """Return a structure attribute or raise MissingStructureError."""
        value = getattr(self, structure)
        if value is None:
            raise MissingStructureError(structure, self.name)
        return value

    def omega_matrix(self, points: np.ndarray) -> np.ndarray:
        return omega_matrix(self.omega, points)

    def metric_matrix(self, points: np.ndarray) -> np.ndarray:
        """g(u, v) = omega(u, J v) as matrices W J."""
        J = self.require("complex_structure")
        return self.omega_matrix(points) @ J

    def sample_points(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self.is_torus:
            return rng.uniform(0.0, 1.0, (count, self.dim)) * np.asarray(self.periods)
        return rng.uniform(-1.0, 1.0, (count, self.dim))

    def with_primitives(
        self,
        gamma: DifferentialForm,
        scaling_constant: float,
        beta: Optional[DifferentialForm] = None,
    ) -> "AmbientModel":
        """Install gamma and c, checking lambda ∧ beta + c omega ∧ gamma = 0."""
        model = replace(self, gamma_primitive=gamma, scaling_constant=float(scaling_constant),
                        beta=beta if beta is not None else self.beta)
        residual = model.primitive_identity_residual()
        if residual > TOLERANCES["model_sample"]:
            raise InconsistentStructureError("lambda ∧ beta + c omega ∧ gamma does not vanish", residual)
        return model

    def primitive_identity_residual(self, samples: int = 64) -> float:
        lam = self.require("liouville_primitive")
        gamma = self.require("gamma_primitive")
        beta = self.require("beta")
        c = self.require("scaling_constant")
        total = wedge(lam, beta) + wedge(self.omega, gamma).scaled(c)
        return total.max_abs(self.sample_points(samples, seed=7))

    def validate(self, samples: int = 64, tol: Optional[float] = None) -> Dict[str, float]:
        """Check the structure identities at random points; raise on failure."""
        tol = TOLERANCES["model_sample"] if tol is None else tol
        points = self.sample_points(samples, seed=11)
        residuals: Dict[str, float] = {}

        residuals["omega_closed"] = exterior_derivative(self.omega).max_abs(points) if self.dim > 2 else 0.0
        dets = np.linalg.det(self.omega_matrix(points))
        residuals["omega_degenerate"] = float(1.0 / max(np.min(np.abs(dets)), 1e-300))

        if self.complex_structure is not None:
            J = self.complex_structure
            W = self.omega_matrix(points)
            residuals["J_squared"] = float(np.max(np.abs(J @ J + np.eye(self.dim))))
            compat = np.einsum("ba,mbc,cd->mad", J, W, J) - W
            residuals["J_compatible"] = float(np.max(np.abs(compat)))
            G = W @ J
            residuals["metric_symmetric"] = float(np.max(np.abs(G - np.transpose(G, (0, 2, 1)))))
            sym = 0.5 * (G + np.transpose(G, (0, 2, 1)))
            residuals["metric_positive"] = float(max(0.0, -np.min(np.linalg.eigvalsh(sym))))
        if self.liouville_primitive is not None:
            residuals["liouville"] = (exterior_derivative(self.liouville_primitive) - self.omega).max_abs(points)
        if self.beta is not None:
            residuals["omega_wedge_beta"] = wedge(self.omega, self.beta).max_abs(points)
            if self.beta.degree < self.dim:
                residuals["beta_closed"] = exterior_derivative(self.beta).max_abs(points)
        if None not in (self.liouville_primitive, self.gamma_primitive, self.beta, self.scaling_constant):
            residuals["primitive_identity"] = self.primitive_identity_residual(samples)

        for key, value in residuals.items():
            limit = 1e6 if key == "omega_degenerate" else tol
            if value > limit:
                raise InconsistentStructureError(f"model '{self.name}' fails the {key} check", value)
        logger.debug("model %s validated: %s", self.name, residuals)
        return residuals

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "name": self.name,
            "dim": self.dim,
            "chart": self.chart,
            "omega": form_to_dict(self.omega),
        }
        if self.periods is not None:
            data["periods"] = list(self.periods)
        if self.complex_structure is not None:
            data["complex_structure"] = self.complex_structure.tolist()
        for key in ("holo_volume", "liouville_primitive", "gamma_primitive", "beta"):
            value = getattr(self, key)
            if value is not None:
                data[key] = form_to_dict(value)
        if self.scaling_constant is not None:
            data["scaling_constant"] = self.scaling_constant
        if self.product_factor is not None:
            data["product_factor"] = self.product_factor
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AmbientModel":
        known = {"name", "dim", "chart", "omega", "periods", "complex_structure", "holo_volume",
                 "liouville_primitive", "gamma_primitive", "scaling_constant", "beta", "product_factor"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError("unknown model keys", {"keys": sorted(unknown)})
        try:
            dim = int(data["dim"])
            kwargs: Dict[str, Any] = {
                "name": str(data["name"]),
                "dim": dim,
                "chart": data.get("chart", "euclidean"),
                "omega": form_from_dict(data["omega"], dim),
                "periods": data.get("periods"),
                "complex_structure": data.get("complex_structure"),
                "scaling_constant": data.get("scaling_constant"),
                "product_factor": data.get("product_factor"),
            }
        except KeyError as exc:
            raise ConfigError(f"model description is missing {exc}") from None
        for key in ("holo_volume", "liouville_primitive", "gamma_primitive", "beta"):
            if data.get(key) is not None:
                kwargs[key] = form_from_dict(data[key], dim)
        return cls(**kwargs)


def form_to_dict(form: DifferentialForm) -> Dict[str, Any]:
    if not form.is_symbolic:
        raise ConfigError("only symbolic forms can be serialized")
    return {
        "degree": form.degree,
        "coefficients": {",".join(str(i) for i in idx): str(c) for idx, c in sorted(form.coefficients.items())},
    }


def form_from_dict(data: Dict[str, Any], dim: int) -> DifferentialForm:
    try:
        degree = int(data["degree"])
        raw = data["coefficients"]
    except (KeyError, TypeError):
        raise ConfigError("form needs 'degree' and 'coefficients'") from None
    coefficients = {}
    for key, text in raw.items():
        index = tuple(int(i) for i in key.split(",")) if key else ()
        coefficients[index] = str(text)
    return DifferentialForm(dim, degree, coefficients)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def euclidean_cy_model(n: int = 1, name: Optional[str] = None) -> AmbientModel:
    """C^n with the standard structures and Omega = dz_1 ∧ ... ∧ dz_n."""
    holo = holomorphic_volume_form(n)
    return AmbientModel(
        name=name or ("r2" if n == 1 else f"c{n}_cy"),
        dim=2 * n,
        omega=standard_symplectic_form(n),
        complex_structure=standard_complex_structure(n),
        holo_volume=holo,
        beta=holo.imag_part(),
    )


def exact_plane_model() -> AmbientModel:
    """R^2 with lambda = (x dy - y dx)/2, beta = dy, gamma = y and c = 1/2."""
    base = euclidean_cy_model(1, name="r2_exact")
    _, y = coordinate_symbols(2)
    gamma = DifferentialForm(2, 0, {(): y}, name="gamma")
    model = replace(base, liouville_primitive=standard_liouville_form(1),
                    beta=DifferentialForm(2, 1, {(1,): 1}, name="beta"))
    return model.with_primitives(gamma, 0.5)


def torus_cy_model(n: int = 1, scale: float = 1.0) -> AmbientModel:
    """T^{2n} = R^{2n}/Z^{2n} with Omega = scale · dz_1 ∧ ... ∧ dz_n."""
    holo = holomorphic_volume_form(n, scale)
    return AmbientModel(
        name="t2_cy" if n == 1 else ("t2n_cy" if n == 2 else f"t{2 * n}_cy"),
        dim=2 * n,
        chart="torus",
        periods=(1.0,) * (2 * n),
        omega=standard_symplectic_form(n),
        complex_structure=standard_complex_structure(n),
        holo_volume=holo,
        beta=holo.imag_part(),
    )


def product_beta_form(m: int) -> DifferentialForm:
    """beta = 1/(m+1) sum_i p1*omega_M^i ∧ p2*omega_M^(m-i) on M x M."""
    omega_m = standard_symplectic_form(m)
    total = None
    for i in range(m + 1):
        term = wedge(
            pullback_by_projection(wedge_power(omega_m, i), 1, m),
            pullback_by_projection(wedge_power(omega_m, m - i), 2, m),
        )
        total = term if total is None else total + term
    return DifferentialForm(4 * m, 2 * m, total.scaled(sp.Rational(1, m + 1)).coefficients, name="beta")


def product_model(m: int = 1) -> AmbientModel:
    """M x M for M = R^{2m}, omega = -p1*omega_M + p2*omega_M, lambda = -p1*lambda_M + p2*lambda_M.

    The first factor uses coordinates 0..2m-1 and the second 2m..4m-1. The
    scaling constant comes out as c = m.
    """
    omega_m = standard_symplectic_form(m)
    lam_m = standard_liouville_form(m)
    omega = pullback_by_projection(omega_m, 2, m) - pullback_by_projection(omega_m, 1, m)
    lam = pullback_by_projection(lam_m, 2, m) - pullback_by_projection(lam_m, 1, m)
    J_m = standard_complex_structure(m)
    J = np.zeros((4 * m, 4 * m))
    J[:2 * m, :2 * m] = -J_m
    J[2 * m:, 2 * m:] = J_m
    beta = product_beta_form(m)
    base = AmbientModel(
        name="r4_product" if m == 1 else f"r{4 * m}_product",
        dim=4 * m,
        omega=DifferentialForm(4 * m, 2, omega.coefficients, name="omega"),
        complex_structure=J,
        liouville_primitive=DifferentialForm(4 * m, 1, lam.coefficients, name="lambda"),
        beta=beta,
        product_factor=m,
    )
    xi = liouville_field(base)
    gamma = contract_field(xi, beta).scaled(sp.Rational(1, m))
    return base.with_primitives(DifferentialForm(4 * m, 2 * m - 1, gamma.coefficients, name="gamma"), m)


_CATALOG = {
    "r2": lambda: euclidean_cy_model(1),
    "r2_exact": exact_plane_model,
    "r4_product": lambda: product_model(1),
    "t2_cy": lambda: torus_cy_model(1),
    "t2n_cy": lambda: torus_cy_model(2),
    "c2_cy": lambda: euclidean_cy_model(2),
}


def catalog_names() -> Tuple[str, ...]:
    return tuple(sorted(_CATALOG))


@lru_cache(maxsize=None)
def _catalog_model(name: str) -> AmbientModel:
    model = _CATALOG[name]()
    logger.debug("built catalog model %s", name)
    return model


def load_model(source: Union[str, Path, AmbientModel]) -> AmbientModel:
    """Resolve a catalog name, a JSON model file, or pass a model through."""
    if isinstance(source, AmbientModel):
        return source
    key = str(source)
    if key in _CATALOG:
        return _catalog_model(key)
    path = Path(key)
    if not path.is_file():
        raise ConfigError(f"unknown model '{key}'", {"catalog": list(catalog_names())})
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}") from None
    model = model_from_dict(data)
    logger.info("loaded model %s from %s", model.name, path)
    return model


def top_coefficient(form: DifferentialForm, points: np.ndarray) -> np.ndarray:
    """Coefficient of dx_1 ∧ ... ∧ dx_dim of a top-degree form."""
    if form.degree != form.dim:
        raise ValueError("not a top-degree form")
    values = form.coefficient_values(points)
    return values.get(tuple(range(form.dim)), np.zeros(np.atleast_2d(points).shape[0]))


def model_to_dict(model: AmbientModel) -> Dict[str, Any]:
    return model.to_dict()


def model_from_dict(data: Dict[str, Any], validate: bool = True) -> AmbientModel:
    """Build a model from its JSON description, checking the structure identities."""
    model = AmbientModel.from_dict(data)
    if validate:
        model.validate()
    return model
