"""
lagcal: the functional 𝒞 on paths of Lagrangian submanifolds, computed on
explicit flat model manifolds, with the Calabi homomorphism, Lagrangian flux
and the special-Lagrangian variational structure as numerical checks.
"""

__version__ = "0.1.0"

from .core.functionals import (
    GridLoop,
    banyaga_value,
    calabi_product_path,
    cc_exact_closed_form,
    cc_invariant,
    classical_calabi,
    energy,
    flux_pairing,
    flux_variation,
    liouville_gamma,
    product_beta,
    volume,
)
from .core.geom_core import AmbientFunction, DifferentialForm, poisson_bracket, wedge
from .core.isotopy import HamiltonianFamily, IsotopyPath, flow_mesh, flow_path
from .core.lag_mesh import LagMesh, ScalarField, flat_torus_mesh, graph_mesh, recover_potential
from .core.models import AmbientModel, catalog_names, load_model
from .core.slag import (
    geodesic_shoot,
    horizontal_velocity,
    phase_field,
    special_defect,
    vol_first_variation,
    vol_second_variation,
)
from .utils.errors import LagCalError

__all__ = [
    "__version__",
    "AmbientFunction", "AmbientModel", "DifferentialForm", "GridLoop", "HamiltonianFamily",
    "IsotopyPath", "LagCalError", "LagMesh", "ScalarField",
    "banyaga_value", "calabi_product_path", "catalog_names", "cc_exact_closed_form",
    "cc_invariant", "classical_calabi", "energy", "flat_torus_mesh", "flow_mesh", "flow_path",
    "flux_pairing", "flux_variation", "geodesic_shoot", "graph_mesh", "horizontal_velocity",
    "liouville_gamma", "load_model", "phase_field", "poisson_bracket", "product_beta",
    "recover_potential", "special_defect", "vol_first_variation", "vol_second_variation",
    "volume", "wedge",
]
