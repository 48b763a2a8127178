"""
Scenario builders, one per verb.

Every builder takes a parsed ScenarioConfig and fills a ScenarioReport with
values, residual checks and CSV series. Builders raise; the runner records
the failure.
"""

import math
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import sympy as sp
from scipy.integrate import quad

from .core.functionals import (
    GridLoop,
    calabi_product_path,
    cc_exact_closed_form,
    cc_integrand_series,
    cc_invariant,
    cc_prefix_values,
    classical_calabi,
    banyaga_value,
    energy,
    flux_pairing,
    volume,
)
from .core.geom_core import AmbientFunction
from .core.isotopy import (
    HamiltonianFamily,
    concatenate_paths,
    flow_mesh,
    flow_path,
    lemma_ob_residual,
    reparametrize_path,
    translation_path,
    two_param_residual,
)
from .core.lag_mesh import (
    LagMesh,
    flat_torus_mesh,
    graph_mesh,
    restrict_function,
    tilted_circle_mesh,
)
from .core.models import AmbientModel
from .core.slag import (
    Perturbation,
    calibration_residual,
    cc_first_variation,
    cc_second_variation_critical,
    energy_stationarity_residual,
    geodesic_cc_convexity,
    geodesic_potential_residual,
    geodesic_shoot,
    horizontal_transport_residual,
    phase_field,
    special_defect,
    vol_first_variation,
    vol_second_variation,
    volume_bound_gap,
)
from .utils.errors import ConfigError
from .utils.expressions import FAMILY, TIME, coordinate_symbols
from .utils.logging_config import get_logger

if TYPE_CHECKING:
    from .cli import ScenarioConfig, ScenarioReport

logger = get_logger("lagcal.scenarios")

# Structures a verb needs on its model
REQUIREMENTS: Dict[str, Sequence[str]] = {
    "cc": (),
    "cc-exact": ("liouville_primitive", "gamma_primitive", "scaling_constant"),
    "calabi-product": ("product_factor",),
    "flux": (),
    "geodesic": ("complex_structure", "holo_volume"),
    "convexity": ("complex_structure", "holo_volume"),
    "variations": ("complex_structure", "holo_volume"),
    "identities": (),
}

# Per-verb defaults, overridden by the config file and then the command line
VERB_DEFAULTS: Dict[str, Dict] = {
    "cc": {
        "model": "t2_cy", "resolution": 64, "steps": 100,
        "expressions": {
            "height": "0.1*sin(2*pi*x)",
            "hamiltonian": "0.1*sin(2*pi*y)*cos(2*pi*x) + 0.05*cos(2*pi*(x + t))",
            "continuation": "0.08*cos(2*pi*y)",
            "reparametrization": "t^2",
            "shift": "sin(t)",
        },
        "parameters": {"mesh": "graph"},
    },
    "cc-exact": {
        "model": "r2_exact", "resolution": 256, "steps": 200,
        "expressions": {"profile": "bump(x/0.7)"},
        "parameters": {"u_squared": 0.04, "bounds": [[-1.0, 1.0]]},
    },
    "calabi-product": {
        "model": "r4_product", "resolution": 64, "steps": 100,
        "expressions": {"hamiltonian": "0.5*(1 + t)*bump(sqrt(x^2 + y^2)/0.6)"},
        "parameters": {},
    },
    "flux": {
        "model": "t2n_cy", "resolution": 16, "steps": 200,
        "expressions": {"hamiltonian": "0.05*sin(2*pi*(x1 + y2)) + 0.03*cos(2*pi*(y1 - x2) + t)"},
        "parameters": {"amplitudes": [0.1, 0.3, 0.7], "translation_steps": 8},
    },
    "geodesic": {
        "model": "t2_cy", "resolution": 64, "steps": 50,
        "expressions": {"perturbation": "cos(2*pi*x)", "profile": "sin(pi*t)"},
        "parameters": {"amplitude": 0.05, "duration": 1.0, "delta": 1e-3, "mesh": "flat"},
    },
    "convexity": {
        "model": "t2_cy", "resolution": 64, "steps": 100,
        "expressions": {},
        "parameters": {"amplitude": 0.05, "duration": 1.0, "samples": 11, "mesh": "flat"},
    },
    "variations": {
        "model": "t2_cy", "resolution": 64, "steps": 16,
        "expressions": {"height": "0.1*sin(2*pi*x)", "generator": "cos(2*pi*x)"},
        "parameters": {
            "epsilons": [1e-2, 5e-3, 2.5e-3],
            "second_epsilon": 5e-3,
            "substeps": 8,
            "vol_second_expected": (2.0 * math.pi) ** 4 / 2.0,
        },
    },
    "identities": {
        "model": "t2_cy", "resolution": 128, "steps": 1,
        "expressions": {
            "height": "0.1*sin(2*pi*x)",
            "H": "sin(2*pi*(y - 2*pi*s*sin(2*pi*x)))",
            "K": "cos(2*pi*x)",
        },
        "parameters": {"checks": ["lemma_ob"], "pairs": 5, "meshes": 20, "samples": 256},
    },
}

# Second differences and observed orders stop being meaningful below this error
ROUNDOFF_FLOOR = 1e-11


def check_model(verb: str, model: AmbientModel):
    """Reject model/verb combinations before any computation."""
    missing = [name for name in REQUIREMENTS[verb] if getattr(model, name) is None]
    if missing:
        raise ConfigError(f"verb '{verb}' needs {', '.join(missing)} on model '{model.name}'")
    if verb == "flux" and not model.is_torus:
        raise ConfigError(f"verb 'flux' needs closed Lagrangians with loops; '{model.name}' has none")
    if verb in ("geodesic", "convexity", "variations") and not model.is_torus:
        raise ConfigError(f"verb '{verb}' runs on closed torus meshes; '{model.name}' is not a torus")


def expression_variables(model: AmbientModel) -> tuple:
    """Names an expression in a config may use: model chart, factor chart for products, s and t."""
    names = coordinate_symbols(model.dim)
    if model.product_factor is not None:
        names = names + coordinate_symbols(2 * model.product_factor)
    return names + (TIME, FAMILY)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _family(config: "ScenarioConfig", key: str, dim: int, **kwargs) -> HamiltonianFamily:
    return HamiltonianFamily(AmbientFunction(dim, expr=config.expression(key)), name=key, **kwargs)


def _bounds(config: "ScenarioConfig", n: int):
    raw = config.parameter("bounds", None)
    if raw is None:
        return ((-1.0, 1.0),) * n
    return tuple((float(a), float(b)) for a, b in raw)


def _initial_mesh(config: "ScenarioConfig") -> LagMesh:
    model = config.ambient
    kind = config.parameter("mesh", "graph")
    if kind == "flat":
        return flat_torus_mesh(model, config.resolution)
    if kind == "tilted":
        return tilted_circle_mesh(model, config.resolution, int(config.parameter("slope", 1)))
    height = config.expression("height") if config.has_expression("height") else 0
    return graph_mesh(model, config.resolution, height, bounds=None if model.is_torus else _bounds(config, model.n))


def _series_frame(series) -> pd.DataFrame:
    return pd.DataFrame({
        "t": np.concatenate([s.times for s in series]),
        "integrand": np.concatenate([s.values for s in series]),
        "potential_residual": np.concatenate([s.residuals for s in series]),
    })


def observed_order(errors: Sequence[float]) -> Optional[float]:
    """Smallest log2(e(eps)/e(eps/2)) over consecutive halvings, None when every error is at round-off."""
    errors = [float(e) for e in errors]
    if max(errors) < ROUNDOFF_FLOOR:
        return None
    orders = [math.log2(a / max(b, 1e-300)) for a, b in zip(errors[:-1], errors[1:])]
    return min(orders)


def add_order_check(report: "ScenarioReport", name: str, errors: Sequence[float]):
    """Check the observed order, or the error bound itself when the errors are at round-off."""
    order = observed_order(errors)
    report.add_value(f"{name}_at_roundoff", float(order is None))
    if order is None:
        report.add_check(f"{name}_roundoff", max(float(e) for e in errors), "variation_roundoff")
    else:
        report.add_check(name, order, "variation_order", mode="min")


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def run_cc(config: "ScenarioConfig", report: "ScenarioReport"):
    """Homotopy invariance of C under reparametrization, shifts, concatenation and backtracking."""
    model = config.ambient
    mesh0 = _initial_mesh(config)
    H = _family(config, "hamiltonian", model.dim, support="normalized")
    K = _family(config, "continuation", model.dim, support="normalized")
    steps = config.steps

    path = flow_path(mesh0, H, steps, label="base")
    base = cc_invariant(path)
    reparametrized = cc_invariant(flow_path(mesh0, H.reparametrized(config.expression("reparametrization")), steps))
    shifted = cc_invariant(flow_path(mesh0, H.shifted(config.expression("shift")), steps))

    second = flow_path(path.meshes[-1], K, steps, label="continuation")
    joined = cc_invariant(concatenate_paths(path, second))
    second_value = cc_invariant(second)
    back = flow_path(second.meshes[-1], K.reversed(), steps, label="backtrack")
    back_value = cc_invariant(back)

    report.add_value("cc", base)
    report.add_value("cc_reparametrized", reparametrized)
    report.add_value("cc_shifted", shifted)
    report.add_value("cc_concatenated", joined)
    report.add_value("cc_continuation", second_value)
    report.add_value("cc_resampled", cc_invariant(reparametrize_path(path, config.expression("reparametrization"))))
    report.add_check("reparametrization", abs(reparametrized - base), "cc_homotopy")
    report.add_check("shift", abs(shifted - base), "cc_homotopy")
    report.add_check("concatenation", abs(joined - base - second_value), "cc_homotopy")
    report.add_check("backtrack", abs(second_value + back_value), "cc_homotopy")
    report.add_check("lagrangian_defect", float(np.max(path.defects)), "lagrangian_defect_flow")
    report.add_series("cc_integrand", _series_frame(cc_integrand_series(path)))


def run_cc_exact(config: "ScenarioConfig", report: "ScenarioReport"):
    """C on an exact model against the primitive closed form and 1/2 int u^2."""
    model = config.ambient
    bounds = _bounds(config, model.n)
    x = coordinate_symbols(model.dim)[0]
    profile = config.expression("profile")
    derivative = sp.lambdify((x,), sp.diff(profile, x), modules="numpy")

    def u_squared(s):
        with np.errstate(all="ignore"):
            return float(derivative(s)) ** 2

    raw, _ = quad(u_squared, *bounds[0], limit=400)
    target = float(config.parameter("u_squared"))
    amplitude = math.sqrt(target / raw)
    H = HamiltonianFamily(AmbientFunction(model.dim, expr=-amplitude * profile), box=bounds, name="exact graph")

    mesh0 = graph_mesh(model, config.resolution, 0, bounds=bounds)
    path = flow_path(mesh0, H, config.steps, label="exact graph")
    value = cc_invariant(path)
    closed = cc_exact_closed_form(path.meshes[0], path.meshes[-1])
    expected = 0.5 * target

    report.add_value("u_squared", target)
    report.add_value("amplitude", amplitude)
    report.add_value("cc", value)
    report.add_value("cc_closed_form", closed)
    report.add_value("expected", expected)
    report.add_check("cc_vs_expected", abs(value - expected), "cc_exact")
    report.add_check("closed_form_vs_expected", abs(closed - expected), "cc_exact")
    report.add_check("cc_vs_closed_form", abs(value - closed), "cc_exact")
    report.add_series("cc_integrand", _series_frame(cc_integrand_series(path)))


def run_calabi_product(config: "ScenarioConfig", report: "ScenarioReport"):
    """classical Calabi = C of the graph path = Banyaga's formula."""
    model = config.ambient
    m = model.product_factor
    bounds = _bounds(config, 2 * m)
    H = _family(config, "hamiltonian", 2 * m, box=bounds)

    calabi = classical_calabi(H, config.steps, config.resolution, bounds)
    path = calabi_product_path(H, m, config.resolution, config.steps, bounds)
    value = cc_invariant(path)
    banyaga = banyaga_value(path)

    report.add_value("calabi", calabi)
    report.add_value("cc", value)
    report.add_value("banyaga", banyaga)
    report.add_check("calabi_vs_cc", abs(calabi - value), "calabi_chain")
    report.add_check("calabi_vs_banyaga", abs(calabi - banyaga), "calabi_chain")
    report.add_check("cc_vs_banyaga", abs(value - banyaga), "calabi_chain")
    report.add_check("lagrangian_defect", float(np.max(path.defects)), "lagrangian_defect_flow")
    report.add_series("cc_integrand", _series_frame(cc_integrand_series(path)))


def run_flux(config: "ScenarioConfig", report: "ScenarioReport"):
    """Translation flux, vanishing flux of Hamiltonian paths, homologous loops."""
    model = config.ambient
    mesh0 = flat_torus_mesh(model, config.resolution)
    n = mesh0.n
    rows: List[Dict] = []

    worst = 0.0
    for a in config.parameter("amplitudes"):
        displacement = np.zeros(model.dim)
        displacement[1] = float(a)
        path = translation_path(mesh0, displacement, int(config.parameter("translation_steps")))
        value = flux_pairing(path, GridLoop(0))
        worst = max(worst, abs(value - float(a)))
        report.add_value(f"translation_flux_{a:g}", value)
        rows.append({"path": "translation", "amplitude": float(a), "axis": 0, "flux": value})
    report.add_check("translation_flux", worst, "flux")

    H = _family(config, "hamiltonian", model.dim, support="normalized")
    hamiltonian = flow_path(mesh0, H, config.steps, label="hamiltonian")
    exact = 0.0
    for axis in range(n):
        value = flux_pairing(hamiltonian, GridLoop(axis))
        exact = max(exact, abs(value))
        report.add_value(f"hamiltonian_flux_axis{axis}", value)
        rows.append({"path": "hamiltonian", "amplitude": 0.0, "axis": axis, "flux": value})
    report.add_check("hamiltonian_flux", exact, "flux_exact")

    if n > 1:
        a = float(config.parameter("amplitudes")[0])
        displacement = np.zeros(model.dim)
        displacement[1] = a
        combined = concatenate_paths(
            hamiltonian,
            translation_path(hamiltonian.meshes[-1], displacement, int(config.parameter("translation_steps"))),
        )
        shift = mesh0.shape[1] // 3
        first = flux_pairing(combined, GridLoop(0, (0,)))
        moved = flux_pairing(combined, GridLoop(0, (shift,)))
        report.add_value("combined_flux", first)
        report.add_value("combined_flux_shifted_loop", moved)
        report.add_check("homologous_loops", abs(first - moved), "flux")
        report.add_check("combined_flux", abs(first - a), "flux")
    report.add_series("flux", pd.DataFrame(rows))


def _generator(config: "ScenarioConfig", mesh: LagMesh):
    if config.has_expression("generator"):
        return restrict_function(mesh, config.expression("generator"))
    return restrict_function(mesh, f"{float(config.parameter('amplitude'))!r}*cos(2*pi*x)")


def run_geodesic(config: "ScenarioConfig", report: "ScenarioReport"):
    """Shoot a geodesic and test energy stationarity against a reparametrized control."""
    model = config.ambient
    mesh0 = _initial_mesh(config)
    duration = float(config.parameter("duration"))
    record = geodesic_shoot(mesh0, _generator(config, mesh0), duration, config.steps)

    profile = config.expression("profile")
    if duration != 1.0:
        profile = profile.subs(TIME, TIME / duration)
    perturbation = Perturbation(_family(config, "perturbation", model.dim), profile)
    delta = float(config.parameter("delta"))
    geodesic_residual = energy_stationarity_residual(record, perturbation, delta)
    control = reparametrize_path(record.path, f"t^2/{duration!r}")
    control_residual = energy_stationarity_residual(control, perturbation, delta)

    report.add_value("energy", energy(record.path))
    report.add_value("energy_control", energy(control))
    report.add_value("stationarity_geodesic", geodesic_residual)
    report.add_value("stationarity_control", control_residual)
    report.add_check("energy_geodesic", geodesic_residual, "energy_geodesic")
    report.add_check("energy_control", control_residual, "energy_control", mode="min")
    report.add_check("potential_round_trip", geodesic_potential_residual(record), "velocity_form")
    report.add_check("horizontal_transport", horizontal_transport_residual(record), "transport")

    final = record.mesh_at(record.path.steps)
    phase = phase_field(final)
    report.add_value("final_cos_theta_min", float(np.min(phase.cos_theta)))
    report.add_scalar_field("theta_final", final, phase.theta)


def run_convexity(config: "ScenarioConfig", report: "ScenarioReport"):
    """Second derivative of C along a geodesic against second differences of its prefixes."""
    mesh0 = _initial_mesh(config)
    duration = float(config.parameter("duration"))
    record = geodesic_shoot(mesh0, _generator(config, mesh0), duration, config.steps)
    prefix = cc_prefix_values(record.path)
    ds = duration / config.steps

    samples = np.linspace(0.0, duration, int(config.parameter("samples")))
    rows, errors = [], []
    for s in samples:
        value = geodesic_cc_convexity(record, float(s))
        j = int(round(s / ds))
        second = float("nan")
        if 0 < j < config.steps:
            second = (prefix[j + 1] - 2.0 * prefix[j] + prefix[j - 1]) / ds ** 2
            errors.append(_relative(second, value))
        rows.append({"s": float(s), "cc": float(prefix[j]), "convexity": value, "second_difference": second})
    frame = pd.DataFrame(rows)

    report.add_value("convexity_min", float(frame["convexity"].min()))
    report.add_value("convexity_initial", float(frame["convexity"].iloc[0]))
    report.add_value("cc_final", float(prefix[-1]))
    report.add_check("convexity_positive", float(frame["convexity"].min()), "convexity_floor", mode="min")
    report.add_check("convexity_vs_second_difference", max(errors) if errors else 0.0, "convexity_relative")
    if not config.has_expression("generator"):
        amplitude = float(config.parameter("amplitude"))
        expected = (2.0 * math.pi * amplitude) ** 2 / 2.0
        report.add_value("convexity_initial_expected", expected)
        report.add_check("convexity_initial", _relative(frame["convexity"].iloc[0], expected), "convexity_initial")
    report.add_series("convexity", frame)
    report.add_series("cc_along_geodesic", pd.DataFrame({"s": record.times, "cc": prefix}))


def _cc_along(mesh: LagMesh, K: HamiltonianFamily, eps: float, steps: int) -> float:
    return cc_invariant(flow_path(mesh, K.scaled(eps), steps))


def _volume_along(mesh: LagMesh, K: HamiltonianFamily, eps: float, substeps: int) -> float:
    return volume(flow_mesh(mesh, K, 0.0, eps, substeps))


def run_variations(config: "ScenarioConfig", report: "ScenarioReport"):
    """First and second variations of C and volume against central differences."""
    model = config.ambient
    K = _family(config, "generator", model.dim, support="normalized")
    substeps = int(config.parameter("substeps"))
    epsilons = [float(e) for e in config.parameter("epsilons")]
    steps = config.steps

    mesh = _initial_mesh(config)
    k = restrict_function(mesh, K.function)
    cc_first = cc_first_variation(mesh, k)
    vol_first = vol_first_variation(mesh, k)
    rows, cc_errors, vol_errors = [], [], []
    for eps in epsilons:
        cc_fd = (_cc_along(mesh, K, eps, steps) - _cc_along(mesh, K, -eps, steps)) / (2.0 * eps)
        vol_fd = (_volume_along(mesh, K, eps, substeps) - _volume_along(mesh, K, -eps, substeps)) / (2.0 * eps)
        cc_errors.append(abs(cc_fd - cc_first))
        vol_errors.append(abs(vol_fd - vol_first))
        rows.append({"epsilon": eps, "cc_difference": cc_fd, "cc_error": cc_errors[-1],
                     "vol_difference": vol_fd, "vol_error": vol_errors[-1]})
    report.add_value("cc_first_variation", cc_first)
    report.add_value("vol_first_variation", vol_first)
    add_order_check(report, "cc_first_order", cc_errors)
    add_order_check(report, "vol_first_order", vol_errors)

    flat = flat_torus_mesh(model, config.resolution)
    k_flat = restrict_function(flat, K.function)
    eps = float(config.parameter("second_epsilon"))
    cc_second = cc_second_variation_critical(flat, k_flat)
    cc_fd = (_cc_along(flat, K, eps, steps) + _cc_along(flat, K, -eps, steps)) / eps ** 2
    vol_second = vol_second_variation(flat, k_flat)
    vol0 = volume(flat)
    vol_fd = (_volume_along(flat, K, eps, substeps) + _volume_along(flat, K, -eps, substeps) - 2.0 * vol0) / eps ** 2
    report.add_value("cc_second_variation", cc_second)
    report.add_value("cc_second_difference", cc_fd)
    report.add_value("vol_second_variation", vol_second)
    report.add_value("vol_second_difference", vol_fd)
    report.add_check("cc_second", _relative(cc_fd, cc_second), "variation_relative")
    report.add_check("vol_second", _relative(vol_fd, vol_second), "variation_relative")
    expected = config.parameter("vol_second_expected", None)
    if expected is not None and not config.has_expression("generator", explicit=True):
        report.add_check("vol_second_exact", _relative(vol_second, float(expected)), "vol_second_relative")
    report.add_series("first_variations", pd.DataFrame(rows))


def _random_trigonometric(rng: np.random.Generator, model: AmbientModel, terms: int = 3) -> sp.Expr:
    symbols = coordinate_symbols(model.dim)
    total = sp.Integer(0)
    for _ in range(terms):
        freq = rng.integers(-2, 3, size=model.dim)
        if not freq.any():
            freq[0] = 1
        phase = sum(int(f) * s for f, s in zip(freq, symbols))
        coeff = sp.Float(round(float(rng.uniform(-0.2, 0.2)), 6))
        trig = sp.sin if rng.random() < 0.5 else sp.cos
        total = total + coeff * trig(2 * sp.pi * phase)
    return total


def _check_lemma_ob(config: "ScenarioConfig", report: "ScenarioReport", rng: np.random.Generator):
    model = config.ambient
    mesh = _initial_mesh(config)
    worst = 0.0
    for i in range(int(config.parameter("pairs"))):
        H = _random_trigonometric(rng, model)
        K = _random_trigonometric(rng, model)
        residual = lemma_ob_residual(mesh, H, K)
        logger.debug("bracket identity pair %d: residual %.3e", i, residual)
        worst = max(worst, residual)
    report.add_check("lemma_ob", worst, "lemma_ob")


def _check_two_param(config: "ScenarioConfig", report: "ScenarioReport", rng: np.random.Generator):
    model = config.ambient
    points = model.sample_points(int(config.parameter("samples")), seed=int(rng.integers(0, 2 ** 31)))
    parameters = tuple(tuple(p) for p in config.parameter("parameters", [[0.2, 0.3], [0.5, 0.5], [0.8, 0.1]]))
    result = two_param_residual(config.expression("H"), config.expression("K"), model, points, parameters)
    report.add_value("two_param_constant", result.constant)
    report.add_check("two_param_deviation", result.deviation, "two_param")
    report.add_check("two_param_constant", abs(result.constant), "two_param")


def _check_calibration(config: "ScenarioConfig", report: "ScenarioReport", rng: np.random.Generator):
    model = config.ambient
    flat = flat_torus_mesh(model, config.resolution)
    rows = [{"amplitude": 0.0, "frequency": 0, "gap": volume_bound_gap(flat),
             "calibration": calibration_residual(flat)}]
    for _ in range(int(config.parameter("meshes"))):
        amplitude = float(rng.uniform(0.02, 0.2))
        frequency = int(rng.integers(1, 4))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        mesh = graph_mesh(model, config.resolution, f"{amplitude!r}*sin(2*pi*{frequency}*x + {phase!r})")
        rows.append({"amplitude": amplitude, "frequency": frequency, "gap": volume_bound_gap(mesh),
                     "calibration": calibration_residual(mesh)})
    frame = pd.DataFrame(rows)
    report.add_value("flat_special_defect", special_defect(flat))
    report.add_check("flat_special_defect", special_defect(flat), "special_flat")
    report.add_check("flat_volume_gap", abs(float(frame["gap"].iloc[0])), "volume_gap")
    report.add_check("curved_volume_gap", float(frame["gap"].iloc[1:].min()) if len(frame) > 1 else 1.0,
                     "volume_gap", mode="min")
    report.add_check("calibration_identity", float(frame["calibration"].max()), "calibration")
    report.add_series("volume_gaps", frame)


IDENTITY_CHECKS: Dict[str, Callable] = {
    "lemma_ob": _check_lemma_ob,
    "two_param": _check_two_param,
    "calibration": _check_calibration,
}


def run_identities(config: "ScenarioConfig", report: "ScenarioReport"):
    """Pointwise and integrated identities: bracket identity, two-parameter families, calibration."""
    rng = np.random.default_rng(config.seed)
    for name in config.parameter("checks"):
        if name not in IDENTITY_CHECKS:
            raise ConfigError(f"unknown identity check '{name}'", {"known": sorted(IDENTITY_CHECKS)})
        IDENTITY_CHECKS[name](config, report, rng)


SCENARIOS: Dict[str, Callable] = {
    "cc": run_cc,
    "cc-exact": run_cc_exact,
    "calabi-product": run_calabi_product,
    "flux": run_flux,
    "geodesic": run_geodesic,
    "convexity": run_convexity,
    "variations": run_variations,
    "identities": run_identities,
}
