"""
Default settings and tolerance tables for lagcal.
"""

from typing import Dict, Mapping, Optional

from .errors import ConfigError

# Numerical defaults shared by the library and the scenario runner
DEFAULTS = {
    "resolution": 64,
    "flow_steps": 100,
    "fd_step": 1e-4,
    "cos_floor": 0.05,
    "collar_fraction": 0.1,
    "seed": 0,
}

# Named tolerances; every scenario residual is compared against exactly one entry
TOLERANCES = {
    "lagrangian_defect_exact": 1e-8,
    "lagrangian_defect_flow": 1e-6,
    "flow_degraded": 1e-4,
    "collar_drift": 1e-10,
    "exactness": 1e-6,
    "closed_beta": 1e-8,
    "normalization": 1e-8,
    "model_sample": 1e-10,
    "homogeneity": 1e-8,
    "special": 1e-8,
    "special_flat": 1e-12,
    "critical": 1e-8,
    "harmonic_phase": 1e-6,
    "cc_exact": 1e-5,
    "cc_homotopy": 1e-6,
    "calabi_chain": 1e-4,
    "banyaga_closed_form": 1e-6,
    "lemma_ob": 1e-6,
    "two_param": 1e-6,
    "flux": 1e-6,
    "flux_exact": 1e-8,
    "variation_order": 1.9,
    "variation_roundoff": 1e-11,
    "variation_relative": 0.05,
    "vol_second_relative": 0.01,
    "convexity_relative": 0.05,
    "convexity_initial": 0.01,
    "calibration": 1e-6,
    "volume_gap": 1e-10,
    "energy_geodesic": 1e-4,
    "energy_control": 1e-2,
    "velocity_form": 1e-6,
    "convexity_floor": 1e-12,
    "transport": 1e-6,
}

# Scenario verbs understood by the runner
SCENARIO_VERBS = (
    "cc",
    "cc-exact",
    "calabi-product",
    "flux",
    "geodesic",
    "convexity",
    "variations",
    "identities",
)


def tolerance(name: str, overrides: Optional[Mapping[str, float]] = None) -> float:
    """Look up a named tolerance, honouring overrides."""
    if overrides and name in overrides:
        return float(overrides[name])
    try:
        return TOLERANCES[name]
    except KeyError:
        raise ConfigError(f"unknown tolerance '{name}'") from None


def merge_tolerances(*layers: Optional[Mapping[str, float]]) -> Dict[str, float]:
    """Merge tolerance layers left to right and validate the result."""
    merged = dict(TOLERANCES)
    for layer in layers:
        if not layer:
            continue
        for name, value in layer.items():
            if name not in TOLERANCES:
                raise ConfigError(f"unknown tolerance '{name}'")
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"tolerance '{name}' is not a number: {value!r}") from None
            if not value > 0.0:
                raise ConfigError(f"tolerance '{name}' must be positive, got {value}")
            merged[name] = value
    return merged
