#!/usr/bin/env python3
"""
Tests for the global functionals: C and its closed form, the Calabi chain, flux, volume and energy.
"""

import sys
import math
import argparse
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

sys.path.append(str(Path(__file__).parent))

from lagcal.core.functionals import (
    GridLoop,
    banyaga_value,
    calabi_product_path,
    cc_exact_closed_form,
    cc_invariant,
    cc_prefix_values,
    classical_calabi,
    energy,
    flux_pairing,
    flux_variation,
    liouville_gamma,
    product_beta,
    volume,
)
from lagcal.core.geom_core import DifferentialForm
from lagcal.core.isotopy import HamiltonianFamily, concatenate_paths, flow_path, translation_path
from lagcal.core.lag_mesh import flat_torus_mesh, graph_mesh, mesh_from_immersion
from lagcal.core.models import load_model
from lagcal.utils.errors import (
    LeavesAlmostCalibratedError,
    MeshError,
    NotHomogeneousError,
    PreconditionError,
)
from lagcal.utils.testing import SuiteTester, configure_test_logging

logger = configure_test_logging(__name__)


class FunctionalsTester(SuiteTester):
    """C, Calabi, flux, volume and energy."""

    suite_name = "functionals"

    def __init__(self):
        super().__init__(logger)
        self.t2 = load_model("t2_cy")
        self.t4 = load_model("t2n_cy")
        self.exact = load_model("r2_exact")
        self.graph = graph_mesh(self.t2, 64, "0.1*sin(2*pi*x)")
        self.H = HamiltonianFamily.from_expression(
            "0.1*sin(2*pi*y)*cos(2*pi*x) + 0.05*cos(2*pi*(x + t))", 2, support="normalized")
        self.K = HamiltonianFamily.from_expression("0.08*cos(2*pi*y)", 2, support="normalized")
        logger.info("🧪 FunctionalsTester initialized")

    def tests(self):
        return [
            ("Exact Closed Form", self.test_exact_closed_form),
            ("Liouville Scaling", self.test_liouville_scaling),
            ("Reparametrization Invariance", self.test_reparametrization_invariance),
            ("Concatenation and Backtracking", self.test_concatenation_and_backtracking),
            ("Prefix Values", self.test_prefix_values),
            ("Calabi Chain", self.test_calabi_chain),
            ("Translation Flux", self.test_translation_flux),
            ("Hamiltonian Flux", self.test_hamiltonian_flux),
            ("Flux Variation", self.test_flux_variation),
            ("Volume", self.test_volume),
            ("Energy", self.test_energy),
        ]

    def test_exact_closed_form(self) -> bool:
        bounds = ((-1.0, 1.0),)
        H = HamiltonianFamily.from_expression("-0.05*bump(x/0.7)", 2, box=bounds)
        mesh0 = graph_mesh(self.exact, 201, 0, bounds=bounds)
        path = flow_path(mesh0, H, 100)
        final = path.meshes[-1].points
        half_u_squared = 0.5 * float(simpson(final[:, 1] ** 2, x=final[:, 0]))
        value = cc_invariant(path)
        closed = cc_exact_closed_form(path.meshes[0], path.meshes[-1])
        ok = self.close(value, closed, 1e-6, "C against the primitive closed form")
        ok &= self.close(value, half_u_squared, 1e-6, "C against 1/2 int u^2")
        ok &= self.check(value > 0.0, "C of a non-trivial exact graph path must be positive")
        return ok

    def test_liouville_scaling(self) -> bool:
        data = liouville_gamma(self.exact)
        ok = self.close(data.c, 0.5, 1e-12, "scaling constant of dy under the radial field")
        ok &= self.check(data.model.gamma_primitive is not None, "gamma not installed on the model")
        bent = DifferentialForm(2, 1, {(1,): "x^2 + y"})
        ok &= self.raises(NotHomogeneousError, liouville_gamma, self.exact, bent)
        ok &= self.check(not product_beta(1).is_zero, "product beta vanished")
        return ok

    def test_reparametrization_invariance(self) -> bool:
        base = cc_invariant(flow_path(self.graph, self.H, 100))
        slowed = cc_invariant(flow_path(self.graph, self.H.reparametrized("t^2"), 100))
        shifted = cc_invariant(flow_path(self.graph, self.H.shifted("sin(t)"), 100))
        ok = self.close(slowed, base, 1e-6, "C after t -> t^2")
        ok &= self.close(shifted, base, 1e-6, "C after a normalized time shift")
        return ok

    def test_concatenation_and_backtracking(self) -> bool:
        first = flow_path(self.graph, self.H, 100)
        second = flow_path(first.meshes[-1], self.K, 100)
        back = flow_path(second.meshes[-1], self.K.reversed(), 100)
        a, b = cc_invariant(first), cc_invariant(second)
        ok = self.close(cc_invariant(concatenate_paths(first, second)), a + b, 1e-6, "C of a concatenation")
        ok &= self.close(cc_invariant(back), -b, 1e-6, "C of the reversed path")
        return ok

    def test_prefix_values(self) -> bool:
        path = flow_path(self.graph, self.H, 40)
        prefix = cc_prefix_values(path)
        ok = self.check(prefix[0] == 0.0 and len(prefix) == 41, "prefix values start at 0 with one per sample")
        ok &= self.close(float(prefix[-1]), cc_invariant(path), 1e-12, "last prefix value")
        joined = concatenate_paths(path, flow_path(path.meshes[-1], self.K, 10))
        ok &= self.raises(PreconditionError, cc_prefix_values, joined)
        return ok

    def test_calabi_chain(self) -> bool:
        H = HamiltonianFamily.from_expression("0.5*(1 + t)*bump(sqrt(x^2 + y^2)/0.6)", 2)
        calabi = classical_calabi(H, 60, 48)
        path = calabi_product_path(H, 1, 48, 60)
        value = cc_invariant(path)
        ok = self.close(value, calabi, 1e-3, "C of the product graph path")
        ok &= self.close(banyaga_value(path), calabi, 1e-3, "Banyaga value")
        ok &= self.check(calabi > 0.0, "positive Hamiltonian must have positive Calabi invariant")
        return ok

    def test_translation_flux(self) -> bool:
        mesh = flat_torus_mesh(self.t4, 16)
        ok = True
        for a in (0.1, 0.3):
            path = translation_path(mesh, (0.0, a, 0.0, 0.0))
            ok &= self.close(flux_pairing(path, GridLoop(0)), a, 1e-10, f"flux of translation by {a}")
            ok &= self.close(flux_pairing(path, GridLoop(0), scheme="bilinear"), a, 1e-10, "bilinear flux")
            ok &= self.close(flux_pairing(path, GridLoop(1)), 0.0, 1e-12, "flux along the other loop")
        ok &= self.raises(MeshError, flux_pairing, path, GridLoop(2))

        circle = flat_torus_mesh(self.t2, 32)
        lifted = flux_pairing(translation_path(circle, [0.0, 0.3], 8), GridLoop(0))
        ok &= self.close(lifted, 0.3, 1e-9, "{y = 0.3 t} sweeps flux 0.3")
        lowered = flux_pairing(translation_path(circle, [0.0, -0.3], 8), GridLoop(0), scheme="bilinear")
        ok &= self.close(lowered, -0.3, 1e-9, "{y = -0.3 t} sweeps flux -0.3")
        return ok

    def test_hamiltonian_flux(self) -> bool:
        mesh = flat_torus_mesh(self.t4, 16)
        H = HamiltonianFamily.from_expression(
            "0.05*sin(2*pi*(x1 + y2)) + 0.03*cos(2*pi*(y1 - x2) + t)", 4, support="normalized")
        path = flow_path(mesh, H, 100)
        worst = max(abs(flux_pairing(path, GridLoop(axis))) for axis in range(2))
        return self.check(worst < 1e-7, f"Hamiltonian path has flux {worst:.3e}")

    def test_flux_variation(self) -> bool:
        mesh = flat_torus_mesh(self.t4, 16)
        result = flux_variation(lambda s: translation_path(mesh, (0.0, s, 0.0, 0.0)), GridLoop(0), 0.2)
        ok = self.close(result.finite_difference, 1.0, 1e-8, "d/ds flux")
        ok &= self.close(result.loop_integral, 1.0, 1e-8, "loop integral of the endpoint variation")
        return ok

    def test_volume(self) -> bool:
        ok = self.close(volume(flat_torus_mesh(self.t2, 32)), 1.0, 1e-12, "flat circle length")
        circle = mesh_from_immersion(
            load_model("r2"), "torus", 64,
            lambda grid: 0.5 * np.stack([np.cos(2 * np.pi * grid[..., 0]), np.sin(2 * np.pi * grid[..., 0])], -1))
        ok &= self.close(volume(circle), math.pi, 1e-10, "round circle length")
        ok &= self.check(volume(self.graph) > 1.0, "a wavy graph is longer than the flat circle")
        return ok

    def test_energy(self) -> bool:
        eps = 0.05
        flat = flat_torus_mesh(self.t2, 64)
        path = flow_path(flat, HamiltonianFamily.from_expression(f"{eps}*cos(2*pi*x)", 2), 50)
        ok = self.close(energy(path), eps ** 2 / 2.0, 1e-9, "energy of the shearing path")
        ok &= self.check(energy(flow_path(self.graph, self.H, 20)) >= 0.0, "energy is never negative")
        steep = flow_path(self.graph, self.K, 5)
        ok &= self.raises(LeavesAlmostCalibratedError, energy, steep, 0.99)
        return ok


def test_functionals_suite():
    assert FunctionalsTester().run_all_tests()


def main():
    parser = argparse.ArgumentParser(description="lagcal functional tests")
    parser.add_argument("--verbose", action="store_true", help="Verbose output")
    args = parser.parse_args()
    configure_test_logging(__name__, args.verbose)
    return FunctionalsTester().run_all_tests()


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
