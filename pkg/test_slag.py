#!/usr/bin/env python3
"""
Tests for the almost Calabi-Yau layer: phase, calibration, variations, geodesics and energy.
"""

import sys
import math
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent))

from lagcal.core.functionals import cc_prefix_values, energy
from lagcal.core.isotopy import HamiltonianFamily, reparametrize_path
from lagcal.core.lag_mesh import flat_torus_mesh, graph_mesh, mesh_from_immersion, restrict_function, tilted_circle_mesh
from lagcal.core.models import load_model
from lagcal.core.slag import (
    Perturbation,
    calibration_residual,
    cc_first_variation,
    cc_second_variation_critical,
    energy_stationarity_residual,
    geodesic_cc_convexity,
    geodesic_potential_residual,
    geodesic_shoot,
    horizontal_transport_residual,
    horizontal_velocity,
    laplace_beltrami,
    perturbed_path,
    phase_field,
    rho_field,
    special_defect,
    vol_first_variation,
    vol_second_variation,
    volume_bound_gap,
)
from lagcal.utils.errors import (
    LeavesAlmostCalibratedError,
    NonCriticalError,
    PartialPathError,
    PreconditionError,
)
from lagcal.utils.testing import SuiteTester, configure_test_logging

logger = configure_test_logging(__name__)

AMPLITUDE = 0.05


class SlagTester(SuiteTester):
    """Phase, calibration, variations and geodesics on the flat torus."""

    suite_name = "slag"

    def __init__(self):
        super().__init__(logger)
        self.t2 = load_model("t2_cy")
        self.flat = flat_torus_mesh(self.t2, 64)
        self.graph = graph_mesh(self.t2, 64, "0.1*sin(2*pi*x)")
        self.k = restrict_function(self.flat, "cos(2*pi*x)")
        self.generator = restrict_function(self.flat, f"{AMPLITUDE}*cos(2*pi*x)")
        self._record = None
        logger.info("🧪 SlagTester initialized")

    @property
    def record(self):
        if self._record is None:
            self._record = geodesic_shoot(self.flat, self.generator, 1.0, 50)
        return self._record

    def tests(self):
        return [
            ("Density Field", self.test_density_field),
            ("Phase Field", self.test_phase_field),
            ("Calibration", self.test_calibration),
            ("First Variations", self.test_first_variations),
            ("Second Variation of C", self.test_cc_second_variation),
            ("Second Variation of Volume", self.test_vol_second_variation),
            ("Horizontal Lift", self.test_horizontal_lift),
            ("Geodesic Shooting", self.test_geodesic_shooting),
            ("Convexity", self.test_convexity),
            ("Partial Geodesic", self.test_partial_geodesic),
            ("Energy Stationarity", self.test_energy_stationarity),
            ("Default Perturbation Profile", self.test_default_profile),
        ]

    def test_density_field(self) -> bool:
        points = self.t2.sample_points(32, seed=1)
        ok = self.check(np.max(np.abs(rho_field(self.t2, points))) < 1e-14, "rho must vanish on the flat torus")
        scaled = replace(self.t2, name="t2_scaled", holo_volume=self.t2.holo_volume.scaled(2))
        rho = rho_field(scaled, points)
        ok &= self.check(np.allclose(rho, 2.0 * math.log(2.0), atol=1e-12), f"rho for 2 Omega is {rho[0]:.6f}")
        return ok

    def test_phase_field(self) -> bool:
        phase = phase_field(self.flat)
        ok = self.check(np.max(np.abs(phase.theta.values)) < 1e-12, "flat circle has phase 0")
        ok &= self.check(phase.winding == (0,) and phase.in_positive_cone, "flat circle phase data wrong")
        tilted = phase_field(tilted_circle_mesh(self.t2, 64))
        ok &= self.check(np.allclose(tilted.theta.values, math.pi / 4, atol=1e-12), "tilted circle has phase π/4")
        round_circle = mesh_from_immersion(
            self.t2, "torus", 64,
            lambda grid: 0.5 + 0.2 * np.stack([np.cos(2 * np.pi * grid[..., 0]),
                                               np.sin(2 * np.pi * grid[..., 0])], axis=-1))
        winding = phase_field(round_circle)
        ok &= self.check(winding.winding == (1,), f"round circle phase winds {winding.winding}")
        ok &= self.check(not winding.in_positive_cone, "a winding phase cannot stay in the positive cone")
        return ok

    def test_calibration(self) -> bool:
        ok = self.check(special_defect(self.flat) < 1e-12, "flat circle is special Lagrangian")
        ok &= self.close(special_defect(tilted_circle_mesh(self.t2, 64)), math.sqrt(0.5), 1e-12,
                         "special defect of the tilted circle")
        ok &= self.close(volume_bound_gap(self.flat), 0.0, 1e-12, "volume gap on the flat circle")
        ok &= self.check(volume_bound_gap(self.graph) > 1e-3, "a wavy graph must beat the calibrated bound")
        ok &= self.check(calibration_residual(self.graph) < 1e-10,
                         f"|Omega(frame)|^2 = e^rho vol^2 off by {calibration_residual(self.graph):.3e}")
        return ok

    def test_first_variations(self) -> bool:
        k = restrict_function(self.graph, "cos(2*pi*x)")
        ok = self.close(cc_first_variation(self.graph, k), 0.1 * math.pi, 1e-10, "int k beta on the graph")
        ok &= self.close(cc_first_variation(self.flat, self.k), 0.0, 1e-12, "int k beta on the flat circle")
        ok &= self.close(vol_first_variation(self.flat, self.k), 0.0, 1e-12, "volume is critical at the flat circle")
        ok &= self.check(abs(vol_first_variation(self.graph, k)) > 1e-3, "wavy graph is not volume-critical")
        return ok

    def test_cc_second_variation(self) -> bool:
        ok = self.close(cc_second_variation_critical(self.flat, self.k), 2.0 * math.pi ** 2, 1e-9,
                        "int |dk|^2 on the flat circle")
        ok &= self.raises(NonCriticalError, cc_second_variation_critical, tilted_circle_mesh(self.t2, 64),
                          np.cos(2 * np.pi * np.arange(64) / 64))
        return ok

    def test_vol_second_variation(self) -> bool:
        laplacian = laplace_beltrami(self.flat, self.k).values
        ok = self.check(np.allclose(laplacian, -(2 * np.pi) ** 2 * self.k.values, atol=1e-8),
                        "Laplacian of cos(2πx) is -(2π)^2 cos(2πx)")
        ok &= self.close(vol_second_variation(self.flat, self.k), (2 * np.pi) ** 4 / 2, 1e-6,
                         "int |Delta k|^2 on the flat circle")
        ok &= self.raises(NonCriticalError, vol_second_variation, self.graph,
                          restrict_function(self.graph, "cos(2*pi*x)"))
        return ok

    def test_horizontal_lift(self) -> bool:
        h = restrict_function(self.graph, "0.05*cos(2*pi*x)")
        lift = horizontal_velocity(self.graph, h)
        ok = self.check(lift.symplectic_residual < 1e-10, f"i_v omega - dh = {lift.symplectic_residual:.3e}")
        ok &= self.check(lift.calibration_residual < 1e-10, f"i_v re Omega = {lift.calibration_residual:.3e}")
        ok &= self.check(np.max(np.abs(lift.velocity[..., 0])) < 1e-12, "horizontal lift has no dx component")
        ok &= self.raises(LeavesAlmostCalibratedError, horizontal_velocity, self.graph, h, 0.99)
        return ok

    def test_geodesic_shooting(self) -> bool:
        record = self.record
        ok = self.check(record.path.steps == 50 and np.isclose(record.times[-1], 1.0), "geodesic sampling wrong")
        ok &= self.check(horizontal_transport_residual(record) < 1e-12, "re Omega not transported")
        ok &= self.check(geodesic_potential_residual(record) < 1e-9, "velocity potential drifts from h")
        ok &= self.close(energy(record.path), AMPLITUDE ** 2 / 2.0, 1e-9, "energy of the geodesic")
        shifted = restrict_function(self.flat, "1 + cos(2*pi*x)")
        ok &= self.raises(PreconditionError, geodesic_shoot, self.flat, shifted, 1.0, 10)
        return ok

    def test_convexity(self) -> bool:
        record = self.record
        expected = (2 * math.pi * AMPLITUDE) ** 2 / 2.0
        ok = self.close(geodesic_cc_convexity(record, 0.0), expected, 1e-10, "convexity at s = 0")
        ok &= self.close(geodesic_cc_convexity(record, 1.0), expected, 1e-9, "convexity at s = 1")
        prefix = cc_prefix_values(record.path)
        ds = 1.0 / record.path.steps
        second = (prefix[26] - 2.0 * prefix[25] + prefix[24]) / ds ** 2
        ok &= self.close(second, expected, 1e-3 * expected, "second difference of C along the geodesic")
        ok &= self.raises(PreconditionError, geodesic_cc_convexity, record, 0.013)
        return ok

    def test_partial_geodesic(self) -> bool:
        try:
            geodesic_shoot(self.flat, self.generator, 3.0, 30, cos_floor=0.5)
        except PartialPathError as exc:
            # slope 0.2*pi^2*s reaches sqrt(3) at s ~ 0.877
            ok = self.check(0.75 < exc.exit_time < 0.877, f"left the cone at t={exc.exit_time:.3f}")
            ok &= self.check(np.isclose(exc.path.times[-1], exc.exit_time), "partial path ends at the exit time")
            ok &= self.check(isinstance(exc.cause, LeavesAlmostCalibratedError), "cause not attached")
            return ok
        logger.error("geodesic past cos(theta) = 0.5 was not stopped")
        return False

    def test_energy_stationarity(self) -> bool:
        record = self.record
        perturbation = Perturbation(HamiltonianFamily.from_expression("cos(2*pi*x)", 2), "sin(pi*t)")
        stationary = energy_stationarity_residual(record, perturbation)
        control = energy_stationarity_residual(reparametrize_path(record.path, "t^2"), perturbation)
        ok = self.check(stationary < 1e-4, f"geodesic energy not stationary ({stationary:.3e})")
        ok &= self.check(control > 1e-2, f"control path looks stationary ({control:.3e})")
        ok &= self.raises(PreconditionError, energy_stationarity_residual, record,
                          Perturbation(perturbation.hamiltonian, "t"))
        return ok

    def test_default_profile(self) -> bool:
        longer = geodesic_shoot(self.flat, self.generator, 1.5, 30)
        K = HamiltonianFamily.from_expression("cos(2*pi*x)", 2)
        sigma = Perturbation(K).profile_values(longer.times)
        ok = self.check(sigma[0] == 0.0 and sigma[-1] == 0.0, "default profile moves the endpoints")
        ok &= self.close(sigma[15], 1.0, 1e-12, "default profile peaks mid-interval")
        moved = perturbed_path(longer.path, Perturbation(K), 1e-3)
        ok &= self.check(np.array_equal(moved.meshes[-1].points, longer.path.meshes[-1].points),
                         "perturbed family does not fix the final mesh")
        ok &= self.check(np.isfinite(energy_stationarity_residual(longer, Perturbation(K))),
                         "default profile rejected on [0, 1.5]")
        ok &= self.raises(PreconditionError, energy_stationarity_residual, longer, Perturbation(K, "sin(pi*t)"))
        return ok


def test_slag_suite():
    assert SlagTester().run_all_tests()


def main():
    parser = argparse.ArgumentParser(description="lagcal special Lagrangian tests")
    parser.add_argument("--verbose", action="store_true", help="Verbose output")
    args = parser.parse_args()
    configure_test_logging(__name__, args.verbose)
    return SlagTester().run_all_tests()


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
