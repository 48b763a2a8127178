#!/usr/bin/env python3
"""
Tests for the geometric core: differential forms, model manifolds and Lagrangian meshes.
"""

import sys
import math
import argparse
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import sympy as sp
from scipy import special

sys.path.append(str(Path(__file__).parent))

from lagcal.core.geom_core import (
    DifferentialForm,
    TangentVectorAtPoint,
    exterior_derivative,
    finite_difference_d,
    hamiltonian_field,
    hamiltonian_vector_field,
    interior_product,
    lie_derivative,
    liouville_field,
    poisson_bracket,
    poisson_bracket_values,
    pullback_by_projection,
    wedge,
    wedge_power,
)
from lagcal.core.isotopy import HamiltonianFamily, flow_path
from lagcal.core.lag_mesh import (
    LagMesh,
    MeshOneForm,
    exact_graph_mesh,
    export_scalar_field,
    flat_torus_mesh,
    graph_mesh,
    integrate_top_form,
    lagrangian_defect,
    mesh_from_immersion,
    mesh_from_text,
    mesh_gradient,
    mesh_to_text,
    plane_mesh,
    pullback_values,
    recover_potential,
    restrict_function,
    tangent_frame,
)
from lagcal.core.models import catalog_names, load_model, model_from_dict, model_to_dict, product_model
from lagcal.utils.errors import (
    ConfigError,
    DegenerateImmersionError,
    DegreeError,
    InconsistentStructureError,
    MeshError,
    NotExactError,
)
from lagcal.utils.expressions import coordinate_symbols
from lagcal.utils.testing import SuiteTester, configure_test_logging

logger = configure_test_logging(__name__)


class GeometryTester(SuiteTester):
    """Forms, models and meshes."""

    suite_name = "geometry"

    def __init__(self):
        super().__init__(logger)
        self.t2 = load_model("t2_cy")
        self.t4 = load_model("t2n_cy")
        self.r2 = load_model("r2")
        logger.info("🧪 GeometryTester initialized")

    def tests(self):
        return [
            ("Wedge Product", self.test_wedge_product),
            ("Exterior Derivative", self.test_exterior_derivative),
            ("d Squared", self.test_d_squared),
            ("Interior Product", self.test_interior_product),
            ("Hamiltonian Conventions", self.test_hamiltonian_conventions),
            ("Jacobi Identity", self.test_jacobi_identity),
            ("Form Calculus", self.test_form_calculus),
            ("Cartan Formula Along a Flow", self.test_cartan_along_flow),
            ("Model Catalog", self.test_model_catalog),
            ("Model Description", self.test_model_description),
            ("Lagrangian Defect", self.test_lagrangian_defect),
            ("Tangent Frames", self.test_tangent_frames),
            ("Torus Potential Recovery", self.test_torus_potential_recovery),
            ("Box Potential Recovery", self.test_box_potential_recovery),
            ("Non-exact Form", self.test_non_exact_form),
            ("Top-form Quadrature", self.test_top_form_quadrature),
            ("Quadrature Convergence", self.test_quadrature_convergence),
            ("Malformed Meshes", self.test_malformed_meshes),
            ("Mesh Text and CSV", self.test_mesh_text_and_csv),
        ]

    def test_wedge_product(self) -> bool:
        dx = DifferentialForm(2, 1, {(0,): 1})
        dy = DifferentialForm(2, 1, {(1,): 1})
        point = (0.3, 0.7)
        ok = self.close(float(np.real(wedge(dx, dy).at(point)[(0, 1)])), 1.0, 1e-15, "dx^dy")
        ok &= self.close(float(np.real(wedge(dy, dx).at(point)[(0, 1)])), -1.0, 1e-15, "dy^dx")
        ok &= self.check(wedge(dx, dx).is_zero, "dx^dx should vanish")
        ok &= self.raises(DegreeError, wedge, wedge(dx, dy), dx)
        return ok

    def test_exterior_derivative(self) -> bool:
        alpha = DifferentialForm(2, 1, {(0,): "y*sin(2*pi*x)"})
        points = self.t2.sample_points(32, seed=5)
        analytic = exterior_derivative(alpha)
        numeric = finite_difference_d(alpha)
        x = points[:, 0]
        expected = -np.sin(2 * np.pi * x)
        a_vals = np.real(analytic.coefficient_values(points)[(0, 1)])
        n_vals = np.real(numeric.coefficient_values(points)[(0, 1)])
        ok = self.check(np.max(np.abs(a_vals - expected)) < 1e-12, "symbolic d(y sin 2πx dx) is wrong")
        ok &= self.check(np.max(np.abs(n_vals - expected)) < 1e-6, "finite-difference d disagrees")
        ok &= self.raises(DegreeError, exterior_derivative, DifferentialForm(2, 2, {(0, 1): "x"}))
        return ok

    def test_d_squared(self) -> bool:
        ok = True
        checked = 0
        for name in catalog_names():
            model = load_model(name)
            points = model.sample_points(16, seed=11)
            forms = [model.liouville_primitive, model.gamma_primitive]
            if model.holo_volume is not None:
                forms.append(model.holo_volume.real_part())
            for form in forms:
                if form is None or form.degree + 2 > model.dim:
                    continue
                checked += 1
                ok &= self.check(exterior_derivative(exterior_derivative(form)).is_zero,
                                 f"{name}: symbolic d∘d of a degree-{form.degree} form is not zero")
                twice = finite_difference_d(finite_difference_d(form, 1e-3), 1e-3).max_abs(points)
                ok &= self.check(twice < 1e-8, f"{name}: finite-difference d∘d residual {twice:.3e}")
                mixed = finite_difference_d(exterior_derivative(form), 1e-2).max_abs(points)
                ok &= self.check(mixed < 1e-12, f"{name}: d of the analytic d residual {mixed:.3e}")
        ok &= self.check(checked >= 4, f"only {checked} catalog forms admit d∘d")

        # centered differences of centered differences commute, so the O(step²) term shows up
        # only when the inner d is exact
        wavy = DifferentialForm(4, 1, {(0,): "cos(2*pi*(x1 + 2*y1))*sin(2*pi*x2)",
                                       (2,): "sin(2*pi*x1)*cos(4*pi*y2)"})
        points = self.t4.sample_points(16, seed=12)
        exact_first = exterior_derivative(wavy)
        coarse = finite_difference_d(exact_first, 1e-2).max_abs(points)
        fine = finite_difference_d(exact_first, 5e-3).max_abs(points)
        ok &= self.check(coarse > 1e-4, f"d∘d residual {coarse:.3e} too small to show its order")
        ok &= self.close(coarse / fine, 4.0, 0.1, "d∘d residual ratio when the step halves")
        twice = finite_difference_d(finite_difference_d(wavy, 1e-3), 1e-3).max_abs(points)
        ok &= self.check(twice < 1e-6, f"finite-difference d∘d of a trigonometric form {twice:.3e}")
        return ok

    def test_interior_product(self) -> bool:
        area = DifferentialForm(2, 2, {(0, 1): 1})
        v = TangentVectorAtPoint(np.array([0.1, 0.2]), np.array([1.0, 0.0]))
        contracted = interior_product(v, area).at((0.1, 0.2))
        ok = self.close(float(np.real(contracted.get((1,), 0.0))), 1.0, 1e-15, "i_∂x (dx^dy) on dy")
        ok &= self.close(float(np.real(contracted.get((0,), 0.0))), 0.0, 1e-15, "i_∂x (dx^dy) on dx")
        ok &= self.raises(DegreeError, interior_product, v, DifferentialForm.constant_function(2, 1))
        return ok

    def test_hamiltonian_conventions(self) -> bool:
        xi = hamiltonian_vector_field(self.t2, "y", (0.2, 0.4)).components
        ok = self.check(np.allclose(xi, [1.0, 0.0]), f"xi_y should be d/dx, got {xi}")
        rot = hamiltonian_vector_field(self.r2, "0.5*(x^2 + y^2)", (0.3, -0.2)).components
        ok &= self.check(np.allclose(rot, [-0.2, -0.3]), f"rotation field wrong: {rot}")
        ok &= self.close(poisson_bracket(self.t2, "x", "y", (0.5, 0.5)), -1.0, 1e-12, "{x, y}")
        return ok

    @staticmethod
    def _random_polynomial(rng: np.random.Generator, symbols, terms: int = 6, degree: int = 3) -> sp.Expr:
        expr = sp.Integer(0)
        for _ in range(terms):
            # index len(symbols) stands for the constant factor
            factors = rng.integers(0, len(symbols) + 1, size=degree)
            monomial = sp.Mul(*[symbols[int(i)] for i in factors if i < len(symbols)])
            expr += sp.Float(round(float(rng.normal()), 3)) * monomial
        return expr

    def test_jacobi_identity(self) -> bool:
        symbols = coordinate_symbols(self.t4.dim)
        points = self.t4.sample_points(64, seed=9)

        def bracket(F, G):
            field = hamiltonian_field(self.t4, F)
            return sp.expand(sum(c * sp.diff(G, s) for c, s in zip(field, symbols)))

        ok = True
        for seed in (1, 2, 3):
            rng = np.random.default_rng(seed)
            F, G, K = (self._random_polynomial(rng, symbols) for _ in range(3))
            terms = [poisson_bracket_values(self.t4, bracket(F, G), K, points),
                     poisson_bracket_values(self.t4, bracket(G, K), F, points),
                     poisson_bracket_values(self.t4, bracket(K, F), G, points)]
            size = max(float(np.max(np.abs(term))) for term in terms)
            residual = float(np.max(np.abs(sum(terms))))
            logger.info(f"  seed {seed}: nested brackets up to {size:.3e}, Jacobi residual {residual:.3e}")
            ok &= self.check(size > 1e-6, f"seed {seed}: nested brackets vanish identically")
            ok &= self.check(residual < 1e-8, f"seed {seed}: Jacobi residual {residual:.3e}")
        return ok

    def test_form_calculus(self) -> bool:
        point = (0.3, -0.4, 0.2, 0.5)
        volume = wedge_power(load_model("c2_cy").omega, 2)
        ok = self.close(float(np.real(volume.at(point)[(0, 1, 2, 3)])), 2.0, 1e-15, "omega^2 on C^2")
        lifted = pullback_by_projection(self.r2.omega, 2, 1)
        ok &= self.check(list(lifted.coefficients) == [(2, 3)], f"p2^* omega lands on {list(lifted.coefficients)}")

        exact = load_model("r2_exact")
        xi = liouville_field(exact)
        on_omega = lie_derivative(xi, exact.omega).at((0.3, 0.7))
        on_beta = lie_derivative(xi, exact.beta).at((0.3, 0.7))
        ok &= self.close(float(np.real(on_omega[(0, 1)])), 1.0, 1e-6, "L_xi omega = omega")
        ok &= self.close(float(np.real(on_beta[(1,)])), 0.5, 1e-6, "L_xi beta = c beta")
        ok &= self.raises(InconsistentStructureError, exact.with_primitives, exact.gamma_primitive, 1.0)

        product = product_model(1)
        ok &= self.close(product.scaling_constant, 1.0, 0.0, "product scaling constant")
        ok &= self.check(product.primitive_identity_residual() < 1e-12, "product primitives inconsistent")
        metric = product.metric_matrix(product.sample_points(4, seed=3))
        ok &= self.check(np.allclose(metric, np.eye(4)), "product metric should be Euclidean")
        return ok

    def test_cartan_along_flow(self) -> bool:
        H = "0.02*sin(2*pi*x)*cos(2*pi*y)"
        path = flow_path(graph_mesh(self.t2, 64, "0.1*sin(2*pi*x)"), HamiltonianFamily.from_expression(H, 2), 200)
        field = hamiltonian_field(self.t2, H)
        dt = float(path.times[1] - path.times[0])
        ok = True
        for form in (self.t2.holo_volume.real_part(), self.t2.beta):
            transported = lie_derivative(field, form)
            for j in (50, 150):
                rate = (pullback_values(path.meshes[j + 1], form) - pullback_values(path.meshes[j - 1], form)) / (2 * dt)
                expected = pullback_values(path.meshes[j], transported)
                error = float(np.max(np.abs(rate - expected)))
                ok &= self.check(float(np.max(np.abs(expected))) > 1e-3, f"{form.name}: L_v rho vanishes on the mesh")
                ok &= self.check(error < 1e-5, f"{form.name} at t={path.times[j]:.3f}: d/dt f_t*rho off by {error:.3e}")
        return ok

    def test_model_catalog(self) -> bool:
        ok = True
        for name in catalog_names():
            model = load_model(name)
            residuals = model.validate()
            ok &= self.check(all(v < 1e6 for v in residuals.values()), f"{name} residuals {residuals}")
        exact = load_model("r2_exact")
        ok &= self.close(exact.scaling_constant, 0.5, 0.0, "r2_exact scaling constant")
        ok &= self.check(self.t4.is_torus and self.t4.n == 2, "t2n_cy should be a 4-torus")
        ok &= self.raises(ConfigError, load_model, "no_such_model")
        return ok

    def test_model_description(self) -> bool:
        data = model_to_dict(load_model("r2_exact"))
        rebuilt = model_from_dict(data)
        points = rebuilt.sample_points(16, seed=2)
        ok = self.check(rebuilt.name == "r2_exact", "model name lost")
        ok &= self.check(np.allclose(rebuilt.omega_matrix(points), load_model("r2_exact").omega_matrix(points)),
                         "omega changed in the description")
        broken = dict(data, colour="blue")
        ok &= self.raises(ConfigError, model_from_dict, broken)
        return ok

    def test_lagrangian_defect(self) -> bool:
        exact = exact_graph_mesh(self.t4, 16, "0.05*sin(2*pi*x1)*cos(2*pi*x2)")
        skew = graph_mesh(self.t4, 16, ["0.1*sin(2*pi*x2)", "0"])
        ok = self.check(lagrangian_defect(exact) < 1e-8, f"exact graph defect {lagrangian_defect(exact):.3e}")
        ok &= self.close(lagrangian_defect(skew), 0.2 * math.pi, 1e-8, "skew graph defect")
        ok &= self.close(lagrangian_defect(flat_torus_mesh(self.t2, 32)), 0.0, 0.0, "curve defect")
        return ok

    def test_tangent_frames(self) -> bool:
        (v,) = tangent_frame(flat_torus_mesh(self.t2, 32), 3)
        ok = self.check(np.allclose(v.base, [3 / 32, 0.0], atol=1e-15), f"frame based at {v.base}")
        ok &= self.check(np.allclose(v.components, [1.0, 0.0], atol=1e-12), f"flat circle frame {v.components}")

        c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
        plane = plane_mesh(load_model("c2_cy"), 9, angle=math.pi / 4)
        first, second = tangent_frame(plane, (1, 2))
        ok &= self.check(np.allclose(first.components, [c, s, 0.0, 0.0], atol=1e-12), "plane frame along u1")
        ok &= self.check(np.allclose(second.components, [0.0, 0.0, c, s], atol=1e-12), "plane frame along u2")
        ok &= self.check(lagrangian_defect(plane) < 1e-12, "rotated plane is Lagrangian")
        ok &= self.raises(MeshError, tangent_frame, plane, (9, 0))
        return ok

    def test_torus_potential_recovery(self) -> bool:
        mesh = flat_torus_mesh(self.t2, 64)
        target = restrict_function(mesh, "cos(2*pi*x)")
        h = recover_potential(mesh, mesh_gradient(mesh, target))
        error = float(np.max(np.abs(h.values - target.values)))
        ok = self.check(error < 1e-10, f"recovered potential off by {error:.3e}")
        ok &= self.check(h.residual < 1e-10, f"gradient residual {h.residual:.3e}")
        return ok

    def test_box_potential_recovery(self) -> bool:
        mesh = graph_mesh(self.r2, 257, 0)
        target = restrict_function(mesh, "bump(x/0.7)")
        h = recover_potential(mesh, mesh_gradient(mesh, target), "compact-support")
        error = float(np.max(np.abs(h.values - target.values)))
        ok = self.check(error < 1e-8, f"compactly supported potential off by {error:.3e}")
        ok &= self.check(np.all(h.values[mesh.collar_mask] == 0.0), "potential must vanish on the collar")
        return ok

    def test_non_exact_form(self) -> bool:
        mesh = flat_torus_mesh(self.t2, 32)
        alpha = MeshOneForm(mesh, np.full((32, 1), 0.3))
        try:
            recover_potential(mesh, alpha)
        except NotExactError as exc:
            return self.close(exc.cycle_integrals[0], 0.3, 1e-12, "reported loop sum")
        logger.error("0.3 dx was accepted as exact")
        return False

    def test_top_form_quadrature(self) -> bool:
        mesh = flat_torus_mesh(self.t2, 32)
        re_omega = self.t2.holo_volume.real_part()
        ok = self.close(integrate_top_form(mesh, re_omega), 1.0, 1e-12, "int re Omega over the flat circle")
        reversed_mesh = flat_torus_mesh(self.t2, 32, orientation=-1)
        ok &= self.close(integrate_top_form(reversed_mesh, re_omega), -1.0, 1e-12, "reversed orientation")
        return ok

    def test_quadrature_convergence(self) -> bool:
        # cos(2π y) dx on y = 0.2 sin(2πx) integrates to J0(0.4π)
        wave = DifferentialForm(2, 1, {(0,): "cos(2*pi*y)"})
        exact = float(special.j0(0.4 * np.pi))
        coarse, fine = (abs(integrate_top_form(graph_mesh(self.t2, N, "0.2*sin(2*pi*x)"), wave) - exact)
                        for N in (8, 16))
        logger.info(f"  periodic trapezoid errors: N=8 {coarse:.3e}, N=16 {fine:.3e}")
        ok = self.check(coarse > 1e-8, f"N=8 already exact ({coarse:.3e}); nothing to compare")
        ok &= self.check(fine < 1e-13, f"doubling N left a periodic quadrature error of {fine:.3e}")

        growth = DifferentialForm(2, 1, {(0,): "exp(x)"})
        exact = 2.0 * math.sinh(1.0)
        errors = [abs(integrate_top_form(graph_mesh(self.r2, N, 0), growth) - exact) for N in (17, 33)]
        order = math.log2(errors[0] / errors[1])
        ok &= self.check(errors[0] > 1e-9, f"Simpson error {errors[0]:.3e} too small to show its order")
        ok &= self.check(order > 3.8, f"Simpson observed order {order:.2f}, expected 4")
        return ok

    def test_malformed_meshes(self) -> bool:
        points = np.stack([np.arange(16) / 16, np.zeros(16)], axis=-1)
        ok = self.raises(MeshError, LagMesh, self.t2, "torus", points, ((0.0, 1.0),), np.array([[0.5, 0.0]]))
        ok &= self.raises(MeshError, LagMesh, self.t2, "sphere", points, ((0.0, 1.0),))
        collapsed = mesh_from_immersion(self.t2, "torus", 16, lambda grid: np.zeros(grid.shape[:-1] + (2,)))
        ok &= self.raises(DegenerateImmersionError, lambda: collapsed.frames)
        return ok

    def test_mesh_text_and_csv(self) -> bool:
        mesh = graph_mesh(self.t2, 16, "0.1*sin(2*pi*x)")
        rebuilt = mesh_from_text(mesh_to_text(mesh))
        ok = self.check(np.array_equal(rebuilt.points, mesh.points), "mesh text changed the points")
        ok &= self.check(rebuilt.domain == "torus" and np.array_equal(rebuilt.winding, mesh.winding),
                         "mesh text lost the domain or winding")
        with tempfile.TemporaryDirectory() as tmp:
            path = export_scalar_field(mesh, restrict_function(mesh, "x"), Path(tmp) / "field.csv", name="h")
            frame = pd.read_csv(path)
        ok &= self.check(list(frame.columns) == ["u", "x", "y", "h"], f"CSV columns {list(frame.columns)}")
        ok &= self.check(len(frame) == 16, "one CSV row per node")
        return ok


def test_geometry_suite():
    assert GeometryTester().run_all_tests()


def main():
    parser = argparse.ArgumentParser(description="lagcal geometry tests")
    parser.add_argument("--verbose", action="store_true", help="Verbose output")
    args = parser.parse_args()
    configure_test_logging(__name__, args.verbose)
    return GeometryTester().run_all_tests()


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
