import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from ruc import fixtures
from ruc.cellspec import CellSpec, classical_uc_spec
from ruc.elements import InvertedElement, element_stiffness, kinematics
from ruc.fem import SingularSystem, Solver, assemble, homogenize, volume_average
from ruc.materials import Material, MaterialTable, isotropic_3d, reduce_to_2d
from ruc.mesh import Mesh, structured_mesh
from ruc.tiling import tile_mesh
from ruc.voigt import strain_to_voigt, stress_to_voigt

from .conftest import sym


def q4_oracle_k00(E, nu):
    """K[0, 0] of a unit-square Q4 in plane strain by symbolic integration."""
    x, y = sp.symbols("x y")
    N0 = (1 - x) * (1 - y)
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    # u = (N0, 0): eps_xx = dN0/dx, gamma_xy = dN0/dy
    dens = (lam + 2 * mu) * sp.diff(N0, x) ** 2 + mu * sp.diff(N0, y) ** 2
    return float(sp.integrate(dens, (x, 0, 1), (y, 0, 1)))


UNIT_Q4 = np.array([[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]])


class TestElements:
    def test_q4_corner_entry(self):
        C = reduce_to_2d(isotropic_3d(1.0, 0.0), "strain")
        K = element_stiffness(UNIT_Q4, C[None])[0]
        assert q4_oracle_k00(sp.Integer(1), sp.Integer(0)) == 0.5
        assert_allclose(K[0, 0], 0.5, rtol=1e-14)

    def test_q4_matches_oracle_with_poisson(self):
        C = reduce_to_2d(isotropic_3d(2.0, 0.3), "strain")
        K = element_stiffness(UNIT_Q4, C[None])[0]
        assert_allclose(K[0, 0], q4_oracle_k00(sp.Integer(2), sp.Rational(3, 10)), rtol=1e-13)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_rigid_motions_in_kernel(self, dim):
        bbox = [[0, 1.5], [0, 1.0], [0, 0.7]][:dim]
        mesh = structured_mesh(bbox, (3, 2, 2)[:dim])
        K = assemble(mesh, MaterialTable.homogeneous(), "strain").toarray()
        x = mesh.nodes
        for k in range(dim):
            t = np.zeros_like(x)
            t[:, k] = 1.0
            assert np.abs(K @ t.ravel()).max() < 1e-12
        W = np.zeros((dim, dim))
        W[0, 1], W[1, 0] = 1.0, -1.0
        assert np.abs(K @ (x @ W.T).ravel()).max() < 1e-12
        assert_allclose(K, K.T, atol=1e-13)

    def test_assembly_linear_in_modulus(self, checkerboard_mesh):
        a = assemble(checkerboard_mesh, MaterialTable.homogeneous(1.0, 0.3, (1, 2)))
        b = assemble(checkerboard_mesh, MaterialTable.homogeneous(3.5, 0.3, (1, 2)))
        assert_allclose(b.toarray(), 3.5 * a.toarray(), rtol=1e-14, atol=1e-14)

    def test_inverted_element(self):
        with pytest.raises(InvertedElement):
            kinematics(UNIT_Q4[:, [0, 3, 2, 1]])

    def test_volume_from_weights(self, woven_mesh):
        _, wdet, _ = kinematics(woven_mesh.element_coords())
        assert_allclose(wdet.sum(), 2.0 * 4.0 * 1.0, rtol=1e-14)


def homogeneous(mesh, E=2.0, nu=0.3):
    return MaterialTable.homogeneous(E, nu, tuple(np.unique(mesh.materials)))


CASES = {
    "woven": [np.diag([0.01, -0.02, 0.005]) + sym([[0, 0.01, 0], [0, 0, 0], [0, 0, 0]]),
              sym([[0, 0, 0.01], [0, 0, -0.02], [0, 0, 0]])],
    "honeycomb": [np.diag([0.01, -0.004]), sym([[0, 0.01], [0, 0]])],
    "checkerboard": [np.diag([0.01, 0.003]), sym([[0, 0.01], [0, 0]])],
}


@pytest.fixture(params=sorted(CASES))
def cell(request):
    name = request.param
    spec = getattr(fixtures, f"{name}_spec")()
    mesh = getattr(fixtures, f"{name}_mesh")()
    mats = getattr(fixtures, f"{name}_materials")()
    return name, spec, mesh, mats


class TestSolve:
    def test_homogeneous_medium(self, cell):
        name, spec, mesh, _ = cell
        mats = homogeneous(mesh)
        solver = Solver(mesh, spec, mats)
        C = mats[1].stiffness(spec.dim)
        for eps in CASES[name]:
            sol = solver.solve(eps)
            expected = C @ strain_to_voigt(eps)
            assert_allclose(sol.stress_voigt, np.broadcast_to(expected, sol.stress_voigt.shape), atol=1e-12)
            assert np.abs(sol.fluctuation()).max() <= 1e-9 * np.abs(eps).max() * spec.diag

    def test_average_strain_recovered(self, cell):
        name, spec, mesh, mats = cell
        solver = Solver(mesh, spec, mats)
        for eps in CASES[name]:
            sol = solver.solve(eps)
            assert_allclose(sol.macro_strain(), eps, atol=1e-9 * np.abs(eps).max())
            assert np.abs(sol.macro_rotation()).max() <= 1e-9 * np.abs(eps).max()

    def test_hill_mandel(self, cell):
        name, spec, mesh, mats = cell
        solver = Solver(mesh, spec, mats)
        for eps in CASES[name]:
            sol = solver.solve(eps)
            macro = float(np.sum(sol.macro_stress() * sol.macro_strain()))
            assert_allclose(sol.energy_average(), macro, rtol=1e-9)

    def test_constraints_and_fluctuation_relation(self, cell):
        name, spec, mesh, mats = cell
        solver = Solver(mesh, spec, mats)
        eps = CASES[name][-1]
        sol = solver.solve(eps)
        assert sol.n_equations > 0
        assert sol.constraint_residual < 1e-10
        ustar = sol.fluctuation()
        for p in solver.pairs:
            g = p.map.gamma(sol.gammas)
            assert_allclose(ustar[p.slave], g * p.map.T @ ustar[p.master], atol=1e-10 * spec.diag)

    def test_heterogeneous_field_fluctuates(self):
        spec, mesh = fixtures.checkerboard_spec(), fixtures.checkerboard_mesh()
        sol = Solver(mesh, spec, fixtures.checkerboard_materials()).solve(np.diag([0.01, 0.0]))
        assert np.abs(sol.fluctuation()).max() > 1e-4

    def test_raw_average_is_not_the_macro_average(self):
        # the rUC alone does not see the whole orbit of the load
        spec, mesh = fixtures.checkerboard_spec(), fixtures.checkerboard_mesh()
        sol = Solver(mesh, spec, fixtures.checkerboard_materials()).solve(np.diag([0.01, 0.0]))
        assert np.abs(sol.raw_stress() - sol.macro_stress()).max() > 1e-3

    def test_missing_constraints_are_singular(self):
        spec = CellSpec(2, [[0, 1], [0, 1]], [])
        mesh = structured_mesh(spec.bbox, (2, 2))
        with pytest.raises(SingularSystem):
            Solver(mesh, spec, MaterialTable.homogeneous()).solve(np.diag([0.01, 0.0]))

    def test_mesh_spec_dimension_mismatch(self, woven, checkerboard_mesh):
        with pytest.raises(ValueError):
            Solver(checkerboard_mesh, woven, MaterialTable.homogeneous(tags=(1, 2)))


class TestHomogenize:
    def test_homogeneous_recovers_material(self, cell):
        name, spec, mesh, _ = cell
        mats = homogeneous(mesh)
        H = homogenize(mesh, spec, mats)
        assert H.mask.all()
        C = mats[1].stiffness(spec.dim)
        assert_allclose(H.C, C, atol=1e-9 * np.abs(C).max())

    def test_honeycomb_normal_shear_decoupled(self, honeycomb, honeycomb_mesh):
        H = homogenize(honeycomb_mesh, honeycomb, fixtures.honeycomb_materials())
        C = H.C
        assert np.abs(C[:2, 2]).max() <= 1e-12 * np.abs(C).max()
        assert np.abs(C[2, :2]).max() <= 1e-12 * np.abs(C).max()
        assert H.asymmetry < 1e-8
        assert np.all(np.linalg.eigvalsh(C) > 0)

    def test_stiffness_symmetric_positive(self, woven, woven_mesh):
        H = homogenize(woven_mesh, woven, fixtures.woven_materials())
        assert H.asymmetry < 1e-9
        assert np.all(np.linalg.eigvalsh(H.C) > 0)
        # Voigt bound: the effective stiffness never exceeds the phase average
        _, wdet, _ = kinematics(woven_mesh.element_coords())
        stack = fixtures.woven_materials().stiffness_stack(woven_mesh.materials, 3)
        voigt = np.tensordot(wdet.sum(axis=1), stack, axes=1) / wdet.sum()
        assert np.linalg.eigvalsh(voigt - H.C).min() > -1e-10

    def test_refinement_softens(self, checkerboard):
        mats = fixtures.checkerboard_materials()
        c11 = []
        for n in (1, 2, 4):
            mesh = fixtures.checkerboard_mesh(shape=(4 * n, 2 * n))
            c11.append(homogenize(mesh, checkerboard, mats).C[0, 0])
        assert c11[0] > c11[1] > c11[2]

    def test_plane_stress_is_softer(self, checkerboard, checkerboard_mesh):
        mats = fixtures.checkerboard_materials()
        strain = homogenize(checkerboard_mesh, checkerboard, mats, "strain").C
        stress = homogenize(checkerboard_mesh, checkerboard, mats, "stress").C
        assert np.all(np.diag(stress) <= np.diag(strain) + 1e-14)
        assert stress[0, 0] < strain[0, 0]

    def test_plane_stress_homogeneous(self, checkerboard, checkerboard_mesh):
        mats = MaterialTable.homogeneous(1.0, 0.25, (1, 2))
        H = homogenize(checkerboard_mesh, checkerboard, mats, "stress")
        assert_allclose(H.C[0, 0], 1.0 / (1 - 0.25 ** 2), rtol=1e-12)

    def test_classical_cell_matches_reduced(self):
        # the full checkerboard under classical periodicity gives the same answer
        spec, mesh = fixtures.checkerboard_spec(), fixtures.checkerboard_mesh()
        mats = fixtures.checkerboard_materials()
        uc = fixtures.checkerboard_uc_spec()
        full = tile_mesh(spec, mesh, uc.bbox).mesh
        a = homogenize(mesh, spec, mats).C
        b = homogenize(full, uc, mats).C
        assert_allclose(a, b, atol=1e-8 * np.abs(b).max())


def test_volume_average_weights():
    field = np.arange(8.0).reshape(2, 4)
    w = np.array([[1.0, 1.0, 1.0, 1.0], [3.0, 3.0, 3.0, 3.0]])
    assert_allclose(volume_average(field, w), (1.5 * 4 + 5.5 * 12) / 16)


def test_material_tag_lookup_error(checkerboard, checkerboard_mesh):
    with pytest.raises(Exception):
        Solver(checkerboard_mesh, checkerboard, MaterialTable({1: Material(1.0, 0.3)}))


def test_stress_macro_matches_energy_for_unit_strain(checkerboard, checkerboard_mesh):
    mats = fixtures.checkerboard_materials()
    solver = Solver(checkerboard_mesh, checkerboard, mats)
    eps = np.diag([1.0, 0.0])
    sol = solver.solve(eps)
    C = homogenize(checkerboard_mesh, checkerboard, mats, solver=solver).C
    assert_allclose(stress_to_voigt(sol.macro_stress()), C[:, 0], rtol=1e-12, atol=1e-14)
    assert_allclose(sol.energy_average(), C[0, 0], rtol=1e-9)


def test_single_element_classical_cell():
    spec = classical_uc_spec([[0, 1], [0, 1]], [[1, 0], [0, 1]])
    mesh = Mesh(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), np.array([[0, 1, 2, 3]]), np.array([1]))
    sol = Solver(mesh, spec, MaterialTable.homogeneous()).solve(np.diag([0.01, 0.0]))
    assert_allclose(sol.macro_strain(), np.diag([0.01, 0.0]), atol=1e-15)
