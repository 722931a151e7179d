import numpy as np
import pytest
from numpy.testing import assert_allclose

from ruc import fixtures
from ruc.cellspec import CellSpec
from ruc.elements import kinematics
from ruc.equivalence import BoundaryRegion, EquivalenceRelation
from ruc.fem import Solver
from ruc.tiling import TilingError, find_copies, tile_mesh, verify_equivalence

from .conftest import sym


@pytest.fixture(scope="module")
def checker_tiling():
    spec = fixtures.checkerboard_spec()
    return spec, tile_mesh(spec, fixtures.checkerboard_mesh(), fixtures.checkerboard_uc_spec().bbox)


class TestFindCopies:
    def test_checkerboard_copy_count(self, checkerboard):
        copies = find_copies(checkerboard, fixtures.checkerboard_uc_spec().bbox)
        assert len(copies) == 8
        assert copies[0].chain == ()
        for c in copies:
            assert_allclose(np.abs(c.Q) @ np.ones(2), np.ones(2))

    def test_honeycomb_copy_count(self, honeycomb):
        assert len(find_copies(honeycomb, fixtures.honeycomb_uc_spec().bbox)) == 4

    def test_place_pull_round_trip(self, checkerboard):
        y = np.array([[0.1, -0.2], [0.3, 0.25]])
        for c in find_copies(checkerboard, fixtures.checkerboard_uc_spec().bbox):
            assert_allclose(c.pull(c.place(y)), y, atol=1e-15)

    def test_target_not_a_multiple(self, checkerboard):
        with pytest.raises(TilingError):
            find_copies(checkerboard, [[-0.5, 1.0], [-0.25, 0.25]])

    def test_rotation_rejected(self):
        c, s = np.cos(0.3), np.sin(0.3)
        rel = EquivalenceRelation("R", np.array([[c, -s], [s, c]]), np.zeros(2),
                                  BoundaryRegion([1.0, 0.0], [1.0, 1.0]))
        spec = CellSpec(2, [[0, 1], [0, 1]], [rel])
        with pytest.raises(TilingError):
            find_copies(spec, [[0, 2], [0, 2]])


class TestTileMesh:
    def test_volume_and_orientation(self, checker_tiling):
        _, t = checker_tiling
        _, wdet, _ = kinematics(t.mesh.element_coords())
        assert np.all(wdet > 0)
        assert_allclose(wdet.sum(), 4.0, rtol=1e-14)

    def test_shared_nodes_merged(self, checker_tiling):
        _, t = checker_tiling
        # 16 x 8 elements on a 2 x 2 box
        assert t.mesh.n_nodes == 17 * 17
        assert len(t.mesh.elements) == 8 * 32

    def test_materials_follow_copies(self, checker_tiling):
        spec, t = checker_tiling
        src = fixtures.checkerboard_mesh()
        assert np.array_equal(t.mesh.materials, src.materials[t.element_source])
        # the tiled structure is a checkerboard: phase depends on the square
        centres = t.mesh.element_coords().mean(axis=1)
        sq = np.floor(centres - [0.0, 0.25]).astype(int)
        parity = sq.sum(axis=1) % 2
        assert np.array_equal(t.mesh.materials, np.where(parity == 0, 1, 2))


class TestVerifyEquivalence:
    def test_checkerboard_fields(self, checker_tiling):
        spec, t = checker_tiling
        mats = fixtures.checkerboard_materials()
        rs = Solver(fixtures.checkerboard_mesh(), spec, mats)
        us = Solver(t.mesh, fixtures.checkerboard_uc_spec(), mats)
        for eps in (np.diag([0.01, -0.004]), sym([[0, 0.01], [0, 0]])):
            rep = verify_equivalence(us.solve(eps), rs.solve(eps), t)
            assert rep.passed(1e-8), rep.to_json()
            assert rep.points == len(t.mesh.elements) * 4

    def test_wrong_gamma_fails(self, checker_tiling):
        spec, t = checker_tiling
        mats = fixtures.checkerboard_materials()
        rs = Solver(fixtures.checkerboard_mesh(), spec, mats)
        us = Solver(t.mesh, fixtures.checkerboard_uc_spec(), mats)
        eps = sym([[0, 0.01], [0, 0]])
        wrong = {"L": 1, "R": 1, "B": 1, "T": 1}
        rep = verify_equivalence(us.solve(eps), rs.solve(eps, gammas=wrong, strict=False), t)
        assert rep.residual > 1e-2
        assert not rep.passed()
