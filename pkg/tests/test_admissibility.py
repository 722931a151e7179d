import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ruc.admissibility import (
    EnumerationBoundError,
    Inadmissible,
    InconsistentGammas,
    check_admissibility,
    enumerate_load_cases,
    orbit_average,
    signed_point_group,
)
from ruc.cellspec import CellSpec, classical_uc_spec
from ruc.equivalence import BoundaryRegion, EquivalenceRelation
from ruc.voigt import congruence_operator, from_mandel, to_mandel, voigt_to_strain

from .conftest import sym


def strain3(e11=0, e22=0, e33=0, e23=0, e13=0, e12=0):
    return np.array([[e11, e12, e13], [e12, e22, e23], [e13, e23, e33]], dtype=float)


def signed_permutations(dim):
    out = []
    for perm in itertools.permutations(range(dim)):
        for signs in itertools.product((1, -1), repeat=dim):
            T = np.zeros((dim, dim))
            T[range(dim), perm] = signs
            out.append(T)
    return out


def random_spec(rng, dim, n):
    perms = signed_permutations(dim)
    rels = [EquivalenceRelation(f"R{k}", perms[rng.integers(len(perms))], np.zeros(dim),
                                BoundaryRegion(-np.ones(dim), np.ones(dim))) for k in range(n)]
    return CellSpec(dim, [[-1, 1]] * dim, rels)


def brute_force(spec, eps, tol=1e-12):
    """All sign vectors satisfying every relation; None if there is none."""
    scale = np.max(np.abs(eps))
    ok = []
    for signs in itertools.product((1, -1), repeat=len(spec.relations)):
        if all(np.max(np.abs(eps - g * r.T @ eps @ r.T.T)) <= tol * scale
               for g, r in zip(signs, spec.relations)):
            ok.append(signs)
    return ok


class TestCheckAdmissibility:
    def test_woven_in_plane_case(self, woven):
        res = check_admissibility(woven, strain3(e11=0.01, e22=-0.02, e33=0.005, e12=0.003))
        assert res
        assert res.vector == [1, 1, 1, 1, 1, 1]

    def test_woven_out_of_plane_shear(self, woven):
        res = check_admissibility(woven, strain3(e13=0.01, e23=0.02))
        assert res.vector == [1, 1, -1, -1, 1, 1]
        assert res.gammas["Z"] == 1

    def test_woven_mixed_is_inadmissible(self, woven):
        res = check_admissibility(woven, strain3(e11=0.01, e13=0.01))
        assert isinstance(res, Inadmissible)
        assert res.relation in ("E3", "E4")
        assert res.residual > 0
        assert "E3" in res.message() or "E4" in res.message()

    def test_translation_only_spec(self):
        spec = classical_uc_spec([[0, 1], [0, 1], [0, 1]], np.eye(3))
        rng = np.random.default_rng(3)
        for _ in range(10):
            res = check_admissibility(spec, sym(rng.normal(size=(3, 3))))
            assert res.vector == [1, 1, 1]

    def test_honeycomb_shear(self, honeycomb):
        s = 0.01
        res = check_admissibility(honeycomb, np.array([[0, s], [s, 0]]))
        assert res.vector == [1, -1, -1]
        assert res.gammas["E4"] == -1

    def test_zero_strain_is_all_plus(self, woven):
        res = check_admissibility(woven, np.zeros((3, 3)))
        assert res.vector == [1] * 6

    def test_scaling_invariance(self, honeycomb):
        eps = np.array([[0.3, 0.0], [0.0, -0.1]])
        ref = check_admissibility(honeycomb, eps).vector
        for a in (1e-9, -2.0, 1e6):
            assert check_admissibility(honeycomb, a * eps).vector == ref

    def test_shape_check(self, honeycomb):
        with pytest.raises(ValueError):
            check_admissibility(honeycomb, np.zeros((3, 3)))


class TestEnumerate:
    def test_woven_table(self, woven):
        cases = enumerate_load_cases(woven)
        assert [c.vector for c in cases] == [[1, 1, 1, 1, 1, 1], [1, 1, -1, -1, 1, 1]]
        assert cases[0].components() == ["eps11", "eps22", "eps33", "eps12"]
        assert sorted(cases[1].components()) == ["eps13", "eps23"]

    def test_honeycomb_table(self, honeycomb):
        cases = enumerate_load_cases(honeycomb)
        assert [c.vector for c in cases] == [[1, 1, 1], [1, -1, -1]]
        assert cases[0].components() == ["eps11", "eps22"]
        assert cases[1].components() == ["eps12"]

    def test_translation_only(self):
        spec = classical_uc_spec([[0, 1], [0, 2]], [[1, 0], [0, 2]])
        cases = enumerate_load_cases(spec)
        assert len(cases) == 1
        assert cases[0].vector == [1, 1]
        assert cases[0].dim == 3

    def test_basis_is_orthonormal_and_invariant(self, woven):
        for case in enumerate_load_cases(woven):
            B = case.basis
            assert_allclose(B @ B.T, np.eye(case.dim), atol=1e-12)
            for eps in case.tensors():
                for r in woven.relations:
                    g = case.gammas[r.label]
                    assert np.max(np.abs(eps - g * r.T @ eps @ r.T.T)) <= 1e-12

    def test_enumeration_bound(self):
        rels = [EquivalenceRelation(f"R{k}", np.eye(2), np.zeros(2), BoundaryRegion([0, 0], [1, 1]))
                for k in range(25)]
        with pytest.raises(EnumerationBoundError):
            enumerate_load_cases(CellSpec(2, [[0, 1], [0, 1]], rels))

    def test_voigt_operator(self):
        rng = np.random.default_rng(4)
        for T in signed_permutations(3)[::5]:
            a = sym(rng.normal(size=(3, 3)))
            assert_allclose(from_mandel(congruence_operator(T) @ to_mandel(a)), T @ a @ T.T, atol=1e-13)


class TestAgainstBruteForce:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.integers(1, 4))
    def test_verdict_and_determined_signs(self, seed, dim, n):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, dim, n)
        cases = enumerate_load_cases(spec)
        for k in range(8):
            if k % 2 and cases:
                # draw from an admissible subspace half the time
                c = cases[rng.integers(len(cases))]
                eps = from_mandel(rng.normal(size=c.dim) @ c.basis)
            else:
                eps = sym(rng.normal(size=(dim, dim)))
            ok = brute_force(spec, eps)
            res = check_admissibility(spec, eps)
            assert bool(res) == bool(ok)
            if ok:
                for i, r in enumerate(spec.relations):
                    signs = {s[i] for s in ok}
                    if len(signs) == 1:
                        assert res.gammas[r.label] == signs.pop()
                assert any(c.contains(eps, 1e-9) and c.vector == res.vector for c in cases)


class TestPointGroup:
    def test_honeycomb_shear_group(self, honeycomb):
        group = signed_point_group(honeycomb, {"E1": 1, "E2": -1, "E3": -1, "E4": -1})
        assert len(group) == 4
        s = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(orbit_average(s, group), s)
        assert_allclose(orbit_average(np.diag([1.0, 2.0]), group), 0, atol=1e-15)

    def test_wrong_signs_are_detected(self, honeycomb):
        with pytest.raises(InconsistentGammas):
            signed_point_group(honeycomb, {"E1": -1, "E2": -1, "E3": -1, "E4": -1})

    def test_projection_onto_case(self, woven):
        case = enumerate_load_cases(woven)[0]
        group = signed_point_group(woven, case.gammas)
        eps = voigt_to_strain(np.arange(1.0, 7.0))
        assert_allclose(to_mandel(orbit_average(eps, group)), case.projector @ to_mandel(eps), atol=1e-14)
