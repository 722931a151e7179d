"""Bundled cells: the 3D woven rUC, the honeycomb rUC and a two-phase
checkerboard, each with a symmetry-compatible structured mesh.

Lengths are in the cell frame with the origin at the box centre.
"""

import numpy as np

from .cellspec import CellSpec, Kind, classical_uc_spec
from .equivalence import BoundaryRegion, EquivalenceRelation
from .materials import Material, MaterialTable
from .mesh import structured_mesh

MINUS_I3 = -np.eye(3)
ROT_Z = np.diag([-1.0, -1.0, 1.0])


def _rel(label, T, offset, lo, hi, gamma_follows=None):
    return EquivalenceRelation(label, np.array(T, float), np.array(offset, float),
                               BoundaryRegion(np.array(lo, float), np.array(hi, float)),
                               gamma_follows)


def woven_spec(w=2.0, l=4.0, t=1.0):
    """Plain-weave rUC, box ``w x l x t``.

    Relations E1..E6 link the in-plane facets; the dependent relation ``Z``
    makes the through-thickness facets periodic.
    """
    hw, hl, ht = w / 2, l / 2, t / 2
    rels = [
        _rel("E1", MINUS_I3, (w, -hl, 0), (hw, -hl, -ht), (hw, 0, ht)),
        _rel("E2", np.eye(3), (w, hl, 0), (hw, 0, -ht), (hw, hl, ht)),
        _rel("E3", ROT_Z, (0, l, 0), (-hw, hl, -ht), (hw, hl, ht)),
        _rel("E4", ROT_Z, (-w, hl, 0), (-hw, 0, -ht), (-hw, hl, ht)),
        _rel("E5", np.eye(3), (-w, -hl, 0), (-hw, -hl, -ht), (-hw, 0, ht)),
        _rel("E6", MINUS_I3, (0, -l, 0), (-hw, -hl, -ht), (hw, -hl, ht)),
        _rel("Z", np.eye(3), (0, 0, t), (-hw, -hl, ht), (hw, hl, ht), gamma_follows=()),
    ]
    bbox = [[-hw, hw], [-hl, hl], [-ht, ht]]
    return CellSpec(3, bbox, rels, Kind.rUC, name="woven3d")


def woven_mesh(w=2.0, l=4.0, t=1.0, shape=(4, 4, 2)):
    """Two-phase structured mesh: yarn-like upper band over the lower half of y."""
    bbox = [[-w / 2, w / 2], [-l / 2, l / 2], [-t / 2, t / 2]]

    def tag(c):
        return np.where((c[:, 2] > 0) ^ (c[:, 1] > 0), 1, 2)

    return structured_mesh(bbox, shape, tag)


def honeycomb_dims(a=1.0):
    return np.sqrt(3.0) / 4 * a, 1.5 * a


def honeycomb_spec(a=1.0):
    """Regular hexagonal honeycomb of wall length ``a``; box ``w x l``.

    E1..E3 link the side and bottom facets. The dependent mirror ``E4`` on
    the top facet follows the sign of ``E3``.
    """
    w, l = honeycomb_dims(a)
    hw, hl = w / 2, l / 2
    rels = [
        _rel("E1", -np.eye(2), (w, 0), (hw, -hl), (hw, hl)),
        _rel("E2", np.diag([-1.0, 1.0]), (-w, 0), (-hw, -hl), (-hw, hl)),
        _rel("E3", np.diag([1.0, -1.0]), (0, -l), (-hw, -hl), (hw, -hl)),
        _rel("E4", np.diag([1.0, -1.0]), (0, l), (-hw, hl), (hw, hl), gamma_follows=("E3",)),
    ]
    return CellSpec(2, [[-hw, hw], [-hl, hl]], rels, Kind.rUC, name="honeycomb")


def _segment_distance(p, a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    ab = b - a
    s = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + s[:, None] * ab), axis=1)


def honeycomb_mesh(a=1.0, shape=(12, 40), thickness=0.1):
    """Walls (tag 1) resolved with continuum elements inside a soft filler (tag 2)."""
    w, l = honeycomb_dims(a)
    hw, hl = w / 2, l / 2
    # half of a vertical wall on the left facet and half of a slanted wall
    walls = [((-hw, -hl), (-hw, -0.25 * a)), ((-hw, -0.25 * a), (hw, 0.0))]

    def tag(c):
        d = np.min([_segment_distance(c, *s) for s in walls], axis=0)
        return np.where(d <= thickness / 2, 1, 2)

    return structured_mesh([[-hw, hw], [-hl, hl]], shape, tag)


def honeycomb_materials():
    return MaterialTable({1: Material(E=1.0, nu=0.3, name="wall"),
                          2: Material(E=1e-3, nu=0.3, name="filler")})


def honeycomb_uc_spec(a=1.0):
    """Four-copy cell of the honeycomb with translation-only relations."""
    w, l = honeycomb_dims(a)
    bbox = [[-1.5 * w, 0.5 * w], [-1.5 * l, 0.5 * l]]
    return classical_uc_spec(bbox, [[2 * w, -l], [0.0, 2 * l]], name="honeycomb-uc")


def checkerboard_spec(a=1.0):
    """One eighth of a checkerboard with square side ``a``: box ``a x a/2``.

    Left and right facets are mirrors, the bottom facet a mirror and the top
    facet a half-turn about its midpoint.
    """
    h = a / 2
    q = a / 4
    rels = [
        _rel("L", np.diag([-1.0, 1.0]), (-a, 0), (-h, -q), (-h, q)),
        _rel("R", np.diag([-1.0, 1.0]), (a, 0), (h, -q), (h, q)),
        _rel("B", np.diag([1.0, -1.0]), (0, -h), (-h, -q), (h, -q)),
        _rel("T", -np.eye(2), (0, h), (-h, q), (h, q)),
    ]
    return CellSpec(2, [[-h, h], [-q, q]], rels, Kind.rUC, name="checkerboard")


def checkerboard_mesh(a=1.0, shape=(8, 4)):
    """Phase 1 for ``x < 0``, phase 2 for ``x > 0``."""
    h, q = a / 2, a / 4
    return structured_mesh([[-h, h], [-q, q]], shape, lambda c: np.where(c[:, 0] < 0, 1, 2))


def checkerboard_materials():
    return MaterialTable({1: Material(E=1.0, nu=0.3, name="soft"),
                          2: Material(E=10.0, nu=0.2, name="stiff")})


def checkerboard_uc_spec(a=1.0):
    bbox = [[-a / 2, 1.5 * a], [-0.75 * a, 1.25 * a]]
    return classical_uc_spec(bbox, [[2 * a, 0.0], [0.0, 2 * a]], name="checkerboard-uc")


def woven_materials():
    return MaterialTable({1: Material(E=10.0, nu=0.25, name="yarn"),
                          2: Material(E=1.0, nu=0.35, name="matrix")})
