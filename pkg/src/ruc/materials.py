"""Linear elastic constituents keyed by element material tag."""

import json

import numpy as np

from .voigt import voigt_size


class MaterialError(ValueError):
    pass


def isotropic_3d(E, nu):
    """Voigt stiffness (11, 22, 33, 23, 13, 12) for engineering shear strains."""
    if E <= 0 or not -1.0 < nu < 0.5:
        raise MaterialError(f"isotropic constants out of range: E={E}, nu={nu}")
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[:3, :3] += 2 * mu * np.eye(3)
    C[3:, 3:] = mu * np.eye(3)
    return C


def reduce_to_2d(C3, plane="strain"):
    """In-plane (11, 22, 12) stiffness from a 3D Voigt stiffness.

    Plane strain keeps the in-plane rows and columns; plane stress condenses
    out the out-of-plane stress components.
    """
    keep = [0, 1, 5]
    if plane == "strain":
        return C3[np.ix_(keep, keep)].copy()
    if plane == "stress":
        S = np.linalg.inv(C3)
        return np.linalg.inv(S[np.ix_(keep, keep)])
    raise MaterialError(f"plane must be 'strain' or 'stress', got {plane!r}")


class Material:
    """Either isotropic ``(E, nu)`` or a full symmetric Voigt stiffness ``C``.

    A full stiffness may be given in 3D form (6x6), usable in any dimension,
    or directly in 2D form (3x3), usable only in 2D.
    """

    def __init__(self, E=None, nu=None, C=None, name=""):
        self.name = name
        if C is not None:
            C = np.array(C, dtype=float)
            if C.shape not in ((3, 3), (6, 6)):
                raise MaterialError(f"stiffness must be 3x3 or 6x6, got {C.shape}")
            if np.max(np.abs(C - C.T)) > 1e-12 * np.max(np.abs(C)):
                raise MaterialError(f"stiffness of material {name!r} is not symmetric")
            if np.linalg.eigvalsh(C).min() <= 0:
                raise MaterialError(f"stiffness of material {name!r} is not positive definite")
            self._C = C
            self.E = self.nu = None
        else:
            if E is None or nu is None:
                raise MaterialError("need E and nu, or C")
            self._C = isotropic_3d(float(E), float(nu))
            self.E, self.nu = float(E), float(nu)

    def stiffness(self, dim, plane="strain"):
        if len(self._C) == voigt_size(dim):
            return self._C.copy()
        if dim == 2:
            return reduce_to_2d(self._C, plane)
        raise MaterialError(f"material {self.name!r} has a 2D stiffness; cannot use it in 3D")

    def to_json(self):
        if self.E is not None:
            return {"E": self.E, "nu": self.nu}
        return {"C": self._C.tolist()}

    @classmethod
    def from_json(cls, obj, name=""):
        if "C" in obj:
            return cls(C=obj["C"], name=name)
        return cls(E=obj["E"], nu=obj["nu"], name=name)


class MaterialTable(dict):
    """``{tag: Material}``; tags are ints as used in the mesh."""

    def stiffness_stack(self, tags, dim, plane="strain"):
        """Per-element stiffness array ``(n_elem, m, m)``."""
        tags = np.asarray(tags)
        m = voigt_size(dim)
        out = np.empty((len(tags), m, m))
        for tag in np.unique(tags):
            if int(tag) not in self:
                raise MaterialError(f"no material defined for tag {int(tag)}")
            out[tags == tag] = self[int(tag)].stiffness(dim, plane)
        return out

    def to_json(self):
        return {"materials": {str(k): v.to_json() for k, v in sorted(self.items())}}

    @classmethod
    def from_json(cls, obj):
        mats = obj.get("materials", obj)
        return cls({int(k): Material.from_json(v, name=str(k)) for k, v in mats.items()})

    @classmethod
    def homogeneous(cls, E=1.0, nu=0.3, tags=(1,)):
        return cls({int(t): Material(E=E, nu=nu, name=str(t)) for t in tags})


def load_materials(path):
    with open(path) as fh:
        return MaterialTable.from_json(json.load(fh))
