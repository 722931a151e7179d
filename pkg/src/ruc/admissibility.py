"""Load admissibility, load reversal factors and the catalogue of load cases.

A macro strain ``eps`` is admissible for a cell when, for every relation,
``eps = gamma_i T_i eps T_i^t`` with ``gamma_i`` in {+1, -1}.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .voigt import (
    component_names,
    congruence_operator,
    from_mandel,
    strain_to_voigt,
    to_mandel,
    voigt_size,
)

MAX_RELATIONS = 24
NULL_RTOL = 1e-10


class EnumerationBoundError(ValueError):
    pass


class InconsistentGammas(ValueError):
    """Some transform carries both signs in the generated point group."""


@dataclass
class GammaAssignment:
    """Load reversal factor and residual of every relation (primary and dependent)."""

    gammas: dict
    residuals: dict
    primary: list

    @property
    def vector(self):
        return [self.gammas[k] for k in self.primary]

    def to_json(self):
        return {"admissible": True, "gamma": self.vector, "labels": self.primary,
                "all_gammas": self.gammas, "residuals": self.residuals}


@dataclass
class Inadmissible:
    """Witness of inadmissibility: the worst relation and its best residual."""

    relation: str
    residual: float
    residuals: dict = field(default_factory=dict)
    reason: str = ""

    def __bool__(self):
        return False

    def message(self):
        msg = (f"macro strain is not admissible: relation {self.relation} has residual "
               f"{self.residual:.3e} for both gamma = +1 and gamma = -1")
        return msg + (f" ({self.reason})" if self.reason else "")

    def to_json(self):
        return {"admissible": False, "relation": self.relation, "residual": self.residual,
                "residuals": self.residuals, "reason": self.reason}


def _residuals(T, eps):
    teps = T @ eps @ T.T
    return float(np.max(np.abs(eps - teps))), float(np.max(np.abs(eps + teps)))


def check_admissibility(spec, eps, tol=1e-12):
    """Find the load reversal factors making ``eps`` admissible.

    The residual test is ``||eps - gamma T eps T^t||_inf <= tol * ||eps||_inf``.
    When both signs pass (only for a vanishing strain) +1 is chosen.

    Returns
    -------
    GammaAssignment or Inadmissible
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (spec.dim, spec.dim):
        raise ValueError(f"strain must be {spec.dim}x{spec.dim}, got shape {eps.shape}")
    scale = float(np.max(np.abs(eps)))
    thresh = tol * scale
    gammas, residuals = {}, {}
    worst = None
    for r in spec.relations:
        rp, rm = _residuals(r.T, eps)
        if rp <= thresh:
            gammas[r.label], residuals[r.label] = 1, rp
        elif rm <= thresh:
            gammas[r.label], residuals[r.label] = -1, rm
        else:
            best = min(rp, rm)
            residuals[r.label] = best
            if worst is None or best > worst[1]:
                worst = (r.label, best)
    if worst is not None:
        return Inadmissible(worst[0], worst[1], residuals)
    # a dependent relation must agree with the factor its primaries imply
    for r in spec.dependent:
        implied = 1
        for dep in r.gamma_follows:
            implied *= gammas[dep]
        if implied != gammas[r.label] and scale > 0:
            rp, rm = _residuals(r.T, eps)
            return Inadmissible(r.label, rp if implied == 1 else rm, residuals,
                                reason=f"gamma of {r.label} is fixed by {list(r.gamma_follows)}")
        gammas[r.label] = implied
    return GammaAssignment(gammas, residuals, [r.label for r in spec.primary])


@dataclass
class LoadCase:
    """Admissible strain subspace together with its load reversal factors.

    ``basis`` rows are Mandel vectors, orthonormal in the Frobenius product.
    """

    gammas: dict
    primary: list
    basis: np.ndarray

    @property
    def vector(self):
        return [self.gammas[k] for k in self.primary]

    @property
    def dim(self):
        return len(self.basis)

    @property
    def projector(self):
        return self.basis.T @ self.basis

    def tensors(self):
        return from_mandel(self.basis)

    def basis_voigt(self):
        """Basis as engineering-shear Voigt strain vectors."""
        return strain_to_voigt(self.tensors())

    def components(self, tol=1e-12):
        """Names of the Voigt components spanned by the subspace."""
        d = np.diag(self.projector)
        m = len(d)
        dim = 2 if m == 3 else 3
        return [f"eps{n}" for k, n in enumerate(component_names(dim)) if d[k] > tol]

    def contains(self, eps, tol=1e-12):
        v = to_mandel(np.asarray(eps, dtype=float))
        n = np.linalg.norm(v)
        return bool(np.linalg.norm(v - self.projector @ v) <= tol * max(n, 1e-300))

    def to_json(self):
        return {"gamma": self.vector, "labels": self.primary, "components": self.components(),
                "basis_voigt": np.round(self.basis_voigt(), 15).tolist()}


def _nullspace(A):
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, vt = np.linalg.svd(A)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > NULL_RTOL * smax)) if smax > 0 else 0
    return vt[rank:].T


def _canonical_basis(N):
    """Deterministic orthonormal basis of span(N): Gram-Schmidt of its projector columns."""
    P = N @ N.T
    out = []
    for k in range(P.shape[1]):
        v = P[:, k].copy()
        for b in out:
            v -= (b @ v) * b
        n = np.linalg.norm(v)
        if n > 1e-8:
            out.append(v / n)
        if len(out) == N.shape[1]:
            break
    basis = np.array(out).reshape(-1, P.shape[0])
    basis[np.abs(basis) < 1e-15] = 0.0
    return basis


def _subspace_contains(big, small, tol=1e-9):
    P = big.T @ big
    return bool(np.all(np.linalg.norm(small.T - P @ small.T, axis=0) <= tol))


def enumerate_load_cases(spec):
    """All maximal admissible load cases, largest subspace first.

    Every sign vector over the primary relations is tried; dependent relations
    take the product sign of the primaries they follow. Ties in subspace
    dimension are ordered lexicographically in gamma with +1 before -1.
    """
    primary = spec.primary
    n = len(primary)
    if n > MAX_RELATIONS:
        raise EnumerationBoundError(f"{n} relations exceed the enumeration bound of {MAX_RELATIONS}")
    m = voigt_size(spec.dim)
    ops = {r.label: congruence_operator(r.T) for r in spec.relations}
    labels = [r.label for r in primary]
    found = []
    for signs in itertools.product((1, -1), repeat=n):
        g = spec.full_gammas(dict(zip(labels, signs)))
        A = np.vstack([np.eye(m) - g[r.label] * ops[r.label] for r in spec.relations]) \
            if spec.relations else np.zeros((0, m))
        N = _nullspace(A)
        if N.shape[1]:
            found.append(LoadCase(g, labels, _canonical_basis(N)))
    maximal = [c for c in found
               if not any(o is not c and o.dim > c.dim and _subspace_contains(o.basis, c.basis)
                          for o in found)]
    maximal.sort(key=lambda c: (-c.dim, tuple(0 if x == 1 else 1 for x in c.vector)))
    return maximal


def signed_point_group(spec, gammas):
    """Closure of ``{(gamma_i, T_i)}`` under multiplication.

    Returns a list of ``(g, Q)`` with the identity first. The group is what the
    copies of the cell making up the full structure carry, so averaging a
    quantity over it maps a cell average onto the average over the structure.
    """
    d = spec.dim
    gens = [(int(gammas[r.label]), np.array(r.T)) for r in spec.relations]
    elems = [(1, np.eye(d))]
    keys = {tuple(np.round(np.eye(d), 9).ravel()): 1}
    frontier = list(elems)
    while frontier:
        nxt = []
        for g0, Q0 in frontier:
            for g1, Q1 in gens:
                g, Q = g0 * g1, Q0 @ Q1
                key = tuple(np.round(Q, 9).ravel())
                if key in keys:
                    if keys[key] != g:
                        raise InconsistentGammas(
                            "the load reversal factors give one transform both signs; "
                            "the load is not admissible with these factors")
                    continue
                keys[key] = g
                elems.append((g, Q))
                nxt.append((g, Q))
                if len(elems) > 1000:
                    raise ValueError("point group of the relations is not finite")
        frontier = nxt
    return elems


def orbit_average(tensor, group):
    """``(1/|G|) sum g Q X Q^t`` for a second order tensor (or stack)."""
    X = np.asarray(tensor, dtype=float)
    out = np.zeros_like(X)
    for g, Q in group:
        out += g * (Q @ X @ Q.T)
    return out / len(group)
