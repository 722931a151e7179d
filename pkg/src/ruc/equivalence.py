"""Equivalence relations between a cell and its adjacent sub-domains.

A relation links the frame of an adjacent sub-domain to the frame of the cell
being analysed through an orthogonal matrix ``T`` and the position ``offset``
of the neighbour's origin expressed in the cell frame. A boundary point
``x_hat`` of the cell is equivalent to ``T (x_hat - offset)``.

All geometry lives in the analysed cell's own frame; the neighbours' frames
are never stored.
"""

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-12
SYM_TOL = 1e-14


class TransformError(ValueError):
    """Matrix is not an admissible (orthogonal) frame transform."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def transform_defect(T):
    """Return ``(||T^t T - I||_inf, det T)``."""
    T = np.asarray(T, dtype=float)
    return float(np.max(np.abs(T.T @ T - np.eye(len(T))))), float(np.linalg.det(T))


def check_transform(T, tol=ORTHO_TOL):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] not in (2, 3):
        raise TransformError(f"transform must be 2x2 or 3x3, got shape {T.shape}")
    err, det = transform_defect(T)
    if err > tol or abs(abs(det) - 1.0) > tol:
        raise TransformError(
            f"transform is not orthogonal: ||T^t T - I|| = {err:.3e}, det = {det:.15g}")
    return T


def is_signed_permutation(T):
    T = np.asarray(T)
    if not np.all(np.isin(T, (-1.0, 0.0, 1.0))):
        return False
    return bool(np.all(np.abs(T).sum(axis=0) == 1) and np.all(np.abs(T).sum(axis=1) == 1))


@dataclass(frozen=True, eq=False)
class BoundaryRegion:
    """Axis-aligned closed box ``lo <= x <= hi``; ``lo == hi`` pins a coordinate."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(self.lo), _frozen(self.hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("region bounds must be 1-D of equal length")
        if np.any(hi < lo) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError(f"empty or non-finite region: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    @property
    def fixed_axes(self):
        return [k for k in range(self.dim) if self.lo[k] == self.hi[k]]

    def contains(self, points, tol=0.0):
        """Boolean mask of the points (``(n, d)`` or ``(d,)``) inside the region."""
        p = np.asarray(points, dtype=float)
        inside = (p >= self.lo - tol) & (p <= self.hi + tol)
        return np.all(inside, axis=-1)

    @classmethod
    def from_json(cls, obj, bbox):
        """Parse ``{"x": 0.5, "y": [lo, hi], ...}``; missing axes span the box."""
        names = "xyz"[: len(bbox)]
        unknown = set(obj) - set(names)
        if unknown:
            raise ValueError(f"unknown axes in source region: {sorted(unknown)}")
        lo, hi = [], []
        for k, name in enumerate(names):
            v = obj.get(name, list(bbox[k]))
            if isinstance(v, (int, float)):
                lo.append(float(v))
                hi.append(float(v))
            else:
                a, b = v
                lo.append(float(a))
                hi.append(float(b))
        return cls(np.array(lo), np.array(hi))

    def to_json(self):
        out = {}
        for k, name in enumerate("xyz"[: self.dim]):
            if self.lo[k] == self.hi[k]:
                out[name] = float(self.lo[k])
            else:
                out[name] = [float(self.lo[k]), float(self.hi[k])]
        return out


@dataclass(frozen=True, eq=False)
class EquivalenceRelation:
    """One adjacent sub-domain: ``x_A = T (x_hat - offset)`` for ``x_hat`` in ``source``.

    ``gamma_follows`` marks a dependent relation, one that is implied by the
    primary relations (a conjugate symmetry, or the through-thickness period
    of a plate-like cell). Its load reversal factor is the product of the
    factors of the listed primary relations (``()`` means always +1) and it
    is left out of load-case tables.
    """

    label: str
    T: np.ndarray
    offset: np.ndarray
    source: BoundaryRegion
    gamma_follows: tuple | None = None

    def __post_init__(self):
        T = _frozen(check_transform(self.T))
        offset = _frozen(self.offset)
        if offset.shape != (len(T),) or not np.all(np.isfinite(offset)):
            raise ValueError(f"relation {self.label}: offset must be a finite {len(T)}-vector")
        if self.source.dim != len(T):
            raise ValueError(f"relation {self.label}: source region has wrong dimension")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "offset", offset)
        if self.gamma_follows is not None:
            object.__setattr__(self, "gamma_follows", tuple(self.gamma_follows))

    @property
    def dim(self):
        return len(self.T)

    @property
    def det(self):
        return float(round(np.linalg.det(self.T)))

    @property
    def dependent(self):
        return self.gamma_follows is not None

    @property
    def is_translation(self):
        return bool(np.allclose(self.T, np.eye(self.dim), rtol=0, atol=ORTHO_TOL))

    def affine(self):
        """The point map as an :class:`AffineMap` (``x -> T x - T offset``)."""
        return AffineMap(self.T, -self.T @ self.offset)

    def to_json(self):
        out = {
            "label": self.label,
            "T": self.T.tolist(),
            "offset": self.offset.tolist(),
            "source": self.source.to_json(),
        }
        if self.gamma_follows is not None:
            out["gamma_follows"] = list(self.gamma_follows)
        return out

    @classmethod
    def from_json(cls, obj, bbox):
        return cls(
            label=str(obj["label"]),
            T=np.array(obj["T"], dtype=float),
            offset=np.array(obj["offset"], dtype=float),
            source=BoundaryRegion.from_json(obj.get("source", {}), bbox),
            gamma_follows=obj.get("gamma_follows"),
        )


def map_point(rel, x_hat):
    """Equivalent point ``T (x_hat - offset)``; accepts ``(d,)`` or ``(n, d)``."""
    x_hat = np.asarray(x_hat, dtype=float)
    return (x_hat - rel.offset) @ rel.T.T


def inverse_map(rel, x):
    """Inverse of :func:`map_point`: ``T^t x + offset``."""
    x = np.asarray(x, dtype=float)
    return x @ rel.T + rel.offset


def _check_gamma(gamma):
    if gamma not in (1, -1):
        raise ValueError(f"load reversal factor must be +1 or -1, got {gamma!r}")


def transform_strain(rel, gamma, eps_hat):
    """Strain at the equivalent point: ``gamma T eps_hat T^t``.

    Works for stresses as well, and for stacks ``(..., d, d)``.
    """
    _check_gamma(gamma)
    eps_hat = np.asarray(eps_hat, dtype=float)
    return gamma * (rel.T @ eps_hat @ rel.T.T)


def transform_displacement(rel, gamma, u_hat):
    _check_gamma(gamma)
    return gamma * (np.asarray(u_hat, dtype=float) @ rel.T.T)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """Rigid map ``x -> T x + b`` with a record of the relations composed into it.

    ``chain`` lists ``(label, inverted)`` in application order; it is what the
    load reversal factor of a composed map is computed from.
    """

    T: np.ndarray
    b: np.ndarray
    chain: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "T", _frozen(self.T))
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "chain", tuple(self.chain))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def of(cls, rel, inverted=False):
        if inverted:
            return cls(rel.T.T, rel.offset.copy(), ((rel.label, True),))
        return cls(rel.T, -rel.T @ rel.offset, ((rel.label, False),))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.T.T + self.b

    def then(self, other):
        """``other o self``: apply ``self`` first."""
        return AffineMap(other.T @ self.T, other.T @ self.b + other.b, self.chain + other.chain)

    def inverse(self):
        chain = tuple((label, not inv) for label, inv in reversed(self.chain))
        return AffineMap(self.T.T, -self.T.T @ self.b, chain)

    @property
    def offset(self):
        """Origin offset ``o`` such that the map reads ``T (x - o)``."""
        return -self.T.T @ self.b

    def is_identity(self, tol):
        d = len(self.b)
        return bool(np.max(np.abs(self.T - np.eye(d))) <= ORTHO_TOL
                    and np.max(np.abs(self.b)) <= tol)

    def gamma(self, gammas):
        """Product of the load reversal factors along the chain."""
        g = 1
        for label, _ in self.chain:
            g *= gammas[label]
        return g

    def odd_labels(self):
        """Labels occurring an odd number of times; fixes the chain's gamma."""
        counts = {}
        for label, _ in self.chain:
            counts[label] = counts.get(label, 0) ^ 1
        return tuple(sorted(k for k, v in counts.items() if v))


def chain_to_strings(chain):
    return [label + ("^-1" if inv else "") for label, inv in chain]
