"""Voigt and Mandel vectorisation of symmetric 2nd order tensors.

Component order is fixed for the whole package:

* 3D: (11, 22, 33, 23, 13, 12)
* 2D: (11, 22, 12)

Strain vectors use engineering shear (off-diagonal entries doubled), stress
vectors do not. Mandel vectors scale off-diagonals by sqrt(2), which makes the
Frobenius inner product the Euclidean one; the admissibility nullspaces are
computed in Mandel coordinates for that reason.
"""

import numpy as np

SQRT2 = np.sqrt(2.0)

_PAIRS = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)),
}

_NAMES = {
    2: ("11", "22", "12"),
    3: ("11", "22", "33", "23", "13", "12"),
}


def voigt_pairs(dim):
    """Return the (i, j) index pairs in Voigt order for ``dim``."""
    try:
        return _PAIRS[dim]
    except KeyError:
        raise ValueError(f"dim must be 2 or 3, got {dim!r}") from None


def component_names(dim):
    return _NAMES[dim]


def voigt_size(dim):
    return len(voigt_pairs(dim))


def dim_from_voigt(m):
    for dim, pairs in _PAIRS.items():
        if len(pairs) == m:
            return dim
    raise ValueError(f"no Voigt layout has {m} components")


def _scales(dim, shear):
    pairs = voigt_pairs(dim)
    return np.array([1.0 if i == j else shear for i, j in pairs])


def strain_to_voigt(eps):
    """Symmetric strain tensor(s) ``(..., d, d)`` to engineering Voigt ``(..., m)``."""
    eps = np.asarray(eps, dtype=float)
    dim = eps.shape[-1]
    pairs = voigt_pairs(dim)
    out = np.stack([eps[..., i, j] for i, j in pairs], axis=-1)
    return out * _scales(dim, 2.0)


def voigt_to_strain(v):
    v = np.asarray(v, dtype=float)
    dim = dim_from_voigt(v.shape[-1])
    return _unpack(v / _scales(dim, 2.0), dim)


def stress_to_voigt(sig):
    sig = np.asarray(sig, dtype=float)
    pairs = voigt_pairs(sig.shape[-1])
    return np.stack([sig[..., i, j] for i, j in pairs], axis=-1)


def voigt_to_stress(v):
    v = np.asarray(v, dtype=float)
    return _unpack(v, dim_from_voigt(v.shape[-1]))


def to_mandel(t):
    t = np.asarray(t, dtype=float)
    dim = t.shape[-1]
    pairs = voigt_pairs(dim)
    out = np.stack([t[..., i, j] for i, j in pairs], axis=-1)
    return out * _scales(dim, SQRT2)


def from_mandel(v):
    v = np.asarray(v, dtype=float)
    dim = dim_from_voigt(v.shape[-1])
    return _unpack(v / _scales(dim, SQRT2), dim)


def _unpack(v, dim):
    out = np.zeros(v.shape[:-1] + (dim, dim))
    for k, (i, j) in enumerate(voigt_pairs(dim)):
        out[..., i, j] = v[..., k]
        out[..., j, i] = v[..., k]
    return out


def congruence_operator(T):
    """Mandel-space matrix of the map ``X -> T X T^t`` on symmetric tensors.

    For orthogonal ``T`` the returned matrix is itself orthogonal.
    """
    T = np.asarray(T, dtype=float)
    dim = T.shape[0]
    m = voigt_size(dim)
    L = np.empty((m, m))
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        X = from_mandel(e)
        L[:, k] = to_mandel(T @ X @ T.T)
    return L


def unit_strain(dim, k):
    """Tensor whose engineering Voigt vector is the k-th unit vector."""
    v = np.zeros(voigt_size(dim))
    v[k] = 1.0
    return voigt_to_strain(v)
