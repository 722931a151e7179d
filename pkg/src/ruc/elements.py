"""Bilinear quadrilateral (Q4) and trilinear hexahedron (H8) kinematics.

Everything is vectorised over elements: arrays carry a leading element axis
and a Gauss point axis.
"""

import itertools

import numpy as np

from .voigt import voigt_pairs

_G = 1.0 / np.sqrt(3.0)

# reference node coordinates, counter-clockwise bottom face first
Q4_NODES = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
H8_NODES = np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)

# node permutation that restores positive orientation after a reflection
MIRROR_ORDER = {4: [0, 3, 2, 1], 8: [0, 3, 2, 1, 4, 7, 6, 5]}


class InvertedElement(ValueError):
    """Element with a non-positive Jacobian at some Gauss point."""


def reference_nodes(dim):
    return Q4_NODES if dim == 2 else H8_NODES


def gauss_rule(dim):
    """2 (or 2x2x2) point Gauss rule: points ``(ng, d)`` and weights ``(ng,)``."""
    pts = np.array(list(itertools.product((-_G, _G), repeat=dim)))[:, ::-1]
    return pts, np.ones(len(pts))


def shape_functions(dim, xi):
    """Values ``(ng, nn)`` and reference gradients ``(ng, nn, d)`` at ``xi``."""
    ref = reference_nodes(dim)
    xi = np.atleast_2d(xi)
    terms = 1.0 + xi[:, None, :] * ref[None, :, :]
    N = np.prod(terms, axis=2) / 2 ** dim
    dN = np.empty(terms.shape)
    for k in range(dim):
        others = np.prod(np.delete(terms, k, axis=2), axis=2)
        dN[:, :, k] = ref[None, :, k] * others / 2 ** dim
    return N, dN


def kinematics(coords):
    """Physical gradients and integration weights for a batch of elements.

    Parameters
    ----------
    coords : ndarray, shape (ne, nn, d)
        Nodal coordinates per element.

    Returns
    -------
    grads : ndarray, shape (ne, ng, nn, d)
        Shape function gradients w.r.t. physical coordinates.
    wdet : ndarray, shape (ne, ng)
        Gauss weight times Jacobian determinant.
    xg : ndarray, shape (ne, ng, d)
        Gauss point coordinates.
    """
    coords = np.asarray(coords, dtype=float)
    dim = coords.shape[2]
    xi, w = gauss_rule(dim)
    N, dN = shape_functions(dim, xi)
    J = np.einsum("gak,eai->egik", dN, coords)
    det = np.linalg.det(J)
    bad = np.where(det.min(axis=1) <= 0)[0]
    if len(bad):
        raise InvertedElement(f"non-positive Jacobian in element(s) {bad[:10].tolist()}")
    Jinv = np.linalg.inv(J)
    grads = np.einsum("gak,egki->egai", dN, Jinv)
    xg = np.einsum("ga,eai->egi", N, coords)
    return grads, det * w, xg


def strain_operator(grads):
    """Engineering-Voigt strain operator ``B``, shape (ne, ng, m, nn*d)."""
    ne, ng, nn, dim = grads.shape
    pairs = voigt_pairs(dim)
    B = np.zeros((ne, ng, len(pairs), nn, dim))
    for row, (i, j) in enumerate(pairs):
        B[:, :, row, :, i] += grads[:, :, :, j]
        if i != j:
            B[:, :, row, :, j] += grads[:, :, :, i]
    return B.reshape(ne, ng, len(pairs), nn * dim)


def element_stiffness(coords, C):
    """Element matrices ``(ne, nn*d, nn*d)`` for per-element stiffness ``C``."""
    grads, wdet, _ = kinematics(coords)
    B = strain_operator(grads)
    return np.einsum("egki,ekl,eglj,eg->eij", B, C, B, wdet, optimize=True)


def displacement_gradient(grads, u_elem):
    """``H[i, j] = du_i/dx_j`` at Gauss points, shape (ne, ng, d, d)."""
    return np.einsum("eai,egaj->egij", u_elem, grads)
