"""Assemble a full cell from transformed copies of a reduced cell and compare
the two solutions point by point.

A copy is placed by ``x = Q y + s`` (``y`` in the reduced cell's frame). The
neighbour across relation ``(T, o)`` sits at ``Q' = Q T^t``, ``s' = Q o + s``;
its fields are those of the reduced cell scaled by the product of the load
reversal factors collected on the way.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .elements import MIRROR_ORDER
from .equivalence import is_signed_permutation
from .mesh import Mesh


class TilingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Copy:
    Q: np.ndarray
    s: np.ndarray
    chain: tuple

    def gamma(self, gammas):
        g = 1
        for label in self.chain:
            g *= gammas[label]
        return g

    def place(self, y):
        return np.asarray(y) @ self.Q.T + self.s

    def pull(self, x):
        return (np.asarray(x) - self.s) @ self.Q


@dataclass
class Tiling:
    copies: list
    mesh: Mesh
    element_copy: np.ndarray
    element_source: np.ndarray


def _box_of(copy, bbox):
    corners = np.array(np.meshgrid(*bbox, indexing="ij")).reshape(len(bbox), -1).T
    pts = copy.place(corners)
    return np.stack([pts.min(axis=0), pts.max(axis=0)], axis=1)


def find_copies(spec, target_bbox, max_copies=4096):
    """Copies of the cell that exactly fill ``target_bbox``, in BFS order."""
    target = np.asarray(target_bbox, dtype=float)
    for r in spec.relations:
        if not is_signed_permutation(r.T):
            raise TilingError(f"relation {r.label}: tiling needs signed-permutation transforms")
    tol = 1e-9 * spec.diag
    reach = np.linalg.norm(target[:, 1] - target[:, 0]) + spec.diag
    tcenter = target.mean(axis=1)
    start = Copy(np.eye(spec.dim), np.zeros(spec.dim), ())
    seen = {tuple(np.round(start.place(spec.center) / tol))}
    queue = deque([start])
    found = []
    vol = 0.0
    target_vol = float(np.prod(target[:, 1] - target[:, 0]))
    while queue and vol < target_vol * (1 - 1e-12):
        c = queue.popleft()
        box = _box_of(c, spec.bbox)
        if np.all(box[:, 0] >= target[:, 0] - tol) and np.all(box[:, 1] <= target[:, 1] + tol):
            found.append(c)
            vol += spec.volume
            if len(found) > max_copies:
                raise TilingError("too many copies; is the target box a multiple of the cell?")
        for r in spec.relations:
            for inverted in (False, True):
                if inverted:
                    nxt = Copy(c.Q @ r.T, c.s - c.Q @ r.T @ r.offset, c.chain + (r.label,))
                else:
                    nxt = Copy(c.Q @ r.T.T, c.Q @ r.offset + c.s, c.chain + (r.label,))
                ctr = nxt.place(spec.center)
                key = tuple(np.round(ctr / tol))
                if key in seen or np.linalg.norm(ctr - tcenter) > reach:
                    continue
                seen.add(key)
                queue.append(nxt)
    if abs(vol - target_vol) > 1e-9 * target_vol:
        raise TilingError(f"copies cover volume {vol:.6g} of the target {target_vol:.6g}")
    return found


def tile_mesh(spec, mesh, target_bbox):
    """Full-cell mesh built from copies of ``mesh``; shared nodes are merged."""
    copies = find_copies(spec, target_bbox)
    tol = 1e-9 * spec.diag
    nn = mesh.n_nodes
    nodes = np.vstack([c.place(mesh.nodes) for c in copies])
    pairs = cKDTree(nodes).query_pairs(tol, output_type="ndarray")
    n = len(nodes)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) \
        else coo_matrix((n, n))
    _, comp = connected_components(g, directed=False)
    # renumber components by first appearance
    first = {}
    for i, k in enumerate(comp):
        first.setdefault(k, len(first))
    new_id = np.array([first[k] for k in comp])
    merged = np.zeros((len(first), spec.dim))
    merged[new_id] = nodes
    elems, tags, ecopy, esrc = [], [], [], []
    for k, c in enumerate(copies):
        conn = new_id[mesh.elements + k * nn]
        if np.linalg.det(c.Q) < 0:
            conn = conn[:, MIRROR_ORDER[conn.shape[1]]]
        elems.append(conn)
        tags.append(mesh.materials)
        ecopy.append(np.full(len(conn), k))
        esrc.append(np.arange(len(conn)))
    uc = Mesh(merged, np.vstack(elems), np.concatenate(tags))
    return Tiling(copies, uc, np.concatenate(ecopy), np.concatenate(esrc))


@dataclass
class EquivalenceReport:
    strain_residual: float
    stress_residual: float
    worst_point: list
    points: int

    @property
    def residual(self):
        return max(self.strain_residual, self.stress_residual)

    def passed(self, tol=1e-8):
        return self.residual <= tol

    def to_json(self):
        return {"strain_residual": self.strain_residual, "stress_residual": self.stress_residual,
                "worst_point": self.worst_point, "gauss_points": self.points}


def verify_equivalence(uc_solution, ruc_solution, tiling, gammas=None):
    """Check ``eps_UC(x) = g Q eps_rUC(y) Q^t`` (and the same for stress).

    ``x = Q y + s`` runs over the Gauss points of the full cell; ``g`` is the
    product of the load reversal factors along the copy's chain. Residuals
    are relative to the largest entry of the full-cell field.
    """
    gammas = ruc_solution.gammas if gammas is None else gammas
    d = uc_solution.dim
    ref = ruc_solution.points.reshape(-1, d)
    tree = cKDTree(ref)
    tol = 1e-8 * float(np.ptp(ref, axis=0).max())
    eps_r = ruc_solution.strain().reshape(-1, d, d)
    sig_r = ruc_solution.stress().reshape(-1, d, d)
    eps_u = uc_solution.strain()
    sig_u = uc_solution.stress()
    worst = (0.0, None)
    res_e = res_s = 0.0
    for k, c in enumerate(tiling.copies):
        sel = tiling.element_copy == k
        x = uc_solution.points[sel].reshape(-1, d)
        dist, idx = tree.query(c.pull(x))
        if np.max(dist) > tol:
            raise TilingError("full-cell Gauss points do not map onto reduced-cell Gauss points")
        g = c.gamma(gammas)
        pe = g * np.einsum("ij,pjk,lk->pil", c.Q, eps_r[idx], c.Q)
        ps = g * np.einsum("ij,pjk,lk->pil", c.Q, sig_r[idx], c.Q)
        de = np.abs(eps_u[sel].reshape(-1, d, d) - pe).max(axis=(1, 2))
        ds = np.abs(sig_u[sel].reshape(-1, d, d) - ps).max(axis=(1, 2))
        res_e = max(res_e, de.max())
        res_s = max(res_s, ds.max())
        j = int(np.argmax(de))
        if de[j] >= worst[0]:
            worst = (de[j], x[j].tolist())
    se = max(float(np.abs(eps_u).max()), 1e-300)
    ss = max(float(np.abs(sig_u).max()), 1e-300)
    return EquivalenceReport(res_e / se, res_s / ss, worst[1], int(eps_u.shape[0] * eps_u.shape[1]))
