"""Boundary node pairing and resolution into master/slave pairs.

Each relation pairs a node ``A_hat`` in its source region (the master side of
the edge) with the node at ``map_point(rel, A_hat)`` (the slave side). Nodes
on edges and corners collect several such edges. Resolution groups nodes into
equivalence classes, picks one master per class and ties every other member
to it through a composed map. Independent cycles of the class graph either
close to the identity (redundant) or leave a constraint of the master on
itself, e.g. for nodes on a mirror plane.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .equivalence import AffineMap, chain_to_strings, map_point


class PairingError(ValueError):
    pass


class UnmatchedNode(PairingError):
    def __init__(self, node, relation, image):
        self.node, self.relation, self.image = node, relation, image
        super().__init__(f"node {node}: relation {relation} maps it to {np.round(image, 12).tolist()}, "
                         "where the mesh has no node (mesh is not symmetry-compatible)")


class AmbiguousMatch(PairingError):
    def __init__(self, node, relation, candidates):
        self.node, self.relation, self.candidates = node, relation, candidates
        super().__init__(f"node {node}: image under relation {relation} matches nodes "
                         f"{candidates} within tolerance")


class InconsistentCycle(PairingError):
    def __init__(self, node, chain, residual):
        self.node, self.chain, self.residual = node, chain, residual
        super().__init__(f"relations {' -> '.join(chain_to_strings(chain))} do not close at node "
                         f"{node} (residual {residual:.3e})")


@dataclass
class PairingGraph:
    """Directed edges ``(slave, master, label)`` between mesh nodes."""

    nodes: np.ndarray
    edges: list
    boundary: np.ndarray
    tol: float
    uncovered: list = field(default_factory=list)
    tag_mismatches: int = 0

    def relations_of(self, node):
        return sorted({lab for s, m, lab in self.edges if node in (s, m)})

    def report(self):
        return {"edges": len(self.edges), "boundary_nodes": int(len(self.boundary)),
                "uncovered_nodes": self.uncovered, "self_loops": sum(s == m for s, m, _ in self.edges),
                "tag_mismatches": self.tag_mismatches, "tol": self.tol}


@dataclass(frozen=True, eq=False)
class NodePair:
    """``x_slave = map(x_master)``; for a self pair, slave and master coincide."""

    slave: int
    master: int
    map: AffineMap

    @property
    def self_pair(self):
        return self.slave == self.master

    @property
    def chain(self):
        return self.map.chain

    def to_json(self):
        return {"slave": int(self.slave), "master": int(self.master),
                "relation_chain": chain_to_strings(self.chain),
                "T_composed": self.map.T.tolist(), "offset_composed": self.map.offset.tolist(),
                "self_pair": self.self_pair}


def _incident_tags(mesh):
    tags = [set() for _ in range(mesh.n_nodes)]
    for e, conn in enumerate(mesh.elements):
        for n in conn:
            tags[n].add(int(mesh.materials[e]))
    return tags


def pair_boundary_nodes(mesh, spec, tol=None):
    """Match every boundary node in a relation's source region to its image node.

    Raises
    ------
    UnmatchedNode
        No node lies within ``tol`` of an image.
    AmbiguousMatch
        More than one node lies within ``tol`` of an image.
    """
    tol = 1e-8 * spec.diag if tol is None else float(tol)
    nodes = mesh.nodes
    boundary = mesh.boundary_nodes(spec.bbox, tol)
    tree = cKDTree(nodes)
    edges = []
    for rel in spec.relations:
        src = boundary[rel.source.contains(nodes[boundary], tol)]
        if not len(src):
            continue
        images = map_point(rel, nodes[src])
        dist, idx = tree.query(images, k=2, distance_upper_bound=tol)
        for k, node in enumerate(src):
            if not np.isfinite(dist[k, 0]):
                raise UnmatchedNode(int(node), rel.label, images[k])
            if np.isfinite(dist[k, 1]):
                cands = sorted(int(i) for i in tree.query_ball_point(images[k], tol))
                raise AmbiguousMatch(int(node), rel.label, cands)
            edges.append((int(idx[k, 0]), int(node), rel.label))
    touched = {n for s, m, _ in edges for n in (s, m)}
    uncovered = [int(n) for n in boundary if int(n) not in touched]
    # informational only: elements around A and A_hat belong to different copies
    tags = _incident_tags(mesh)
    mismatches = sum(tags[s] != tags[m] for s, m, _ in edges)
    return PairingGraph(nodes, edges, boundary, tol, uncovered, mismatches)


def _master_key(x, node, tol):
    return tuple(np.round(x / tol).astype(np.int64).tolist()) + (node,)


def resolve(graph, spec):
    """Reduce the pairing graph to an ordered list of :class:`NodePair`.

    Slave pairs come first, ordered by slave id, then self pairs ordered by
    master id. Every slave appears exactly once.

    Raises
    ------
    InconsistentCycle
        A cycle of relations does not map its master node onto itself.
    """
    nodes, tol = graph.nodes, graph.tol
    if not graph.edges:
        return []
    dim = nodes.shape[1]
    s_idx = np.array([e[0] for e in graph.edges])
    m_idx = np.array([e[1] for e in graph.edges])
    n = len(nodes)
    adj_mat = coo_matrix((np.ones(len(s_idx)), (s_idx, m_idx)), shape=(n, n))
    _, comp = connected_components(adj_mat, directed=True, connection="weak")

    maps = {r.label: AffineMap.of(r) for r in spec.relations}

    adj = {}
    for k, (s, m, lab) in enumerate(graph.edges):
        adj.setdefault(m, []).append((s, k, False))
        if s != m:
            adj.setdefault(s, []).append((m, k, True))
    for v in adj.values():
        v.sort(key=lambda t: (t[0], graph.edges[t[1]][2], t[2]))

    members = {}
    for node in sorted(adj):
        members.setdefault(comp[node], []).append(node)

    slave_pairs, self_pairs = [], []
    for cls in members.values():
        master = min(cls, key=lambda i: _master_key(nodes[i], i, tol))
        F = {master: AffineMap.identity(dim)}
        tree_edges = set()
        queue = deque([master])
        while queue:
            a = queue.popleft()
            for b, k, reverse in adj[a]:
                if b in F:
                    continue
                R = maps[graph.edges[k][2]]
                F[b] = F[a].then(R.inverse() if reverse else R)
                tree_edges.add(k)
                queue.append(b)
        for node in cls:
            if node != master:
                slave_pairs.append(NodePair(node, master, F[node]))
        seen = set()
        xm = nodes[master]
        for k in sorted({k for a in cls for _, k, _ in adj[a]} - tree_edges):
            s, m, lab = graph.edges[k]
            C = F[m].then(maps[lab]).then(F[s].inverse())
            resid = float(np.max(np.abs(C(xm) - xm)))
            if resid > tol:
                raise InconsistentCycle(master, C.chain, resid)
            # relations with T = I always carry gamma = +1, so such cycles are vacuous
            if np.max(np.abs(C.T - np.eye(dim))) <= 1e-12 and all(
                    np.array_equal(spec.relation(lab).T, np.eye(dim)) for lab in C.odd_labels()):
                continue
            key = (tuple(np.round(C.T, 9).ravel()), C.odd_labels())
            if key in seen:
                continue
            seen.add(key)
            # pin the translation part to the master so the map fixes x_M exactly
            self_pairs.append(NodePair(master, master, AffineMap(C.T, xm - C.T @ xm, C.chain)))
    slave_pairs.sort(key=lambda p: p.slave)
    self_pairs.sort(key=lambda p: p.master)
    return slave_pairs + self_pairs
