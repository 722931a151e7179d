"""Minimal mesh container: nodes, Q4/H8 connectivity and material tags."""

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .elements import kinematics


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    materials: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        elems = np.array(self.elements, dtype=np.int64)
        tags = np.array(self.materials, dtype=np.int64).reshape(-1)
        if nodes.ndim != 2 or nodes.shape[1] not in (2, 3):
            raise MeshError("nodes must be an (n, 2) or (n, 3) array")
        nn = 4 if nodes.shape[1] == 2 else 8
        if elems.ndim != 2 or elems.shape[1] != nn:
            raise MeshError(f"{nodes.shape[1]}D elements need {nn} nodes each")
        if len(tags) != len(elems):
            raise MeshError(f"{len(tags)} material tags for {len(elems)} elements")
        if len(elems) and (elems.min() < 0 or elems.max() >= len(nodes)):
            raise MeshError("element connectivity references a missing node")
        for a in (nodes, elems, tags):
            a.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "materials", tags)

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_dofs(self):
        return self.nodes.size

    def element_coords(self):
        return self.nodes[self.elements]

    def check(self):
        """Raise :class:`~ruc.elements.InvertedElement` on a bad Jacobian."""
        kinematics(self.element_coords())

    def boundary_nodes(self, bbox, tol):
        """Ids of nodes lying on a facet of ``bbox``."""
        bbox = np.asarray(bbox, dtype=float)
        x = self.nodes
        near = (np.abs(x - bbox[:, 0]) <= tol) | (np.abs(x - bbox[:, 1]) <= tol)
        return np.where(np.any(near, axis=1))[0]

    def check_inside(self, bbox, tol):
        bbox = np.asarray(bbox, dtype=float)
        out = np.where(np.any((self.nodes < bbox[:, 0] - tol) | (self.nodes > bbox[:, 1] + tol), axis=1))[0]
        if len(out):
            raise MeshError(f"node {int(out[0])} at {self.nodes[out[0]].tolist()} lies outside the cell box")

    def to_json(self):
        return {"dim": self.dim, "nodes": self.nodes.tolist(),
                "elements": self.elements.tolist(), "materials": self.materials.tolist()}

    @classmethod
    def from_json(cls, obj):
        mesh = cls(obj["nodes"], obj["elements"], obj.get("materials", [1] * len(obj["elements"])))
        if "dim" in obj and int(obj["dim"]) != mesh.dim:
            raise MeshError(f"mesh declares dim {obj['dim']} but nodes have {mesh.dim} coordinates")
        return mesh


def load_mesh(path):
    with open(path) as fh:
        return Mesh.from_json(json.load(fh))


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        json.dump(mesh.to_json(), fh)


def structured_mesh(bbox, shape, tag=None):
    """Regular grid of Q4/H8 elements filling ``bbox``.

    Parameters
    ----------
    bbox : array_like, shape (d, 2)
    shape : sequence of int
        Number of elements along each axis.
    tag : callable, optional
        Maps element centroids ``(ne, d)`` to integer material tags.
        Defaults to tag 1 everywhere.
    """
    bbox = np.asarray(bbox, dtype=float)
    dim = len(bbox)
    shape = tuple(int(s) for s in shape)
    axes = [np.linspace(bbox[k, 0], bbox[k, 1], shape[k] + 1) for k in range(dim)]
    # x varies fastest
    grid = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.transpose(*reversed(range(dim))).ravel() for g in grid], axis=1)
    npa = [s + 1 for s in shape]

    def nid(idx):
        out = idx[0]
        stride = 1
        for k in range(1, dim):
            stride *= npa[k - 1]
            out = out + idx[k] * stride
        return out

    cells = np.array(list(itertools.product(*[range(s) for s in reversed(shape)])))[:, ::-1]
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    if dim == 3:
        corners = [c + (0,) for c in corners] + [c + (1,) for c in corners]
    elements = np.stack([nid((cells + np.array(c)).T) for c in corners], axis=1)
    centroids = nodes[elements].mean(axis=1)
    tags = np.ones(len(elements), dtype=int) if tag is None else np.asarray(tag(centroids), dtype=int)
    return Mesh(nodes, elements, tags)
