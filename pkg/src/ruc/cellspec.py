"""Declarative description of unit cells (UC), offset-reduced (OrUC) and
reduced (rUC) unit cells, plus coverage/consistency validation."""

import enum
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .equivalence import (
    ORTHO_TOL,
    BoundaryRegion,
    EquivalenceRelation,
    inverse_map,
    map_point,
    transform_defect,
)

AXES = "xyz"


class SpecError(ValueError):
    """Malformed cell specification."""


class Kind(str, enum.Enum):
    UC = "UC"
    OrUC = "OrUC"
    rUC = "rUC"


@dataclass(frozen=True, eq=False)
class CellSpec:
    dim: int
    bbox: np.ndarray
    relations: tuple
    kind: Kind = Kind.rUC
    periodicity: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise SpecError(f"dim must be 2 or 3, got {self.dim}")
        bbox = np.array(self.bbox, dtype=float)
        if bbox.shape != (self.dim, 2):
            raise SpecError(f"bbox must be {self.dim} [min, max] pairs")
        if np.any(bbox[:, 1] - bbox[:, 0] <= 0):
            raise SpecError(f"degenerate bbox {bbox.tolist()}")
        bbox.setflags(write=False)
        object.__setattr__(self, "bbox", bbox)
        per = np.zeros((0, self.dim)) if self.periodicity is None else np.array(self.periodicity, float)
        per = per.reshape(-1, self.dim)
        per.setflags(write=False)
        object.__setattr__(self, "periodicity", per)
        object.__setattr__(self, "relations", tuple(self.relations))
        object.__setattr__(self, "kind", Kind(self.kind))
        labels = [r.label for r in self.relations]
        if len(set(labels)) != len(labels):
            raise SpecError(f"duplicate relation labels in {labels}")
        for r in self.relations:
            if r.dim != self.dim:
                raise SpecError(f"relation {r.label} has dimension {r.dim}, cell has {self.dim}")
            for dep in r.gamma_follows or ():
                if dep not in labels or self.relation(dep).dependent:
                    raise SpecError(
                        f"relation {r.label}: gamma_follows refers to {dep!r}, "
                        "which is not a primary relation")

    # -- geometry ---------------------------------------------------------
    @property
    def extent(self):
        return self.bbox[:, 1] - self.bbox[:, 0]

    @property
    def diag(self):
        return float(np.linalg.norm(self.extent))

    @property
    def center(self):
        return self.bbox.mean(axis=1)

    @property
    def volume(self):
        return float(np.prod(self.extent))

    def facets(self):
        """Facet names, ``x-``, ``x+``, ``y-``, ... in a fixed order."""
        return [f"{AXES[a]}{s}" for a in range(self.dim) for s in "-+"]

    def facet_region(self, facet):
        a = AXES.index(facet[0])
        lo, hi = self.bbox[:, 0].copy(), self.bbox[:, 1].copy()
        v = self.bbox[a, 0] if facet[1] == "-" else self.bbox[a, 1]
        lo[a] = hi[a] = v
        return BoundaryRegion(lo, hi)

    def on_boundary(self, points, tol):
        p = np.atleast_2d(points)
        inside = np.all((p >= self.bbox[:, 0] - tol) & (p <= self.bbox[:, 1] + tol), axis=1)
        near = np.any((np.abs(p - self.bbox[:, 0]) <= tol) | (np.abs(p - self.bbox[:, 1]) <= tol), axis=1)
        return inside & near

    # -- relations --------------------------------------------------------
    def relation(self, label):
        for r in self.relations:
            if r.label == label:
                return r
        raise KeyError(label)

    @property
    def labels(self):
        return [r.label for r in self.relations]

    @property
    def primary(self):
        return [r for r in self.relations if not r.dependent]

    @property
    def dependent(self):
        return [r for r in self.relations if r.dependent]

    def full_gammas(self, primary_gammas):
        """Extend ``{label: gamma}`` over the primary relations to all relations."""
        out = {r.label: int(primary_gammas[r.label]) for r in self.primary}
        for r in self.dependent:
            g = 1
            for dep in r.gamma_follows:
                g *= out[dep]
            out[r.label] = g
        return out

    # -- serialisation ----------------------------------------------------
    def to_json(self):
        out = {
            "dim": self.dim,
            "bbox": self.bbox.tolist(),
            "kind": self.kind.value,
            "periodicity": self.periodicity.tolist(),
            "relations": [r.to_json() for r in self.relations],
        }
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj):
        try:
            dim = int(obj["dim"])
            bbox = np.array(obj["bbox"], dtype=float)
            rels = [EquivalenceRelation.from_json(r, bbox) for r in obj.get("relations", [])]
            return cls(dim=dim, bbox=bbox, relations=rels, kind=obj.get("kind", "rUC"),
                       periodicity=obj.get("periodicity"), name=obj.get("name", ""))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"invalid cell spec: {exc}") from exc

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def load_spec(path):
    with open(path) as fh:
        return CellSpec.from_json(json.load(fh))


def save_spec(spec, path):
    with open(path, "w") as fh:
        fh.write(spec.dumps() + "\n")


@dataclass
class ValidationReport:
    orthogonality: list = field(default_factory=list)
    uncovered: list = field(default_factory=list)
    inconsistent: list = field(default_factory=list)
    off_boundary: list = field(default_factory=list)
    kind_violations: list = field(default_factory=list)
    improper: list = field(default_factory=list)

    @property
    def ok(self):
        return not (self.orthogonality or self.uncovered or self.inconsistent
                    or self.off_boundary or self.kind_violations)

    def messages(self):
        out = []
        for item in self.orthogonality:
            out.append(f"relation {item['relation']}: transform not orthogonal "
                       f"(defect {item['defect']:.3e}, det {item['det']:.6g})")
        for item in self.uncovered:
            out.append(f"facet {item['facet']} not covered by any relation "
                       f"({item['points']} uncovered sample points, e.g. {item['example']})")
        for item in self.off_boundary:
            out.append(f"relation {item['relation']} maps {item['point']} to "
                       f"{item['image']}, which is not on the cell boundary")
        for item in self.inconsistent:
            out.append(f"relations {item['relations'][0]} and {item['relations'][1]} disagree at "
                       f"{item['point']}: images {item['images'][0]} and {item['images'][1]} "
                       "are not related by the cell spec")
        out.extend(self.kind_violations)
        return out

    def to_json(self):
        return {
            "ok": self.ok,
            "orthogonality": self.orthogonality,
            "uncovered": self.uncovered,
            "inconsistent": self.inconsistent,
            "off_boundary": self.off_boundary,
            "kind_violations": self.kind_violations,
            "improper_relations": self.improper,
        }


def facet_samples(spec, facet, n=17):
    """Deterministic ``n`` x ``n`` (3D) or ``n`` (2D) grid on a facet."""
    a = AXES.index(facet[0])
    axes = []
    for k in range(spec.dim):
        if k == a:
            axes.append([spec.bbox[k, 0] if facet[1] == "-" else spec.bbox[k, 1]])
        else:
            axes.append(np.linspace(spec.bbox[k, 0], spec.bbox[k, 1], n))
    return np.array(list(itertools.product(*axes)))


def _neighbours(spec, p, tol):
    out = []
    for r in spec.relations:
        if r.source.contains(p, tol):
            out.append(map_point(r, p))
        q = inverse_map(r, p)
        if r.source.contains(q, tol):
            out.append(q)
    return out


def _related(spec, p, q, tol, depth=3, avoid=None):
    """Is ``q`` reachable from ``p`` by at most ``depth`` relation moves?

    Paths through ``avoid`` are not counted.
    """
    frontier = [p]
    seen = [p] if avoid is None else [p, avoid]
    for _ in range(depth):
        nxt = []
        for x in frontier:
            for y in _neighbours(spec, x, tol):
                if np.max(np.abs(y - q)) <= tol:
                    return True
                if all(np.max(np.abs(y - s)) > tol for s in seen):
                    seen.append(y)
                    nxt.append(y)
        frontier = nxt
    return False


def _fmt(p):
    return [float(round(v, 12)) for v in p]


def validate(spec, mesh_nodes=None, samples=17):
    """Check transforms, boundary coverage and consistency of a cell spec.

    Coverage and consistency are evaluated on a sample grid of every facet,
    plus the boundary nodes of ``mesh_nodes`` when given. A facet point is
    covered when it lies in some relation's source region or in the image of
    one. Two relations claiming the same point must send it to images that
    are themselves related through the cell spec's relations.
    """
    rep = ValidationReport()
    for r in spec.relations:
        err, det = transform_defect(r.T)
        if err > ORTHO_TOL or abs(abs(det) - 1) > ORTHO_TOL:
            rep.orthogonality.append({"relation": r.label, "defect": err, "det": det})
        if det < 0:
            rep.improper.append(r.label)

    tol = 1e-9 * spec.diag
    points = {f: facet_samples(spec, f, samples) for f in spec.facets()}
    if mesh_nodes is not None:
        nodes = np.asarray(mesh_nodes, dtype=float)
        nodes = nodes[spec.on_boundary(nodes, tol)]
        for f in spec.facets():
            reg = spec.facet_region(f)
            points[f] = np.vstack([points[f], nodes[reg.contains(nodes, tol)]])

    for f, pts in points.items():
        covered = np.zeros(len(pts), dtype=bool)
        for r in spec.relations:
            covered |= r.source.contains(pts, tol)
            covered |= r.source.contains(inverse_map(r, pts), tol)
        if not covered.all():
            rep.uncovered.append({"facet": f, "points": int((~covered).sum()),
                                  "example": _fmt(pts[~covered][0])})

    reported_off = set()
    reported_pair = set()
    for f, pts in points.items():
        for p in pts:
            claims = [(r.label, map_point(r, p)) for r in spec.relations if r.source.contains(p, tol)]
            for label, img in claims:
                if label not in reported_off and not spec.on_boundary(img, tol)[0]:
                    reported_off.add(label)
                    rep.off_boundary.append({"relation": label, "point": _fmt(p), "image": _fmt(img)})
            for (la, ia), (lb, ib) in itertools.combinations(claims, 2):
                key = (la, lb)
                if key in reported_pair or np.max(np.abs(ia - ib)) <= tol:
                    continue
                if not _related(spec, ia, ib, tol, avoid=p):
                    reported_pair.add(key)
                    rep.inconsistent.append({"relations": [la, lb], "point": _fmt(p),
                                             "images": [_fmt(ia), _fmt(ib)]})

    if spec.kind in (Kind.UC, Kind.OrUC):
        for r in spec.relations:
            if not r.is_translation:
                rep.kind_violations.append(
                    f"relation {r.label}: kind {spec.kind.value} requires T = I")
    if spec.kind is Kind.UC:
        scale = max(spec.diag, 1.0)
        vecs = np.vstack([spec.periodicity, -spec.periodicity]) if len(spec.periodicity) else np.zeros((0, spec.dim))
        for r in spec.relations:
            if not any(np.max(np.abs(r.offset - v)) <= 1e-12 * scale for v in vecs):
                rep.kind_violations.append(
                    f"relation {r.label}: kind UC requires offset in +/- periodicity vectors")
    return rep


def _lattice_candidates(vectors, reach=2):
    k = len(vectors)
    for coeffs in itertools.product(range(-reach, reach + 1), repeat=k):
        if any(coeffs):
            yield np.array(coeffs) @ vectors


def classical_uc_spec(bbox, periodicity_vectors, prefix="P", name=""):
    """Translation-only cell: one T = I relation per facet patch.

    For orthogonal periodicity vectors aligned with the box this yields one
    relation per pair of opposite facets (kind UC). Non-orthogonal vectors
    split a facet into patches, each sent to the opposite facet by a different
    lattice vector (kind OrUC).
    """
    bbox = np.array(bbox, dtype=float)
    d = len(bbox)
    vecs = np.array(periodicity_vectors, dtype=float).reshape(-1, d)
    if len(vecs) != d or abs(np.linalg.det(vecs)) <= 1e-12 * np.prod(np.abs(vecs).max(axis=1)):
        raise SpecError("periodicity vectors must be d linearly independent vectors")
    extent = bbox[:, 1] - bbox[:, 0]
    tol = 1e-12 * np.linalg.norm(extent)
    if abs(abs(np.linalg.det(vecs)) - np.prod(extent)) > 1e-9 * np.prod(extent):
        raise SpecError("box volume differs from the lattice cell volume; the box cannot tile")

    aligned = all(np.count_nonzero(np.abs(v) > tol) == 1 for v in vecs)
    relations = []
    for a in range(d):
        patches = []
        for v in _lattice_candidates(vecs):
            if abs(v[a] - extent[a]) > tol:
                continue
            # facet x_a = max, restricted to the part whose image x - v stays in the box
            lo = np.maximum(bbox[:, 0], bbox[:, 0] + v)
            hi = np.minimum(bbox[:, 1], bbox[:, 1] + v)
            lo[a] = hi[a] = bbox[a, 1]
            if np.all(hi - lo >= -tol) and all(hi[k] - lo[k] > tol for k in range(d) if k != a):
                patches.append((tuple(np.round(lo, 12)), lo, hi, v))
        if not patches:
            raise SpecError(f"no lattice vector maps the {AXES[a]}+ facet onto the {AXES[a]}- facet")
        patches.sort(key=lambda p: p[0])
        for i, (_, lo, hi, v) in enumerate(patches):
            label = f"{prefix}{AXES[a]}" + (str(i + 1) if len(patches) > 1 else "")
            relations.append(EquivalenceRelation(label, np.eye(d), v, BoundaryRegion(lo, hi)))
    kind = Kind.UC if aligned else Kind.OrUC
    return CellSpec(dim=d, bbox=bbox, relations=relations, kind=kind, periodicity=vecs, name=name)
