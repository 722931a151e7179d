"""Multipoint constraint equations ``u(A) - gamma T u(A_hat) = <eps> b``.

``b`` is the translation of the composed map ``x_A = T x_A_hat + b``; for a
single relation ``b = -T offset``, which gives the right-hand side
``-<eps> T offset``.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .admissibility import check_admissibility
from .equivalence import chain_to_strings

ZERO = 1e-14


class MissingGamma(ValueError):
    """The macro strain is not admissible, so no load reversal factors exist."""


@dataclass(frozen=True, eq=False)
class ConstraintEquation:
    """``u(slave) - coeff @ u(master) = rhs`` (``(I - coeff) u = rhs`` for a self pair)."""

    slave: int
    master: int
    coeff: np.ndarray
    rhs: np.ndarray
    chain: tuple = ()

    @property
    def self_pair(self):
        return self.slave == self.master

    @property
    def dim(self):
        return len(self.rhs)

    def scalar_rows(self):
        """Yield ``(slave_dof, [(dof, coefficient), ...], rhs)`` per component."""
        d = self.dim
        for i in range(d):
            terms = {}
            terms[self.slave * d + i] = 1.0
            for j in range(d):
                c = -float(self.coeff[i, j])
                if c != 0.0:
                    key = self.master * d + j
                    terms[key] = terms.get(key, 0.0) + c
            terms = [(k, v) for k, v in terms.items() if abs(v) > ZERO]
            if not terms:
                continue
            yield self.slave * d + i, sorted(terms), float(self.rhs[i])

    def residual(self, u):
        """``u(slave) - coeff u(master) - rhs`` for nodal displacements ``(n, d)``."""
        return u[self.slave] - self.coeff @ u[self.master] - self.rhs

    def to_json(self):
        return {"slave": int(self.slave), "master": int(self.master),
                "coeff": self.coeff.tolist(), "rhs": self.rhs.tolist(),
                "chain": chain_to_strings(self.chain)}

    @classmethod
    def from_json(cls, obj):
        chain = tuple((s[:-3], True) if s.endswith("^-1") else (s, False) for s in obj.get("chain", []))
        return cls(int(obj["slave"]), int(obj["master"]), np.array(obj["coeff"], dtype=float),
                   np.array(obj["rhs"], dtype=float), chain)

    def __eq__(self, other):
        return (isinstance(other, ConstraintEquation) and self.slave == other.slave
                and self.master == other.master and np.array_equal(self.coeff, other.coeff)
                and np.array_equal(self.rhs, other.rhs) and self.chain == other.chain)

    __hash__ = None


def resolve_gammas(spec, eps, gammas=None):
    """Full ``{label: gamma}`` for ``eps``; ``gammas`` overrides the admissibility check."""
    if gammas is not None:
        g = {k: int(v) for k, v in gammas.items()}
        if set(g) >= {r.label for r in spec.relations}:
            return g
        return spec.full_gammas(g)
    res = check_admissibility(spec, eps)
    if not res:
        raise MissingGamma(res.message())
    return res.gammas


def build_constraints(pairs, spec, eps, gammas=None):
    """One vector equation per retained pair.

    Parameters
    ----------
    pairs : list of NodePair
        Output of :func:`ruc.pairing.resolve`.
    spec : CellSpec
    eps : ndarray, shape (d, d)
        Macro strain.
    gammas : dict, optional
        Load reversal factors per relation label; by default obtained from
        :func:`ruc.admissibility.check_admissibility`.

    Self pairs whose equation is vacuous for these factors are dropped.
    """
    eps = np.asarray(eps, dtype=float)
    g = resolve_gammas(spec, eps, gammas)
    out = []
    for p in pairs:
        coeff = p.map.gamma(g) * p.map.T
        rhs = eps @ p.map.b
        if p.self_pair and np.max(np.abs(np.eye(len(coeff)) - coeff)) <= ZERO:
            continue
        out.append(ConstraintEquation(p.slave, p.master, coeff, rhs, p.chain))
    return out


def emit(equations, fmt="json", dim=None):
    """Serialise equations as ``json``, ``csv`` or ``deck`` text."""
    if fmt == "json":
        return emit_json(equations, dim)
    if fmt == "csv":
        return emit_csv(equations)
    if fmt == "deck":
        return emit_deck(equations)
    raise ValueError(f"unknown constraint format {fmt!r}")


def emit_json(equations, dim=None):
    if dim is None:
        dim = equations[0].dim if equations else None
    payload = {"kind": "ruc-constraints", "dim": dim,
               "convention": "u(slave) - coeff u(master) = rhs",
               "equations": [e.to_json() for e in equations]}
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def parse_json(text):
    return [ConstraintEquation.from_json(e) for e in json.loads(text)["equations"]]


def emit_csv(equations):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["equation", "slave_dof", "terms", "rhs"])
    for k, eq in enumerate(equations):
        for slave_dof, terms, rhs in eq.scalar_rows():
            w.writerow([k, slave_dof, ";".join(f"{d}:{c!r}" for d, c in terms), repr(rhs)])
    return buf.getvalue()


def parse_csv(text):
    """Rows as ``(equation, slave_dof, [(dof, coef)], rhs)``."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        terms = [(int(t.split(":")[0]), float(t.split(":")[1])) for t in rec["terms"].split(";") if t]
        rows.append((int(rec["equation"]), int(rec["slave_dof"]), terms, float(rec["rhs"])))
    return rows


REF_SET = "RUC-RHS"


def emit_deck(equations):
    """``*EQUATION`` blocks with 1-based node numbers.

    Homogeneous equations cannot carry a right-hand side, so each non-zero
    rhs enters as a term on DOF 1 of the node set ``RUC-RHS``, which the user
    must create and prescribe to a unit displacement.
    """
    lines = ["** u(A) - gamma T u(A_hat) = rhs, one *EQUATION per scalar row",
             f"** nonzero rhs terms act on node set {REF_SET}, DOF 1, prescribed to 1.0"]
    for eq in equations:
        d = eq.dim
        for slave_dof, terms, rhs in eq.scalar_rows():
            # the first term is the DOF the solver eliminates
            terms = sorted(terms, key=lambda t: (t[0] != slave_dof, -abs(t[1]), t[0]))
            cells = [f"{dof // d + 1}, {dof % d + 1}, {c:.14E}" for dof, c in terms]
            if abs(rhs) > 0.0:
                cells.append(f"{REF_SET}, 1, {-rhs:.14E}")
            lines.append("*EQUATION")
            lines.append(str(len(cells)))
            for k in range(0, len(cells), 4):
                lines.append(", ".join(cells[k:k + 4]))
    return "\n".join(lines) + "\n"
