"""Small-strain linear elasticity on Q4/H8 meshes with periodic-type
multipoint constraints eliminated through a reduction operator.

The displacement is written ``u = R q + c``: ``R`` carries the homogeneous
part of the constraints, ``c`` the load-dependent offsets. The reduced
system ``R^t K R q = -R^t K c`` stays symmetric positive definite once the
free rigid translations are fixed.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .admissibility import enumerate_load_cases, orbit_average, signed_point_group
from .constraints import build_constraints, resolve_gammas
from .elements import displacement_gradient, kinematics, strain_operator
from .materials import MaterialTable
from .pairing import pair_boundary_nodes, resolve
from .voigt import (
    strain_to_voigt,
    stress_to_voigt,
    unit_strain,
    voigt_size,
    voigt_to_strain,
    voigt_to_stress,
)

log = logging.getLogger(__name__)

RANK_RTOL = 1e-10


class SolverError(RuntimeError):
    pass


class SingularSystem(SolverError):
    def __init__(self, nullity, gammas):
        self.nullity = nullity
        super().__init__(f"reduced stiffness is singular (nullspace dimension {nullity}) for "
                         f"gamma = {gammas}; the constraints leave a rigid motion free")


class ConstraintConflict(SolverError):
    """Self constraints on a node cannot all hold for the given strain and factors."""


def assemble(mesh, materials, plane="strain"):
    """Global stiffness as a CSR matrix, DOFs ordered node-major (x, y[, z])."""
    d = mesh.dim
    C = MaterialTable(materials).stiffness_stack(mesh.materials, d, plane)
    grads, wdet, _ = kinematics(mesh.element_coords())
    B = strain_operator(grads)
    Ke = np.einsum("egki,ekl,eglj,eg->eij", B, C, B, wdet, optimize=True)
    dofs = (mesh.elements[:, :, None] * d + np.arange(d)).reshape(len(mesh.elements), -1)
    nd = dofs.shape[1]
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()
    K.sum_duplicates()
    return K


def _null_and_pinv(A):
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > RANK_RTOL * max(s[0], 1.0))) if len(s) else 0
    return vt[rank:].T, np.linalg.pinv(A, rcond=RANK_RTOL)


def translation_basis(dim, coeffs):
    """Orthonormal basis of translations ``t`` with ``t = G t`` for every coefficient block."""
    if not coeffs:
        return np.eye(dim)
    A = np.vstack([np.eye(dim) - G for G in coeffs])
    N, _ = _null_and_pinv(A)
    return N


@dataclass
class ReducedSystem:
    """Reduction operator for one set of load reversal factors."""

    gammas: dict
    R: sp.csr_matrix
    free: np.ndarray
    lu: object
    translations: np.ndarray
    pin_node: int
    slaves: np.ndarray
    slave_master: np.ndarray
    slave_coeff: np.ndarray
    slave_b: np.ndarray
    self_blocks: dict
    equations: list = field(default_factory=list)


class Solver:
    """Assembled cell ready to be solved for any number of macro strains.

    Parameters
    ----------
    mesh : Mesh
    spec : CellSpec
    materials : dict or MaterialTable
    plane : {"strain", "stress"}
        2D kinematic assumption; ignored in 3D.
    pairs : list of NodePair, optional
        Pre-resolved pairs; computed from the cell spec when omitted.
    tol : float, optional
        Pairing tolerance.
    """

    def __init__(self, mesh, spec, materials, plane="strain", pairs=None, tol=None):
        if mesh.dim != spec.dim:
            raise ValueError(f"mesh is {mesh.dim}D but the cell spec is {spec.dim}D")
        self.mesh, self.spec, self.plane = mesh, spec, plane
        self.materials = MaterialTable(materials)
        t0 = time.perf_counter()
        self.K = assemble(mesh, self.materials, plane)
        d = mesh.dim
        self.C = self.materials.stiffness_stack(mesh.materials, d, plane)
        self.grads, self.wdet, self.xg = kinematics(mesh.element_coords())
        self.B = strain_operator(self.grads)
        if pairs is None:
            graph = pair_boundary_nodes(mesh, spec, tol)
            self.pairing_report = graph.report()
            pairs = resolve(graph, spec)
        else:
            self.pairing_report = {}
        self.pairs = pairs
        self._systems = {}
        log.debug("assembled %d dofs in %.3fs", mesh.n_dofs, time.perf_counter() - t0)

    @property
    def volume(self):
        return float(self.wdet.sum())

    # -- reduction ---------------------------------------------------------
    def system(self, gammas):
        key = tuple(sorted(gammas.items()))
        if key not in self._systems:
            self._systems[key] = self._reduce(dict(gammas))
        return self._systems[key]

    def _reduce(self, g):
        mesh, d = self.mesh, self.mesh.dim
        n = mesh.n_nodes
        slave_pairs = [p for p in self.pairs if not p.self_pair]
        self_pairs = [p for p in self.pairs if p.self_pair]
        slaves = np.array([p.slave for p in slave_pairs], dtype=np.int64)
        masters = np.array([p.master for p in slave_pairs], dtype=np.int64)
        coeff = np.array([p.map.gamma(g) * p.map.T for p in slave_pairs]).reshape(-1, d, d)
        bvec = np.array([p.map.b for p in slave_pairs]).reshape(-1, d)

        blocks = {}
        for p in self_pairs:
            G = p.map.gamma(g) * p.map.T
            if np.max(np.abs(np.eye(d) - G)) <= 1e-14:
                continue
            blocks.setdefault(p.master, []).append((np.eye(d) - G, p.map.b.copy(), p.chain))
        self_blocks = {}
        for m, items in blocks.items():
            A = np.vstack([a for a, _, _ in items])
            N, pinv = _null_and_pinv(A)
            self_blocks[m] = (A, N, pinv, [b for _, b, _ in items], [c for _, _, c in items])

        is_slave = np.zeros(n, dtype=bool)
        is_slave[slaves] = True
        indep = np.where(~is_slave)[0]
        basis = {}
        offset = np.full(n, -1, dtype=np.int64)
        nq = 0
        for node in indep:
            N = self_blocks[node][1] if node in self_blocks else None
            k = d if N is None else N.shape[1]
            basis[node] = N
            offset[node] = nq
            nq += k

        rows, cols, vals = [], [], []

        def put(node, M, master):
            N = basis[master]
            blk = M if N is None else M @ N
            r = node * d + np.arange(d)
            c = offset[master] + np.arange(blk.shape[1])
            rr, cc = np.meshgrid(r, c, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(blk.ravel())

        for node in indep:
            put(node, np.eye(d), node)
        for s, m, G in zip(slaves, masters, coeff):
            put(s, G, m)
        R = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n * d, nq)).tocsr()
        R.eliminate_zeros()

        # rigid translations left free by the constraints
        coeffs = {tuple(np.round(G, 12).ravel()): G for G in coeff}
        for m, (A, *_rest) in self_blocks.items():
            for k in range(0, len(A), d):
                G = np.eye(d) - A[k:k + d]
                coeffs[tuple(np.round(G, 12).ravel())] = G
        Bt = translation_basis(d, list(coeffs.values()))
        dist = np.linalg.norm(mesh.nodes, axis=1)
        order = np.lexsort((np.arange(n), dist))
        pin_node = int(order[0])
        Tq = np.zeros((nq, Bt.shape[1]))
        for node in indep:
            N = basis[node]
            Tq[offset[node]:offset[node] + (d if N is None else N.shape[1])] = Bt if N is None else N.T @ Bt
        pinned = []
        if Bt.shape[1]:
            for node in order:
                if is_slave[node]:
                    continue
                k = d if basis[node] is None else basis[node].shape[1]
                for j in range(offset[node], offset[node] + k):
                    trial = pinned + [j]
                    if np.linalg.matrix_rank(Tq[trial], tol=1e-8) == len(trial):
                        pinned = trial
                if len(pinned) == Bt.shape[1]:
                    break
        free = np.setdiff1d(np.arange(nq), pinned)
        Rf = R[:, free]
        Kr = (Rf.T @ self.K @ Rf).tocsc()
        lu = _factor(Kr, g)
        return ReducedSystem(g, Rf, free, lu, Bt, pin_node, slaves, masters, coeff, bvec, self_blocks)

    def offsets(self, system, eps, strict=True):
        """Load-dependent vector ``c`` and the worst self-constraint mismatch."""
        d, n = self.mesh.dim, self.mesh.n_nodes
        p = np.zeros((n, d))
        scale = max(float(np.max(np.abs(eps))) * self.spec.diag, 1e-300)
        worst = 0.0
        for m, (A, _, pinv, bs, chains) in system.self_blocks.items():
            r = np.concatenate([eps @ b for b in bs])
            pm = pinv @ r
            mis = float(np.max(np.abs(A @ pm - r))) / scale
            if mis > 1e-9 and strict:
                raise ConstraintConflict(
                    f"node {m}: constraints from relations "
                    f"{sorted({lab for c in chains for lab, _ in c})} cannot hold together for this "
                    f"macro strain and gamma = {system.gammas} (mismatch {mis:.3e})")
            worst = max(worst, mis)
            p[m] = pm
        if len(system.slaves):
            p[system.slaves] = (np.einsum("sij,sj->si", system.slave_coeff, p[system.slave_master])
                                + system.slave_b @ eps.T)
        return p.ravel(), worst

    # -- solution ----------------------------------------------------------
    def solve(self, eps, gammas=None, strict=True):
        """Solve for a macro strain ``eps`` (``(d, d)`` tensor).

        ``gammas`` overrides the factors from the admissibility check; with
        ``strict=False`` conflicting self constraints are met in the least
        squares sense instead of raising. Both exist for negative controls.
        """
        eps = np.asarray(eps, dtype=float)
        g = resolve_gammas(self.spec, eps, gammas)
        system = self.system(g)
        c, mismatch = self.offsets(system, eps, strict)
        fr = -(system.R.T @ (self.K @ c))
        q = system.lu.solve(fr)
        u = (system.R @ q + c).reshape(-1, self.mesh.dim)
        # fix the free translations so that u* vanishes at the pin node
        Bt = system.translations
        if Bt.shape[1]:
            x0 = self.mesh.nodes[system.pin_node]
            ustar = u[system.pin_node] - eps @ x0
            u = u - Bt @ (Bt.T @ ustar)
        return self._field(u, eps, g, mismatch)

    def _field(self, u, eps, g, mismatch):
        d = self.mesh.dim
        ue = u[self.mesh.elements]
        strain_v = np.einsum("egkj,ej->egk", self.B, ue.reshape(len(ue), -1))
        stress_v = np.einsum("ekl,egl->egk", self.C, strain_v)
        H = displacement_gradient(self.grads, ue)
        sol = FieldSolution(
            u=u, strain_voigt=strain_v, stress_voigt=stress_v, grad=H, weights=self.wdet,
            points=self.xg, eps_macro=eps, gammas=g, nodes=self.mesh.nodes,
            group=signed_point_group(self.spec, g), mismatch=mismatch)
        eqs = build_constraints(self.pairs, self.spec, eps, gammas=g)
        scale = max(float(np.max(np.abs(eps))) * self.spec.diag, 1e-300)
        sol.constraint_residual = max((float(np.max(np.abs(e.residual(u)))) for e in eqs), default=0.0) / scale
        sol.n_equations = len(eqs)
        if d == 2 and self.plane == "stress":
            sol.plane = "stress"
        return sol


def _factor(Kr, gammas):
    n = Kr.shape[0]
    try:
        lu = splu(Kr, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError:
        raise SingularSystem(_nullity(Kr), gammas) from None
    piv = np.abs(lu.U.diagonal())
    if n and piv.min() <= 1e-12 * piv.max():
        raise SingularSystem(int(np.sum(piv <= 1e-12 * piv.max())), gammas)
    return lu


def _nullity(Kr):
    if Kr.shape[0] > 4000:
        return -1
    w = np.linalg.eigvalsh(Kr.toarray())
    return int(np.sum(np.abs(w) <= 1e-10 * max(np.abs(w).max(), 1e-300)))


@dataclass
class FieldSolution:
    """Nodal displacements and Gauss point strains and stresses.

    ``strain_voigt`` uses engineering shear. Macro quantities (``macro_*``)
    are cell averages mapped over the signed point group of the relations,
    which equals the average over the whole periodic structure; ``raw_*``
    are plain averages over the analysed cell.
    """

    u: np.ndarray
    strain_voigt: np.ndarray
    stress_voigt: np.ndarray
    grad: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    eps_macro: np.ndarray
    gammas: dict
    nodes: np.ndarray
    group: list
    mismatch: float = 0.0
    constraint_residual: float = 0.0
    n_equations: int = 0
    plane: str = "strain"

    @property
    def dim(self):
        return self.u.shape[1]

    @property
    def volume(self):
        return float(self.weights.sum())

    def strain(self):
        return voigt_to_strain(self.strain_voigt)

    def stress(self):
        return voigt_to_stress(self.stress_voigt)

    def fluctuation(self):
        """``u* = u - <eps> x`` at the nodes."""
        return self.u - self.nodes @ self.eps_macro.T

    def raw_strain(self):
        return volume_average(self.strain(), self.weights)

    def raw_stress(self):
        return volume_average(self.stress(), self.weights)

    def macro_strain(self):
        return orbit_average(self.raw_strain(), self.group)

    def macro_stress(self):
        return orbit_average(self.raw_stress(), self.group)

    def macro_rotation(self):
        H = orbit_average(volume_average(self.grad, self.weights), self.group)
        return 0.5 * (H - H.T)

    def energy_average(self):
        """``<sigma : eps>``; a scalar, hence the same over the cell and the structure."""
        return float(np.einsum("eg,egk,egk->", self.weights, self.stress_voigt, self.strain_voigt)) / self.volume

    def summary(self):
        return {
            "gamma": self.gammas,
            "macro_strain_voigt": strain_to_voigt(self.macro_strain()).tolist(),
            "macro_stress_voigt": stress_to_voigt(self.macro_stress()).tolist(),
            "raw_strain_voigt": strain_to_voigt(self.raw_strain()).tolist(),
            "raw_stress_voigt": stress_to_voigt(self.raw_stress()).tolist(),
            "macro_rotation_norm": float(np.max(np.abs(self.macro_rotation()))),
            "energy_average": self.energy_average(),
            "constraint_residual": self.constraint_residual,
            "constraint_mismatch": self.mismatch,
            "equations": self.n_equations,
            "group_order": len(self.group),
        }


def volume_average(field, weights):
    """Gauss-weighted average of a field shaped ``(ne, ng, ...)``."""
    field = np.asarray(field, dtype=float)
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w, field, axes=([0, 1], [0, 1])) / w.sum()


def solve_ruc(mesh, spec, materials, eps, plane="strain", gammas=None, strict=True, tol=None):
    """One-shot solve; see :class:`Solver` for repeated loads."""
    return Solver(mesh, spec, materials, plane, tol=tol).solve(eps, gammas, strict)


@dataclass
class HomogenizedStiffness:
    """Effective stiffness, columns ordered as engineering Voigt strains.

    ``mask[j]`` is False when unit strain ``j`` lies in no admissible load
    case; that column is then left at zero.
    """

    C: np.ndarray
    C_raw: np.ndarray
    mask: np.ndarray
    asymmetry: float
    cases: list

    def to_json(self):
        return {"C_eff": self.C.tolist(), "C_unsymmetrized": self.C_raw.tolist(),
                "computed_columns": self.mask.tolist(), "asymmetry": self.asymmetry,
                "cases": self.cases}


def homogenize(mesh, spec, materials, plane="strain", solver=None):
    """Effective stiffness from unit macro strains, grouped by load case."""
    solver = solver or Solver(mesh, spec, materials, plane)
    d = spec.dim
    m = voigt_size(d)
    cases = enumerate_load_cases(spec)
    Craw = np.zeros((m, m))
    mask = np.zeros(m, dtype=bool)
    used = []
    for j in range(m):
        e = unit_strain(d, j)
        case = next((c for c in cases if c.contains(e)), None)
        if case is None:
            log.warning("unit strain %d is admissible under no load case; column skipped", j)
            continue
        sol = solver.solve(e, gammas=case.gammas)
        Craw[:, j] = stress_to_voigt(sol.macro_stress())
        mask[j] = True
        used.append({"column": j, "gamma": case.vector})
    sub = np.ix_(mask, mask)
    C = Craw.copy()
    C[sub] = 0.5 * (Craw[sub] + Craw[sub].T)
    norm = max(float(np.max(np.abs(Craw[sub]))) if mask.any() else 0.0, 1e-300)
    asym = float(np.max(np.abs(Craw[sub] - Craw[sub].T))) / norm if mask.any() else 0.0
    return HomogenizedStiffness(C, Craw, mask, asym, used)
