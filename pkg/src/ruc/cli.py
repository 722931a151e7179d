"""Command line interface: ``ruc <verb> [options]``.

Every verb prints a human-readable summary and writes a JSON report
(``--report``, default ``ruc-<verb>-report.json``). Exit codes: 0 success,
2 validation or admissibility failure, 1 internal error.
"""

import argparse
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import fixtures
from .admissibility import check_admissibility, enumerate_load_cases
from .cellspec import SpecError, load_spec, save_spec, validate
from .constraints import MissingGamma, build_constraints, emit
from .elements import InvertedElement
from .fem import SolverError, Solver, homogenize
from .materials import MaterialError, MaterialTable, load_materials
from .mesh import MeshError, load_mesh, save_mesh
from .pairing import PairingError, pair_boundary_nodes, resolve
from .tiling import TilingError, tile_mesh, verify_equivalence
from .voigt import stress_to_voigt, unit_strain, voigt_size, voigt_to_strain

log = logging.getLogger("ruc")

VERBS = ("validate", "cases", "check", "pair", "constraints", "solve", "homogenize", "verify", "fixtures")


class UserFailure(Exception):
    """Expected failure on user input; exit code 2."""


def _dump(obj, path):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_strain(path, dim):
    with open(path) as fh:
        obj = json.load(fh)
    v = np.array(obj["macro_strain_voigt"], dtype=float)
    if len(v) != voigt_size(dim):
        raise UserFailure(f"load has {len(v)} components; a {dim}D cell needs {voigt_size(dim)}")
    return voigt_to_strain(v)


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise UserFailure(f"--{n} is required for '{args.verb}'")
        if n in ("spec", "mesh", "load", "material", "uc_spec") and not Path(getattr(args, n)).exists():
            raise UserFailure(f"--{n.replace('_', '-')}: file {getattr(args, n)} does not exist")


def _materials(args, mesh):
    if args.material:
        return load_materials(args.material)
    tags = sorted({int(t) for t in mesh.materials})
    log.warning("no --material given; using E=1, nu=0.3 for tags %s", tags)
    return MaterialTable.homogeneous(1.0, 0.3, tags)


def _tol(args, spec):
    return None if args.tol is None else float(args.tol)


# -- verbs -------------------------------------------------------------------

def cmd_validate(args):
    _require(args, "spec")
    spec = load_spec(args.spec)
    nodes = load_mesh(args.mesh).nodes if args.mesh else None
    rep = validate(spec, nodes)
    for m in rep.messages():
        print(m)
    if rep.improper:
        print(f"note: improper transforms (det = -1) in {rep.improper}")
    print("valid" if rep.ok else "INVALID")
    return rep.to_json(), (0 if rep.ok else 2)


def cmd_cases(args):
    _require(args, "spec")
    spec = load_spec(args.spec)
    cases = enumerate_load_cases(spec)
    labels = [r.label for r in spec.primary]
    print(f"{'case':>4}  {'gamma [' + ', '.join(labels) + ']':<40} components")
    for k, c in enumerate(cases, 1):
        g = "[" + ", ".join(f"{x:+d}" for x in c.vector) + "]"
        print(f"{k:>4}  {g:<40} {', '.join(c.components())}")
    return {"labels": labels, "cases": [c.to_json() for c in cases]}, 0


def cmd_check(args):
    _require(args, "spec", "load")
    spec = load_spec(args.spec)
    eps = load_strain(args.load, spec.dim)
    res = check_admissibility(spec, eps, tol=args.tol or 1e-12)
    if not res:
        print(res.message())
        return res.to_json(), 2
    print("admissible; gamma = [" + ", ".join(f"{g:+d}" for g in res.vector) + "] for " + ", ".join(res.primary))
    return res.to_json(), 0


def _pairs(args, spec, mesh):
    graph = pair_boundary_nodes(mesh, spec, _tol(args, spec))
    return graph, resolve(graph, spec)


def cmd_pair(args):
    _require(args, "spec", "mesh")
    spec, mesh = load_spec(args.spec), load_mesh(args.mesh)
    graph, pairs = _pairs(args, spec, mesh)
    out = args.out or "pairs.json"
    _dump([p.to_json() for p in pairs], out)
    n_self = sum(p.self_pair for p in pairs)
    print(f"{len(pairs) - n_self} slave pairs, {n_self} self pairs written to {out}")
    if graph.uncovered:
        print(f"warning: {len(graph.uncovered)} boundary nodes are in no relation: {graph.uncovered[:10]}")
    return {"pairing": graph.report(), "pairs": len(pairs), "self_pairs": n_self, "output": out}, 0


def cmd_constraints(args):
    _require(args, "spec", "mesh", "load")
    spec, mesh = load_spec(args.spec), load_mesh(args.mesh)
    eps = load_strain(args.load, spec.dim)
    _, pairs = _pairs(args, spec, mesh)
    eqs = build_constraints(pairs, spec, eps)
    fmt = args.format or "json"
    text = emit(eqs, fmt, dim=spec.dim)
    out = args.out or f"constraints.{ 'inp' if fmt == 'deck' else fmt}"
    Path(out).write_text(text)
    n_self = sum(e.self_pair for e in eqs)
    print(f"{len(eqs)} constraint equations ({n_self} on single nodes) written to {out}")
    return {"equations": len(eqs), "self_pair_equations": n_self, "format": fmt, "output": out}, 0


def cmd_solve(args):
    _require(args, "spec", "mesh", "load")
    spec, mesh = load_spec(args.spec), load_mesh(args.mesh)
    eps = load_strain(args.load, spec.dim)
    solver = Solver(mesh, spec, _materials(args, mesh), args.plane, tol=_tol(args, spec))
    sol = solver.solve(eps)
    summ = sol.summary()
    print("macro stress (Voigt):", np.array2string(np.array(summ["macro_stress_voigt"]), precision=6))
    print(f"constraint residual {summ['constraint_residual']:.2e}, "
          f"macro rotation {summ['macro_rotation_norm']:.2e}")
    if summ["macro_rotation_norm"] > 1e-8:
        log.warning("volume-average rotation %.3e exceeds 1e-8", summ["macro_rotation_norm"])
    report = {"summary": summ, "pairing": solver.pairing_report}
    if args.out:
        _dump({"summary": summ, "displacement": sol.u}, args.out)
        report["output"] = args.out
    if args.gauss_csv:
        x = sol.points.reshape(-1, spec.dim)
        e = sol.strain_voigt.reshape(len(x), -1)
        s = sol.stress_voigt.reshape(len(x), -1)
        m = e.shape[1]
        head = ",".join([f"x{i}" for i in range(spec.dim)] + [f"e{k}" for k in range(m)] + [f"s{k}" for k in range(m)])
        np.savetxt(args.gauss_csv, np.hstack([x, e, s]), delimiter=",", header=head, comments="", fmt="%.17g")
    return report, 0


def cmd_homogenize(args):
    _require(args, "spec", "mesh")
    spec, mesh = load_spec(args.spec), load_mesh(args.mesh)
    solver = Solver(mesh, spec, _materials(args, mesh), args.plane, tol=_tol(args, spec))
    H = homogenize(mesh, spec, solver.materials, args.plane, solver=solver)
    print("effective stiffness (Voigt, engineering shear):")
    print(np.array2string(H.C, precision=6, suppress_small=True))
    print(f"asymmetry {H.asymmetry:.2e}")
    if not H.mask.all():
        print(f"columns not computable (no admissible case): {np.where(~H.mask)[0].tolist()}")
    return H.to_json(), 0


def cmd_verify(args):
    _require(args, "spec", "mesh", "uc_spec")
    spec, mesh = load_spec(args.spec), load_mesh(args.mesh)
    uc_spec = load_spec(args.uc_spec)
    mats = _materials(args, mesh)
    tiling = tile_mesh(spec, mesh, uc_spec.bbox)
    rs = Solver(mesh, spec, mats, args.plane, tol=_tol(args, spec))
    us = Solver(tiling.mesh, uc_spec, mats, args.plane)
    Hr = homogenize(mesh, spec, mats, args.plane, solver=rs)
    Hu = homogenize(tiling.mesh, uc_spec, mats, args.plane, solver=us)
    sub = np.ix_(Hr.mask, Hr.mask)
    c_err = float(np.max(np.abs(Hr.C[sub] - Hu.C[sub]))) / max(float(np.max(np.abs(Hu.C))), 1e-300)
    loads = [load_strain(args.load, spec.dim)] if args.load else \
        [unit_strain(spec.dim, j) for j in range(voigt_size(spec.dim)) if Hr.mask[j]]
    fields = []
    for eps in loads:
        rep = verify_equivalence(us.solve(eps), rs.solve(eps), tiling)
        fields.append(rep.to_json())
    worst = max((max(f["strain_residual"], f["stress_residual"]) for f in fields), default=0.0)
    ok = c_err <= 1e-8 and worst <= 1e-8
    print(f"{len(tiling.copies)} copies, {tiling.mesh.n_dofs} full-cell DOFs")
    print(f"C_eff relative difference {c_err:.2e}; worst field residual {worst:.2e}")
    print("equivalent" if ok else "NOT equivalent")
    return {"copies": len(tiling.copies), "C_eff_ruc": Hr.C, "C_eff_uc": Hu.C,
            "C_eff_relative_difference": c_err, "fields": fields, "passed": ok}, (0 if ok else 2)


def cmd_fixtures(args):
    out = Path(args.out or "fixtures")
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def spec_file(name, spec):
        save_spec(spec, out / name)
        written.append(name)

    def mesh_file(name, mesh):
        save_mesh(mesh, out / name)
        written.append(name)

    def json_file(name, obj):
        _dump(obj, out / name)
        written.append(name)

    spec_file("woven3d.json", fixtures.woven_spec())
    mesh_file("woven3d_mesh.json", fixtures.woven_mesh())
    json_file("woven3d_materials.json", fixtures.woven_materials().to_json())
    spec_file("honeycomb.json", fixtures.honeycomb_spec())
    mesh_file("honeycomb_mesh.json", fixtures.honeycomb_mesh())
    json_file("honeycomb_materials.json", fixtures.honeycomb_materials().to_json())
    spec_file("honeycomb_uc.json", fixtures.honeycomb_uc_spec())
    spec_file("checkerboard.json", fixtures.checkerboard_spec())
    mesh_file("checkerboard_mesh.json", fixtures.checkerboard_mesh())
    json_file("checkerboard_materials.json", fixtures.checkerboard_materials().to_json())
    cuc = fixtures.checkerboard_uc_spec()
    spec_file("checkerboard_uc.json", cuc)
    mesh_file("checkerboard_uc_mesh.json",
              tile_mesh(fixtures.checkerboard_spec(), fixtures.checkerboard_mesh(), cuc.bbox).mesh)
    json_file("tension_2d.json", {"macro_strain_voigt": [0.01, 0.0, 0.0]})
    json_file("shear_2d.json", {"macro_strain_voigt": [0.0, 0.0, 0.01]})
    json_file("tension_3d.json", {"macro_strain_voigt": [0.01, 0.0, 0.0, 0.0, 0.0, 0.0]})
    json_file("shear_3d.json", {"macro_strain_voigt": [0.0, 0.0, 0.0, 0.01, 0.01, 0.0]})
    print(f"wrote {len(written)} files to {out}")
    return {"directory": str(out), "files": written}, 0


COMMANDS = {v: globals()[f"cmd_{v}"] for v in VERBS}


def build_parser():
    p = argparse.ArgumentParser(prog="ruc", description=__doc__.splitlines()[0])
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--spec", help="cell spec JSON")
    p.add_argument("--mesh", help="mesh JSON")
    p.add_argument("--load", help='load JSON: {"macro_strain_voigt": [...]}, engineering shear')
    p.add_argument("--material", help="materials JSON: {\"materials\": {tag: {E, nu} | {C}}}")
    p.add_argument("--uc-spec", dest="uc_spec", help="full cell spec for 'verify'")
    p.add_argument("--tol", type=float, help="pairing tolerance (default 1e-8 x box diagonal); "
                   "admissibility tolerance for 'check'")
    p.add_argument("--format", choices=("json", "csv", "deck"), help="constraint output format")
    p.add_argument("--out", "-o", help="output file (directory for 'fixtures')")
    p.add_argument("--report", help="JSON report path (default ruc-<verb>-report.json)")
    p.add_argument("--gauss-csv", dest="gauss_csv", help="'solve': dump Gauss point fields as CSV")
    p.add_argument("--threads", type=int, help="BLAS/LAPACK thread count")
    p.add_argument("--plane", choices=("strain", "stress"), default="strain", help="2D assumption")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    level = os.environ.get("RUC_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.tol is not None and args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return 2
    report_path = args.report or f"ruc-{args.verb}-report.json"
    if args.threads:
        from threadpoolctl import threadpool_limits
        ctx = threadpool_limits(limits=args.threads)
    else:
        ctx = nullcontext()
    try:
        with ctx:
            report, code = COMMANDS[args.verb](args)
        status = "ok" if code == 0 else "failed"
    except (UserFailure, SpecError, MeshError, MaterialError, PairingError, MissingGamma,
            SolverError, TilingError, InvertedElement, KeyError, ValueError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        print(f"error: {msg}", file=sys.stderr)
        report, code, status = {"error": type(exc).__name__, "message": msg}, 2, "failed"
    except Exception as exc:  # noqa: BLE001 - top-level guard
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        report, code, status = {"error": type(exc).__name__, "message": str(exc)}, 1, "error"
    try:
        _dump({"verb": args.verb, "status": status, "exit_code": code, "result": report}, report_path)
    except OSError as exc:
        print(f"error: cannot write report {report_path}: {exc}", file=sys.stderr)
        return 1
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
