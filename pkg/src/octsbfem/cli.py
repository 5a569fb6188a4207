"""Command-line front end: ``octsbfem {mesh,static,modal,patchtest,info,shapes}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import (ModalError, SingularSystemError, apply_dirichlet, body_load,
                       solve_modal, solve_static)
from .benchmarks import cube_mesh, patch_ladder
from .config import ConfigError, RunConfig
from .face_mesh import FaceMeshError, build_faces, check_conformity
from .octree import OctreeError, decompose, root_voxels, uniform_mesh
from .octree import write_vtk as write_octree_vtk
from .pipeline import build_model
from .reference import patch_case
from .sbfem_core import SBFEMError
from .vtk import QUAD, atomic_write_text, write_unstructured
from .voxel_io import MaterialParams, VoxelError, load_voxel_grid, synth_model
from .xny_shape import EdgeDescriptor, Segment, ShapeError, evaluate_layout, layout_of

log = logging.getLogger("octsbfem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPT = 0, 2, 3, 4


class AcceptanceFailure(RuntimeError):
    pass


# ----------------------------------------------------------------------------
# helpers


def _csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def mesh_from_config(cfg: RunConfig):
    """Octree mesh and material palette described by ``cfg.model``."""
    model = cfg.model
    overrides = {int(k): MaterialParams.from_json(v) for k, v in cfg.materials.items()}
    if "cube" in model:
        c = model["cube"]
        width, h = float(c.get("width", 8.0)), float(c["h"])
        n = width / h
        if abs(n - round(n)) > 1e-9:
            raise ConfigError("config error at model/cube: width is not a multiple of h")
        if c.get("split_corner", True):
            mesh = cube_mesh(h, width)
        else:
            mesh = uniform_mesh((round(n),) * 3, h)
        palette = {1: MaterialParams(1.0, 0.0, 1.0)}
        palette.update(overrides)
        return mesh, palette
    if "file" in model:
        grid = load_voxel_grid(model["file"])
    else:
        grid = synth_model(model["synth"], **model.get("params", {}))
    oc = cfg.octree
    root = root_voxels(grid.dims) * grid.spacing
    mesh = decompose(grid, int(oc.get("threshold", 0)),
                     float(oc.get("min_size", grid.spacing)), float(oc.get("max_size", root)))
    palette = dict(grid.palette)
    palette.update(overrides)
    return mesh, palette


def _bc_predicate(mesh, axis, side):
    a = "xyz".index(axis)
    lo = mesh.origin[a]
    hi = lo + mesh.root_size * mesh.root_dims[a]
    target = lo if side == "min" else hi
    tol = 1e-9 * mesh.root_size
    return lambda X: np.abs(X[:, a] - target) < tol


def _surface_vtk(path, model, title, point_data):
    cells = [list(f.node_ids[:4]) for f in model.surface.faces]
    write_unstructured(path, title, model.coords, cells, QUAD,
                       cell_data={"pattern": [f.pattern for f in model.surface.faces],
                                  "order": [f.order for f in model.surface.faces]},
                       point_data=point_data)


# ----------------------------------------------------------------------------
# commands


def cmd_mesh(cfg: RunConfig, out: Path):
    mesh, _ = mesh_from_config(cfg)
    surface = build_faces(mesh, cfg.order_map())
    check_conformity(surface)
    hist = surface.pattern_histogram()
    write_octree_vtk(mesh, out / "octree.vtk")
    from .face_mesh import write_vtk as write_surface_vtk
    write_surface_vtk(surface, out / "surface.vtk")
    summary = {"cells": len(mesh), "levels": [mesh.min_level, mesh.max_level],
               "faces": len(surface.faces), "nodes": surface.n_nodes,
               "dofs": 3 * surface.n_nodes,
               "pattern_histogram": {str(k): v for k, v in sorted(hist.items())},
               "element_patterns": {str(k): v for k, v in
                                    sorted(Counter(f.pattern for f in surface.faces).items())}}
    _json(out / "mesh.json", summary)
    print(f"cells {len(mesh)}  levels {mesh.min_level}..{mesh.max_level}  "
          f"faces {len(surface.faces)}  nodes {surface.n_nodes}")
    print("pattern histogram (cell faces):")
    for k in range(6):
        print(f"  pattern {k}: {hist.get(k, 0)}")
    return summary


def cmd_static(cfg: RunConfig, out: Path):
    if not cfg.bc or not cfg.bc.get("fixed"):
        raise ConfigError("config error at bc: static analysis needs boundary conditions")
    mesh, palette = mesh_from_config(cfg)
    model = build_model(mesh, palette, cfg.order_map(), cfg.threads)
    check_conformity(model.surface)
    system = model.system
    for fix in cfg.bc["fixed"]:
        system = apply_dirichlet(system, _bc_predicate(mesh, fix["axis"], fix["side"]),
                                 fix.get("value", [0.0, 0.0, 0.0]),
                                 fix.get("components", [0, 1, 2]))
    g = cfg.load.get("gravity", [0.0, 0.0, 0.0])
    system = system.with_load(body_load(system, g))
    rep = solve_static(system)
    U = rep.u.reshape(-1, 3)
    _surface_vtk(out / "displacement.vtk", model, "static displacement", {"displacement": U})
    summary = {"dofs": system.n_dofs, "residual": rep.residual,
               "max_displacement": float(np.max(np.linalg.norm(U, axis=1))),
               "load_sum": np.sum(system.f.reshape(-1, 3), axis=0).tolist(),
               "reaction_sum": np.sum(rep.reactions.reshape(-1, 3), axis=0).tolist()}
    _json(out / "static.json", summary)
    print(f"dofs {system.n_dofs}  residual {rep.residual:.2e}  "
          f"max |u| {summary['max_displacement']:.6e}")
    return summary


def cmd_modal(cfg: RunConfig, out: Path):
    mesh, palette = mesh_from_config(cfg)
    model = build_model(mesh, palette, cfg.order_map(), cfg.threads)
    rep = solve_modal(model.system, cfg.modes)
    f = rep.frequencies
    rows = [(i + 1, f"{fi:.12g}", f"{(2 * np.pi * fi):.12g}") for i, fi in enumerate(f)]
    _csv(out / "frequencies.csv", ["mode", "frequency", "omega"], rows)
    _surface_vtk(out / "modes.vtk", model, "mode shapes",
                 {f"mode_{i + 1}": rep.modes[:, i].reshape(-1, 3) for i in range(len(f))})
    print(f"dofs {model.system.n_dofs}  solver {rep.method}")
    for i, fi in enumerate(f):
        print(f"  mode {i + 1:3d}  f = {fi: .12e}")
    summary = {"dofs": model.system.n_dofs, "frequencies": f.tolist()}
    if cfg.reference:
        ref = np.asarray(cfg.reference, dtype=float)
        nz = f[6:6 + len(ref)]
        rel = np.abs(nz - ref[:len(nz)]) / ref[:len(nz)]
        summary["relative_error"] = rel.tolist()
        tol = cfg.tolerances.get("frequency")
        print("relative error vs reference (nonzero modes): "
              + " ".join(f"{e:.3e}" for e in rel))
        if tol is not None and np.any(rel > tol):
            _json(out / "modal.json", summary)
            raise AcceptanceFailure(f"frequency error {rel.max():.3e} exceeds {tol}")
    _json(out / "modal.json", summary)
    return summary


def cmd_patchtest(cfg: RunConfig, out: Path):
    pt = cfg.patchtest
    case = patch_case(pt["case"], nu=float(pt.get("nu", 0.0)))
    check = case.validate()
    if not check["passed"]:
        raise AcceptanceFailure(f"reference field fails its equilibrium oracle: {check}")
    rows = patch_ladder(case, int(pt["p"]), tuple(pt.get("h", (2.0, 1.0, 0.5))), cfg.threads)
    _csv(out / f"patch_{case.name}_p{pt['p']}.csv", ["h", "n_dofs", "error", "rate"],
         [(r["h"], r["n_dofs"], f"{r['error']:.6e}", f"{r['rate']:.4f}") for r in rows])
    for r in rows:
        print(f"h {r['h']:<6g} dofs {r['n_dofs']:<7d} error {r['error']:.3e}  rate {r['rate']:.3f}")
    ok = True
    tol = cfg.tolerances
    if "error" in tol:
        ok &= all(r["error"] <= tol["error"] for r in rows)
    if "rate" in tol:
        lo, hi = tol["rate"]
        ok &= lo <= rows[-1]["rate"] <= hi
    print("PASS" if ok else "FAIL")
    if not ok:
        raise AcceptanceFailure("patch test outside tolerances")
    return rows


def cmd_info(cfg: RunConfig | None, out: Path | None):
    print(f"octsbfem {__version__}")
    print("face patterns: 0 none, 1 one edge, 2 adjacent, 3 opposite, 4 three, 5 four edges split")
    if cfg is not None and cfg.model:
        mesh, palette = mesh_from_config(cfg)
        surface = build_faces(mesh, cfg.order_map())
        print(f"cells {len(mesh)}  faces {len(surface.faces)}  nodes {surface.n_nodes}  "
              f"dofs {3 * surface.n_nodes}")
        for k, m in sorted(palette.items()):
            print(f"  material {k}: E={m.young_modulus:g} nu={m.poisson_ratio:g} rho={m.mass_density:g}")
    return 0


def cmd_shapes(args):
    """CSV of every shape function of one element layout on a lattice."""
    edges = []
    for k, flag in enumerate(args.split):
        if flag not in "01":
            raise ConfigError("--split takes four 0/1 flags (S E N W)")
        q = args.order
        if flag == "1":   # node ids only label the layout here
            edges.append(EdgeDescriptor((Segment(-1.0, 0.0, q, tuple(range(q + 1))),
                                         Segment(0.0, 1.0, q, tuple(range(q, 2 * q + 1))))))
        else:
            edges.append(EdgeDescriptor.simple(q, range(q + 1)))
    layout = layout_of(edges)
    s = np.linspace(-1, 1, args.n)
    E_, Z_ = np.meshgrid(s, s, indexing="ij")
    N, _, _ = evaluate_layout(layout, E_.ravel(), Z_.ravel())
    rows = [[f"{e:.6f}", f"{z:.6f}", *(f"{v:.12g}" for v in row)]
            for e, z, row in zip(E_.ravel(), Z_.ravel(), N)]
    header = ["eta", "zeta", *(f"N{i}" for i in range(N.shape[1]))]
    if args.csv:
        _csv(args.csv, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return 0


COMMANDS = {"mesh": cmd_mesh, "static": cmd_static, "modal": cmd_modal,
            "patchtest": cmd_patchtest, "info": cmd_info}


def build_parser():
    ap = argparse.ArgumentParser(prog="octsbfem", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "info", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads for subdomain solves")
        p.add_argument("--verbose", "-v", action="store_true")
    p = sub.add_parser("shapes", help="dump shape-function values as CSV")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--split", default="0000", help="split flags for edges S E N W")
    p.add_argument("--n", type=int, default=11)
    p.add_argument("--csv", help="output file (default stdout)")
    p.add_argument("--verbose", "-v", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "shapes":
            return cmd_shapes(args)
        cfg = RunConfig.load(args.config) if args.config else None
        if cfg is not None:
            if args.threads:
                cfg.threads = args.threads
            if cfg.analysis != args.command and args.command not in ("info", "mesh"):
                raise ConfigError(f"config analysis is {cfg.analysis!r}, command is {args.command!r}")
        out = Path(args.out or (cfg.out if cfg else "results"))
        COMMANDS[args.command](cfg, out)
        return EXIT_OK
    except (ConfigError, VoxelError, OctreeError, FaceMeshError, ShapeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AcceptanceFailure as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return EXIT_ACCEPT
    except (SBFEMError, SingularSystemError, ModalError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
