"""Benchmark problems: patch-test ladders, free cube modes, layered self-weight."""
from __future__ import annotations

import time

import numpy as np

from .assembly import (apply_dirichlet, body_load, convergence_rate, l2_error,
                       solve_modal, solve_static, total_mass)
from .face_mesh import check_conformity
from .octree import OctreeMesh, decompose, refine, uniform_mesh
from .pipeline import build_model
from .reference import PatchCase, patch_case
from .voxel_io import MaterialParams, synth_model

# spectral-element reference, modes 7-16 of the free cube of width 8
CUBE_REFERENCE = np.array([
    0.063666938067, 0.063666949380, 0.108860021116, 0.108860021166,
    0.108860027908, 0.108860036839, 0.108860080965, 0.108861627176,
    0.117218751959, 0.117218866414,
])

PATCH_H = (2.0, 1.0, 0.5)


def patch_mesh(case: PatchCase, h: float) -> OctreeMesh:
    """Cuboid of root cubes of edge ``h``; the half ``z > L/2`` refined once."""
    dims = tuple(int(round(v / h)) for v in (case.a, case.b, case.L))
    mesh = uniform_mesh(dims, h, case.origin)
    zmid = case.origin[2] + 0.5 * case.L
    return refine(mesh, lambda m, c: m.cell_center(c)[2] > zmid)


def run_patch(case: PatchCase | str, p: int, h: float, threads=1):
    case = patch_case(case) if isinstance(case, str) else case
    t0 = time.perf_counter()
    mesh = patch_mesh(case, h)
    model = build_model(mesh, {1: MaterialParams(case.E, case.nu, 1.0)}, p, threads)
    system = apply_dirichlet(model.system, case.on_end, case.dirichlet)
    rep = solve_static(system)
    err = l2_error(rep.u, case(model.coords))
    return {"case": case.name, "p": p, "h": h, "n_dofs": system.n_dofs, "error": err,
            "residual": rep.residual, "seconds": time.perf_counter() - t0}


def patch_ladder(case: PatchCase | str, p: int, hs=PATCH_H, threads=1):
    """Rows ``(h, n_dofs, error, rate)``; the rate uses the current and previous mesh."""
    rows = []
    for h in hs:
        row = run_patch(case, p, h, threads)
        row["rate"] = (convergence_rate([rows[-1]["h"], h], [rows[-1]["error"], row["error"]])
                       if rows and rows[-1]["error"] > 0 and row["error"] > 0 else float("nan"))
        rows.append(row)
    return rows


def cube_mesh(h: float, width=8.0) -> OctreeMesh:
    """``(width/h)^3`` cubes with the corner cube at the origin split into eight."""
    n = int(round(width / h))
    mesh = uniform_mesh((n, n, n), h)
    return refine(mesh, lambda m, c: c.index == (0, 0, 0))


def run_cube_modal(p: int, h: float, n_modes=16, threads=1, material=(1.0, 0.0, 1.0)):
    t0 = time.perf_counter()
    model = build_model(cube_mesh(h), {1: MaterialParams(*material)}, p, threads)
    rep = solve_modal(model.system, n_modes)
    f = rep.frequencies
    nz = f[6:6 + len(CUBE_REFERENCE)]
    rel = np.abs(nz - CUBE_REFERENCE[:len(nz)]) / CUBE_REFERENCE[:len(nz)]
    return {"p": p, "h": h, "n_dofs": model.system.n_dofs, "frequencies": f,
            "rigid_max": float(np.max(np.abs(f[:6]))), "rel_error": rel,
            "mean_rel_error": float(np.mean(rel)), "model": model, "report": rep,
            "seconds": time.perf_counter() - t0}


def layered_selfweight(n=16, interface=6, orders=None, g=9.81, threads=1, spacing=1.0):
    """Two-material column fixed at ``z = 0`` under gravity.

    Material 1 (stiff, top) uses ``p = 1``, material 2 (soft, bottom) ``p = 3``
    by default; faces between them take the higher order.
    """
    orders = {1: 1, 2: 3} if orders is None else orders
    grid = synth_model("layered_two_material", n=n, interface=interface, spacing=spacing)
    mesh = decompose(grid, threshold=0, min_size=spacing, max_size=n * spacing)
    palette = {k: (v if isinstance(v, MaterialParams) else MaterialParams(*v))
               for k, v in grid.palette.items()}
    model = build_model(mesh, palette, orders, threads)
    check_conformity(model.surface)
    z0 = mesh.origin[2]
    system = apply_dirichlet(model.system, lambda X: np.abs(X[:, 2] - z0) < 1e-9 * spacing)
    system = system.with_load(body_load(system, (0.0, 0.0, -g)))
    rep = solve_static(system)
    exact_mass = sum(palette[c.material].mass_density * mesh.cell_size(c) ** 3 for c in mesh.cells)
    weight = exact_mass * g
    reaction = float(np.sum(rep.reactions[2::3]))
    return {"mesh": mesh, "model": model, "system": system, "report": rep,
            "weight": weight, "reaction_z": reaction,
            "mass_matrix_total": total_mass(system),
            "balance_error": abs(reaction - weight) / weight,
            "load_error": abs(-np.sum(system.f[2::3]) - weight) / weight}
