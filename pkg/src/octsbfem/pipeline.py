"""Mesh -> surface -> subdomain operators -> global system.

Octrees repeat the same cube layouts many times.  Subdomain matrices are
computed once per layout on ``E = 1``, ``rho = 1`` and rescaled: stiffness
scales with ``E * size`` and mass with ``rho * size**3``.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import GlobalSystem, assemble
from .face_mesh import SurfaceMesh, build_faces
from .octree import OctreeMesh
from .sbfem_core import SubdomainResult, elasticity_matrix, solve_subdomain
from .voxel_io import MaterialParams

log = logging.getLogger(__name__)


@dataclass
class SubdomainCache:
    """Thread-safe map from layout signature to unit-scale results."""

    method: str = "schur"
    store: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def get(self, key):
        with self._lock:
            r = self.store.get(key)
            if r is None:
                self.misses += 1
            else:
                self.hits += 1
            return r

    def put(self, key, value):
        with self._lock:
            return self.store.setdefault(key, value)

    def __len__(self):
        return len(self.store)


def _local_order(faces):
    local = {}
    for f in faces:
        for g in f.node_ids:
            local.setdefault(g, len(local))
    return tuple(local)


def signature(faces, coords, center, size, nu, digits=9):
    """Hashable description of a subdomain up to translation and scale."""
    ids = _local_order(faces)
    X = np.round((coords[list(ids)] - center) / size, digits) + 0.0
    struct = tuple((f.layout.sigs, f.swapped) for f in faces)
    return (round(float(nu), 12), struct, X.tobytes())


def _unit_result(faces, coords, center, size, nu, method):
    D = elasticity_matrix(1.0, nu)
    r = solve_subdomain(faces, coords, center, D, 1.0, size, method)
    r.K = r.K / size
    r.M = r.M / size ** 3
    return r


def subdomain_results(surface: SurfaceMesh, palette, threads=1, cache=None, method="schur"):
    """Per-leaf :class:`SubdomainResult` in mesh order."""
    mesh = surface.mesh
    coords = surface.coords
    cache = SubdomainCache(method) if cache is None else cache
    jobs = []
    for n, cell in enumerate(mesh.cells):
        mat = palette.get(cell.material)
        if mat is None:
            raise KeyError(f"material code {cell.material} has no palette entry")
        faces = surface.subdomain_faces(n)
        size = mesh.cell_size(cell)
        center = mesh.cell_center(cell)
        key = signature(faces, coords, center, size, mat.poisson_ratio)
        jobs.append((n, faces, center, size, mat, key))

    todo = {}
    for n, faces, center, size, mat, key in jobs:
        if key not in cache.store and key not in todo:
            todo[key] = (faces, center, size, mat.poisson_ratio)
    keys = list(todo)

    def work(key):
        faces, center, size, nu = todo[key]
        return key, _unit_result(faces, coords, center, size, nu, cache.method)

    if threads and threads > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            done = list(ex.map(work, keys))
    else:
        done = [work(k) for k in keys]
    for key, r in done:
        cache.put(key, r)
    log.info("subdomains: %d leaves, %d distinct layouts (%d new)", len(jobs), len(cache), len(keys))

    out = []
    for n, faces, center, size, mat, key in jobs:
        unit = cache.get(key)
        out.append(SubdomainResult(
            K=mat.young_modulus * size * unit.K,
            M=mat.mass_density * size ** 3 * unit.M,
            node_ids=_local_order(faces), center=center, size=size,
            modes=unit.modes, asymmetry=unit.asymmetry, op=unit.op))
    return out


@dataclass
class Model:
    """Everything needed to post-process a solve."""

    mesh: OctreeMesh
    surface: SurfaceMesh
    results: list
    system: GlobalSystem
    palette: dict

    @property
    def coords(self):
        return self.surface.coords

    def leaf_of(self, point):
        """Index of the leaf containing ``point`` (first match on shared faces)."""
        p = np.asarray(point, dtype=float)
        for n, c in enumerate(self.mesh.cells):
            lo = self.mesh.cell_min(c)
            h = self.mesh.cell_size(c)
            if np.all(p >= lo - 1e-12 * h) and np.all(p <= lo + h + 1e-12 * h):
                return n
        raise ValueError(f"point {p} is outside the mesh")

    def displacement_at(self, u, point):
        """Interior displacement from the SBFEM radial solution."""
        from .sbfem_core import displacement_at

        n = self.leaf_of(point)
        r = self.results[n]
        dof = (3 * np.asarray(r.node_ids)[:, None] + np.arange(3)).ravel()
        return displacement_at(r, np.asarray(u)[dof], point)


def build_model(mesh: OctreeMesh, palette, order_map=1, threads=1, cache=None,
                method="schur") -> Model:
    palette = {int(k): (v if isinstance(v, MaterialParams) else MaterialParams(*v))
               for k, v in palette.items()}
    surface = build_faces(mesh, order_map)
    results = subdomain_results(surface, palette, threads, cache, method)
    system = assemble(results, surface.coords)
    return Model(mesh, surface, results, system, palette)
