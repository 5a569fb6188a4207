"""Octree decomposition of voxel grids into cubic subdomains.

Cells live on a forest of equal root cubes tiling a box.  A cell is the key
``(level, i, j, k)``: integer lattice coordinates of its min corner at its
own level, so its size is ``root_size / 2**level``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .voxel_io import VoxelGrid


class OctreeError(ValueError):
    pass


FACE_DIRS = [d for d in itertools.product((-1, 0, 1), repeat=3) if sum(map(abs, d)) == 1]
EDGE_DIRS = [d for d in itertools.product((-1, 0, 1), repeat=3) if sum(map(abs, d)) == 2]


@dataclass(frozen=True)
class OctreeCell:
    level: int
    index: tuple
    material: int = 1

    @property
    def key(self):
        return (self.level, *self.index)


def _spread_bits(v: int) -> int:
    out = 0
    bit = 0
    while v:
        out |= (v & 1) << (3 * bit)
        v >>= 1
        bit += 1
    return out


def morton_key(x, y, z):
    return _spread_bits(x) | (_spread_bits(y) << 1) | (_spread_bits(z) << 2)


@dataclass(frozen=True, eq=False)
class OctreeMesh:
    origin: tuple
    root_size: float
    root_dims: tuple
    cells: tuple
    _lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        cells = tuple(self.cells)
        L = max((c.level for c in cells), default=0)
        cells = tuple(sorted(cells, key=lambda c: morton_key(*self._fine(c, L))))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "root_dims", tuple(int(d) for d in self.root_dims))
        object.__setattr__(self, "_lookup", {c.key: n for n, c in enumerate(cells)})
        if len(self._lookup) != len(cells):
            raise OctreeError("duplicate cells")

    @staticmethod
    def _fine(cell, L):
        f = 1 << (L - cell.level)
        return tuple(i * f for i in cell.index)

    # ---- geometry
    @property
    def min_level(self):
        return min(c.level for c in self.cells)

    @property
    def max_level(self):
        return max(c.level for c in self.cells)

    def cell_size(self, cell):
        return self.root_size / (1 << cell.level)

    def cell_min(self, cell):
        h = self.cell_size(cell)
        return np.array(self.origin) + h * np.array(cell.index, dtype=float)

    def cell_center(self, cell):
        return self.cell_min(cell) + 0.5 * self.cell_size(cell)

    def fine_box(self, cell, L=None):
        """Min corner and edge length of ``cell`` on the level-``L`` lattice."""
        L = self.max_level if L is None else L
        f = 1 << (L - cell.level)
        return tuple(i * f for i in cell.index), f

    def volume_units(self, L=None):
        """Sum of leaf volumes and domain volume, exact, on the level-L lattice."""
        L = self.max_level if L is None else L
        leaves = sum((1 << (L - c.level)) ** 3 for c in self.cells)
        return leaves, int(np.prod(self.root_dims)) * (1 << L) ** 3

    # ---- adjacency
    def __len__(self):
        return len(self.cells)

    def find(self, level, index):
        """Leaf equal to or containing the level-``level`` cube ``index``.

        Returns ``None`` if that cube is outside the domain or is subdivided.
        """
        if not self.inside(level, index):
            return None
        for m in range(level, -1, -1):
            s = level - m
            n = self._lookup.get((m, *(i >> s for i in index)))
            if n is not None:
                return self.cells[n]
        return None

    def inside(self, level, index):
        lim = [d << level for d in self.root_dims]
        return all(0 <= i < n for i, n in zip(index, lim))

    def neighbor_leaves(self, cell, direction):
        """Leaves touching ``cell`` across a face/edge/vertex ``direction``."""
        idx = tuple(i + d for i, d in zip(cell.index, direction))
        if not self.inside(cell.level, idx):
            return []
        hit = self.find(cell.level, idx)
        if hit is not None:
            return [hit]
        out = []
        stack = [(cell.level, idx)]
        while stack:
            lv, ix = stack.pop()
            for child in itertools.product((0, 1), repeat=3):
                cix = tuple(2 * i + c for i, c in zip(ix, child))
                # keep only children touching the original cell
                ok = True
                for ax, d in enumerate(direction):
                    if d == 1 and child[ax] != 0:
                        ok = False
                    if d == -1 and child[ax] != 1:
                        ok = False
                if not ok:
                    continue
                n = self._lookup.get((lv + 1, *cix))
                if n is not None:
                    out.append(self.cells[n])
                else:
                    stack.append((lv + 1, cix))
        return out

    def is_balanced(self):
        return not _violations(self)


def uniform_mesh(root_dims, root_size, origin=(0.0, 0.0, 0.0), level=0, material=1):
    n = [d << level for d in root_dims]
    cells = [OctreeCell(level, (i, j, k), material)
             for i in range(n[0]) for j in range(n[1]) for k in range(n[2])]
    return OctreeMesh(tuple(origin), float(root_size), tuple(root_dims), tuple(cells))


def split_cell(cell, material=None):
    m = cell.material if material is None else material
    return [OctreeCell(cell.level + 1, tuple(2 * i + c for i, c in zip(cell.index, ch)), m)
            for ch in itertools.product((0, 1), repeat=3)]


def refine(mesh: OctreeMesh, predicate) -> OctreeMesh:
    """Split every leaf for which ``predicate(mesh, cell)`` is true (once)."""
    out = []
    for c in mesh.cells:
        out.extend(split_cell(c) if predicate(mesh, c) else [c])
    return OctreeMesh(mesh.origin, mesh.root_size, mesh.root_dims, tuple(out))


# ----------------------------------------------------------------------------
# decomposition


def _pow2(x):
    return x >= 1 and (x & (x - 1)) == 0


def _voxel_count(length, spacing, what):
    v = length / spacing
    n = int(round(v))
    if abs(v - n) > 1e-9 * max(1.0, v):
        raise OctreeError(f"{what}={length} is not a whole number of voxels")
    if n < 1:
        raise OctreeError(f"{what}={length} is below one voxel ({spacing})")
    if not _pow2(n):
        raise OctreeError(f"{what}={length} is not a power-of-two number of voxels")
    return n


def root_voxels(dims, min_vox=1):
    """Largest power-of-two edge (in voxels) dividing all grid dims."""
    r = min_vox
    while all(d % (2 * r) == 0 for d in dims):
        r *= 2
    if any(d % r for d in dims):
        raise OctreeError(f"grid dims {dims} are not multiples of the minimum cell ({min_vox} voxels)")
    return r


def assign_material(cell, grid: VoxelGrid, root_vox=None):
    """Majority code of the voxels inside ``cell``; ties go to the smallest code."""
    root_vox = root_voxels(grid.dims) if root_vox is None else root_vox
    block = _voxel_block(cell, grid, root_vox)
    return int(np.argmax(np.bincount(block.ravel(), minlength=256)))


def _voxel_block(cell, grid, root_vox):
    size = root_vox >> cell.level
    if size < 1 or (root_vox % (1 << cell.level)):
        raise OctreeError("cell smaller than a voxel")
    lo = [i * size for i in cell.index]
    if any(l < 0 or l + size > d for l, d in zip(lo, grid.dims)):
        raise OctreeError(f"cell {cell.key} lies outside the grid")
    return grid.data[lo[0]:lo[0] + size, lo[1]:lo[1] + size, lo[2]:lo[2] + size]


def decompose(grid: VoxelGrid, threshold: int, min_size: float, max_size: float,
              balanced=True) -> OctreeMesh:
    """Recursive 8-way splitting driven by the intensity range in each cell.

    A cell is split iff ``(max - min > threshold and size > min_size)`` or
    ``size > max_size``.  The root cubes are the largest power-of-two voxel
    blocks tiling the grid.  With ``balanced`` the result is passed through
    :func:`balance`.
    """
    if min_size > max_size:
        raise OctreeError("min_size exceeds max_size")
    min_vox = _voxel_count(min_size, grid.spacing, "min_size")
    max_vox = _voxel_count(max_size, grid.spacing, "max_size")
    R = root_voxels(grid.dims, min_vox)
    root_dims = tuple(d // R for d in grid.dims)
    leaves = []
    stack = [OctreeCell(0, (i, j, k)) for i in range(root_dims[0])
             for j in range(root_dims[1]) for k in range(root_dims[2])]
    while stack:
        c = stack.pop()
        size = R >> c.level
        block = _voxel_block(c, grid, R)
        spread = int(block.max()) - int(block.min())
        if (spread > threshold and size > min_vox) or size > max_vox:
            stack.extend(split_cell(c))
        else:
            code = int(np.argmax(np.bincount(block.ravel(), minlength=256)))
            leaves.append(OctreeCell(c.level, c.index, code))
    mesh = OctreeMesh(grid.origin, R * grid.spacing, root_dims, tuple(leaves))
    return balance(mesh, grid) if balanced else mesh


# ----------------------------------------------------------------------------
# balancing


def _violations(mesh):
    """Leaves that are >1 level coarser than some face/edge neighbour."""
    bad = set()
    for c in mesh.cells:
        if c.level < 2:
            continue
        for d in FACE_DIRS + EDGE_DIRS:
            idx = tuple(i + di for i, di in zip(c.index, d))
            hit = mesh.find(c.level, idx)
            if hit is not None and hit.level < c.level - 1:
                bad.add(hit.key)
    return bad


def balance(mesh: OctreeMesh, grid: VoxelGrid | None = None) -> OctreeMesh:
    """Split coarse leaves until face- and edge-adjacent leaves differ by <= 1 level.

    Only leaves that violate the condition are split, repeatedly, so the
    result is the minimal balanced refinement.  Children inherit the parent
    material unless ``grid`` is given, in which case they are re-voted.
    """
    R = root_voxels(grid.dims) if grid is not None else None
    while True:
        bad = _violations(mesh)
        if not bad:
            return mesh
        out = []
        for c in mesh.cells:
            if c.key not in bad:
                out.append(c)
                continue
            for ch in split_cell(c):
                if grid is not None:
                    ch = OctreeCell(ch.level, ch.index, assign_material(ch, grid, R))
                out.append(ch)
        mesh = OctreeMesh(mesh.origin, mesh.root_size, mesh.root_dims, tuple(out))


def same_cells(a: OctreeMesh, b: OctreeMesh):
    return [c.key for c in a.cells] == [c.key for c in b.cells]


# ----------------------------------------------------------------------------
# export

_HEX_CORNERS = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]


def write_vtk(mesh: OctreeMesh, path, title="octree mesh"):
    """VTK legacy ASCII unstructured grid with one hexahedron per leaf."""
    from .vtk import write_unstructured

    L = mesh.max_level
    h = mesh.root_size / (1 << L)
    ids = {}
    pts = []
    conn = []
    for c in mesh.cells:
        lo, f = mesh.fine_box(c, L)
        row = []
        for corner in _HEX_CORNERS:
            key = tuple(l + f * o for l, o in zip(lo, corner))
            if key not in ids:
                ids[key] = len(pts)
                pts.append(np.array(mesh.origin) + h * np.array(key, dtype=float))
            row.append(ids[key])
        conn.append(row)
    write_unstructured(
        path, title, np.array(pts), conn, cell_type=12,
        cell_data={"level": [c.level for c in mesh.cells],
                   "material": [c.material for c in mesh.cells]})
