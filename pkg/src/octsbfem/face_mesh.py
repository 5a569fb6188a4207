"""Conforming quadrilateral surface meshes of balanced octrees.

Every leaf face becomes one transition element, or four standard ones when
either the neighbour across it is finer or all four of its edges carry a
mid-edge node.  Geometry is handled on the integer lattice of the finest
level, so all node matching is exact.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .octree import OctreeMesh
from .xny_shape import (E, N, S, W, EdgeDescriptor, ElementLayout, Segment,
                        ShapeError, gll_nodes, layout_of, local_node_ids)


class FaceMeshError(ValueError):
    pass


# cell face order used everywhere: -x, +x, -y, +y, -z, +z
SIDES = ((0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1))


@dataclass(frozen=True)
class FaceElement:
    """One square surface element.

    The reference frame is ``x(eta, zeta) = corner0 + (eta+1)/2 * s * e_u +
    (zeta+1)/2 * s * e_v`` where ``e_u, e_v`` are the cyclic in-plane axes of
    ``axis``; ``e_u x e_v`` points along ``+axis``.  :meth:`transposed`
    swaps the reference axes, flipping the orientation.
    """

    key: tuple                 # (axis, plane, u0, v0, size) on the fine lattice
    owners: tuple              # ((cell_index, outward_sign), ...)
    corners: np.ndarray        # (4, 3) physical corner coordinates, ref order
    edges: tuple               # 4 EdgeDescriptors: S, E, N, W
    order: int
    swapped: bool = False

    @property
    def axis(self):
        return self.key[0]

    @property
    def pattern(self):
        return classify_pattern(self)

    @property
    def layout(self) -> ElementLayout:
        return layout_of(self.edges)

    @property
    def node_ids(self) -> tuple:
        return local_node_ids(self.edges)

    @property
    def normal(self):
        """Unit normal of the reference frame (eta x zeta)."""
        c = self.corners
        n = np.cross(c[1] - c[0], c[3] - c[0])
        return n / np.linalg.norm(n)

    @property
    def area(self):
        c = self.corners
        return float(np.linalg.norm(np.cross(c[1] - c[0], c[3] - c[0])))

    def transposed(self):
        c = self.corners
        e = self.edges
        return FaceElement(self.key, self.owners, c[[0, 3, 2, 1]],
                           (e[W], e[N], e[E], e[S]), self.order, not self.swapped)


@dataclass
class NodeTable:
    keys: list = field(default_factory=list)
    coords: list = field(default_factory=list)
    index: dict = field(default_factory=dict)

    def get_or_insert(self, key, xyz):
        n = self.index.get(key)
        if n is None:
            n = len(self.keys)
            self.index[key] = n
            self.keys.append(key)
            self.coords.append(np.asarray(xyz, dtype=float))
        return n

    def __len__(self):
        return len(self.keys)

    def array(self):
        return np.array(self.coords).reshape(-1, 3)


@dataclass
class SurfaceMesh:
    mesh: OctreeMesh
    faces: list
    nodes: NodeTable
    cell_faces: list           # per leaf: [(face index, outward sign), ...]
    cell_orders: list
    region_patterns: list      # per leaf, per side: pattern id of the cell face
    unit: float                # fine-lattice spacing

    @property
    def coords(self):
        return self.nodes.array()

    @property
    def n_nodes(self):
        return len(self.nodes)

    def subdomain_faces(self, n):
        """Faces of leaf ``n`` oriented so that their normal points outward."""
        out = []
        for fi, sgn in self.cell_faces[n]:
            f = self.faces[fi]
            out.append(f if sgn > 0 else f.transposed())
        return out

    def pattern_histogram(self):
        return Counter(p for row in self.region_patterns for p in row)


def shared_face_order(p_a, p_b):
    return max(int(p_a), int(p_b))


def classify_pattern(face) -> int:
    """Rotation-invariant pattern id from the split state of the 4 edges.

    0 none, 1 one edge, 2 two adjacent, 3 two opposite, 4 three, 5 all four.
    Accepts a :class:`FaceElement`, a sequence of EdgeDescriptors or 4 flags.
    """
    edges = getattr(face, "edges", face)
    flags = []
    for e in edges:
        if isinstance(e, EdgeDescriptor):
            if e.n_segments > 2:
                raise FaceMeshError("edge with more than two segments")
            flags.append(e.n_segments == 2)
        else:
            flags.append(bool(e))
    if len(flags) != 4:
        raise FaceMeshError("a face has four edges")
    k = sum(flags)
    if k == 2:
        return 3 if flags[0] == flags[2] else 2
    return {0: 0, 1: 1, 3: 4, 4: 5}[k]


def _resolve_orders(mesh, order_map):
    out = []
    for c in mesh.cells:
        if callable(order_map):
            p = order_map(c)
        elif isinstance(order_map, dict):
            if c.material not in order_map:
                raise FaceMeshError(f"no order given for material {c.material}")
            p = order_map[c.material]
        else:
            p = order_map
        if int(p) != p or not 1 <= p <= 3:
            raise FaceMeshError(f"element order must be 1, 2 or 3 (got {p})")
        out.append(int(p))
    return out


def _axes(a):
    return (a + 1) % 3, (a + 2) % 3


def _point(a, plane, u, v):
    uu, vv = _axes(a)
    p = [0, 0, 0]
    p[a], p[uu], p[vv] = plane, u, v
    return tuple(p)


def _square_edges(key):
    """Atomic-edge candidates (start point, axis, length) for S, E, N, W."""
    a, plane, u0, v0, s = key
    uu, vv = _axes(a)
    return (
        (_point(a, plane, u0, v0), uu, s),
        (_point(a, plane, u0 + s, v0), vv, s),
        (_point(a, plane, u0, v0 + s), uu, s),
        (_point(a, plane, u0, v0), vv, s),
    )


def _shift(p, axis, d):
    q = list(p)
    q[axis] += d
    return tuple(q)


def build_faces(mesh: OctreeMesh, order_map=1, check_balance=True) -> SurfaceMesh:
    """Surface elements, node numbering and per-leaf face lists.

    ``order_map`` is an int, a ``{material: p}`` dict or ``cell -> p``.
    Face order is the max of its owners' orders; every atomic edge gets
    the max order of the faces containing it.
    """
    if check_balance and not mesh.is_balanced():
        raise FaceMeshError("octree is not balanced (face/edge neighbours differ by >1 level)")
    orders = _resolve_orders(mesh, order_map)
    L = mesh.max_level
    unit = mesh.root_size / (1 << L)
    origin = np.array(mesh.origin)

    boxes = [mesh.fine_box(c, L) for c in mesh.cells]
    verts = set()
    for lo, f in boxes:
        for dx in (0, f):
            for dy in (0, f):
                for dz in (0, f):
                    verts.add((lo[0] + dx, lo[1] + dy, lo[2] + dz))
    dom_hi = [d << L for d in mesh.root_dims]

    squares = {}          # key -> list of (cell, sign)
    cell_sq = []
    region = []
    split_centers = set()
    for n, (lo, f) in enumerate(boxes):
        rows = []
        pats = []
        for a, sgn in SIDES:
            uu, vv = _axes(a)
            plane = lo[a] + (f if sgn > 0 else 0)
            u0, v0 = lo[uu], lo[vv]
            flags = [False] * 4
            split = False
            if f >= 2:
                h = f // 2
                mids = [_point(a, plane, u0 + h, v0), _point(a, plane, u0 + f, v0 + h),
                        _point(a, plane, u0 + h, v0 + f), _point(a, plane, u0, v0 + h)]
                flags = [m in verts for m in mids]
                center = _point(a, plane, u0 + h, v0 + h)
                split = center in verts or all(flags)
                if center in verts and not all(flags):
                    raise FaceMeshError("finer face neighbour without split edges")
            pats.append(5 if split else classify_pattern(flags))
            if split:
                split_centers.add(center)
                keys = [(a, plane, u0 + i * h, v0 + j * h, h) for j in (0, 1) for i in (0, 1)]
            else:
                keys = [(a, plane, u0, v0, f)]
            for k in keys:
                squares.setdefault(k, []).append((n, sgn))
                rows.append((k, sgn))
        cell_sq.append(rows)
        region.append(pats)

    # validate ownership
    for k, own in squares.items():
        a, plane = k[0], k[1]
        on_boundary = plane == 0 or plane == dom_hi[a]
        if len(own) != (1 if on_boundary else 2):
            raise FaceMeshError(f"face {k} has {len(own)} owners; mesh is not conforming")

    mids_all = verts | split_centers
    face_keys = sorted(squares, key=lambda k: (min(n for n, _ in squares[k]), k))
    face_index = {k: i for i, k in enumerate(face_keys)}
    face_order = {k: max(orders[n] for n, _ in squares[k]) for k in face_keys}

    # atomic edges and their orders
    def segments_of(start, axis, s):
        if s >= 2 and _shift(start, axis, s // 2) in mids_all:
            h = s // 2
            return [(start, axis, h), (_shift(start, axis, h), axis, h)]
        return [(start, axis, s)]

    atom_order = {}
    face_atoms = {}
    for k in face_keys:
        segs_per_edge = [segments_of(*e) for e in _square_edges(k)]
        face_atoms[k] = segs_per_edge
        for segs in segs_per_edge:
            if len(segs) > 2:
                raise FaceMeshError("edge split more than once")
            for atom in segs:
                atom_order[atom] = max(atom_order.get(atom, 0), face_order[k])
    for start, axis, s in atom_order:
        if s >= 2 and _shift(start, axis, s // 2) in mids_all:
            raise FaceMeshError("hanging node inside an atomic edge")

    nodes = NodeTable()

    def vertex(p):
        return nodes.get_or_insert(("v", p), origin + unit * np.array(p, dtype=float))

    def atom_nodes(atom):
        start, axis, s = atom
        p = atom_order[atom]
        ids = [vertex(start)]
        x0 = origin + unit * np.array(start, dtype=float)
        for j, g in enumerate(gll_nodes(p)[1:-1], start=1):
            x = x0.copy()
            x[axis] += unit * s * 0.5 * (1.0 + g)
            ids.append(nodes.get_or_insert(("e", atom, j), x))
        ids.append(vertex(_shift(start, axis, s)))
        return ids

    faces = []
    for k in face_keys:
        a, plane, u0, v0, s = k
        edges = []
        for segs in face_atoms[k]:
            out = []
            for m, atom in enumerate(segs):
                lo_, hi_ = (-1.0, 1.0) if len(segs) == 1 else ((-1.0, 0.0), (0.0, 1.0))[m]
                out.append(Segment(lo_, hi_, atom_order[atom], tuple(atom_nodes(atom))))
            edges.append(EdgeDescriptor(tuple(out)))
        corners = np.array([origin + unit * np.array(_point(a, plane, u, v), dtype=float)
                            for u, v in ((u0, v0), (u0 + s, v0), (u0 + s, v0 + s), (u0, v0 + s))])
        faces.append(FaceElement(k, tuple(squares[k]), corners, tuple(edges), face_order[k]))

    cell_faces = [[(face_index[k], sgn) for k, sgn in rows] for rows in cell_sq]
    return SurfaceMesh(mesh, faces, nodes, cell_faces, orders, region, unit)


def check_conformity(surface: SurfaceMesh, tol=1e-12):
    """Audit shared edges and shared-face node coordinates.

    Every pair of segments spanning the same two end nodes must list the
    same order and interior node ids; every node must sit where the face
    geometry says it does.  Raises :class:`FaceMeshError` on failure.
    """
    seen = {}
    xyz = surface.coords
    scale = surface.mesh.root_size
    for f in surface.faces:
        for e in f.edges:
            for seg in e.segments:
                a, b = seg.nodes[0], seg.nodes[-1]
                canon = seg.nodes if a < b else tuple(reversed(seg.nodes))
                key = (min(a, b), max(a, b))
                if seen.setdefault(key, (seg.order, canon)) != (seg.order, canon):
                    raise FaceMeshError(f"non-conforming edge between nodes {key}")
        lay = f.layout
        ref = lay.local_coords()
        c = f.corners
        geo = (c[0] + 0.5 * (ref[:, :1] + 1) * (c[1] - c[0])
               + 0.5 * (ref[:, 1:] + 1) * (c[3] - c[0]))
        if np.abs(geo - xyz[list(f.node_ids)]).max() > tol * scale:
            raise FaceMeshError(f"node coordinates off the face {f.key}")
    used = {n for f in surface.faces for n in f.node_ids}
    if used != set(range(surface.n_nodes)):
        raise FaceMeshError("node table holds unreferenced nodes")


def write_vtk(surface: SurfaceMesh, path, title="surface mesh"):
    """Surface quads (corner nodes only) with 'pattern' and 'order' cell data."""
    from .vtk import QUAD, write_unstructured

    cells = [list(f.node_ids[:4]) for f in surface.faces]
    write_unstructured(path, title, surface.coords, cells, QUAD,
                       cell_data={"pattern": [f.pattern for f in surface.faces],
                                  "order": [f.order for f in surface.faces]})


__all__ = ["FaceElement", "NodeTable", "SurfaceMesh", "FaceMeshError", "ShapeError",
           "build_faces", "classify_pattern", "shared_face_order", "check_conformity",
           "SIDES", "S", "E", "N", "W"]
