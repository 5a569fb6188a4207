import numpy as np
import pytest
from hypothesis import given, strategies as st

from octsbfem.face_mesh import (FaceMeshError, build_faces, check_conformity, classify_pattern,
                                shared_face_order, write_vtk)
from octsbfem.octree import OctreeCell, OctreeMesh, balance, refine, split_cell, uniform_mesh
from shape_helpers import all_flag_configs, rotate_flags


def _corner_refined(n=2, p=1):
    m = refine(uniform_mesh((n, n, n), 1.0), lambda mm, c: c.index == (0, 0, 0))
    return m, build_faces(m, p)


# ---------------------------------------------------------------- single cube


@pytest.mark.parametrize("p,nodes", [(1, 8), (2, 20), (3, 32)])
def test_single_cube_counts(p, nodes):
    s = build_faces(uniform_mesh((1, 1, 1), 2.0), p)
    assert len(s.faces) == 6 and s.n_nodes == nodes
    check_conformity(s)


def test_serendipity_count_by_enumeration():
    # every node of six 8-node faces sharing 12 edges, counted by coordinates
    s = build_faces(uniform_mesh((1, 1, 1), 2.0), 2)
    pts = {tuple(np.round(x, 12)) for x in s.coords}
    assert len(pts) == 8 + 12 == s.n_nodes


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_euler_audit_uniform_grid(n, p):
    s = build_faces(uniform_mesh((n, n, n), 1.0), p)
    n_vertices = (n + 1) ** 3
    n_edges = 3 * n * (n + 1) ** 2
    n_faces = 3 * n * n * (n + 1)
    assert len(s.faces) == n_faces
    assert s.n_nodes == n_vertices + (p - 1) * n_edges
    # Euler characteristic of the cell complex of a cube
    assert n_vertices - n_edges + n_faces - n ** 3 == 1


def test_interior_face_has_two_owners():
    s = build_faces(uniform_mesh((2, 1, 1), 1.0), 1)
    shared = [f for f in s.faces if len(f.owners) == 2]
    assert len(shared) == 1 and len(s.faces) == 11
    (a, sa), (b, sb) = shared[0].owners
    assert {a, b} == {0, 1} and sa == -sb


def test_split_neighbour_subdivides_face():
    m = refine(uniform_mesh((2, 1, 1), 1.0), lambda mm, c: c.index == (1, 0, 0))
    s = build_faces(m, 1)
    coarse = [n for n, c in enumerate(m.cells) if c.level == 0][0]
    xplus = [s.faces[i] for i, sg in s.cell_faces[coarse] if s.faces[i].axis == 0 and sg > 0]
    assert len(xplus) == 4
    assert all(abs(f.area - 0.25) < 1e-15 for f in xplus)
    assert s.region_patterns[coarse][1] == 5
    check_conformity(s)


def test_edge_only_refinement_uses_transition_element():
    # a diagonal (edge) neighbour split: the coarse face keeps one element with one split edge
    m = refine(uniform_mesh((2, 2, 1), 1.0), lambda mm, c: c.index == (1, 1, 0))
    s = build_faces(m, 1)
    patterns = {f.pattern for f in s.faces}
    assert 1 in patterns
    check_conformity(s)


def test_face_count_per_leaf():
    m, s = _corner_refined()
    for n, rows in enumerate(s.cell_faces):
        area = sum(s.faces[i].area for i, _ in rows)
        h = m.cell_size(m.cells[n])
        assert area == pytest.approx(6 * h * h, rel=1e-14)


def test_faces_oriented_outward():
    m, s = _corner_refined()
    for n, c in enumerate(m.cells):
        ctr = m.cell_center(c)
        for f in s.subdomain_faces(n):
            assert (f.corners.mean(axis=0) - ctr) @ f.normal > 0


def test_unbalanced_rejected():
    cells = [OctreeCell(0, (0, 0, 0))]
    fine = split_cell(OctreeCell(0, (1, 0, 0)))
    fine = [c for c in fine if c.index != (2, 0, 0)] + split_cell(OctreeCell(1, (2, 0, 0)))
    m = OctreeMesh((0, 0, 0), 1.0, (2, 1, 1), tuple(cells + fine))
    with pytest.raises(FaceMeshError):
        build_faces(m, 1)
    check_conformity(build_faces(balance(m), 1))


@pytest.mark.parametrize("p", [0, 4])
def test_bad_order(p):
    with pytest.raises(FaceMeshError):
        build_faces(uniform_mesh((1, 1, 1), 1.0), p)


def test_missing_material_order():
    with pytest.raises(FaceMeshError):
        build_faces(uniform_mesh((1, 1, 1), 1.0), {7: 2})


# ---------------------------------------------------------------- patterns


def test_six_rotation_classes():
    classes = {}
    for flags in all_flag_configs():
        orbit = frozenset(rotate_flags(flags, k) for k in range(4))
        classes.setdefault(orbit, set()).add(classify_pattern(flags))
    assert len(classes) == 6
    assert all(len(ids) == 1 for ids in classes.values())
    assert sorted(next(iter(v)) for v in classes.values()) == [0, 1, 2, 3, 4, 5]


def test_pattern_examples():
    assert classify_pattern((0, 0, 0, 0)) == 0
    # edges S, E, N, W: {N, E} and {E, S}
    assert classify_pattern((0, 1, 1, 0)) == classify_pattern((1, 1, 0, 0)) == 2
    assert classify_pattern((1, 0, 1, 0)) == 3


@given(st.tuples(*[st.booleans()] * 4), st.integers(0, 3))
def test_pattern_rotation_invariant(flags, k):
    assert classify_pattern(rotate_flags(flags, k)) == classify_pattern(flags)


def test_transposed_face_same_pattern():
    _, s = _corner_refined()
    for f in s.faces:
        assert f.transposed().pattern == f.pattern


def test_more_than_two_segments_rejected():
    from octsbfem.xny_shape import EdgeDescriptor, Segment
    e3 = EdgeDescriptor((Segment(-1.0, -0.5, 1, (0, 4)), Segment(-0.5, 0.5, 1, (4, 5)),
                         Segment(0.5, 1.0, 1, (5, 1))))
    simple = EdgeDescriptor.simple(1, (0, 1))
    with pytest.raises(FaceMeshError):
        classify_pattern([e3, simple, simple, simple])


def test_histogram_homogeneous():
    s = build_faces(uniform_mesh((2, 2, 2), 1.0), 1)
    assert dict(s.pattern_histogram()) == {0: 48}


# ---------------------------------------------------------------- orders


def test_shared_face_order():
    assert shared_face_order(1, 3) == 3
    assert shared_face_order(2, 2) == 2


def test_edge_order_max_rule():
    m = uniform_mesh((2, 1, 1), 1.0)
    s = build_faces(m, lambda c: 2 if c.index[0] == 0 else 3)
    by_nodes = {}
    for f in s.faces:
        for e in f.edges:
            for seg in e.segments:
                by_nodes.setdefault(frozenset((seg.nodes[0], seg.nodes[-1])), set()).add(seg.order)
    # every edge carries one order; edges touching the order-3 cell are order 3
    assert all(len(v) == 1 for v in by_nodes.values())
    shared = [f for f in s.faces if len(f.owners) == 2][0]
    assert shared.order == 3 and all(e.max_order == 3 for e in shared.edges)
    check_conformity(s)


def _random_balanced(seed):
    rng = np.random.default_rng(seed)
    m = uniform_mesh((2, 2, 1), 1.0)
    for _ in range(2):
        keys = {c.key for c in m.cells if rng.random() < 0.3}
        m = balance(refine(m, lambda mm, c: c.key in keys))
    return m


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_conformity_random_meshes(seed, pa, pb):
    m = _random_balanced(seed)
    orders = {c.key: (pa if (sum(c.index) % 2) else pb) for c in m.cells}
    s = build_faces(m, lambda c: orders[c.key])
    check_conformity(s)
    # every leaf face region is covered exactly
    for n, c in enumerate(m.cells):
        area = sum(s.faces[i].area for i, _ in s.cell_faces[n])
        assert area == pytest.approx(6 * m.cell_size(c) ** 2, rel=1e-13)


def test_write_vtk(tmp_path):
    _, s = _corner_refined()
    write_vtk(s, tmp_path / "s.vtk")
    text = (tmp_path / "s.vtk").read_text()
    assert f"CELLS {len(s.faces)}" in text
    assert "SCALARS pattern int" in text and "SCALARS order int" in text
