import numpy as np
import pytest
from hypothesis import given, strategies as st

from octsbfem.xny_shape import (EdgeDescriptor, Segment, ShapeError, blending, edge_trace,
                                evaluate_layout, gll_nodes, layout_of, project_eta,
                                project_mixed, project_zeta, quadrature_for, transfinite,
                                transfinite_shape)
from shape_helpers import (ORDERS, PATTERN_FLAGS, PATTERN_ORDER, interface_free, make_edges,
                           random_points, serendipity_monomials)

rng = np.random.default_rng(20240611)


def _layout(pattern, p):
    return layout_of(make_edges(PATTERN_FLAGS[pattern], p))


# ---------------------------------------------------------------- GLL, blending


def test_gll_low_orders():
    assert np.array_equal(gll_nodes(1), [-1.0, 1.0])
    assert np.allclose(gll_nodes(2), [-1.0, 0.0, 1.0], atol=1e-15)


def test_gll_cubic_against_lobatto_roots():
    x = gll_nodes(3)
    assert np.allclose(x, [-1, -1 / np.sqrt(5), 1 / np.sqrt(5), 1], atol=1e-15)
    # derivative of P3 is the degree-2 Lobatto polynomial (15 x^2 - 3) / 2
    assert np.all(np.abs((15 * x[1:-1] ** 2 - 3) / 2) <= 1e-14)


@pytest.mark.parametrize("p", [0, 4, 2.5])
def test_gll_rejects_bad_order(p):
    with pytest.raises(ShapeError):
        gll_nodes(p)


@given(st.floats(-1, 1))
def test_blending_partition(s):
    a, b = blending(s)
    assert a + b == pytest.approx(1.0, abs=1e-15)


def test_blending_endpoints():
    assert tuple(map(float, blending(-1.0))) == (1.0, 0.0)
    assert tuple(map(float, blending(1.0))) == (0.0, 1.0)


# ---------------------------------------------------------------- edge traces


def test_trace_unsplit_linear_midpoint():
    T, _ = edge_trace(EdgeDescriptor.simple(1, (0, 1)), 0.0)
    assert np.allclose(T, [[0.5, 0.5]])


def test_trace_split_linear():
    e = EdgeDescriptor((Segment(-1.0, 0.0, 1, (0, 2)), Segment(0.0, 1.0, 1, (2, 1))))
    T, _ = edge_trace(e, -0.5)
    assert e.nodes == (0, 2, 1)
    assert np.allclose(T, [[0.5, 0.5, 0.0]])


@given(st.floats(-1, 1), st.sampled_from(ORDERS), st.sampled_from(ORDERS), st.booleans())
def test_trace_partition_of_unity(s, p1, p2, split):
    e = make_edges((1 if split else 0, 0, 0, 0), ((p1, p2) if split else p1, 1, 1, 1))[0]
    T, dT = edge_trace(e, s)
    assert T.sum() == pytest.approx(1.0, abs=1e-13)
    assert abs(dT.sum()) <= 1e-12


def test_trace_rejects_outside():
    with pytest.raises(ShapeError):
        edge_trace(EdgeDescriptor.simple(1, (0, 1)), 1.5)


# ---------------------------------------------------------------- element shapes


def test_bilinear_recovered():
    ev = transfinite_shape(make_edges(PATTERN_FLAGS[0], 1), (0.0, 0.0))
    assert np.allclose(ev.N, 0.25)
    pts = random_points(rng, 20)
    N, _, _ = evaluate_layout(_layout(0, 1), pts[:, 0], pts[:, 1])
    corners = np.array([(-1, -1), (1, -1), (1, 1), (-1, 1)])
    ref = (1 + pts[:, None, 0] * corners[None, :, 0]) * (1 + pts[:, None, 1] * corners[None, :, 1]) / 4
    assert np.allclose(N, ref, atol=1e-15)


def _serendipity8(eta, zeta):
    """Independent closed form of the 8-node serendipity basis, local order."""
    out = []
    for ei, zi in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        out.append((1 + eta * ei) * (1 + zeta * zi) * (eta * ei + zeta * zi - 1) / 4)
    out.append((1 - eta ** 2) * (1 - zeta) / 2)     # S mid
    out.append((1 + eta) * (1 - zeta ** 2) / 2)     # E mid
    out.append((1 - eta ** 2) * (1 + zeta) / 2)     # N mid
    out.append((1 - eta) * (1 - zeta ** 2) / 2)     # W mid
    return np.stack(out, axis=-1)


def test_quadratic_is_serendipity8():
    ev = transfinite_shape(make_edges(PATTERN_FLAGS[0], 2), (0.0, 0.0))
    assert ev.N[0] == pytest.approx(-0.25, abs=1e-15)
    pts = random_points(rng, 50)
    N, _, _ = evaluate_layout(_layout(0, 2), pts[:, 0], pts[:, 1])
    assert np.allclose(N, _serendipity8(pts[:, 0], pts[:, 1]), atol=1e-14)


def test_hanging_node_kronecker():
    edges = make_edges(PATTERN_FLAGS[1], 1)
    assert layout_of(edges).n_nodes == 5
    ev = transfinite_shape(edges, (0.0, -1.0))
    assert np.allclose(ev.N, [0, 0, 0, 0, 1], atol=1e-15)


def test_order_above_three_rejected():
    with pytest.raises(ShapeError):
        Segment(-1.0, 1.0, 4, tuple(range(5)))


def test_point_outside_rejected():
    with pytest.raises(ShapeError):
        transfinite_shape(make_edges(PATTERN_FLAGS[0], 1), (1.2, 0.0))


@pytest.mark.parametrize("pattern,p", PATTERN_ORDER)
def test_partition_of_unity(pattern, p):
    pts = random_points(rng, 1000)
    side = np.where(rng.random((1000, 2)) < 0.5, -1, 1)
    N, Ne, Nz = evaluate_layout(_layout(pattern, p), pts[:, 0], pts[:, 1], side[:, 0], side[:, 1])
    assert np.abs(N.sum(axis=1) - 1).max() <= 1e-12
    assert np.abs(Ne.sum(axis=1)).max() <= 1e-12
    assert np.abs(Nz.sum(axis=1)).max() <= 1e-12


@pytest.mark.parametrize("pattern,p", PATTERN_ORDER)
def test_kronecker_delta(pattern, p):
    lay = _layout(pattern, p)
    xy = lay.local_coords()
    N, _, _ = evaluate_layout(lay, xy[:, 0], xy[:, 1])
    assert np.abs(N - np.eye(lay.n_nodes)).max() <= 1e-12


@pytest.mark.parametrize("pattern,p", PATTERN_ORDER)
def test_polynomial_reproduction(pattern, p):
    lay = _layout(pattern, p)
    xy = lay.local_coords()
    pts = random_points(rng, 200)
    N, Ne, Nz = evaluate_layout(lay, pts[:, 0], pts[:, 1])
    for a, b in serendipity_monomials(p):
        nodal = xy[:, 0] ** a * xy[:, 1] ** b
        exact = pts[:, 0] ** a * pts[:, 1] ** b
        assert np.abs(N @ nodal - exact).max() <= 1e-12, (a, b)
        d_eta = a * pts[:, 0] ** max(a - 1, 0) * pts[:, 1] ** b
        assert np.abs(Ne @ nodal - d_eta).max() <= 1e-11, (a, b)


@pytest.mark.parametrize("p", ORDERS)
def test_serendipity_dimension(p):
    lay = _layout(0, p)
    assert lay.n_nodes == len(serendipity_monomials(p)) == 4 * p


@pytest.mark.parametrize("pattern,p", PATTERN_ORDER)
def test_derivatives_match_finite_differences(pattern, p):
    lay = _layout(pattern, p)
    pts = interface_free(random_points(rng, 400))
    h = 1e-6
    _, Ne, Nz = evaluate_layout(lay, pts[:, 0], pts[:, 1])
    fp, _, _ = evaluate_layout(lay, pts[:, 0] + h, pts[:, 1])
    fm, _, _ = evaluate_layout(lay, pts[:, 0] - h, pts[:, 1])
    gp, _, _ = evaluate_layout(lay, pts[:, 0], pts[:, 1] + h)
    gm, _, _ = evaluate_layout(lay, pts[:, 0], pts[:, 1] - h)
    for exact, fd in ((Ne, (fp - fm) / (2 * h)), (Nz, (gp - gm) / (2 * h))):
        scale = np.maximum(np.abs(exact), 1.0)
        assert np.max(np.abs(exact - fd) / scale) <= 1e-6


def test_mixed_orders_on_one_edge():
    edges = make_edges((1, 0, 0, 0), ((1, 3), 3, 3, 3))
    lay = layout_of(edges)
    xy = lay.local_coords()
    N, _, _ = evaluate_layout(lay, xy[:, 0], xy[:, 1])
    assert np.abs(N - np.eye(lay.n_nodes)).max() <= 1e-12


# ---------------------------------------------------------------- trace conformity


def _trace_on(edges, s, edge):
    """Shape values along one element edge keyed by global node id."""
    lay = layout_of(edges)
    ids = np.array(_ids(edges))
    pt = {0: (s, -np.ones_like(s)), 1: (np.ones_like(s), s),
          2: (s, np.ones_like(s)), 3: (-np.ones_like(s), s)}[edge]
    N, _, _ = evaluate_layout(lay, *pt)
    return ids, N


def _ids(edges):
    from octsbfem.xny_shape import local_node_ids
    return local_node_ids(edges)


def _as_dict(ids, row, tol=0.0):
    out = {}
    for i, v in zip(ids, row):
        if abs(v) > tol:
            out[int(i)] = out.get(int(i), 0.0) + v
    return out


def _agree(a, b, tol=1e-12):
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= tol for k in keys)


@pytest.mark.parametrize("pattern", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("p", ORDERS)
def test_trace_conformity_across_h_split(pattern, p):
    big = make_edges(PATTERN_FLAGS[pattern], p)
    s_edge = big[0]                       # S is split in every pattern >= 1
    left = s_edge.segments[0]
    # small neighbour below the big face: its N edge is the big face's left S half
    off = 10_000
    small = make_edges((0, 0, 0, 0), p)
    small = [EdgeDescriptor.simple(p, tuple(off + n for n in e.nodes)) for e in small]
    c0, c1 = left.nodes[0], left.nodes[-1]
    small[2] = EdgeDescriptor.simple(p, left.nodes)
    e_nodes = small[1].nodes
    small[1] = EdgeDescriptor.simple(p, (e_nodes[0], *e_nodes[1:-1], c1))
    w_nodes = small[3].nodes
    small[3] = EdgeDescriptor.simple(p, (w_nodes[0], *w_nodes[1:-1], c0))
    s = np.linspace(-1, 0, 50)
    ids_b, Nb = _trace_on(big, s, 0)
    ids_s, Ns = _trace_on(small, 2 * s + 1, 2)
    for rb, rs in zip(Nb, Ns):
        assert _agree(_as_dict(ids_b, rb), _as_dict(ids_s, rs))


@pytest.mark.parametrize("pa,pb", [(1, 3), (2, 3), (1, 2), (3, 3)])
def test_trace_conformity_across_p_mismatch(pa, pb):
    shared_order = max(pa, pb)
    a = make_edges((0, 0, 0, 0), (shared_order, pa, pa, pa))
    off = 10_000
    b = make_edges((0, 0, 0, 0), pb)
    b = [EdgeDescriptor.simple(pb, tuple(off + n for n in e.nodes)) for e in b]
    sh = a[0]
    b[2] = sh
    b[1] = EdgeDescriptor.simple(pb, (*b[1].nodes[:-1], sh.nodes[-1]))
    b[3] = EdgeDescriptor.simple(pb, (*b[3].nodes[:-1], sh.nodes[0]))
    s = np.linspace(-1, 1, 50)
    ids_a, Na = _trace_on(a, s, 0)
    ids_b, Nb = _trace_on(b, s, 2)
    for ra, rb in zip(Na, Nb):
        assert _agree(_as_dict(ids_a, ra), _as_dict(ids_b, rb))


# ---------------------------------------------------------------- projectors

coef = st.lists(st.floats(-2, 2, allow_nan=False), min_size=16, max_size=16)


def _poly(c):
    C = np.array(c).reshape(4, 4)
    return lambda eta, zeta: sum(C[i, j] * eta ** i * zeta ** j
                                 for i in range(4) for j in range(4))


@given(coef, coef, st.floats(-3, 3))
def test_projectors_linear(c1, c2, alpha):
    f, g = _poly(c1), _poly(c2)
    h = lambda e, z: f(e, z) + alpha * g(e, z)
    pts = random_points(np.random.default_rng(1), 20)
    for P in (project_eta, project_zeta, project_mixed, transfinite):
        lhs = P(h)(pts[:, 0], pts[:, 1])
        rhs = P(f)(pts[:, 0], pts[:, 1]) + alpha * P(g)(pts[:, 0], pts[:, 1])
        assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, np.abs(rhs).max())


@given(coef)
def test_projectors_idempotent(c):
    f = _poly(c)
    pts = random_points(np.random.default_rng(2), 20)
    for P in (project_eta, project_zeta, project_mixed, transfinite):
        once = P(f)(pts[:, 0], pts[:, 1])
        twice = P(P(f))(pts[:, 0], pts[:, 1])
        assert np.abs(once - twice).max() <= 1e-13 * max(1.0, np.abs(once).max())


@given(coef)
def test_transfinite_interpolates_boundary(c):
    f = _poly(c)
    s = np.linspace(-1, 1, 9)
    P = transfinite(f)
    for e, z in ((s, -1 + 0 * s), (s, 1 + 0 * s), (-1 + 0 * s, s), (1 + 0 * s, s)):
        assert np.allclose(P(e, z), f(e, z), atol=1e-12)


# ---------------------------------------------------------------- quadrature


def test_quadrature_unsplit_linear():
    q = quadrature_for(make_edges(PATTERN_FLAGS[0], 1), 1)
    assert len(q.weights) == 9 and q.n_subcells == 1
    assert q.weights.sum() == pytest.approx(4.0, abs=1e-14)


def test_quadrature_split_cubic():
    q = quadrature_for(make_edges(PATTERN_FLAGS[2], 3), 3)
    assert len(q.weights) == 100 and q.n_subcells == 4
    assert q.weights.sum() == pytest.approx(4.0, abs=1e-14)
    assert np.all(np.abs(q.points) > 0) and np.all(np.abs(q.points) < 1)


@pytest.mark.parametrize("pattern,p", PATTERN_ORDER)
def test_integrated_partition_of_unity(pattern, p):
    edges = make_edges(PATTERN_FLAGS[pattern], p)
    q = quadrature_for(edges)
    N, _, _ = evaluate_layout(layout_of(edges), q.points[:, 0], q.points[:, 1], q.side[:, 0], q.side[:, 1])
    assert (q.weights @ N).sum() == pytest.approx(4.0, abs=1e-13)
