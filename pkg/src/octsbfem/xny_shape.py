"""Transition (xNy) shape functions on the reference square.

Every surface element is a square whose four edges may each be cut into
segments carrying their own polynomial order.  Shape functions are the
transfinite (Coons) interpolants of the piecewise Lagrange edge traces::

    N = P_eta[T] + P_zeta[T] - P_eta P_zeta[T]

with linear blending in the transverse direction.  No interior nodes are
used, which restricts completeness to serendipity spaces, hence p <= 3.

Reference frame conventions used throughout the package:

* coordinates ``(eta, zeta)`` in ``[-1, 1]^2``;
* edges are listed counter-clockwise ``S, E, N, W`` =
  ``zeta=-1, eta=+1, zeta=+1, eta=-1``;
* every edge is parametrised along the positive reference axis
  (``eta`` for S/N, ``zeta`` for E/W), so the first node of S is the
  corner ``(-1, -1)`` and the last node of E is ``(+1, +1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

MAX_ORDER = 3

# corner index -> (eta, zeta)
CORNERS = ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0))
S, E, N, W = range(4)


class ShapeError(ValueError):
    pass


def _check_order(p):
    if int(p) != p or not 1 <= p <= MAX_ORDER:
        raise ShapeError(f"polynomial order must be in 1..{MAX_ORDER}, got {p}")


@lru_cache(maxsize=None)
def _gll(p: int) -> tuple:
    inner = legendre.Legendre.basis(p).deriv().roots() if p > 1 else []
    return tuple([-1.0, *sorted(float(r) for r in np.real(inner)), 1.0])


def gll_nodes(p: int) -> np.ndarray:
    """Gauss-Lobatto-Legendre abscissae of order ``p`` (``p + 1`` points).

    Interior points are the roots of the Lobatto polynomial of degree
    ``p - 1``, i.e. the derivative of the Legendre polynomial ``P_p``.
    """
    _check_order(p)
    return np.array(_gll(int(p)))


@lru_cache(maxsize=None)
def _gauss(n: int):
    return legendre.leggauss(n)


def lagrange(nodes, s):
    """Cardinal Lagrange values and first derivatives.

    Parameters
    ----------
    nodes : (m,) array
    s : (q,) array of evaluation points

    Returns
    -------
    L, dL : (q, m) arrays
    """
    nodes = np.asarray(nodes, dtype=float)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    m = len(nodes)
    L = np.ones((len(s), m))
    dL = np.zeros((len(s), m))
    for i in range(m):
        others = [j for j in range(m) if j != i]
        denom = np.prod([nodes[i] - nodes[j] for j in others])
        for j in others:
            L[:, i] *= s - nodes[j]
        for k in others:
            term = np.ones(len(s))
            for j in others:
                if j != k:
                    term *= s - nodes[j]
            dL[:, i] += term
        L[:, i] /= denom
        dL[:, i] /= denom
    return L, dL


def blending(s):
    """Linear blending functions ``(psi1, psi2)`` = ``((1-s)/2, (1+s)/2)``."""
    s = np.asarray(s, dtype=float)
    return 0.5 * (1.0 - s), 0.5 * (1.0 + s)


# ----------------------------------------------------------------------------
# edge descriptors


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    order: int
    nodes: tuple  # p + 1 global node ids, ordered along the edge

    def __post_init__(self):
        _check_order(self.order)
        if len(self.nodes) != self.order + 1:
            raise ShapeError("segment needs order + 1 node ids")
        if not -1.0 <= self.lo < self.hi <= 1.0:
            raise ShapeError(f"bad segment bounds [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class EdgeDescriptor:
    """Piecewise-polynomial description of one element edge over ``[-1, 1]``."""

    segments: tuple

    def __post_init__(self):
        segs = self.segments
        if not segs:
            raise ShapeError("edge without segments")
        if segs[0].lo != -1.0 or segs[-1].hi != 1.0:
            raise ShapeError("segments must tile [-1, 1]")
        for a, b in zip(segs, segs[1:]):
            if a.hi != b.lo:
                raise ShapeError("segments must be contiguous")
            if a.nodes[-1] != b.nodes[0]:
                raise ShapeError("adjacent segments must share their end node")

    @classmethod
    def simple(cls, order, nodes):
        return cls((Segment(-1.0, 1.0, order, tuple(nodes)),))

    @property
    def n_segments(self):
        return len(self.segments)

    @property
    def nodes(self) -> tuple:
        out = list(self.segments[0].nodes)
        for seg in self.segments[1:]:
            out.extend(seg.nodes[1:])
        return tuple(out)

    @property
    def breaks(self) -> tuple:
        return tuple(seg.hi for seg in self.segments[:-1])

    @property
    def max_order(self):
        return max(seg.order for seg in self.segments)

    def signature(self):
        """Node-id-free structure, used as a cache key."""
        return tuple((seg.lo, seg.hi, seg.order) for seg in self.segments)

    def reversed(self):
        segs = [Segment(-s.hi, -s.lo, s.order, tuple(reversed(s.nodes)))
                for s in reversed(self.segments)]
        return EdgeDescriptor(tuple(segs))


def _trace_table(sig, s, side):
    """Trace values/derivatives at ``s`` for an edge with structure ``sig``.

    Columns follow the edge's de-duplicated node order.
    """
    n_nodes = 1 + sum(order for _, _, order in sig)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < -1.0 - 1e-14) or np.any(s > 1.0 + 1e-14):
        raise ShapeError("edge parameter outside [-1, 1]")
    T = np.zeros((len(s), n_nodes))
    dT = np.zeros((len(s), n_nodes))
    side = np.broadcast_to(np.asarray(side), s.shape)
    first = 0
    nseg = len(sig)
    for k, (lo, hi, order) in enumerate(sig):
        if nseg == 1:
            mask = np.ones(len(s), dtype=bool)
        else:
            left_ok = (s > lo) | ((s == lo) & (side > 0)) | (k == 0)
            right_ok = (s < hi) | ((s == hi) & (side <= 0)) | (k == nseg - 1)
            mask = (s >= lo) & (s <= hi) & left_ok & right_ok
        if np.any(mask):
            half = 0.5 * (hi - lo)
            t = (s[mask] - 0.5 * (lo + hi)) / half
            L, dL = lagrange(gll_nodes(order), t)
            cols = slice(first, first + order + 1)
            T[mask, cols] = L
            dT[mask, cols] = dL / half
        first += order
    return T, dT


def edge_trace(edge: EdgeDescriptor, s, side=0):
    """Cardinal trace values of all edge nodes at parameter(s) ``s``.

    At a segment interface the value is continuous; the derivative is
    one-sided, taken from the right segment when ``side > 0`` and from the
    left one otherwise.

    Returns ``(T, dT)`` with one column per entry of ``edge.nodes``.
    """
    return _trace_table(edge.signature(), s, side)


# ----------------------------------------------------------------------------
# transfinite element


@dataclass(frozen=True)
class ShapeEvaluation:
    N: np.ndarray
    dN_deta: np.ndarray
    dN_dzeta: np.ndarray

    @property
    def n_nodes(self):
        return len(self.N)


@dataclass(frozen=True)
class ElementLayout:
    """Local node numbering of a square element built from 4 edge structures.

    ``edge_cols[e]`` maps the nodes of edge ``e`` (in edge order) to local
    element node indices; ``corner_cols[c]`` gives the local index of corner
    ``c`` (ordering of :data:`CORNERS`).
    """

    sigs: tuple
    edge_cols: tuple = field(init=False)
    corner_cols: tuple = field(init=False)
    n_nodes: int = field(init=False)

    def __post_init__(self):
        counts = [1 + sum(o for _, _, o in sig) for sig in self.sigs]
        # corners first (c0..c3), then edge-interior nodes edge by edge
        nxt = 4
        cols = []
        # edge endpoints: S: c0->c1, E: c1->c2, N: c3->c2, W: c0->c3
        ends = {S: (0, 1), E: (1, 2), N: (3, 2), W: (0, 3)}
        for e in range(4):
            inner = list(range(nxt, nxt + counts[e] - 2))
            nxt += counts[e] - 2
            a, b = ends[e]
            cols.append(tuple([a, *inner, b]))
        object.__setattr__(self, "edge_cols", tuple(cols))
        object.__setattr__(self, "corner_cols", (0, 1, 2, 3))
        object.__setattr__(self, "n_nodes", nxt)

    @property
    def max_order(self):
        return max(o for sig in self.sigs for _, _, o in sig)

    @property
    def split_flags(self):
        return tuple(len(sig) > 1 for sig in self.sigs)

    def local_coords(self):
        """Reference coordinates of all local nodes, shape (n, 2)."""
        xy = np.zeros((self.n_nodes, 2))
        for c, (a, b) in enumerate(CORNERS):
            xy[c] = a, b
        for e, sig in enumerate(self.sigs):
            ts = [-1.0]
            for lo, hi, order in sig:
                g = gll_nodes(order)[1:]
                ts.extend(0.5 * (lo + hi) + 0.5 * (hi - lo) * g)
            for col, t in zip(self.edge_cols[e], ts):
                xy[col] = _edge_point(e, t)
        return xy


def _edge_point(e, t):
    return {S: (t, -1.0), E: (1.0, t), N: (t, 1.0), W: (-1.0, t)}[e]


def evaluate_layout(layout: ElementLayout, eta, zeta, side_eta=0, side_zeta=0):
    """Vectorised shape functions of a layout at points ``(eta, zeta)``.

    Returns ``(N, dN_deta, dN_dzeta)`` each of shape ``(q, n_nodes)``.
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    q = len(eta)
    n = layout.n_nodes
    val = np.zeros((q, n))
    d_eta = np.zeros((q, n))
    d_zeta = np.zeros((q, n))
    p1e, p2e = blending(eta)
    p1z, p2z = blending(zeta)
    # eta-direction edges (S at zeta=-1, N at zeta=+1) blended in zeta
    for e, w, dw in ((S, p1z, -0.5), (N, p2z, 0.5)):
        T, dT = _trace_table(layout.sigs[e], eta, side_eta)
        cols = list(layout.edge_cols[e])
        val[:, cols] += w[:, None] * T
        d_eta[:, cols] += w[:, None] * dT
        d_zeta[:, cols] += dw * T
    for e, w, dw in ((W, p1e, -0.5), (E, p2e, 0.5)):
        T, dT = _trace_table(layout.sigs[e], zeta, side_zeta)
        cols = list(layout.edge_cols[e])
        val[:, cols] += w[:, None] * T
        d_zeta[:, cols] += w[:, None] * dT
        d_eta[:, cols] += dw * T
    # mixed projector: bilinear corner correction
    corner_terms = (
        (p1e * p1z, -0.5 * p1z, -0.5 * p1e),
        (p2e * p1z, 0.5 * p1z, -0.5 * p2e),
        (p2e * p2z, 0.5 * p2z, 0.5 * p2e),
        (p1e * p2z, -0.5 * p2z, 0.5 * p1e),
    )
    for c, (v, de, dz) in zip(layout.corner_cols, corner_terms):
        val[:, c] -= v
        d_eta[:, c] -= de
        d_zeta[:, c] -= dz
    return val, d_eta, d_zeta


def layout_of(edges) -> ElementLayout:
    return ElementLayout(tuple(edge.signature() for edge in edges))


def transfinite_shape(edges, point) -> ShapeEvaluation:
    """Shape functions of the element with the 4 given edges at ``point``.

    ``edges`` is a sequence of four :class:`EdgeDescriptor` (S, E, N, W) or
    any object with an ``edges`` attribute.  Values are returned in the
    element's local node order (see :class:`ElementLayout`).
    """
    edges = getattr(edges, "edges", edges)
    for edge in edges:
        for seg in edge.segments:
            _check_order(seg.order)
    eta, zeta = point
    if abs(eta) > 1 + 1e-14 or abs(zeta) > 1 + 1e-14:
        raise ShapeError("point outside the reference square")
    N, Ne, Nz = evaluate_layout(layout_of(edges), [eta], [zeta])
    return ShapeEvaluation(N[0], Ne[0], Nz[0])


def local_node_ids(edges) -> tuple:
    """Global ids in local element order (corners first, then edge interiors)."""
    edges = getattr(edges, "edges", edges)
    corners = (edges[S].nodes[0], edges[S].nodes[-1], edges[N].nodes[-1], edges[N].nodes[0])
    if edges[E].nodes[0] != corners[1] or edges[E].nodes[-1] != corners[2]:
        raise ShapeError("edge E does not connect corners 1 and 2")
    if edges[W].nodes[0] != corners[0] or edges[W].nodes[-1] != corners[3]:
        raise ShapeError("edge W does not connect corners 0 and 3")
    ids = list(corners)
    for edge in edges:
        ids.extend(edge.nodes[1:-1])
    return tuple(ids)


# ----------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (q, 2)
    weights: np.ndarray  # (q,)
    n_subcells: int
    # +1/-1 per point: which side of the midline each point lies on
    side: np.ndarray = None


@lru_cache(maxsize=None)
def _rule(n_gauss, split):
    g, w = _gauss(n_gauss)
    if split:
        cells = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]
        h = 0.5
    else:
        cells = [(0.0, 0.0)]
        h = 1.0
    pts, wts = [], []
    for ce, cz in cells:
        E_, Z_ = np.meshgrid(ce + h * g, cz + h * g, indexing="ij")
        W_ = np.outer(w, w) * h * h
        pts.append(np.column_stack([E_.ravel(), Z_.ravel()]))
        wts.append(W_.ravel())
    pts = np.vstack(pts)
    return pts, np.concatenate(wts), len(cells)


def quadrature_for(edges, p=None) -> QuadratureRule:
    """Tensor Gauss rule with ``(p + 2)^2`` points per subcell.

    Elements with any split edge are integrated on 2x2 subcells aligned with
    the midlines, so no point sits on a kink of the piecewise traces.
    """
    edges = getattr(edges, "edges", edges)
    if p is None:
        p = max(edge.max_order for edge in edges)
    _check_order(p)
    split = any(edge.n_segments > 1 for edge in edges)
    pts, wts, ncell = _rule(int(p) + 2, split)
    return QuadratureRule(pts, wts, ncell, np.sign(pts))


# ----------------------------------------------------------------------------
# projection operators on bivariate callables


def project_eta(f):
    """Linear interpolation of ``f`` between the lines ``eta = -1`` and ``+1``."""
    def g(eta, zeta):
        p1, p2 = blending(eta)
        return p1 * f(-1.0 + 0 * eta, zeta) + p2 * f(1.0 + 0 * eta, zeta)
    return g


def project_zeta(f):
    def g(eta, zeta):
        p1, p2 = blending(zeta)
        return p1 * f(eta, -1.0 + 0 * zeta) + p2 * f(eta, 1.0 + 0 * zeta)
    return g


def project_mixed(f):
    return project_eta(project_zeta(f))


def transfinite(f):
    """Boolean sum ``P_eta + P_zeta - P_eta P_zeta`` applied to ``f``."""
    a, b, c = project_eta(f), project_zeta(f), project_mixed(f)
    return lambda eta, zeta: a(eta, zeta) + b(eta, zeta) - c(eta, zeta)
