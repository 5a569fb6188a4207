"""Builders for element edge structures used across the test modules."""
import itertools

import numpy as np

from octsbfem.xny_shape import EdgeDescriptor, Segment

# split flags (S, E, N, W) of one representative per pattern id
PATTERN_FLAGS = {
    0: (0, 0, 0, 0),
    1: (1, 0, 0, 0),
    2: (1, 1, 0, 0),
    3: (1, 0, 1, 0),
    4: (1, 1, 1, 0),
    5: (1, 1, 1, 1),
}

ORDERS = (1, 2, 3)
PATTERN_ORDER = list(itertools.product(sorted(PATTERN_FLAGS), ORDERS))


class _Ids:
    def __init__(self):
        self.n = 0

    def take(self, k):
        out = tuple(range(self.n, self.n + k))
        self.n += k
        return out


def make_edges(flags, orders):
    """Four edges with consistent corner ids.

    ``orders[e]`` is an int or a pair of per-segment orders.
    """
    if isinstance(orders, int):
        orders = (orders,) * 4
    ids = _Ids()
    c = ids.take(4)
    ends = ((c[0], c[1]), (c[1], c[2]), (c[3], c[2]), (c[0], c[3]))
    edges = []
    for e in range(4):
        a, b = ends[e]
        o = orders[e]
        if flags[e]:
            o1, o2 = (o, o) if isinstance(o, int) else o
            mid = ids.take(1)[0]
            s1 = Segment(-1.0, 0.0, o1, (a, *ids.take(o1 - 1), mid))
            s2 = Segment(0.0, 1.0, o2, (mid, *ids.take(o2 - 1), b))
            edges.append(EdgeDescriptor((s1, s2)))
        else:
            edges.append(EdgeDescriptor.simple(o, (a, *ids.take(o - 1), b)))
    return edges


def serendipity_monomials(p):
    return [(a, b) for a in range(p + 1) for b in range(p + 1) if min(a, b) <= 1]


def random_points(rng, n, margin=0.0):
    return rng.uniform(-1 + margin, 1 - margin, size=(n, 2))


def all_flag_configs():
    return list(itertools.product((0, 1), repeat=4))


def rotate_flags(flags, k):
    f = list(flags)
    return tuple(f[-k:] + f[:-k]) if k else tuple(f)


def interface_free(pts, tol=1e-2):
    return pts[(np.abs(pts) > tol).all(axis=1) & (np.abs(np.abs(pts) - 1) > tol).all(axis=1)]
