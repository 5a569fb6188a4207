"""Analytical displacement fields for the linear, quadratic and cubic patch tests.

All fields accept scalar or array coordinates and are written with generic
numpy operations, so they can be evaluated in ``np.longdouble`` for the
finite-difference equilibrium oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np


class ReferenceError_(ValueError):
    pass


def uniaxial_ref(x, y, z):
    """Uniaxial tension ``u = (0, 0, z)``."""
    z = np.asarray(z)
    zero = 0 * z
    return np.stack(np.broadcast_arrays(zero + 0 * np.asarray(x), zero + 0 * np.asarray(y), z), -1)


def bending_ref(x, y, z, nu=0.0):
    """Pure bending with unit curvature."""
    x, y, z = np.broadcast_arrays(np.asarray(x), np.asarray(y), np.asarray(z))
    ux = -0.5 * (z * z + nu * (x * x - y * y))
    uy = -x * y * nu
    uz = x * z
    return np.stack([ux, uy, uz], -1)


def cantilever_ref(x, y, z, nu=0.0, F=1.0, E=1.0, I=None, a=1.0, b=1.0, n_terms=200):
    """End-loaded cantilever with rectangular section ``|x| <= a``, ``|y| <= b``.

    ``a`` and ``b`` are half-widths; ``I`` defaults to ``(2a)(2b)^3 / 12``.
    The Fourier series is truncated once a term drops below 1e-14 of the
    running sum, or after ``n_terms`` terms.  For ``nu = 0`` it vanishes.
    """
    x, y, z = np.broadcast_arrays(np.asarray(x), np.asarray(y), np.asarray(z))
    if I is None:
        I = (2 * a) * (2 * b) ** 3 / 12.0
    c = F / (E * I)
    ux = -c * nu * x * y * z
    uy = c * (0.5 * nu * (x * x - y * y) * z - z ** 3 / 6.0)
    uz = (0.5 * y * (nu * x * x + z * z) + nu * y ** 3 / 6.0
          + (1 + nu) * (b * b * y - y ** 3 / 3.0) - a * a * nu * y / 3.0)
    if nu != 0:
        uz = uz - 4 * a ** 3 * nu / np.pi ** 3 * _series(x, y, a, b, n_terms)
    return np.stack([ux, uy, c * uz], -1)


def _series(x, y, a, b, n_terms):
    """sum (-1)^n / n^3 cos(n pi x / a) sinh(n pi y / a) / cosh(n pi b / a).

    The hyperbolic ratio is evaluated as ``exp(k(|y| - b)) (1 - e^{-2k|y|}) /
    (1 + e^{-2kb})`` so it never overflows.
    """
    total = 0 * x
    ay = np.abs(y)
    sgn = np.sign(y)
    for n in range(1, n_terms + 1):
        k = n * np.pi / a
        ratio = sgn * np.exp(k * (ay - b)) * (1 - np.exp(-2 * k * ay)) / (1 + np.exp(-2 * k * b))
        term = (-1) ** n / n ** 3 * np.cos(k * x) * ratio
        total = total + term
        if np.all(np.abs(term) <= 1e-14 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


# ----------------------------------------------------------------------------
# finite-difference oracle


def _lame(E, nu):
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return lam, mu


def stress(field, X, E=1.0, nu=0.0, h=1e-4, dtype=np.longdouble):
    """Cauchy stress (3x3 per point) by central differences of ``field``."""
    X = np.asarray(X, dtype=dtype).reshape(-1, 3)
    h = dtype(h)
    grad = np.zeros((len(X), 3, 3), dtype=dtype)     # grad[:, i, j] = du_i / dx_j
    for j in range(3):
        d = np.zeros(3, dtype=dtype)
        d[j] = h
        up = field(*(X + d).T)
        um = field(*(X - d).T)
        grad[:, :, j] = (up - um) / (2 * h)
    eps = 0.5 * (grad + np.swapaxes(grad, 1, 2))
    lam, mu = _lame(dtype(E), dtype(nu))
    tr = np.trace(eps, axis1=1, axis2=2)
    return lam * tr[:, None, None] * np.eye(3, dtype=dtype) + 2 * mu * eps


def equilibrium_residual(field, X, E=1.0, nu=0.0, h=1e-4, dtype=np.longdouble):
    """Max |div sigma| at points ``X`` (zero body force), nested central differences."""
    X = np.asarray(X, dtype=dtype).reshape(-1, 3)
    h = dtype(h)
    div = np.zeros((len(X), 3), dtype=dtype)
    for j in range(3):
        d = np.zeros(3, dtype=dtype)
        d[j] = h
        sp = stress(field, X + d, E, nu, h, dtype)
        sm = stress(field, X - d, E, nu, h, dtype)
        div += (sp[:, :, j] - sm[:, :, j]) / (2 * h)
    return float(np.max(np.abs(div)))


def traction_residual(field, X, normals, E=1.0, nu=0.0, h=1e-4, dtype=np.longdouble):
    """Max |sigma n| at surface points ``X`` with outward ``normals``."""
    sig = stress(field, X, E, nu, h, dtype)
    n = np.asarray(normals, dtype=dtype).reshape(-1, 3)
    return float(np.max(np.abs(np.einsum("pij,pj->pi", sig, n))))


# ----------------------------------------------------------------------------
# patch cases


@dataclass(frozen=True)
class PatchCase:
    """Geometry, material and exact field of one patch test.

    The box spans ``origin + [0, a] x [0, b] x [0, L]``.  The cantilever
    uses a centred section (``origin = (-a/2, -b/2, 0)``) so that the
    lateral faces are traction free.
    """

    name: str
    a: float = 2.0
    b: float = 2.0
    L: float = 4.0
    E: float = 1.0
    nu: float = 0.0
    F: float = 1.0
    n_terms: int = 200
    origin: tuple = (0.0, 0.0, 0.0)
    degree: int = 1

    @property
    def I(self):
        return self.a * self.b ** 3 / 12.0

    def field(self, x, y, z):
        if self.name == "uniaxial":
            return uniaxial_ref(x, y, z)
        if self.name == "bending":
            return bending_ref(x, y, z, self.nu)
        if self.name == "cantilever":
            return cantilever_ref(x, y, z, self.nu, self.F, self.E, self.I,
                                  self.a / 2, self.b / 2, self.n_terms)
        raise ReferenceError_(f"unknown patch case {self.name!r}")

    def __call__(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        return self.field(X[:, 0], X[:, 1], X[:, 2])

    def on_end(self, X, tol=1e-9):
        """Mask of points on the Dirichlet faces ``z = 0`` and ``z = L``."""
        z = np.asarray(X)[:, 2] - self.origin[2]
        return (np.abs(z) < tol * self.L) | (np.abs(z - self.L) < tol * self.L)

    def dirichlet(self, X):
        """Prescribed end-face displacements, written out face by face."""
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        out = np.full((len(X), 3), np.nan)
        x, y, z = X.T
        lo = np.abs(z - self.origin[2]) < 1e-9 * self.L
        hi = np.abs(z - self.origin[2] - self.L) < 1e-9 * self.L
        L = self.L
        if self.name == "uniaxial":
            out[lo] = 0.0
            out[hi] = (0.0, 0.0, L)
        elif self.name == "bending" and self.nu == 0:
            out[lo] = 0.0
            out[hi] = np.column_stack([np.full(hi.sum(), -0.5 * L * L), np.zeros(hi.sum()), x[hi] * L])
        elif self.name == "cantilever" and self.nu == 0:
            c = self.F / (self.E * self.I)
            hb = self.b / 2
            yl, yh = y[lo], y[hi]
            out[lo] = c * np.column_stack([0 * yl, 0 * yl, hb * hb * yl - yl ** 3 / 3])
            out[hi] = c * np.column_stack([0 * yh, np.full(len(yh), -L ** 3 / 6),
                                           -yh ** 3 / 3 + (0.5 * L * L + hb * hb) * yh])
        else:
            out[lo | hi] = self(X[lo | hi])
        return out

    def box(self):
        o = np.asarray(self.origin, dtype=float)
        return o, o + np.array([self.a, self.b, self.L])

    def validate(self, n_points=64, seed=0, tol=None):
        """Equilibrium (and lateral traction) residual of the exact field."""
        tol = {"uniaxial": 1e-8, "bending": 1e-8}.get(self.name, 1e-6) if tol is None else tol
        rng = np.random.default_rng(seed)
        lo, hi = self.box()
        X = lo + (hi - lo) * rng.uniform(0.05, 0.95, (n_points, 3))
        res = equilibrium_residual(self.field, X, self.E, self.nu)
        # lateral faces x = const and y = const
        pts, nrm = [], []
        for axis in (0, 1):
            for side, val in ((-1, lo[axis]), (1, hi[axis])):
                P = lo + (hi - lo) * rng.uniform(0.05, 0.95, (n_points // 4, 3))
                P[:, axis] = val
                n = np.zeros(3)
                n[axis] = side
                pts.append(P)
                nrm.append(np.tile(n, (len(P), 1)))
        trac = traction_residual(self.field, np.vstack(pts), np.vstack(nrm), self.E, self.nu)
        return {"equilibrium": res, "traction": trac,
                "passed": res <= tol and trac <= tol, "tol": tol}


PATCH_CASES = {
    "uniaxial": partial(PatchCase, "uniaxial", degree=1),
    "bending": partial(PatchCase, "bending", degree=2),
    "cantilever": partial(PatchCase, "cantilever", degree=3, origin=(-1.0, -1.0, 0.0)),
}


def patch_case(name, **kw):
    try:
        return PATCH_CASES[name](**kw)
    except KeyError:
        raise ReferenceError_(f"unknown patch case {name!r}") from None
