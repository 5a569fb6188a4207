"""Scaled boundary finite element operators of a single cubic subdomain.

The boundary of a cube is discretised by transition elements, the radial
direction is solved analytically.  Pipeline for one subdomain::

    coefficient_matrices -> build_Z -> bounded_modes -> stiffness -> mass
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .xny_shape import ElementLayout, evaluate_layout, quadrature_for


class SBFEMError(ArithmeticError):
    pass


class OrientationError(SBFEMError):
    pass


# L = b1h d/dx + b2h d/dy + b3h d/dz, strain order xx yy zz xy xz yz
B_HAT = np.zeros((3, 6, 3))
B_HAT[0][[0, 3, 4], [0, 1, 2]] = 1.0
B_HAT[1][[3, 1, 5], [0, 1, 2]] = 1.0
B_HAT[2][[4, 5, 2], [0, 1, 2]] = 1.0


def elasticity_matrix(young, nu):
    """Isotropic 6x6 elasticity matrix (engineering shear strains)."""
    if not young > 0 or not -1.0 < nu < 0.5:
        raise SBFEMError(f"invalid material E={young}, nu={nu}")
    G = young / (2.0 * (1.0 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = nu
    D[[0, 1, 2], [0, 1, 2]] = 1.0 - nu
    D[[3, 4, 5], [3, 4, 5]] = 0.5 * (1.0 - 2.0 * nu)
    return 2.0 * G / (1.0 - 2.0 * nu) * D


# ----------------------------------------------------------------------------
# geometry


def _face_xyz(face, coords, center):
    return np.asarray(coords)[list(face.node_ids)] - np.asarray(center)


def jacobian(face, eta, zeta, coords, center=(0.0, 0.0, 0.0)):
    """Boundary Jacobian ``[x; x_eta; x_zeta]`` and its determinant.

    ``coords`` is the global node coordinate array; positions are taken
    relative to the scaling ``center``.
    """
    X = _face_xyz(face, coords, center)
    N, Ne, Nz = evaluate_layout(face.layout, [eta], [zeta])
    J = np.vstack([N @ X, Ne @ X, Nz @ X])
    det = float(np.linalg.det(J))
    if det <= 0.0:
        raise OrientationError(f"det J = {det:.3e} <= 0: face orientation inverted")
    return J, det


def b_operators(J):
    """``b_j = sum_k bhat_k [J^-1]_kj`` for j = 1, 2, 3 (each 6x3).

    Works on a single 3x3 ``J`` or a stack ``(q, 3, 3)``.
    """
    J = np.asarray(J, dtype=float)
    if np.any(np.abs(np.linalg.det(J)) < 1e-300):
        raise SBFEMError("singular Jacobian")
    Ji = np.linalg.inv(J)
    b = np.einsum("kac,...kj->...jac", B_HAT, Ji)
    return b[..., 0, :, :], b[..., 1, :, :], b[..., 2, :, :]


# ----------------------------------------------------------------------------
# coefficient matrices


@dataclass
class SubdomainOperator:
    center: np.ndarray
    node_ids: tuple       # local -> global node id
    E0: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    M0: np.ndarray
    D: np.ndarray = None
    rho: float = 0.0
    faces: list = field(default_factory=list)
    size: float = None

    @property
    def n_dofs(self):
        return 3 * len(self.node_ids)


@lru_cache(maxsize=4096)
def _tables(layout: ElementLayout, p: int):
    rule = quadrature_for_layout(layout, p)
    N, Ne, Nz = evaluate_layout(layout, rule.points[:, 0], rule.points[:, 1],
                                rule.side[:, 0], rule.side[:, 1])
    return rule.weights, N, Ne, Nz


def quadrature_for_layout(layout, p):
    class _E:  # minimal adapter exposing edge structure to quadrature_for
        def __init__(self, sig):
            self.n_segments = len(sig)
            self.max_order = max(o for _, _, o in sig)
    return quadrature_for([_E(s) for s in layout.sigs], p)


def face_integrals(face, X, D, rho, density=1):
    """E0, E1, E2, M0 contributions of one face with nodal coords ``X``.

    ``density`` multiplies the per-subcell Gauss count (used by the
    refined-quadrature oracle in tests).
    """
    layout = face.layout
    p = layout.max_order
    if density == 1:
        w, N, Ne, Nz = _tables(layout, p)
    else:
        from .xny_shape import _rule
        split = any(len(s) > 1 for s in layout.sigs)
        pts, w, _ = _rule(density * (p + 2), split)
        side = np.sign(pts)
        N, Ne, Nz = evaluate_layout(layout, pts[:, 0], pts[:, 1], side[:, 0], side[:, 1])
    x = N @ X
    J = np.stack([x, Ne @ X, Nz @ X], axis=1)        # (q, 3, 3)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise OrientationError("det J <= 0 on a face: orientation inverted")
    b1, b2, b3 = b_operators(J)                      # (q, 6, 3)
    nf = N.shape[1]
    q = len(w)
    B1 = np.einsum("qac,qi->qaic", b1, N).reshape(q, 6, 3 * nf)
    B2 = (np.einsum("qac,qi->qaic", b2, Ne) + np.einsum("qac,qi->qaic", b3, Nz)).reshape(q, 6, 3 * nf)
    wd = w * det
    DB1 = np.einsum("ab,qbj->qaj", D, B1)
    DB2 = np.einsum("ab,qbj->qaj", D, B2)
    E0 = np.einsum("q,qai,qaj->ij", wd, B1, DB1)
    E1 = np.einsum("q,qai,qaj->ij", wd, B2, DB1)
    E2 = np.einsum("q,qai,qaj->ij", wd, B2, DB2)
    Ms = np.einsum("q,qi,qj->ij", wd * rho, N, N)
    M0 = np.kron(Ms, np.eye(3))
    return E0, E1, E2, M0


def coefficient_matrices(faces, coords, center, D, rho, size=None, density=1):
    """Assemble E0, E1, E2, M0 over the closed boundary of one subdomain.

    ``faces`` must be oriented outward (see ``SurfaceMesh.subdomain_faces``).
    Local node order: first appearance over the faces' local node lists.
    """
    coords = np.asarray(coords, dtype=float)
    center = np.asarray(center, dtype=float)
    local = {}
    for f in faces:
        for g in f.node_ids:
            local.setdefault(g, len(local))
    if size is not None:
        area = sum(f.area for f in faces)
        if abs(area - 6.0 * size * size) > 1e-9 * size * size:
            raise SBFEMError(f"boundary not closed: face area {area} != 6 * {size}^2")
    n = 3 * len(local)
    E0 = np.zeros((n, n))
    E1 = np.zeros((n, n))
    E2 = np.zeros((n, n))
    M0 = np.zeros((n, n))
    for f in faces:
        ids = f.node_ids
        X = coords[list(ids)] - center
        e0, e1, e2, m0 = face_integrals(f, X, D, rho, density)
        dof = np.array([[3 * local[g] + c for c in range(3)] for g in ids]).ravel()
        ix = np.ix_(dof, dof)
        E0[ix] += e0
        E1[ix] += e1
        E2[ix] += e2
        M0[ix] += m0
    return SubdomainOperator(center, tuple(local), E0, E1, E2, M0, D, rho, list(faces), size)


# ----------------------------------------------------------------------------
# Z matrix and modes


def build_Z(E0, E1, E2, d=3):
    """Hamiltonian-type matrix of the first-order radial ODE (2n x 2n)."""
    n = E0.shape[0]
    cond = np.linalg.cond(E0)
    if not np.isfinite(cond) or cond > 1e14:
        raise SBFEMError(f"E0 is numerically singular (cond = {cond:.2e})")
    cf = sla.cho_factor(E0)
    A = sla.cho_solve(cf, E1.T)          # E0^-1 E1^T
    B = sla.cho_solve(cf, np.eye(n))     # E0^-1
    half = 0.5 * (d - 2)
    I = np.eye(n)
    return np.block([[A - half * I, -B],
                     [-E2 + E1 @ A, -(E1 @ B - half * I)]])


@dataclass
class BoundedModes:
    psi11: np.ndarray
    psi21: np.ndarray
    S11: np.ndarray
    eigenvalues: np.ndarray       # full spectrum of Z
    spectral_gap: float
    cond_psi11: float
    method: str


def bounded_modes(Z, method="eig", min_gap=0.25, max_cond=1e12):
    """Invariant subspace of Z for eigenvalues with negative real part.

    ``method='eig'`` uses an eigen-decomposition (S11 diagonal);
    ``method='schur'`` an ordered real Schur form (S11 quasi-triangular),
    which stays accurate when eigenvectors are nearly parallel.
    """
    m = Z.shape[0]
    n = m // 2
    if method == "eig":
        lam, V = sla.eig(Z)
        sel = np.argsort(lam.real, kind="stable")[:n]
        if np.count_nonzero(lam.real < 0) != n:
            raise SBFEMError(f"{np.count_nonzero(lam.real < 0)} stable eigenvalues, expected {n}")
        psi = V[:, sel]
        S11 = np.diag(lam[sel])
    elif method == "schur":
        T, U, sdim = sla.schur(Z, output="real", sort="lhp")
        lam = sla.eigvals(Z)
        if sdim != n:
            raise SBFEMError(f"{sdim} stable eigenvalues, expected {n}")
        psi = U[:, :n]
        S11 = T[:n, :n]
    else:
        raise ValueError(f"unknown method {method!r}")
    gap = float(np.min(np.abs(lam.real)))
    if gap < min_gap:
        raise SBFEMError(f"spectral gap {gap:.3e} < {min_gap}: ambiguous bounded set")
    psi11, psi21 = psi[:n], psi[n:]
    cond = float(np.linalg.cond(psi11))
    if not np.isfinite(cond) or cond > max_cond:
        raise SBFEMError(f"cond(Psi11) = {cond:.2e}: near-parallel eigenvectors, try method='schur'")
    return BoundedModes(psi11, psi21, S11, lam, gap, cond, method)


def stiffness(psi11, psi21, tol=1e-8):
    """``K = Psi21 Psi11^-1``, symmetrised; returns ``(K, asymmetry)``."""
    K = sla.solve(psi11.T, psi21.T).T
    if np.iscomplexobj(K):
        K = K.real
    nrm = np.linalg.norm(K)
    asym = float(np.linalg.norm(K - K.T) / nrm) if nrm > 0 else 0.0
    if asym > tol:
        raise SBFEMError(f"stiffness asymmetry {asym:.2e} exceeds {tol}")
    return 0.5 * (K + K.T), asym


def mass(K, E0, E1, M0, d=3, tol=1e-9):
    """Low-order mass from ``A M + M A^T = M0``, ``A = (K - E1) E0^-1 + d/2 I``."""
    n = K.shape[0]
    A = sla.solve(E0, (K - E1).T, assume_a="pos").T + 0.5 * d * np.eye(n)
    M = sla.solve_continuous_lyapunov(A, M0)
    M = 0.5 * (M + M.T)
    res = lyapunov_residual(K, E0, E1, M0, M, d)
    if res > tol:
        raise SBFEMError(f"Lyapunov residual {res:.2e} exceeds {tol}")
    return M


def lyapunov_residual(K, E0, E1, M0, M, d=3):
    E0iM = np.linalg.solve(E0, M)
    R = (K - E1) @ E0iM + E0iM.T @ (K - E1.T) + d * M - M0
    return float(np.linalg.norm(R) / np.linalg.norm(M0))


def dynamic_stiffness_residual(op, K, M, omega, d=3, static_part=False):
    """Norm of the dynamic-stiffness ODE residual with ``S = K - omega^2 M``.

    By default the omega-independent part (the static equation satisfied by
    ``K`` alone) is subtracted, leaving the truncation error of the
    low-order expansion, which must scale like ``omega**4``.
    """
    def R(w):
        S = K - w ** 2 * M
        dS = -2.0 * w * M
        return ((S - op.E1) @ np.linalg.solve(op.E0, S - op.E1.T) - op.E2
                + (d - 2) * S + w * dS + w ** 2 * op.M0)
    res = R(omega) if static_part else R(omega) - R(0.0)
    return float(np.linalg.norm(res))


# ----------------------------------------------------------------------------
# subdomain result


@dataclass
class SubdomainResult:
    K: np.ndarray
    M: np.ndarray
    node_ids: tuple                 # local -> global node id
    center: np.ndarray = None
    size: float = 1.0
    modes: BoundedModes = None
    asymmetry: float = 0.0
    op: SubdomainOperator = None    # possibly of a normalised (cached) cube

    @property
    def n_dofs(self):
        return self.K.shape[0]


def solve_subdomain(faces, coords, center, D, rho, size=None, method="schur"):
    """K and M of one subdomain from its outward-oriented faces."""
    op = coefficient_matrices(faces, coords, center, D, rho, size)
    Z = build_Z(op.E0, op.E1, op.E2)
    modes = bounded_modes(Z, method)
    K, asym = stiffness(modes.psi11, modes.psi21)
    M = mass(K, op.E0, op.E1, op.M0) if rho > 0 else np.zeros_like(K)
    return SubdomainResult(K, M, op.node_ids, np.asarray(center, dtype=float),
                           1.0 if size is None else float(size), modes, asym, op)


def _face_local(op):
    local = {g: i for i, g in enumerate(op.node_ids)}
    return [[local[g] for g in f.node_ids] for f in op.faces]


def recover_interior(result: SubdomainResult, u_b, face_index, xi, eta, zeta, d=3):
    """Displacement inside the subdomain at scaled coordinates.

    ``u_b`` are the subdomain's boundary DOFs (local order); ``face_index``
    selects the face (of ``result.op.faces``) whose ray passes through the
    point.  ``xi = 1`` is the boundary, ``xi -> 0`` the scaling centre.
    """
    if not 0.0 < xi <= 1.0:
        raise SBFEMError(f"xi={xi} outside (0, 1]")
    modes = result.modes
    c1 = np.linalg.solve(modes.psi11, np.asarray(u_b, dtype=modes.psi11.dtype))
    n = modes.S11.shape[0]
    expo = -(modes.S11 + 0.5 * (d - 2) * np.eye(n))
    if np.count_nonzero(modes.S11 - np.diag(np.diag(modes.S11))) == 0:
        u_xi = modes.psi11 @ (np.exp(np.log(xi) * np.diag(expo)) * c1)
    else:
        u_xi = modes.psi11 @ (sla.expm(np.log(xi) * expo) @ c1)
    u_xi = np.real(u_xi)
    face = result.op.faces[face_index]
    N, _, _ = evaluate_layout(face.layout, [eta], [zeta])
    U = u_xi.reshape(-1, 3)[_face_local(result.op)[face_index]]
    return N[0] @ U


def locate(result: SubdomainResult, point):
    """Scaled coordinates ``(face_index, xi, eta, zeta)`` of a physical point.

    The operator may belong to a normalised cube, so the point is first
    mapped with the subdomain's own centre and size.
    """
    op = result.op
    op_size = getattr(op, "size", None) or result.size
    r = (np.asarray(point, dtype=float) - result.center) * (op_size / result.size)
    for i, f in enumerate(op.faces):
        c = f.corners - op.center
        nrm = f.normal
        dist = float(c[0] @ nrm)
        rn = float(r @ nrm)
        if rn <= 0:
            continue
        xi = rn / dist
        if xi > 1 + 1e-12:
            continue
        xb = r / xi
        e_u = c[1] - c[0]
        e_v = c[3] - c[0]
        eta = 2 * float((xb - c[0]) @ e_u) / float(e_u @ e_u) - 1
        zeta = 2 * float((xb - c[0]) @ e_v) / float(e_v @ e_v) - 1
        if -1 - 1e-12 <= eta <= 1 + 1e-12 and -1 - 1e-12 <= zeta <= 1 + 1e-12:
            return i, min(xi, 1.0), float(np.clip(eta, -1, 1)), float(np.clip(zeta, -1, 1))
    raise SBFEMError("point is not inside the subdomain")


def displacement_at(result: SubdomainResult, u_b, point):
    """Interior displacement at a physical point of the subdomain."""
    i, xi, eta, zeta = locate(result, point)
    return recover_interior(result, u_b, i, xi, eta, zeta)


def rigid_body_modes(coords, center=(0.0, 0.0, 0.0)):
    """(3n, 6) translations and infinitesimal rotations about ``center``."""
    X = np.asarray(coords, dtype=float) - np.asarray(center, dtype=float)
    n = len(X)
    R = np.zeros((3 * n, 6))
    for c in range(3):
        R[c::3, c] = 1.0
    x, y, z = X.T
    R[0::3, 3], R[1::3, 3] = -y, x
    R[1::3, 4], R[2::3, 4] = -z, y
    R[2::3, 5], R[0::3, 5] = -x, z
    return R
