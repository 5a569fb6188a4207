"""Global sparse assembly, boundary conditions, static and modal solves."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .sbfem_core import SubdomainResult, rigid_body_modes


class AssemblyError(ValueError):
    pass


class SingularSystemError(ArithmeticError):
    pass


class ModalError(ArithmeticError):
    pass


# dense generalized eigensolver up to this many free DOFs, shift-invert above
DENSE_LIMIT = 4000


@dataclass(frozen=True)
class GlobalSystem:
    """Assembled stiffness/mass, nodal coordinates, loads and constraints.

    DOF ``3 * node + component``.  ``fixed`` maps DOF -> prescribed value.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    coords: np.ndarray
    f: np.ndarray = None
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.f is None:
            object.__setattr__(self, "f", np.zeros(self.n_dofs))

    @property
    def n_dofs(self):
        return self.K.shape[0]

    @property
    def n_nodes(self):
        return self.n_dofs // 3

    def dof(self, node, component):
        return 3 * np.asarray(node) + component

    @property
    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[list(self.fixed)] = False
        return np.flatnonzero(mask)

    @property
    def fixed_dofs(self):
        return np.array(sorted(self.fixed), dtype=int)

    def with_load(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_dofs,):
            raise AssemblyError(f"load vector has shape {f.shape}, expected ({self.n_dofs},)")
        return replace(self, f=f)


@dataclass
class SolveReport:
    u: np.ndarray = None
    residual: float = None
    reactions: np.ndarray = None      # K u - f at every DOF (nonzero only on fixed DOFs)
    eigenvalues: np.ndarray = None    # omega^2
    frequencies: np.ndarray = None    # f = omega / (2 pi)
    modes: np.ndarray = None          # (n_dofs, k)
    method: str = ""
    timings: dict = field(default_factory=dict)

    @property
    def omega(self):
        return 2 * np.pi * self.frequencies


def assemble(results, coords) -> GlobalSystem:
    """Scatter-add subdomain K and M into CSR matrices.

    Subdomains are processed in order of their sorted node-id tuples, so the
    floating-point summation order (and the result) does not depend on the
    order of ``results``.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 3)
    n = 3 * len(coords)
    order = sorted(range(len(results)), key=lambda i: tuple(results[i].node_ids))
    rows, cols, kv, mv = [], [], [], []
    for i in order:
        r: SubdomainResult = results[i]
        ids = np.asarray(r.node_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= len(coords)):
            raise AssemblyError("subdomain node id out of range")
        if not (np.all(np.isfinite(r.K)) and np.all(np.isfinite(r.M))):
            raise AssemblyError("non-finite subdomain matrix")
        dof = (3 * ids[:, None] + np.arange(3)).ravel()
        R, C = np.meshgrid(dof, dof, indexing="ij")
        rows.append(R.ravel())
        cols.append(C.ravel())
        kv.append(r.K.ravel())
        mv.append(r.M.ravel())
    if rows:
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        kv, mv = np.concatenate(kv), np.concatenate(mv)
    K = sp.coo_matrix((kv, (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((mv, (rows, cols)), shape=(n, n)).tocsr()
    return GlobalSystem(K, M, coords)


def apply_dirichlet(system: GlobalSystem, predicate, value=0.0, components=(0, 1, 2)):
    """Prescribe displacements on nodes selected by ``predicate(coords) -> mask``.

    ``value`` is a constant, a 3-vector or a callable ``coords -> (m, 3)``.
    Constraints accumulate; later calls override earlier values.
    """
    X = system.coords
    mask = np.asarray(predicate(X), dtype=bool)
    nodes = np.flatnonzero(mask)
    if nodes.size == 0:
        raise AssemblyError("Dirichlet region selects no nodes")
    if callable(value):
        vals = np.asarray(value(X[nodes]), dtype=float).reshape(len(nodes), 3)
    else:
        vals = np.broadcast_to(np.asarray(value, dtype=float), (len(nodes), 3))
    fixed = dict(system.fixed)
    for c in components:
        if np.any(~np.isfinite(vals[:, c])):
            raise AssemblyError("Dirichlet value undefined on selected nodes")
        for nd, v in zip(nodes, vals[:, c]):
            fixed[int(3 * nd + c)] = float(v)
    return replace(system, fixed=fixed)


def _check_constrained(system):
    """Raise if the constraints leave a rigid-body motion free."""
    X = system.coords
    R = rigid_body_modes(X, X.mean(axis=0))
    fixed = system.fixed_dofs
    if fixed.size == 0:
        raise SingularSystemError("no Dirichlet constraints: 6 rigid-body modes are free")
    s = np.linalg.svd(R[fixed], compute_uv=False)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    if rank < 6:
        raise SingularSystemError(f"constraints fix only {rank} of 6 rigid-body modes")


def solve_static(system: GlobalSystem) -> SolveReport:
    """Solve ``K u = f`` with constrained DOFs eliminated symmetrically."""
    t0 = time.perf_counter()
    _check_constrained(system)
    free = system.free_dofs
    fixed = system.fixed_dofs
    uc = np.array([system.fixed[d] for d in fixed])
    K = system.K
    Kff = K[free][:, free].tocsc()
    rhs = system.f[free] - K[free][:, fixed] @ uc
    try:
        lu = spla.splu(Kff)
    except RuntimeError as exc:
        raise SingularSystemError(f"stiffness factorisation failed: {exc}") from exc
    uf = lu.solve(rhs)
    if not np.all(np.isfinite(uf)):
        raise SingularSystemError("non-finite solution")
    u = np.zeros(system.n_dofs)
    u[free] = uf
    u[fixed] = uc
    r = Kff @ uf - rhs
    scale = max(np.linalg.norm(rhs), np.linalg.norm(Kff @ uf), 1e-300)
    res = float(np.linalg.norm(r) / scale)
    reactions = K @ u - system.f
    reactions[free] = 0.0
    return SolveReport(u=u, residual=res, reactions=reactions, method="splu",
                       timings={"solve": time.perf_counter() - t0})


def solve_modal(system: GlobalSystem, k: int, dense_limit=DENSE_LIMIT, shift=None) -> SolveReport:
    """Smallest ``k`` eigenpairs of ``K u = omega^2 M u`` on the free DOFs.

    Free-free systems are allowed; their rigid modes come out near zero and
    are reported with ``f = sign(omega^2) sqrt(|omega^2|) / 2 pi``.
    """
    t0 = time.perf_counter()
    if int(k) != k or k < 1:
        raise ModalError(f"mode count must be a positive integer (got {k})")
    free = system.free_dofs
    nf = len(free)
    if k > nf:
        raise ModalError(f"requested {k} modes but only {nf} free DOFs")
    K = system.K[free][:, free]
    M = system.M[free][:, free]
    if np.any(M.diagonal() <= 0):
        raise ModalError("mass matrix is not positive definite")
    if nf <= dense_limit:
        try:
            lam, V = sla.eigh(K.toarray(), M.toarray(), subset_by_index=[0, k - 1])
        except np.linalg.LinAlgError as exc:
            raise ModalError(f"mass matrix is not positive definite: {exc}") from exc
        method = "dense"
    else:
        if shift is None:
            shift = -1e-4 * float(np.mean(K.diagonal() / M.diagonal()))
        try:
            lam, V = spla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=shift, which="LM", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise ModalError("eigensolver did not converge") from exc
        idx = np.argsort(lam)
        lam, V = lam[idx], V[:, idx]
        method = "shift-invert"
    modes = np.zeros((system.n_dofs, k))
    modes[free] = V
    freq = np.sign(lam) * np.sqrt(np.abs(lam)) / (2 * np.pi)
    return SolveReport(eigenvalues=lam, frequencies=freq, modes=modes, method=method,
                       timings={"solve": time.perf_counter() - t0})


def body_load(system: GlobalSystem, acceleration):
    """Consistent nodal load ``f = M a`` for a uniform acceleration field."""
    a = np.asarray(acceleration, dtype=float)
    if a.shape != (3,):
        raise AssemblyError(f"acceleration must be a 3-vector (got shape {a.shape})")
    return system.M @ np.tile(a, system.n_nodes)


def total_mass(system: GlobalSystem):
    """Mass from the translational rigid mode, ``t^T M t``."""
    t = np.tile([1.0, 0.0, 0.0], system.n_nodes)
    return float(t @ (system.M @ t))


def l2_error(u, u_ref):
    """Nodal relative L2 error ``sqrt(sum |u - u_ref|^2 / sum |u_ref|^2)``."""
    u = np.asarray(u, dtype=float).ravel()
    u_ref = np.asarray(u_ref, dtype=float).ravel()
    den = float(np.sum(u_ref ** 2))
    if den == 0:
        raise ValueError("reference field has zero norm")
    return float(np.sqrt(np.sum((u - u_ref) ** 2) / den))


def convergence_rate(h, err):
    """Rate from the two finest meshes, ``log(e1/e2) / log(h1/h2)``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    idx = np.argsort(h)[:2][::-1]
    (h1, h2), (e1, e2) = h[idx], err[idx]
    return float(np.log(e1 / e2) / np.log(h1 / h2))
