import numpy as np
import pytest
import scipy.sparse as sp

from octsbfem.assembly import (AssemblyError, GlobalSystem, ModalError, SingularSystemError,
                               apply_dirichlet, assemble, body_load, convergence_rate, l2_error,
                               solve_modal, solve_static, total_mass)
from octsbfem.octree import refine, uniform_mesh
from octsbfem.pipeline import build_model
from octsbfem.voxel_io import MaterialParams

STEEL = {1: MaterialParams(2.0, 0.25, 3.0)}


def _bar(p=2, refined=True):
    m = uniform_mesh((1, 1, 2), 1.0)
    if refined:
        m = refine(m, lambda mm, c: c.index == (0, 0, 1))
    return build_model(m, STEEL, p)


@pytest.fixture(scope="module")
def bar():
    return _bar()


def _base(X):
    return np.abs(X[:, 2]) < 1e-12


# ---------------------------------------------------------------- assembly


def test_assembled_matrices(bar):
    K, M = bar.system.K, bar.system.M
    assert abs(K - K.T).max() <= 1e-12 * abs(K).max()
    assert abs(M - M.T).max() <= 1e-12 * abs(M).max()
    ev = np.linalg.eigvalsh(K.toarray())
    assert np.count_nonzero(np.abs(ev) < 1e-9 * ev.max()) == 6
    assert total_mass(bar.system) == pytest.approx(3.0 * 2.0, rel=1e-12)


def test_assembly_independent_of_result_order(bar):
    a = assemble(bar.results, bar.coords)
    b = assemble(bar.results[::-1], bar.coords)
    assert (a.K != b.K).nnz == 0 and (a.M != b.M).nnz == 0


def test_assembly_equals_dense_scatter(bar):
    n = bar.system.n_dofs
    K = np.zeros((n, n))
    for r in bar.results:
        dof = (3 * np.asarray(r.node_ids)[:, None] + np.arange(3)).ravel()
        K[np.ix_(dof, dof)] += r.K
    assert np.allclose(bar.system.K.toarray(), K, atol=1e-13 * np.abs(K).max())


def test_bad_node_ids(bar):
    r = bar.results[0]
    with pytest.raises(AssemblyError):
        assemble([r], bar.coords[:2])


def test_nonfinite_rejected(bar):
    from dataclasses import replace
    r = replace(bar.results[0], K=np.full_like(bar.results[0].K, np.nan))
    with pytest.raises(AssemblyError):
        assemble([r], bar.coords)


# ---------------------------------------------------------------- constraints and static


def test_dirichlet_errors(bar):
    with pytest.raises(AssemblyError):
        apply_dirichlet(bar.system, lambda X: X[:, 2] > 99)
    with pytest.raises(AssemblyError):
        apply_dirichlet(bar.system, _base, lambda X: np.full((len(X), 3), np.nan))


def test_dirichlet_values(bar):
    s = apply_dirichlet(bar.system, _base, (1.0, 2.0, 3.0), components=(0, 2))
    nodes = np.flatnonzero(_base(bar.coords))
    assert len(s.fixed) == 2 * len(nodes)
    assert all(s.fixed[3 * n] == 1.0 and s.fixed[3 * n + 2] == 3.0 for n in nodes)
    assert 3 * nodes[0] + 1 not in s.fixed


def test_unconstrained_rejected(bar):
    with pytest.raises(SingularSystemError):
        solve_static(bar.system)


def test_partial_constraint_rejected(bar):
    # only u_z on the base: in-plane translation and twist remain free
    s = apply_dirichlet(bar.system, _base, 0.0, components=(2,))
    with pytest.raises(SingularSystemError):
        solve_static(s)


def test_static_matches_dense_solve(bar):
    s = apply_dirichlet(bar.system, _base)
    rng = np.random.default_rng(0)
    s = s.with_load(rng.normal(size=s.n_dofs))
    rep = solve_static(s)
    free = s.free_dofs
    K = s.K.toarray()
    ref = np.linalg.solve(K[np.ix_(free, free)], s.f[free])
    assert np.allclose(rep.u[free], ref, rtol=1e-9, atol=1e-12)
    assert rep.residual < 1e-12
    assert not rep.u[s.fixed_dofs].any()


def test_reactions_balance_load(bar):
    s = apply_dirichlet(bar.system, _base)
    f = np.zeros(s.n_dofs)
    top = np.flatnonzero(np.abs(bar.coords[:, 2] - 2.0) < 1e-12)
    f[3 * top + 1] = 0.25
    rep = solve_static(s.with_load(f))
    for c in range(3):
        assert np.sum(rep.reactions[c::3]) == pytest.approx(-np.sum(f[c::3]), abs=1e-10 * np.abs(f).sum())


def test_prescribed_rigid_motion(bar):
    # every node moved by the same translation: no strain, exact response
    shift = np.array([0.1, -0.2, 0.3])
    s = apply_dirichlet(bar.system, _base, shift)
    rep = solve_static(s)
    assert np.allclose(rep.u.reshape(-1, 3), shift, atol=1e-12)


def test_load_shape(bar):
    with pytest.raises(AssemblyError):
        bar.system.with_load(np.zeros(3))
    with pytest.raises(AssemblyError):
        body_load(bar.system, (0.0, 1.0))


def test_body_load_total(bar):
    f = body_load(bar.system, (0.0, 0.0, -9.81))
    assert np.sum(f[2::3]) == pytest.approx(-9.81 * 6.0, rel=1e-12)
    # the mass couples components node by node, but the resultant is vertical
    assert abs(np.sum(f[0::3])) < 1e-12 and abs(np.sum(f[1::3])) < 1e-12


# ---------------------------------------------------------------- modal


def test_free_free_rigid_modes(bar):
    rep = solve_modal(bar.system, 10)
    assert rep.method == "dense"
    assert np.abs(rep.frequencies[:6]).max() < 1e-6
    assert rep.frequencies[6] > 1e-3
    assert np.allclose(rep.omega, 2 * np.pi * rep.frequencies)


def test_sparse_matches_dense(bar):
    s = apply_dirichlet(bar.system, _base)
    a = solve_modal(s, 6)
    b = solve_modal(s, 6, dense_limit=0)
    assert b.method == "shift-invert"
    assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=1e-9)


def test_modes_mass_orthonormal(bar):
    s = apply_dirichlet(bar.system, _base)
    rep = solve_modal(s, 5)
    V = rep.modes
    assert np.allclose(V.T @ (s.M @ V), np.eye(5), atol=1e-10)
    assert np.allclose(V.T @ (s.K @ V), np.diag(rep.eigenvalues), atol=1e-9 * rep.eigenvalues.max())


@pytest.mark.parametrize("k", [0, -1, 2.5])
def test_bad_mode_count(bar, k):
    with pytest.raises(ModalError):
        solve_modal(bar.system, k)


def test_too_many_modes(bar):
    with pytest.raises(ModalError):
        solve_modal(bar.system, bar.system.n_dofs + 1)


def test_massless_rejected():
    K = sp.identity(6, format="csr")
    s = GlobalSystem(K, sp.csr_matrix((6, 6)), np.zeros((2, 3)))
    with pytest.raises(ModalError):
        solve_modal(s, 1)


# ---------------------------------------------------------------- error metrics


def test_l2_error():
    assert l2_error([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0)
    assert l2_error(np.ones(4), np.ones(4)) == 0.0
    with pytest.raises(ValueError):
        l2_error([1.0], [0.0])


@pytest.mark.parametrize("rate", [1.0, 2.3, 4.5])
def test_convergence_rate_two_finest(rate):
    h = np.array([2.0, 1.0, 0.5])
    err = 3.0 * h ** rate
    err[0] *= 10  # the coarsest mesh is ignored
    assert convergence_rate(h, err) == pytest.approx(rate)
