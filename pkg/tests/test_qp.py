import numpy as np
import pytest
import scipy.sparse as sp

from omnikit import corr_theory, qp
from omnikit.errors import InfeasibleError, ValidationError


def stage1_instance(m, a_diag, with_bounds=False):
    system = corr_theory.kkt_stage1_system(m, a_diag)
    g = h = None
    if with_bounds:
        nvar = m * (m - 1)
        g = np.vstack([-np.eye(nvar), np.eye(nvar)])
        h = np.concatenate([np.zeros(nvar), np.ones(nvar)])
    return qp.QPInstance(
        p=system.quad,
        q=system.linear,
        a_eq=system.constraints,
        b_eq=system.rhs,
        g=g,
        h=h,
    )


def test_scalar_bound_active():
    res = qp.solve(qp.QPInstance(p=[[1.0]], q=[0.0], g=[[-1.0]], h=[-1.0]))
    assert res.optimal
    np.testing.assert_allclose(res.x, [1.0], atol=1e-8)
    assert res.duals_ineq[0] >= -1e-9


def test_uniform_by_symmetry():
    n, total = 6, 5.0
    res = qp.solve(qp.QPInstance(p=2 * np.eye(n), q=np.zeros(n), a_eq=np.ones((1, n)), b_eq=[total]))
    np.testing.assert_allclose(res.x, np.full(n, total / n), atol=1e-10)


@pytest.mark.parametrize("m", [3, 4, 5, 8])
def test_stage1_matches_closed_form(m):
    a_diag = np.full(m, 2.5)
    closed = corr_theory.kkt_stage1_closed_form(m, a_diag)
    res = qp.solve(stage1_instance(m, a_diag))
    assert np.abs(res.x - closed).max() <= 1e-8
    # and through the interior-point path with inactive bounds
    res_ipm = qp.solve(stage1_instance(m, a_diag, with_bounds=True))
    assert res_ipm.optimal
    assert np.abs(res_ipm.x - closed).max() <= 1e-8


def test_equality_kkt_stage2():
    system = corr_theory.kkt_stage2_system(5)
    x, lam = qp.solve_equality_kkt(system.quad, system.linear, system.constraints, system.rhs)
    np.testing.assert_allclose(x, np.full(5, 3.0), atol=1e-9)
    assert lam.shape == (1,)


def test_cross_solver_agreement():
    system = corr_theory.kkt_stage2_system(6)
    direct, _ = qp.solve_equality_kkt(system.quad, system.linear, system.constraints, system.rhs)
    inst = qp.QPInstance(
        p=system.quad,
        q=system.linear,
        a_eq=system.constraints,
        b_eq=system.rhs,
        g=-np.eye(6),
        h=np.zeros(6),  # a >= 0, inactive at the optimum
    )
    via_ipm = qp.solve(inst)
    assert np.abs(via_ipm.x - direct).max() <= 1e-9


def test_objective_beats_random_feasible_points():
    rng = np.random.default_rng(0)
    n = 8
    p = rng.standard_normal((n, n))
    p = p @ p.T + np.eye(n)
    q = rng.standard_normal(n)
    g = np.vstack([-np.eye(n), np.eye(n)])
    h = np.concatenate([np.zeros(n), np.ones(n)])
    a = np.ones((1, n))
    b = np.array([n / 3])
    res = qp.solve(qp.QPInstance(p=p, q=q, a_eq=a, b_eq=b, g=g, h=h))

    def objective(x):
        return 0.5 * x @ p @ x + q @ x

    best = objective(res.x)
    for _ in range(100):
        x = rng.dirichlet(np.ones(n)) * (n / 3)  # feasible by construction
        assert objective(x) >= best - 1e-9


def test_duals_and_complementary_slackness():
    n = 5
    rng = np.random.default_rng(1)
    p = np.eye(n)
    q = -rng.random(n) * 2
    g = np.eye(n)
    h = np.full(n, 0.5)
    res = qp.solve(qp.QPInstance(p=p, q=q, g=g, h=h))
    assert (res.duals_ineq >= -1e-9).all()
    slack = h - g @ res.x
    assert np.abs(res.duals_ineq * slack).max() <= 1e-7


def test_scaling_invariance_of_argmin():
    m = 4
    a_diag = np.full(m, 2.5)
    closed = corr_theory.kkt_stage1_closed_form(m, a_diag)
    for c in (1e-3, 1.0, 1e3):
        inst = stage1_instance(m, a_diag, with_bounds=True)
        scaled = qp.QPInstance(
            p=c * inst.p, q=c * inst.q, a_eq=inst.a_eq, b_eq=inst.b_eq, g=inst.g, h=inst.h
        )
        res = qp.solve(scaled)
        assert np.abs(res.x - closed).max() <= 1e-7, c


def test_infeasible_inequalities_raise():
    with pytest.raises(InfeasibleError) as err:
        qp.solve(qp.QPInstance(p=[[1.0]], q=[0.0], g=[[-1.0], [1.0]], h=[-1.0, 0.0]))
    assert err.value.residual >= 0.4


def test_inconsistent_equalities_raise():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    with pytest.raises(InfeasibleError):
        qp.solve(qp.QPInstance(p=np.eye(2), q=np.zeros(2), a_eq=a, b_eq=b))


def test_non_psd_rejected():
    with pytest.raises(ValidationError, match="positive semidefinite"):
        qp.solve(qp.QPInstance(p=-np.eye(2), q=np.zeros(2), g=np.eye(2), h=np.ones(2)))


def test_psd_noise_repaired():
    # analytically PSD rank-1 matrix with a tiny negative numerical eigenvalue
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    p = np.outer(v, v) - 5e-9 * np.eye(2)
    res = qp.solve(qp.QPInstance(p=p, q=np.array([0.0, 0.0]), g=-np.eye(2), h=-np.ones(2)))
    assert res.optimal


def test_asymmetric_p_rejected():
    with pytest.raises(ValidationError, match="symmetric"):
        qp.QPInstance(p=[[1.0, 0.5], [0.0, 1.0]], q=[0.0, 0.0])


def test_sparse_inequalities_match_dense():
    m = 4
    a_diag = np.full(m, 3.0)
    inst_dense = stage1_instance(m, a_diag, with_bounds=True)
    sparse = qp.QPInstance(
        p=inst_dense.p,
        q=inst_dense.q,
        a_eq=inst_dense.a_eq,
        b_eq=inst_dense.b_eq,
        g=sp.csr_matrix(inst_dense.g),
        h=inst_dense.h,
    )
    dense_res = qp.solve(inst_dense)
    sparse_res = qp.solve(sparse)
    np.testing.assert_allclose(sparse_res.x, dense_res.x, atol=1e-9)


def test_unconstrained_solve():
    p = np.diag([2.0, 4.0])
    q = np.array([-2.0, -4.0])
    res = qp.solve(qp.QPInstance(p=p, q=q))
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-12)


def test_singular_kkt_reported():
    with pytest.raises(ValidationError, match="singular"):
        qp.solve_equality_kkt(np.zeros((2, 2)), np.zeros(2), np.zeros((1, 2)), [0.0])
