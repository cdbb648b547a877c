import math

import numpy as np
import pytest

from omnikit import corr_theory as ct
from omnikit import omni, qp
from omnikit._womni_param import dominance_margins
from omnikit.errors import ConvergenceError, ValidationError
from tests.test_omni import random_womni

RHO_GRID = (0.0, 0.25, 0.5, 1.0)
M4_FLAT_BASE = (4 * math.sqrt(17) - 5) / 16
M4_FLAT_SLOPE = (21 - 4 * math.sqrt(17)) / 16


def offdiag(mat):
    mat = np.asarray(mat)
    return mat[~np.eye(mat.shape[0], dtype=bool)]


@pytest.mark.parametrize("m", range(2, 11))
@pytest.mark.parametrize("rho", RHO_GRID)
def test_classical_closed_form(m, rho):
    alpha = omni.alpha_matrix(omni.classical_omni(m))
    induced = ct.induced_correlation(alpha, ct.flat_matrix(m, rho))
    assert np.abs(offdiag(induced.values) - (0.75 + rho / 4)).max() <= 1e-12


@pytest.mark.parametrize("name", ["M3minus", "M3plus"])
@pytest.mark.parametrize("rho", RHO_GRID)
def test_m3_closed_form(name, rho):
    alpha = omni.alpha_matrix(omni.special(name, 3))
    induced = ct.induced_correlation(alpha, ct.flat_matrix(3, rho))
    assert np.abs(offdiag(induced.values) - (2 / 3 + rho / 3)).max() <= 1e-12


@pytest.mark.parametrize("rho", RHO_GRID)
def test_m4plus_closed_form(rho):
    alpha = omni.alpha_matrix(omni.special("M4plus", 4))
    induced = ct.induced_correlation(alpha, ct.flat_matrix(4, rho))
    expected = M4_FLAT_BASE + M4_FLAT_SLOPE * rho
    assert np.abs(offdiag(induced.values) - expected).max() <= 1e-12


def test_flat_check_cases():
    classical5 = omni.alpha_matrix(omni.classical_omni(5))
    res = ct.flat_check(ct.induced_correlation(classical5, np.eye(5)).values, tol=1e-9)
    assert res["is_flat"] and abs(res["value"] - 0.75) < 1e-12

    published_m4 = np.array(
        [
            [2.4259, 0, 1, 0.5741],
            [1, 2.4259, 0, 0.5741],
            [0, 1, 2.4259, 0.5741],
            [0.4259, 0.4259, 0.4259, 2.7222],
        ]
    )
    res = ct.flat_check(ct.induced_correlation(published_m4, np.eye(4)).values, tol=1e-3)
    assert not res["is_flat"]
    assert 3e-3 < res["max_dev"] < 4e-3  # the 0.7213 / 0.7148 split

    # any m=2 weighting is trivially flat
    res = ct.flat_check(ct.induced_correlation(np.array([[1.7, 0.3], [0.7, 1.3]]), np.eye(2)).values)
    assert res["is_flat"]


def test_flat_lower_bound_values():
    assert round(ct.flat_lower_bound(30, 0.0), 2) == 0.54
    assert ct.flat_lower_bound(10, 1.0) == 1.0
    # formula value at m=100 (the bound is far below 3/4 at this scale)
    assert round(ct.flat_lower_bound(100, 0.0), 4) == 0.6926
    with pytest.raises(ValidationError):
        ct.flat_lower_bound(2, 0.0)


def test_flat_upper_bound_values_and_validity():
    value, valid = ct.flat_upper_bound(30, 0.0)
    assert round(value, 4) == 0.8989 and valid
    value, valid = ct.flat_upper_bound(10, 1.0)
    assert value == 1.0
    value3, valid3 = ct.flat_upper_bound(3, 0.0)
    assert round(value3, 4) == 0.6389
    assert not valid3
    # the m=3 construction attains 2/3, above the formula value: the flag is
    # doing real work
    attained = offdiag(
        ct.induced_correlation(omni.alpha_matrix(omni.special("M3minus", 3)), np.eye(3)).values
    )[0]
    assert attained > value3


def test_naive_lower_bound():
    assert ct.naive_lower_bound(3, 0.0, 2.0) == pytest.approx(0.5, abs=1e-15)
    assert ct.naive_lower_bound(7, 1.0, 4.0) == 1.0
    big = 10**6
    assert abs(ct.naive_lower_bound(big, 0.0, (big + 1) / 2) - 0.75) <= 1e-5
    with pytest.raises(ValidationError, match="always >="):
        ct.naive_lower_bound(5, 0.0, 2.0)


def test_diag_sum_identity():
    assert ct.diag_sum_check(omni.alpha_matrix(omni.classical_omni(3)))
    m4 = omni.alpha_matrix(omni.special("M4plus", 4))
    assert np.trace(m4) == pytest.approx(10.0, abs=1e-12)
    assert ct.diag_sum_check(m4)
    for seed in range(10):
        w = random_womni(3 + seed % 4, 50 + seed)
        assert ct.diag_sum_check(omni.alpha_matrix(w))
    assert not ct.diag_sum_check(np.eye(3))


@pytest.mark.parametrize("m", [3, 4, 5, 8])
def test_kkt_closed_forms_vs_qp(m):
    a_diag = 1.0 + 1.5 * np.abs(np.sin(np.arange(m) + 1))
    s1 = ct.kkt_stage1_system(m, a_diag)
    numeric = qp.solve(
        qp.QPInstance(p=s1.quad, q=s1.linear, a_eq=s1.constraints, b_eq=s1.rhs)
    ).x
    assert np.abs(numeric - ct.kkt_stage1_closed_form(m, a_diag)).max() <= 1e-8
    s2 = ct.kkt_stage2_system(m)
    numeric2 = ct.solve_kkt_system(s2)
    assert np.abs(numeric2 - ct.kkt_stage2_closed_form(m)).max() <= 1e-8
    assert np.abs(ct.kkt_stage2_closed_form(m) - (m + 1) / 2).max() == 0


def test_stage1_closed_form_edges():
    # rows with a_i = 1 put no weight off the diagonal
    c = ct.kkt_stage1_closed_form(4, [1.0, 2.0, 1.0, 3.0])
    np.testing.assert_allclose(c[:3], 0.0)
    np.testing.assert_allclose(c[3:6], 1.0 / 3.0)


def test_induced_with_all_ones_inherent():
    for seed in range(5):
        alpha = omni.alpha_matrix(random_womni(4, seed))
        induced = ct.induced_correlation(alpha, np.ones((4, 4)))
        np.testing.assert_allclose(induced.values, np.ones((4, 4)), atol=1e-12)


def test_induced_permutation_invariance():
    rng = np.random.default_rng(3)
    alpha = omni.alpha_matrix(random_womni(5, 17))
    rvals = 0.3 * np.ones((5, 5)) + 0.7 * np.eye(5)
    rvals[0, 1] = rvals[1, 0] = 0.6
    induced = ct.induced_correlation(alpha, rvals).values
    perm = rng.permutation(5)
    p = np.eye(5)[perm]
    induced_perm = ct.induced_correlation(p @ alpha @ p.T, p @ rvals @ p.T).values
    np.testing.assert_allclose(induced_perm, p @ induced @ p.T, atol=1e-12)


def test_induced_at_least_rho():
    # flat inherent correlation is a floor for the induced one
    count = 0
    for seed in range(200):
        m = 3 + seed % 4
        alpha = omni.alpha_matrix(random_womni(m, 900 + seed))
        for rho in (0.0, 0.3, 0.8):
            vals = offdiag(ct.induced_correlation(alpha, ct.flat_matrix(m, rho)).values)
            assert vals.min() >= rho - 1e-12
            count += vals.size
    assert count > 10_000


def test_flat_form_equals_general_form():
    # the collapsed (1 - (1-rho) sum beta^2 / 2m^2) form agrees with the
    # general quadratic form evaluated at a flat inherent matrix
    for seed in range(20):
        m = 3 + seed % 4
        alpha = omni.alpha_matrix(random_womni(m, 300 + seed))
        iu = np.triu_indices(m, k=1)
        for rho in (0.0, 0.4, 0.9):
            general = ct.induced_correlation(alpha, ct.flat_matrix(m, rho)).values[iu]
            collapsed = ct.induced_flat_values(alpha, rho)
            assert np.abs(general - collapsed).max() <= 1e-14


def test_beta_vector_sums_to_zero():
    alpha = omni.alpha_matrix(random_womni(5, 77))
    for s1 in range(5):
        for s2 in range(5):
            assert abs(ct.beta_vector(alpha, s1, s2).sum()) <= 1e-12


def test_theta_gap_table():
    rows = ct.theta_gap_check([10, 30, 100, 1000], 0.0)
    for row in rows:
        assert row["identity_residual"] <= 1e-12
    gaps = [row["gap_times_m"] for row in rows]
    assert all(a >= b for a, b in zip(gaps, gaps[1:]))
    assert max(gaps) <= 11.3
    assert min(gaps) >= 10.5
    rows_rho1 = ct.theta_gap_check([10, 50], 1.0)
    assert all(row["gap"] == 0.0 for row in rows_rho1)


def test_random_search_small_budget():
    result = ct.random_search_flat_max(3, 0.0, trials=5000, seed=1)
    assert result["flat_found"] > 0
    assert result["best_r"] <= 0.75 + 1e-6
    assert result["best_r"] >= 0.70
    margins = dominance_margins(result["best_alpha"])
    assert margins.min() > 0


def test_random_search_rho_one_all_flat():
    result = ct.random_search_flat_max(3, 1.0, trials=2000, seed=2)
    assert result["best_r"] == pytest.approx(1.0, abs=1e-12)


def test_random_search_rejects_bad_m():
    with pytest.raises(ValidationError):
        ct.random_search_flat_max(6, 0.0, trials=10)


def test_random_search_impossible_tolerance():
    with pytest.raises(ConvergenceError, match="no flat configuration"):
        ct.random_search_flat_max(3, 0.0, trials=50, flat_tol=1e-18, seed=3)


def test_correlation_matrix_validation():
    with pytest.raises(ValidationError):
        ct.CorrelationMatrix(np.array([[1.0, 0.2], [0.3, 1.0]]))
    with pytest.raises(ValidationError):
        ct.CorrelationMatrix(np.array([[0.9, 0.2], [0.2, 1.0]]))
    with pytest.raises(ValidationError):
        ct.CorrelationMatrix(np.eye(2), role="bogus")
    mat = ct.flat_matrix(3, 0.5, role="target")
    assert mat.m == 3 and mat.role == "target"
