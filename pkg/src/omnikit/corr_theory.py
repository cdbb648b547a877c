"""Closed-form induced correlation and the flat-correlation bounds.

For a row-sum matrix ``alpha`` and inherent correlation matrix R, the
embedding-induced correlation between graphs s1 and s2 is

    r[s1, s2] = 1 - beta' R beta / (2 m^2),
    beta[q]   = alpha[s1, q] - alpha[s2, q].

Rows of alpha sum to m, so sum(beta) = 0; with flat inherent correlation
rho this collapses to r = 1 - (1 - rho) * sum(beta^2) / (2 m^2).  The
module also certifies, numerically, the bounds the closed forms obey:
classical weights attain the maximum flat value 3/4 + rho/4, and two-stage
KKT systems (whose unique solutions have simple closed forms) pin down the
optimizing weights.
"""

from dataclasses import dataclass

import numpy as np

from omnikit import _rng, _womni_param, qp
from omnikit._parallel import parallel_map
from omnikit.errors import ConvergenceError, ValidationError

ROLES = ("inherent", "target", "induced")


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric unit-diagonal correlation matrix with a role tag."""

    values: np.ndarray
    role: str = "inherent"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"correlation matrix must be square, got {v.shape}")
        if np.abs(v - v.T).max(initial=0.0) > 1e-10:
            raise ValidationError("correlation matrix must be symmetric")
        if np.abs(np.diag(v) - 1.0).max(initial=0.0) > 1e-10:
            raise ValidationError("correlation matrix must have unit diagonal")
        if v.min(initial=1.0) < -1 - 1e-10 or v.max(initial=-1.0) > 1 + 1e-10:
            raise ValidationError("correlation entries must lie in [-1, 1]")
        if self.role not in ROLES:
            raise ValidationError(f"role must be one of {ROLES}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[0]


def flat_matrix(m, rho, role="inherent"):
    """rho off the diagonal, 1 on it."""
    v = np.full((m, m), float(rho))
    np.fill_diagonal(v, 1.0)
    return CorrelationMatrix(v, role=role)


def _values(mat):
    return mat.values if isinstance(mat, CorrelationMatrix) else np.asarray(mat, dtype=float)


def beta_vector(alpha, s1, s2):
    """Row-sum differences beta[q] = alpha[s1, q] - alpha[s2, q] (sums to 0)."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha[s1] - alpha[s2]


def induced_correlation(alpha, inherent):
    """Correlation matrix induced in the embedding by a weighting.

    Evaluates the quadratic form 1 - beta' R beta / (2 m^2) for every pair;
    R need not be positive definite.
    """
    alpha = np.asarray(alpha, dtype=float)
    r = _values(inherent)
    m = alpha.shape[0]
    if alpha.shape != (m, m) or r.shape != (m, m):
        raise ValidationError("row-sum and correlation matrices must both be m x m")
    diffs = alpha[:, None, :] - alpha[None, :, :]
    quad = np.einsum("abq,qp,abp->ab", diffs, r, diffs)
    vals = 1.0 - quad / (2.0 * m * m)
    np.fill_diagonal(vals, 1.0)
    vals = 0.5 * (vals + vals.T)
    return CorrelationMatrix(vals, role="induced")


def induced_flat_values(alpha, rho):
    """Off-diagonal induced values under flat inherent correlation rho.

    Batched over leading axes of ``alpha``; returns one value per pair
    (i < j) using the collapsed form 1 - (1-rho) sum(beta^2) / (2 m^2).
    """
    alpha = np.asarray(alpha, dtype=float)
    m = alpha.shape[-1]
    pairs = _womni_param.pair_list(m)
    i_idx = np.array([p[0] for p in pairs])
    j_idx = np.array([p[1] for p in pairs])
    beta = alpha[..., i_idx, :] - alpha[..., j_idx, :]
    ss = (beta**2).sum(axis=-1)
    return 1.0 - (1.0 - rho) * ss / (2.0 * m * m)


def flat_check(induced, tol=1e-6):
    """Is the off-diagonal of a correlation matrix constant within tol?"""
    v = _values(induced)
    m = v.shape[0]
    if m < 2:
        raise ValidationError("need m >= 2")
    off = v[~np.eye(m, dtype=bool)]
    value = float(off.mean())
    max_dev = float(np.abs(off - value).max())
    return {"is_flat": max_dev <= tol, "value": value, "max_dev": max_dev}


def classical_flat_value(m, rho):
    """Flat correlation induced by the classical construction: 3/4 + rho/4."""
    return 0.75 + rho / 4.0


def flat_lower_bound(m, rho):
    """Lower bound for any WOMNI flat correlation (informative for larger m)."""
    if m < 3:
        raise ValidationError("the lower bound needs m >= 3")
    return 0.75 + rho / 4.0 - (1.0 - rho) * (11.0 / (2.0 * m) + 24.0 / (m * m))


def flat_upper_bound(m, rho):
    """Upper bound for WOMNI flat correlation, with a validity flag.

    The derivation uses min_q alpha(q,q) >= (m - 8) / 2, which is vacuous
    unless (m - 8)/2 >= 1; the m=3 construction attaining 2/3 indeed exceeds
    this 'bound' at small m, so values with m < 10 are flagged invalid.
    """
    if m < 3:
        raise ValidationError("the upper bound needs m >= 3")
    value = 0.75 + rho / 4.0 + (1.0 - rho) * (5.0 / m - 16.0 / (m * m))
    return value, m >= 10


def naive_lower_bound(m, rho, alpha_max):
    """Bound using only the largest cumulative self-weight."""
    if alpha_max < (m + 1) / 2 - 1e-12:
        raise ValidationError(
            f"max_q alpha(q,q) is always >= (m+1)/2 = {(m + 1) / 2}; got {alpha_max}"
        )
    return 1.0 - (1.0 - rho) * (2.0 * alpha_max**2 + m - 2.0) / (2.0 * m * m)


def diag_sum_check(alpha, tol=1e-10):
    """WOMNI identity: the diagonal of the row-sum matrix sums to m(m+1)/2."""
    alpha = np.asarray(alpha, dtype=float)
    m = alpha.shape[0]
    return abs(float(np.trace(alpha)) - m * (m + 1) / 2.0) <= tol


def theta_gap_check(m_grid, rho):
    """Tabulate bound deviations from the classical value over a grid of m.

    For each m the lower/upper bounds deviate from 3/4 + rho/4 by
    (1-rho)(11/(2m) + 24/m^2) and (1-rho)(5/m - 16/m^2); their sum -- the
    total bound gap -- equals (1-rho)(21/(2m) + 8/m^2) identically, so
    m * gap stays within [(1-rho) 10.5, (1-rho) 11.3] on m >= 10 and the
    deviation is Theta(1/m).
    """
    rows = []
    for m in m_grid:
        m = int(m)
        lo = flat_lower_bound(m, rho)
        up, valid = flat_upper_bound(m, rho)
        gap = up - lo
        identity = (1.0 - rho) * (21.0 / (2.0 * m) + 8.0 / (m * m))
        rows.append(
            {
                "m": m,
                "lower": lo,
                "upper": up,
                "upper_valid": valid,
                "gap": gap,
                "gap_times_m": gap * m,
                "identity_residual": abs(gap - identity),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# two-stage KKT systems and their closed-form solutions


@dataclass(frozen=True)
class KKTSystem:
    """Equality-constrained quadratic program in matrix form."""

    quad: np.ndarray
    linear: np.ndarray
    constraints: np.ndarray
    rhs: np.ndarray


def kkt_stage1_system(m, a_diag):
    """Stage-1 program over off-diagonal weights with fixed self-weights.

    Variables are the m(m-1) off-diagonal tensor entries c^{(i)}_{i, j}
    grouped row by row; each row's entries must sum to a_i - 1.
    """
    a_diag = np.asarray(a_diag, dtype=float).ravel()
    if a_diag.size != m:
        raise ValidationError(f"need {m} self-weights, got {a_diag.size}")
    block = 2.0 * (m - 4.0) * np.ones((m - 1, m - 1)) + 2.0 * m * np.eye(m - 1)
    quad = np.kron(np.eye(m), block)
    linear = 4.0 * (m - 2.0) * np.ones(m * (m - 1))
    constraints = np.kron(np.eye(m), np.ones((1, m - 1)))
    rhs = a_diag - 1.0
    return KKTSystem(quad=quad, linear=linear, constraints=constraints, rhs=rhs)


def kkt_stage1_closed_form(m, a_diag):
    """Unique stage-1 minimizer: each row spreads (a_i - 1) uniformly."""
    a_diag = np.asarray(a_diag, dtype=float).ravel()
    return np.kron(a_diag - 1.0, np.ones(m - 1)) / (m - 1.0)


def kkt_stage2_system(m):
    """Stage-2 program over the self-weights, constrained to sum m(m+1)/2."""
    quad = 2.0 * ((m * m - 2.0 * m + 2.0) * np.eye(m) - np.ones((m, m)))
    linear = 2.0 * (m - 1.0) * np.ones(m)
    constraints = np.ones((1, m))
    rhs = np.array([m * (m + 1) / 2.0])
    return KKTSystem(quad=quad, linear=linear, constraints=constraints, rhs=rhs)


def kkt_stage2_closed_form(m):
    """Unique stage-2 minimizer: all self-weights equal (m + 1) / 2."""
    return np.full(m, (m + 1) / 2.0)


def solve_kkt_system(system, use_ipm=False):
    """Solve a KKTSystem with the QP module (direct KKT or interior point)."""
    if use_ipm:
        result = qp.solve(
            qp.QPInstance(
                p=system.quad,
                q=system.linear,
                a_eq=system.constraints,
                b_eq=system.rhs,
            )
        )
        return result.x
    x, _ = qp.solve_equality_kkt(system.quad, system.linear, system.constraints, system.rhs)
    return x


# ---------------------------------------------------------------------------
# randomized certification of the flat-correlation maximum


def random_womni_alphas(m, count, seed, eps_dom=1e-6):
    """Batch of random feasible WOMNI row-sum matrices (dominance-safe)."""
    key = _rng.stream_key(seed, "womni-alpha")
    nf = _womni_param.n_free(m)
    counters = (np.arange(count, dtype=np.uint64)[:, None] << np.uint64(16)) | np.arange(
        nf, dtype=np.uint64
    )[None, :]
    u = _rng.counter_uniforms(key, counters)
    u = _womni_param.shrink_to_classical(u, m, eps_dom)
    return _womni_param.alpha_from_u(u, m)


def _flatten_candidates(u, m, rho):
    """One Gauss-Newton step moving candidates toward flat induced values."""
    pairs = _womni_param.pair_list(m)
    npairs = len(pairs)
    nf = _womni_param.n_free(m)
    alpha = _womni_param.alpha_from_u(u, m)
    i_idx = np.array([p[0] for p in pairs])
    j_idx = np.array([p[1] for p in pairs])
    beta = alpha[..., i_idx, :] - alpha[..., j_idx, :]  # (B, P, m)

    # d beta / d u_c for basis direction c, constant in u
    basis = np.zeros((nf, m, m))
    for c, (i, j) in enumerate(pairs):
        basis[c, i, j] = 1.0
        basis[c, j, i] = -1.0
        basis[c, i, i] = -1.0
        basis[c, j, j] = 1.0
    dbeta = basis[:, i_idx, :] - basis[:, j_idx, :]  # (C, P, m)

    scale = (1.0 - rho) / (m * m)
    jac = -scale * np.einsum("bpq,cpq->bpc", beta, dbeta)
    vals = 1.0 - (1.0 - rho) * (beta**2).sum(axis=-1) / (2.0 * m * m)
    resid = vals - vals.mean(axis=-1, keepdims=True)
    jac_centered = jac - jac.mean(axis=-2, keepdims=True)
    step = -np.linalg.pinv(jac_centered) @ resid[..., None]
    return np.clip(u + step[..., 0], 0.0, 1.0), npairs


def random_search_flat_max(m, rho, trials=100_000, seed=0, flat_tol=1e-3, chunk=20_000):
    """Search random WOMNI weightings for large flat induced correlation.

    Samples feasible candidates, nudges each toward flatness with one
    Gauss-Newton step, keeps those whose induced values are flat within
    ``flat_tol``, and returns the best flat value found with its weights.
    Chunks run in parallel with chunk-indexed substreams, so results do not
    depend on the worker count.
    """
    if m not in (3, 4, 5):
        raise ValidationError("search supports m in {3, 4, 5}")
    if trials < 1:
        raise ValidationError("need at least one trial")

    starts = list(range(0, trials, chunk))

    def run_chunk(start):
        count = min(chunk, trials - start)
        key_seed = (seed, start)
        alpha = random_womni_alphas(m, count, _rng.stream_key(*key_seed), eps_dom=1e-9)
        u = _womni_param.u_from_alpha(alpha)
        u, _ = _flatten_candidates(u, m, rho)
        alpha = _womni_param.alpha_from_u(u, m)
        feasible = _womni_param.dominance_margins(alpha).min(axis=-1) > 0
        vals = induced_flat_values(alpha, rho)
        dev = np.abs(vals - vals.mean(axis=-1, keepdims=True)).max(axis=-1)
        flat = feasible & (dev <= flat_tol)
        if not flat.any():
            return 0, None, None, None
        means = vals.mean(axis=-1)
        worst = float(means[flat].min())
        means = means.copy()
        means[~flat] = -np.inf
        best = int(np.argmax(means))
        return int(flat.sum()), float(means[best]), alpha[best], worst

    results = parallel_map(run_chunk, starts)
    found = sum(r[0] for r in results)
    if found == 0:
        raise ConvergenceError(
            f"no flat configuration found in {trials} trials (tol {flat_tol})"
        )
    _, best_r, best_alpha, _ = max(results, key=lambda r: -np.inf if r[1] is None else r[1])
    worst_r = min(r[3] for r in results if r[3] is not None)
    return {"best_r": best_r, "best_alpha": best_alpha, "flat_found": found, "worst_r": worst_r}
