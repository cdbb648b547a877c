"""corr2Omni: find WOMNI weights inducing a target correlation structure.

The induced correlation satisfies R_ind = J - D2 / (2 m^2), where D2 holds
squared Euclidean distances between rows of the transformed configuration
A~ = alpha L (L the Cholesky factor of the inherent correlation).  Driving
the induced matrix toward a target therefore becomes a constrained
multidimensional-scaling problem with dissimilarities

    delta[i, j] = sqrt(2 m^2 (1 - target[i, j])),

solved by stress majorization: each sweep minimizes the quadratic majorizer
of the stress over the WOMNI polytope with one QP solve.  The weighting
constraints are affine in the free coordinates of `_womni_param`, so
row-sum and pair-sum equalities hold exactly at every iterate and stress is
monotonically nonincreasing up to QP tolerance.
"""

from dataclasses import dataclass

import numpy as np

from omnikit import _rng, _womni_param, corr_theory, omni, qp
from omnikit._parallel import parallel_map
from omnikit.errors import InfeasibleError, ValidationError

RIDGE_SCHEDULE = (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2)
DEFAULT_MAX_ITER = 5000
STALL_WINDOW = 25


def cholesky_regularized(corr, ridge_schedule=RIDGE_SCHEDULE):
    """Cholesky factor of a correlation matrix, ridging only if needed.

    Returns (L, eps) where L L' = (1 - eps) R + eps I for the smallest eps
    in the schedule that factors; raises when the schedule is exhausted.
    """
    r = corr.values if isinstance(corr, corr_theory.CorrelationMatrix) else np.asarray(corr, float)
    for eps in ridge_schedule:
        shrunk = (1.0 - eps) * r + eps * np.eye(r.shape[0])
        try:
            return np.linalg.cholesky(shrunk), float(eps)
        except np.linalg.LinAlgError:
            continue
    raise ValidationError("correlation matrix is not positive definite for any ridge value")


@dataclass(frozen=True)
class StressProblem:
    """Dissimilarity data for one corr2Omni run."""

    delta: np.ndarray  # m x m target dissimilarities, zero diagonal
    weights: np.ndarray  # m x m symmetric nonnegative stress weights
    chol: np.ndarray  # lower-triangular L with L L' = regularized inherent R
    ridge: float
    m: int


@dataclass
class MajorizationState:
    config: np.ndarray  # current A~ = alpha L
    iteration: int
    stress: float
    u: np.ndarray = None  # free WOMNI coordinates of the configuration


def build_stress_problem(inherent, target, weights=None, ridge_schedule=RIDGE_SCHEDULE):
    """Assemble dissimilarities, stress weights and the Cholesky factor."""
    r_inh = _corr_values(inherent)
    r_tgt = _corr_values(target)
    m = r_inh.shape[0]
    if r_tgt.shape != (m, m):
        raise ValidationError("inherent and target correlation matrices must agree in size")
    gap = 2.0 * m * m * (1.0 - r_tgt)
    delta = np.sqrt(np.maximum(gap, 0.0))
    np.fill_diagonal(delta, 0.0)
    if weights is None:
        weights = np.ones((m, m)) - np.eye(m)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (m, m) or (weights < 0).any():
            raise ValidationError("stress weights must be a nonnegative m x m matrix")
        weights = 0.5 * (weights + weights.T)
        weights = weights * (1 - np.eye(m))
    chol, ridge = cholesky_regularized(r_inh, ridge_schedule)
    return StressProblem(delta=delta, weights=weights, chol=chol, ridge=ridge, m=m)


def _corr_values(x):
    if isinstance(x, corr_theory.CorrelationMatrix):
        return x.values
    return np.asarray(x, dtype=float)


def _distances(config):
    diff = config[:, None, :] - config[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def stress(config, problem):
    """sigma(A~) = sum_{i<j} w_ij (delta_ij - d_ij(A~))^2."""
    d = _distances(config)
    iu = np.triu_indices(problem.m, k=1)
    return float((problem.weights[iu] * (problem.delta[iu] - d[iu]) ** 2).sum())


def b_matrix(config, problem):
    """Majorization matrix B(A~): off-diagonal -w delta / d, zero row sums."""
    d = _distances(config)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = -problem.weights * problem.delta / d
    off[~np.isfinite(off)] = 0.0
    np.fill_diagonal(off, 0.0)
    b = off.copy()
    np.fill_diagonal(b, -off.sum(axis=1))
    return b


def weight_laplacian(weights):
    v = -np.asarray(weights, dtype=float).copy()
    np.fill_diagonal(v, 0.0)
    np.fill_diagonal(v, -v.sum(axis=1))
    return v


class MajorizerWorkspace:
    """Constant pieces of the per-iteration QP, precomputed once per run."""

    def __init__(self, problem, eps_dom):
        m = problem.m
        self.m = m
        self.eps_dom = eps_dom
        self.a0, self.basis = _womni_param.affine_basis(m)
        dense_basis = self.basis.toarray()
        v = weight_laplacian(problem.weights)
        rr = problem.chol @ problem.chol.T
        kron = np.kron(rr, v)  # vec_F(V A R') = (R' kron V) vec_F(A)
        tk = dense_basis.T @ kron  # (n_free, m^2)
        self.quad = 2.0 * (tk @ dense_basis)
        self.quad = 0.5 * (self.quad + self.quad.T)
        self.lin_base = 2.0 * (tk @ self.a0)
        self.g, self.h = _womni_param.inequality_system(m, eps_dom)
        self.chol = problem.chol
        # at m = 2 stress is constant in the free coordinate (any
        # off-diagonal weighting induces the same correlation); a small
        # penalty toward the classical point keeps the QP well posed and
        # must sit above the solver tolerance to actually pin the answer
        if m < 3:
            self.quad += 1e-6 * np.eye(self.quad.shape[0])
            self.lin_base = self.lin_base - 0.5e-6

    def config_from_u(self, u):
        alpha = _womni_param.alpha_from_u(u, self.m)
        return alpha @ self.chol


def majorize_step(state, problem, workspace, tol=1e-9):
    """One constrained SMACOF sweep: minimize the majorizer by a QP solve."""
    m = problem.m
    bmat = b_matrix(state.config, problem)
    target = bmat @ state.config @ problem.chol.T
    lin = workspace.lin_base - 2.0 * (workspace.basis.T @ target.flatten(order="F"))
    inst = qp.QPInstance(
        p=workspace.quad,
        q=lin,
        g=workspace.g,
        h=workspace.h,
        assume_psd=True,
    )
    try:
        result = qp.solve(inst, tol=tol)
    except InfeasibleError as exc:
        raise InfeasibleError(
            f"majorizer QP infeasible at iteration {state.iteration + 1} "
            f"(eps_dom={workspace.eps_dom:.3g}): {exc}",
            residual=exc.residual,
        ) from exc
    u = result.x
    config = workspace.config_from_u(u)
    return MajorizationState(
        config=config, iteration=state.iteration + 1, stress=stress(config, problem), u=u
    )


@dataclass
class Corr2OmniResult:
    alpha: np.ndarray
    weights: omni.OmniWeights
    induced: corr_theory.CorrelationMatrix
    stress: float
    stress_log: list
    violation_log: list
    ridge: float
    eps_dom: float
    start: str
    iterations: int
    restarts_run: int = 1


def _classical_u(m):
    return np.full(_womni_param.n_free(m), 0.5)


def _perturbed_u(m, seed, eps_dom):
    """Dirichlet-style random feasible start, pulled toward classical as needed."""
    key = _rng.stream_key(seed, "corr2omni-start")
    nf = _womni_param.n_free(m)
    u = _rng.counter_uniforms(key, np.arange(nf, dtype=np.uint64))
    return _womni_param.shrink_to_classical(u, m, eps_dom)[0]


def _run_single(u0, problem, workspace, max_iter, eps_stress, qp_tol):
    m = problem.m
    config0 = workspace.config_from_u(u0)
    state = MajorizationState(
        config=config0, iteration=0, stress=stress(config0, problem), u=u0
    )

    def violation(st):
        return constraint_violation(
            _womni_param.alpha_from_u(st.u, m), m, workspace.eps_dom
        )

    log = [state.stress]
    violations = [violation(state)]
    stall = 0
    for _ in range(max_iter):
        state = majorize_step(state, problem, workspace, tol=qp_tol)
        log.append(state.stress)
        violations.append(violation(state))
        drop = log[-2] - log[-1]
        if drop < max(eps_stress, 1e-14 * max(1.0, log[-1])):
            stall += 1
            if stall >= STALL_WINDOW:
                break
        else:
            stall = 0
    return state, log, violations


def corr2omni(
    inherent,
    target,
    weights=None,
    max_iter=DEFAULT_MAX_ITER,
    eps_stress=0.0,
    eps_dom=None,
    ridge_schedule=RIDGE_SCHEDULE,
    init="classical",
    restarts=4,
    seed=0,
    qp_tol=1e-9,
):
    """Estimate WOMNI weights whose induced correlation approaches a target.

    Runs stress majorization from a classical start plus ``restarts``
    randomized feasible starts and keeps the lowest final stress.  The
    stress surface is not convex, so restarts matter: the classical point is
    a permutation-symmetric stationary point and symmetric targets leave it
    exactly fixed.

    Returns weights as both the row-sum matrix and the full tensor, with
    the induced correlation, final stress trace and the ridge value used
    for a non-positive-definite inherent matrix.
    """
    r_inh = _corr_values(inherent)
    m = r_inh.shape[0]
    if m < 2:
        raise ValidationError("corr2omni needs at least two graphs")
    if eps_dom is None:
        eps_dom = 1e-3 * m
    problem = build_stress_problem(inherent, target, weights, ridge_schedule)
    workspace = MajorizerWorkspace(problem, eps_dom)

    starts = []
    if isinstance(init, str):
        if init == "classical":
            starts.append(("classical", _classical_u(m)))
        elif init != "none":
            raise ValidationError(f"init must be 'classical', 'none' or a row-sum matrix, got {init!r}")
    elif init is not None:
        u0 = _womni_param.u_from_alpha(np.asarray(init, dtype=float))
        starts.append(("given", u0))
    for k in range(restarts):
        starts.append((f"random-{k + 1}", _perturbed_u(m, _rng.stream_key(seed, k), eps_dom)))
    if not starts:
        raise ValidationError("no starts configured")

    def run(item):
        name, u0 = item
        state, log, violations = _run_single(u0, problem, workspace, max_iter, eps_stress, qp_tol)
        return name, state, log, violations

    outcomes = parallel_map(run, starts)
    name, state, log, violations = min(outcomes, key=lambda o: o[1].stress)

    # the free coordinates realize alpha = config L^-1 exactly, so the
    # reported weights carry no factor round-trip noise
    alpha = _womni_param.alpha_from_u(np.clip(state.u, 0.0, 1.0), m)
    violation = constraint_violation(alpha, m, eps_dom)
    if violation > 1e-6:
        raise ValidationError(
            f"optimizer returned weights violating WOMNI constraints by {violation:.3g}"
        )
    weights_tensor = omni.womni_from_alpha(alpha, tol=1e-6)
    induced = corr_theory.induced_correlation(alpha, r_inh)
    return Corr2OmniResult(
        alpha=alpha,
        weights=weights_tensor,
        induced=induced,
        stress=state.stress,
        stress_log=log,
        violation_log=violations,
        ridge=problem.ridge,
        eps_dom=eps_dom,
        start=name,
        iterations=state.iteration,
        restarts_run=len(starts),
    )


def constraint_violation(alpha, m, eps_dom):
    """Largest violation of the optimizer's WOMNI constraint set.

    Covers row sums = m, pair sums = 1, entrywise nonnegativity and the
    dominance margin eps_dom; exact at feasible points, ~QP tolerance at
    solver output.
    """
    alpha = np.asarray(alpha, dtype=float)
    rows = np.abs(alpha.sum(axis=1) - m).max()
    iu = np.triu_indices(m, k=1)
    pair = np.abs(alpha[iu] + alpha.T[iu] - 1.0).max(initial=0.0)
    neg = max(0.0, -alpha.min())
    dom = 0.0
    if m > 1:
        dom = max(0.0, eps_dom - float(_womni_param.dominance_margins(alpha).min()))
    return float(max(rows, pair, neg, dom))
