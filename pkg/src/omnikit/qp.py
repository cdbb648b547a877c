"""Convex quadratic programming for small dense problems.

minimize    (1/2) x' P x + q' x
subject to  A_eq x = b_eq,   G x <= h

Equality-only instances are solved by one factorization of the KKT block
system.  Instances with inequalities use a primal-dual interior-point
method with Mehrotra's predictor-corrector; problem sizes here are tiny
(hundreds of variables), so robustness is preferred over scale.  ``G`` may
be a scipy.sparse matrix, which keeps the normal-matrix assembly cheap for
the structured constraint sets produced by the stress majorizer.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from omnikit.errors import InfeasibleError, ValidationError

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 200
PSD_TOL = 1e-8


@dataclass
class QPInstance:
    """One quadratic program.  Set assume_psd when P was already checked."""

    p: np.ndarray
    q: np.ndarray
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None
    g: object = None  # dense ndarray or scipy.sparse matrix
    h: np.ndarray = None
    assume_psd: bool = False

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float).ravel()
        n = self.q.size
        if self.p.shape != (n, n):
            raise ValidationError(f"P must be {(n, n)}, got {self.p.shape}")
        if np.abs(self.p - self.p.T).max(initial=0.0) > 1e-12 * max(
            1.0, np.abs(self.p).max(initial=0.0)
        ):
            raise ValidationError("P must be symmetric")
        if self.a_eq is not None:
            self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        if self.g is not None and not sp.issparse(self.g):
            self.g = np.atleast_2d(np.asarray(self.g, dtype=float))
        if self.h is not None:
            self.h = np.asarray(self.h, dtype=float).ravel()

    @property
    def n(self):
        return self.q.size


@dataclass
class QPResult:
    x: np.ndarray
    status: str  # optimal | max_iter | infeasible
    duals_eq: np.ndarray = None
    duals_ineq: np.ndarray = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == "optimal"


def _check_psd(p):
    if p.size == 0:
        return p
    w = np.linalg.eigvalsh(p)
    if w[0] < -PSD_TOL:
        raise ValidationError(f"P is not positive semidefinite (lambda_min = {w[0]:.3g})")
    if w[0] < 0:
        # analytically PSD matrices arrive with slightly negative noise
        p = p + 1e-10 * np.eye(p.shape[0])
    return p


def solve_equality_kkt(p, q, a_eq, b_eq):
    """Direct solve of the equality-constrained optimality system.

    Solves [[P, A'], [A, 0]] [x, lam] = [-q, b]; raises on singular systems.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float).ravel()
    a = np.atleast_2d(np.asarray(a_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).ravel()
    n, r = q.size, b.size
    kkt = np.zeros((n + r, n + r))
    kkt[:n, :n] = p
    kkt[:n, n:] = a.T
    kkt[n:, :n] = a
    rhs = np.concatenate([-q, b])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            sol = scipy.linalg.lu_solve(scipy.linalg.lu_factor(kkt), rhs)
    except (np.linalg.LinAlgError, ValueError, scipy.linalg.LinAlgWarning) as exc:
        raise ValidationError(f"singular KKT system: {exc}") from exc
    if not np.isfinite(sol).all():
        raise ValidationError("singular KKT system")
    return sol[:n], sol[n:]


def _max_step(v, dv):
    """Largest alpha in (0, 1] keeping v + alpha dv > 0."""
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, (-v[neg] / dv[neg]).min()))


def _normal_matrix(p, g, w):
    """P + G' diag(w) G, exploiting sparsity of G when available."""
    if sp.issparse(g):
        return p + (g.multiply(w[:, None]).T @ g).toarray()
    return p + (g * w[:, None]).T @ g


def _ipm(p, q, a, b, g, h, tol, max_iter, x0=None):
    """Mehrotra predictor-corrector core.

    Returns (x, y, z, s, status, iterations, worst_residual).
    """
    n = q.size
    r = h.size
    neq = a.shape[0]

    x = np.asarray(x0, dtype=float).copy() if x0 is not None else (
        np.linalg.lstsq(a, b, rcond=None)[0] if neq else np.zeros(n)
    )
    s = np.maximum(h - g @ x, 1.0)
    z = np.ones(r)
    y = np.zeros(neq)

    scale = max(1.0, np.abs(q).max(initial=0.0), np.abs(h).max(initial=0.0), np.abs(b).max(initial=0.0))
    status = "max_iter"
    res = np.inf
    mu = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        r_d = p @ x + q + a.T @ y + g.T @ z
        r_p = a @ x - b
        r_s = g @ x + s - h
        mu = float(s @ z) / r
        res = max(
            np.abs(r_d).max(initial=0.0),
            np.abs(r_p).max(initial=0.0),
            np.abs(r_s).max(initial=0.0),
            mu,
        )
        if res <= tol * scale:
            status = "optimal"
            break

        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            w = z / s
        if not np.isfinite(w).all():
            break
        hmat = _normal_matrix(p, g, w)
        kkt = np.zeros((n + neq, n + neq))
        kkt[:n, :n] = hmat
        if neq:
            kkt[:n, n:] = a.T
            kkt[n:, :n] = a

        lu = None
        for bump in (0.0, 1e-12, 1e-9, 1e-6):
            try:
                reg = kkt if bump == 0.0 else kkt + bump * np.diag(
                    np.concatenate([np.ones(n), -np.ones(neq)])
                )
                factors = scipy.linalg.lu_factor(reg)
                if not np.isfinite(factors[0]).all():
                    raise np.linalg.LinAlgError
                lu = factors
                break
            except (np.linalg.LinAlgError, ValueError):
                continue
        if lu is None:
            break

        def newton(rc):
            rhs_x = -r_d - (g.T @ ((rc + z * r_s) / s))
            sol = scipy.linalg.lu_solve(lu, np.concatenate([rhs_x, -r_p]))
            dx, dy = sol[:n], sol[n:]
            ds = -r_s - g @ dx
            dz = (rc - z * ds) / s
            return dx, dy, ds, dz

        dxa, dya, dsa, dza = newton(-s * z)
        mu_aff = float(
            (s + _max_step(s, dsa) * dsa) @ (z + _max_step(z, dza) * dza)
        ) / r
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0

        dx, dy, ds, dz = newton(-s * z + sigma * mu - dsa * dza)
        alpha_p = 0.99 * _max_step(s, ds)
        alpha_d = 0.99 * _max_step(z, dz)
        x = x + alpha_p * dx
        s = s + alpha_p * ds
        y = y + alpha_d * dy
        z = z + alpha_d * dz

    return x, y, z, s, status, iteration, res


def solve(inst, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, x0=None):
    """Solve a QP instance to KKT residuals below ``tol``.

    Status is "optimal" or "max_iter"; a certified empty feasible set raises
    InfeasibleError with the phase-1 residual attached.
    """
    p = inst.p if inst.assume_psd else _check_psd(inst.p)
    q = inst.q
    n = q.size

    has_eq = inst.a_eq is not None and inst.a_eq.size > 0
    has_ineq = inst.g is not None and inst.h is not None and inst.h.size > 0

    a = inst.a_eq if has_eq else np.zeros((0, n))
    b = inst.b_eq if has_eq else np.zeros(0)

    if has_eq:
        x_ls, *_ = np.linalg.lstsq(a, b, rcond=None)
        eq_resid = np.abs(a @ x_ls - b).max(initial=0.0)
        if eq_resid > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
            raise InfeasibleError("equality constraints are inconsistent", residual=eq_resid)

    if not has_ineq:
        if has_eq:
            x, lam = solve_equality_kkt(p, q, a, b)
            return QPResult(x=x, status="optimal", duals_eq=lam, duals_ineq=np.zeros(0))
        try:
            x = np.linalg.solve(p, -q)
        except np.linalg.LinAlgError:
            x, *_ = np.linalg.lstsq(p, -q, rcond=None)
        return QPResult(x=x, status="optimal", duals_eq=np.zeros(0), duals_ineq=np.zeros(0))

    x, y, z, s, status, iterations, res = _ipm(
        p, q, a, b, inst.g, inst.h, tol, max_iter, x0=x0
    )
    if status != "optimal":
        resid = _phase1_residual(inst)
        if resid > 1e-6:
            raise InfeasibleError(
                f"no feasible point (phase-1 residual {resid:.3g})", residual=resid
            )
    mu = float(s @ z) / inst.h.size
    return QPResult(
        x=x,
        status=status,
        duals_eq=y,
        duals_ineq=z,
        iterations=iterations,
        residuals={"kkt": float(res), "mu": mu},
    )


def _phase1_residual(inst):
    """Smallest uniform relaxation t >= 0 making G x <= h + t solvable."""
    n = inst.n
    g, h = inst.g, inst.h
    r = h.size
    p1 = np.zeros((n + 1, n + 1))
    p1[:n, :n] = 1e-8 * np.eye(n)
    p1[n, n] = 1.0
    q1 = np.zeros(n + 1)
    if sp.issparse(g):
        g1 = sp.hstack([g.tocsr(), sp.csr_matrix(-np.ones((r, 1)))]).tocsr()
    else:
        g1 = np.hstack([g, -np.ones((r, 1))])
    if inst.a_eq is not None and inst.a_eq.size:
        a1 = np.hstack([inst.a_eq, np.zeros((inst.a_eq.shape[0], 1))])
        b1 = inst.b_eq
        x_base = np.linalg.lstsq(inst.a_eq, inst.b_eq, rcond=None)[0]
    else:
        a1 = np.zeros((0, n + 1))
        b1 = np.zeros(0)
        x_base = np.zeros(n)
    x_start = np.concatenate(
        [x_base, [float(np.maximum(g @ x_base - h, 0.0).max(initial=0.0)) + 1.0]]
    )
    x, *_ = _ipm(p1, q1, a1, b1, g1, h, 1e-10, 120, x0=x_start)
    return max(0.0, float(x[n]))
