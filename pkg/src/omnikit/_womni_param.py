"""Free coordinates for WOMNI row-sum matrices.

A WOMNI row-sum matrix is pinned down by its strict upper triangle: with
``u[(i, j)] = alpha[i, j]`` for i < j, the pair-sum constraint forces
``alpha[j, i] = 1 - u`` and the row-sum constraint fills the diagonal.
The map u -> alpha is affine and satisfies those equalities exactly, which
keeps optimizer iterates feasible to machine precision.  Vectorized
matrices use column-major (Fortran) order throughout so Kronecker identities
of the form vec(V A R) = (R' kron V) vec(A) hold.
"""

import numpy as np
import scipy.sparse as sp


def pair_list(m):
    """Ordered strict-upper-triangle pairs (i, j), i < j."""
    return [(i, j) for i in range(m) for j in range(i + 1, m)]


def n_free(m):
    return m * (m - 1) // 2


def alpha_from_u(u, m):
    """Row-sum matrices from free coordinates; broadcasts over leading axes."""
    u = np.asarray(u, dtype=float)
    pairs = pair_list(m)
    iu = np.array([p[0] for p in pairs])
    ju = np.array([p[1] for p in pairs])
    alpha = np.zeros(u.shape[:-1] + (m, m))
    alpha[..., iu, ju] = u
    alpha[..., ju, iu] = 1.0 - u
    off_rowsum = alpha.sum(axis=-1)
    idx = np.arange(m)
    alpha[..., idx, idx] = m - off_rowsum
    return alpha


def u_from_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    m = alpha.shape[-1]
    pairs = pair_list(m)
    iu = np.array([p[0] for p in pairs])
    ju = np.array([p[1] for p in pairs])
    return alpha[..., iu, ju]


def _vecf(row, col, m):
    return row + m * col


def affine_basis(m):
    """(a0, T) with vec_F(alpha(u)) = a0 + T u; T is sparse (m^2, n_free)."""
    pairs = pair_list(m)
    nf = len(pairs)
    a0 = alpha_from_u(np.zeros(nf), m).flatten(order="F")
    rows, cols, vals = [], [], []
    for p, (i, j) in enumerate(pairs):
        rows += [_vecf(i, j, m), _vecf(j, i, m), _vecf(i, i, m), _vecf(j, j, m)]
        cols += [p, p, p, p]
        vals += [1.0, -1.0, -1.0, 1.0]
    t = sp.csr_matrix((vals, (rows, cols)), shape=(m * m, nf))
    return a0, t


def dominance_selector(m):
    """Sparse S with (S vec_F(alpha))[(k, j)] = alpha[k, k] - alpha[k, j], j != k."""
    rows, cols, vals = [], [], []
    r = 0
    for k in range(m):
        for j in range(m):
            if j == k:
                continue
            rows += [r, r]
            cols += [_vecf(k, k, m), _vecf(k, j, m)]
            vals += [1.0, -1.0]
            r += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(r, m * m))


def dominance_margins(alpha):
    """Margins alpha[k,k] - alpha[k,j] (j != k) as a flat array."""
    alpha = np.asarray(alpha, dtype=float)
    m = alpha.shape[-1]
    diag = alpha[..., np.arange(m), np.arange(m)]
    marg = diag[..., :, None] - alpha
    mask = ~np.eye(m, dtype=bool)
    return marg[..., mask]


def inequality_system(m, eps_dom):
    """(G, h) over u encoding bounds and dominance: G u <= h.

    Bounds 0 <= u <= 1 carry both off-diagonal nonnegativity constraints of
    each pair; dominance rows enforce alpha[k,k] - alpha[k,j] >= eps_dom.
    Diagonal nonnegativity is implied by dominance and is not duplicated.
    """
    nf = n_free(m)
    a0, t = affine_basis(m)
    s_dom = dominance_selector(m)
    eye = sp.eye(nf, format="csr")
    g = sp.vstack([-eye, eye, -(s_dom @ t)]).tocsr()
    h = np.concatenate([np.zeros(nf), np.ones(nf), np.asarray(s_dom @ a0) - eps_dom])
    return g, h


def shrink_to_classical(u, m, eps_dom, max_halvings=60):
    """Pull coordinates toward the classical point 1/2 until dominance holds.

    Works on batches; rows that cannot be made feasible are returned as the
    classical point itself (always strictly feasible for eps below m/2).
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    out = u.copy()
    center = 0.5
    pending = np.arange(out.shape[0])
    for _ in range(max_halvings):
        if pending.size == 0:
            break
        alpha = alpha_from_u(out[pending], m)
        margins = dominance_margins(alpha).min(axis=-1)
        bad = margins < eps_dom
        if not bad.any():
            break
        sel = pending[bad]
        out[sel] = center + 0.5 * (out[sel] - center)
        pending = sel
    else:
        out[pending] = center
    return out
