"""Adjacency spectral embedding and scree-based dimension selection.

The embedding of a symmetric matrix M into d dimensions is U |S|^{1/2},
where (S, U) are the d eigenpairs of largest magnitude -- the singular
values of a symmetric matrix are the eigenvalue magnitudes, so negative
eigenvalues are admitted into the top d by magnitude.  Everything uses
dense LAPACK solvers; at the desk scales targeted here (mn up to a couple
of thousand) no sparse or iterative path is warranted.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from omnikit.errors import ValidationError

SYMMETRY_TOL = 1e-8
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class Embedding:
    """(m*n) x d embedding with per-graph n x d blocks.

    ``eigenvalues`` keeps the signed spectrum of the embedded matrix so the
    signature of negative directions stays available to callers.
    """

    xhat: np.ndarray
    d: int
    n: int
    m: int
    eigenvalues: np.ndarray

    @property
    def singular_values(self):
        return np.abs(self.eigenvalues)


def _top_magnitude_eigs(mat, k):
    """k largest-|eigenvalue| pairs of a symmetric matrix, dense LAPACK only."""
    dim = mat.shape[0]
    if k >= dim or dim <= 64 or 2 * (k + 1) >= dim:
        vals, vecs = np.linalg.eigh(mat)
    else:
        lo_vals, lo_vecs = scipy.linalg.eigh(mat, subset_by_index=[0, k])
        hi_vals, hi_vecs = scipy.linalg.eigh(mat, subset_by_index=[dim - k - 1, dim - 1])
        vals = np.concatenate([lo_vals, hi_vals])
        vecs = np.concatenate([lo_vecs, hi_vecs], axis=1)
    order = np.lexsort((np.arange(len(vals)), -np.sign(vals), -np.abs(vals)))
    return vals[order], vecs[:, order]


def ase(mat, d, n_vertices=None):
    """Adjacency spectral embedding of a symmetric matrix.

    Returns U diag(|lambda|)^{1/2} for the d largest-magnitude eigenpairs.
    Each eigenvector's largest-magnitude entry is made positive so output
    is deterministic.  A tie between the d-th and (d+1)-th singular value
    leaves the subspace ill-defined and triggers a warning, not an error.
    """
    mat = np.asarray(mat, dtype=float)
    dim = mat.shape[0]
    if mat.ndim != 2 or mat.shape[1] != dim:
        raise ValidationError(f"matrix must be square, got {mat.shape}")
    if dim and np.abs(mat - mat.T).max() > SYMMETRY_TOL:
        raise ValidationError("matrix is not symmetric")
    if not 1 <= d <= dim:
        raise ValidationError(f"need 1 <= d <= {dim}, got {d}")

    k = min(d + 1, dim)
    vals, vecs = _top_magnitude_eigs(mat, k)
    if d < dim and abs(abs(vals[d - 1]) - abs(vals[d])) <= DEGENERATE_GAP:
        warnings.warn(
            f"singular values {d} and {d + 1} coincide; the embedding subspace "
            "is not uniquely defined",
            stacklevel=2,
        )
    vals = vals[:d]
    vecs = vecs[:, :d]
    flip = vecs[np.abs(vecs).argmax(axis=0), np.arange(d)] < 0
    vecs = np.where(flip[None, :], -vecs, vecs)
    xhat = vecs * np.sqrt(np.abs(vals))[None, :]

    n = n_vertices if n_vertices is not None else dim
    if dim % n:
        raise ValidationError(f"matrix dimension {dim} is not a multiple of n={n}")
    return Embedding(xhat=xhat, d=d, n=n, m=dim // n, eigenvalues=vals)


def spectrum_of(mat, max_d=None):
    """Descending singular values of a symmetric matrix (for scree analysis)."""
    mat = np.asarray(mat, dtype=float)
    vals = np.linalg.eigvalsh(mat)
    sv = np.sort(np.abs(vals))[::-1]
    return sv[:max_d] if max_d is not None else sv


def select_dim(spectrum, max_d=None, rank_hint=None):
    """Profile-likelihood elbow selection on a scree of singular values.

    For every split point the values are modeled as two Gaussian groups
    with a pooled variance; the split maximizing the profile log-likelihood
    is the selected dimension.  Scale-invariant; a constant spectrum selects
    d = 1 by the first-argmax convention.
    """
    values = np.asarray(spectrum, dtype=float)
    if values.ndim != 1 or values.size < 3:
        raise ValidationError("need a 1-d spectrum with at least 3 values")
    limit = values.size
    if rank_hint is not None:
        limit = min(limit, 3 * int(rank_hint))
    if max_d is not None:
        limit = min(limit, int(max_d))
    limit = min(limit, 50)
    values = values[:limit]
    count = values.size

    best_q, best_ll = 1, -np.inf
    for q in range(1, count):
        head, tail = values[:q], values[q:]
        ss = ((head - head.mean()) ** 2).sum() + ((tail - tail.mean()) ** 2).sum()
        var = max(ss / count, 1e-300)
        ll = -0.5 * count * np.log(var)
        if ll > best_ll + 1e-12:
            best_ll = ll
            best_q = q
    return best_q


def extract_blocks(embedding, m=None, n=None):
    """Split an (m*n) x d embedding into its m per-graph n x d blocks."""
    if isinstance(embedding, Embedding):
        x = embedding.xhat
        m = m if m is not None else embedding.m
        n = n if n is not None else embedding.n
    else:
        x = np.asarray(embedding, dtype=float)
        if m is None or n is None:
            raise ValidationError("m and n are required for raw arrays")
    if x.shape[0] != m * n:
        raise ValidationError(f"embedding has {x.shape[0]} rows, expected m*n = {m * n}")
    return [x[s * n : (s + 1) * n] for s in range(m)]
