"""Samplers for correlated random dot product graph collections.

Latent positions are drawn once and shared by all graphs; each graph's
edges are Bernoulli with success probability given by the latent inner
products.  Cross-graph correlation is produced by the single-generator
construction: a hidden generator graph is sampled first and graph k's edge
(i, j) is tilted toward the generator's edge with strength rho_k, giving

    P(A_ij = 1 | gen_ij = 1) = p + rho_k (1 - p)
    P(A_ij = 1 | gen_ij = 0) = p (1 - rho_k)

which keeps the Bernoulli(p) marginal and yields pairwise edge correlation
exactly rho_{k1} * rho_{k2}.  All draws are pure functions of the seed (see
``_rng``), so samplers are deterministic and parallel-safe.
"""

from dataclasses import dataclass

import numpy as np

from omnikit import _rng
from omnikit.errors import ValidationError
from omnikit.graph_store import make_collection


@dataclass(frozen=True)
class LatentPositions:
    """n x d latent position matrix with rows X_i, plus a distribution tag."""

    x: np.ndarray
    distribution: str = "unknown"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise ValidationError("latent positions must be an (n, d) matrix")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    def probabilities(self):
        """Edge probability matrix P = X X^T, validated to lie in [0, 1]."""
        p = self.x @ self.x.T
        if p.min() < 0 or p.max() > 1:
            raise ValidationError(
                f"latent inner products outside [0, 1]: range [{p.min():.3g}, {p.max():.3g}]"
            )
        return p


@dataclass(frozen=True)
class GeneratorSpec:
    """Per-graph generator loadings rho_k in [0, 1] for the single-generator model."""

    nu: tuple
    seed: int = 0

    def __post_init__(self):
        nu = tuple(float(v) for v in self.nu)
        for v in nu:
            if not 0.0 <= v <= 1.0:
                raise ValidationError(
                    f"generator loading {v} outside [0, 1]; negative pairwise "
                    "correlation has no single-generator construction and is unsupported"
                )
        object.__setattr__(self, "nu", nu)

    @property
    def m(self):
        return len(self.nu)


def sample_dirichlet_latents(n, seed):
    """First two coordinates of n i.i.d. Dirichlet(1, 1, 1) draws (so d = 2).

    Rows satisfy x1, x2 >= 0 and x1 + x2 <= 1; deterministic given seed.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    key = _rng.stream_key(seed, "latents")
    u = _rng.vertex_uniforms(key, n, 3)
    e = -np.log1p(-u)  # Exponential(1); Dirichlet(1,1,1) = normalized exponentials
    x = e / e.sum(axis=1, keepdims=True)
    return LatentPositions(x[:, :2], distribution="dirichlet(1,1,1)[:2]")


def _edges_to_matrix(n, i_idx, j_idx, values):
    a = np.zeros((n, n))
    a[i_idx, j_idx] = values
    a[j_idx, i_idx] = values
    return a


def sample_rdpg(latents, seed, stream="rdpg"):
    """One symmetric hollow adjacency matrix with P(A_ij = 1) = X_i . X_j."""
    p = latents.probabilities()
    n = latents.n
    key = _rng.stream_key(seed, stream)
    i_idx, j_idx, u = _rng.edge_uniforms(key, n)
    a = _edges_to_matrix(n, i_idx, j_idx, (u < p[i_idx, j_idx]).astype(float))
    return a


def sample_jrdpg_gen(latents, spec, m=None, return_generator=False):
    """Sample an m-graph collection from the single-generator model.

    Conditioned on the generator the graphs are independent, so the draws
    for graph k come from the substream ("graph", k) and can be produced in
    parallel without changing the output.
    """
    if m is None:
        m = spec.m
    if spec.m != m:
        raise ValidationError(f"spec has {spec.m} loadings but m={m} requested")
    p = latents.probabilities()
    n = latents.n
    seed = spec.seed
    gen_key = _rng.stream_key(seed, "generator")
    i_idx, j_idx, u0 = _rng.edge_uniforms(gen_key, n)
    p_edges = p[i_idx, j_idx]
    gen = u0 < p_edges

    # success probability tilted toward the generator outcome
    def one_graph(k):
        rho = spec.nu[k]
        key = _rng.stream_key(seed, "graph", k)
        _, _, u = _rng.edge_uniforms(key, n)
        thresh = np.where(gen, p_edges + rho * (1.0 - p_edges), p_edges * (1.0 - rho))
        return _edges_to_matrix(n, i_idx, j_idx, (u < thresh).astype(float))

    graphs = [one_graph(k) for k in range(m)]
    collection = make_collection(graphs)
    if return_generator:
        return collection, _edges_to_matrix(n, i_idx, j_idx, gen.astype(float))
    return collection


def empirical_edge_correlation(collection, p=None):
    """Pearson correlation of above-diagonal edge indicators across graphs.

    When the edge probability matrix ``p`` is supplied, entries are centered
    by it first; with heterogeneous edge probabilities this is the estimator
    that is consistent for the model correlation (raw pooling picks up
    spurious correlation from the shared probabilities).
    """
    if collection.m < 2:
        raise ValidationError("need at least two graphs")
    n = collection.n
    iu = np.triu_indices(n, k=1)
    rows = np.stack([g[iu] for g in collection.graphs])
    if p is not None:
        rows = rows - np.asarray(p, dtype=float)[iu][None, :]
    variances = rows.var(axis=1)
    dead = np.flatnonzero(variances == 0)
    if dead.size:
        raise ValidationError(
            f"graph {dead[0] + 1} has zero edge variance (empty or complete); "
            "correlation undefined"
        )
    corr = np.corrcoef(rows)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return corr
