"""omnikit: weighted Omnibus joint graph embeddings and the corr2Omni optimizer.

The package builds generalized Omnibus matrices for collections of graphs,
embeds them spectrally, computes the correlation that the construction induces
across the embedded networks, and searches for Omnibus weights that induce a
requested correlation structure (corr2Omni, a constrained stress majorization).
"""

from omnikit.graph_store import GraphCollection, load_collection, preprocess, save_matrix, load_matrix
from omnikit.omni import (
    OmniWeights,
    classical_omni,
    special,
    validate,
    alpha_matrix,
    womni_from_alpha,
    build_omnibus,
)
from omnikit.jrdpg import (
    GeneratorSpec,
    LatentPositions,
    sample_dirichlet_latents,
    sample_rdpg,
    sample_jrdpg_gen,
    empirical_edge_correlation,
)
from omnikit.spectral import Embedding, ase, select_dim, extract_blocks, spectrum_of
from omnikit.corr_theory import (
    CorrelationMatrix,
    induced_correlation,
    flat_check,
    flat_lower_bound,
    flat_upper_bound,
    naive_lower_bound,
    diag_sum_check,
)
from omnikit.corr2omni import corr2omni, Corr2OmniResult, cholesky_regularized
from omnikit import analysis, qp

__version__ = "0.1.0"

__all__ = [
    "GraphCollection",
    "load_collection",
    "preprocess",
    "save_matrix",
    "load_matrix",
    "OmniWeights",
    "classical_omni",
    "special",
    "validate",
    "alpha_matrix",
    "womni_from_alpha",
    "build_omnibus",
    "GeneratorSpec",
    "LatentPositions",
    "sample_dirichlet_latents",
    "sample_rdpg",
    "sample_jrdpg_gen",
    "empirical_edge_correlation",
    "Embedding",
    "ase",
    "select_dim",
    "extract_blocks",
    "spectrum_of",
    "CorrelationMatrix",
    "induced_correlation",
    "flat_check",
    "flat_lower_bound",
    "flat_upper_bound",
    "naive_lower_bound",
    "diag_sum_check",
    "corr2omni",
    "Corr2OmniResult",
    "cholesky_regularized",
    "analysis",
    "qp",
    "__version__",
]
