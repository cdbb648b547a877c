"""Loading, validation, preprocessing and persistence of graph collections.

Three interchange formats are supported:

* ``dense-csv`` -- one matrix per file, comma separated, no header.  Floats
  are written with 17 significant digits so a save/load round trip is
  bit-exact.  This is the canonical format.
* ``edge-list`` -- whitespace separated vertex-id pairs with an optional
  third weight column.  The vertex set is the sorted union of ids seen in
  all files of the directory.
* ``json-tensor`` -- nested arrays ``[k][l][q]`` for Omnibus weight tensors.
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from omnikit.errors import FormatError, ValidationError

ASYMMETRY_TOL = 1e-12

FORMATS = ("dense-csv", "edge-list", "json-tensor")
_FORMAT_SUFFIX = {"dense-csv": ".csv", "edge-list": ".edges", "json-tensor": ".json"}


@dataclass(frozen=True)
class GraphCollection:
    """m graphs on a common vertex set, stored as symmetric hollow matrices.

    Instances are immutable after construction and safe to share across
    worker threads.
    """

    graphs: tuple
    vertex_ids: tuple

    def __post_init__(self):
        for k, a in enumerate(self.graphs):
            _check_adjacency(a, self.n, where=f"graph {k + 1}")

    @property
    def m(self):
        return len(self.graphs)

    @property
    def n(self):
        return len(self.vertex_ids)

    def stack(self):
        """(m, n, n) array view of the adjacency matrices."""
        return np.stack(self.graphs)


def _check_adjacency(a, n, where=""):
    if a.shape != (n, n):
        raise ValidationError(f"{where}: expected shape {(n, n)}, got {a.shape}")
    if np.isnan(a).any():
        raise ValidationError(f"{where}: NaN entries")
    asym = np.abs(a - a.T).max() if n else 0.0
    if asym > ASYMMETRY_TOL:
        raise ValidationError(f"{where}: asymmetric (max |A_ij - A_ji| = {asym:.3g})")
    if n and np.abs(np.diag(a)).max() > 0:
        raise ValidationError(f"{where}: nonzero diagonal (matrix must be hollow)")


def make_collection(graphs, vertex_ids=None):
    """Build a validated GraphCollection from arrays."""
    graphs = tuple(np.array(g, dtype=float) for g in graphs)
    if not graphs:
        raise ValidationError("collection needs at least one graph")
    for g in graphs:
        g.setflags(write=False)
    n = graphs[0].shape[0]
    if vertex_ids is None:
        vertex_ids = tuple(str(i + 1) for i in range(n))
    return GraphCollection(graphs=graphs, vertex_ids=tuple(str(v) for v in vertex_ids))


# ---------------------------------------------------------------------------
# single-matrix persistence


def save_matrix(x, path, format="dense-csv"):
    """Write a matrix (or weight tensor) to ``path`` in the given format."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValidationError("refusing to save non-finite values")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "dense-csv":
        if x.ndim != 2:
            raise FormatError("dense-csv stores 2-d matrices")
        lines = [",".join(_fmt(v) for v in row) for row in x]
        path.write_text("\n".join(lines) + "\n")
    elif format == "edge-list":
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise FormatError("edge-list stores square matrices")
        i_idx, j_idx = np.nonzero(np.triu(x, k=1))
        lines = [f"{i + 1} {j + 1} {_fmt(x[i, j])}" for i, j in zip(i_idx, j_idx)]
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
    elif format == "json-tensor":
        path.write_text(json.dumps(x.tolist()))
    else:
        raise FormatError(f"unknown format {format!r}")


def _fmt(v):
    return format(float(v), ".17g")


def load_matrix(path, format="dense-csv", n=None):
    """Read a matrix saved by :func:`save_matrix`."""
    path = Path(path)
    if format == "dense-csv":
        return _read_dense_csv(path)
    if format == "edge-list":
        edges, labels = _read_edge_list(path)
        if n is None:
            n = len(labels)
        index = {v: i for i, v in enumerate(labels)}
        a = np.zeros((n, n))
        for u, v, w in edges:
            i, j = index[u], index[v]
            a[i, j] = w
            a[j, i] = w
        return a
    if format == "json-tensor":
        return np.asarray(json.loads(path.read_text()), dtype=float)
    raise FormatError(f"unknown format {format!r}")


def _read_dense_csv(path):
    rows = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise FormatError(f"{path}: bad numeric value ({exc})") from exc
    if not rows:
        raise FormatError(f"{path}: empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    return np.asarray(rows)


def _read_edge_list(path):
    edges = []
    labels = set()
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) not in (2, 3):
            raise FormatError(f"{path}:{ln}: expected 'u v [w]', got {line!r}")
        w = 1.0
        if len(toks) == 3:
            try:
                w = float(toks[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: bad weight {toks[2]!r}") from exc
        edges.append((toks[0], toks[1], w))
        labels.update(toks[:2])
    return edges, _sort_labels(labels)


def _sort_labels(labels):
    labels = list(labels)
    if all(re.fullmatch(r"-?\d+", v) for v in labels):
        return sorted(labels, key=int)
    return sorted(labels)


# ---------------------------------------------------------------------------
# collection loading


def load_collection(dir_path, format="dense-csv"):
    """Load every matrix file in a directory as one validated collection.

    Files are taken in sorted name order.  For edge lists the vertex set is
    the union of ids across all files, so every graph shares one vertex
    order.  Asymmetry beyond 1e-12 or NaN entries raise ValidationError.
    """
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise FormatError(f"{dir_path} is not a directory")
    suffix = _FORMAT_SUFFIX.get(format)
    if suffix is None:
        raise FormatError(f"unknown format {format!r}")
    files = sorted(p for p in dir_path.iterdir() if p.suffix == suffix and p.is_file())
    # sampling runs keep their metadata next to the graphs
    files = [p for p in files if not p.name.startswith(("provenance", "manifest", "latents"))]
    if not files:
        raise FormatError(f"no {format} files in {dir_path}")

    if format == "edge-list":
        parsed = [_read_edge_list(p) for p in files]
        labels = _sort_labels(set().union(*(set(lab) for _, lab in parsed)))
        index = {v: i for i, v in enumerate(labels)}
        n = len(labels)
        graphs = []
        for edges, _ in parsed:
            a = np.zeros((n, n))
            for u, v, w in edges:
                i, j = index[u], index[v]
                a[i, j] = w
                a[j, i] = w
            graphs.append(a)
        return make_collection(graphs, labels)

    graphs = [load_matrix(p, format=format) for p in files]
    shapes = {g.shape for g in graphs}
    if len(shapes) != 1:
        raise ValidationError(f"dimension mismatch across files: {sorted(shapes)}")
    return make_collection(graphs)


def save_collection(collection, dir_path, format="dense-csv", stem="graph"):
    """Write each graph of a collection as ``<stem>_<k>.<ext>`` (1-based k)."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    width = len(str(collection.m))
    paths = []
    for k, a in enumerate(collection.graphs, start=1):
        p = dir_path / f"{stem}_{k:0{width}d}{_FORMAT_SUFFIX[format]}"
        save_matrix(a, p, format=format)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# preprocessing


@dataclass(frozen=True)
class PreprocessOptions:
    binarize: bool = False
    symmetrize: bool = False
    drop_isolated: bool = False
    intersect_vertices: bool = False


def preprocess(collection, opts=None, **flags):
    """Apply cleanup steps to a collection, returning a new collection.

    binarize
        Map every nonzero weight to 1.
    symmetrize
        Replace each matrix by the entrywise max of itself and its
        transpose.  (Max, not average, so binarize and symmetrize commute
        on 0/1 data.)
    drop_isolated
        Remove vertices with zero degree in every graph.
    intersect_vertices
        Keep only vertices with nonzero degree in all graphs.

    The operation is idempotent and never increases n or changes m.
    """
    if opts is None:
        opts = PreprocessOptions(**flags)
    graphs = [np.array(g) for g in collection.graphs]
    if opts.symmetrize:
        graphs = [np.maximum(g, g.T) for g in graphs]
    if opts.binarize:
        graphs = [(g != 0).astype(float) for g in graphs]
    for g in graphs:
        np.fill_diagonal(g, 0.0)

    keep = np.ones(collection.n, dtype=bool)
    degrees = np.stack([np.abs(g).sum(axis=1) for g in graphs])
    if opts.drop_isolated:
        keep &= (degrees > 0).any(axis=0)
    if opts.intersect_vertices:
        keep &= (degrees > 0).all(axis=0)
    if not keep.any():
        raise ValidationError("preprocessing removed every vertex")
    if not keep.all():
        idx = np.flatnonzero(keep)
        graphs = [g[np.ix_(idx, idx)] for g in graphs]
        ids = tuple(collection.vertex_ids[i] for i in idx)
    else:
        ids = collection.vertex_ids
    return make_collection(graphs, ids)
