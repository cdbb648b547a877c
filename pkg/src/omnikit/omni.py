"""Generalized and weighted Omnibus weightings.

An Omnibus weighting is an (m, m, m) tensor ``C`` whose entry ``C[k, l, q]``
is the weight of graph q in block (k, l) of the mn x mn Omnibus matrix.  A
valid weighting satisfies

* partial symmetry    C[k, l, q] == C[l, k, q],
* convex combination  C[k, l, q] in [0, 1] and sum_q C[k, l, q] == 1,
* row dominance       alpha(k, q) < alpha(k, k) for q != k,

where ``alpha(k, q) = sum_l C[k, l, q]`` is the cumulative weight of graph q
across block-row k.  The m x m matrix of these row sums determines the
correlation the embedding induces between graph pairs, so most of the
package manipulates the row-sum matrix directly.

Weighted Omnibus (WOMNI) tensors additionally put weight only on graphs i
and j inside block (i, j); for those, the row-sum matrix and the tensor are
in exact one-to-one correspondence (`womni_from_alpha` / `alpha_matrix`).

Indices are 0-based in code; file formats and human-readable reports use
1-based indices.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from omnikit.errors import FormatError, ValidationError

DEFAULT_TOL = 1e-9

SPECIAL_NAMES = ("classical", "M3minus", "M3plus", "M4plus", "M5plus")

# Exact mixing constants of the m=4 construction: a + b = 1.
M4PLUS_A = (5.0 - math.sqrt(17.0)) / 2.0
M4PLUS_B = (math.sqrt(17.0) - 3.0) / 2.0


@dataclass(frozen=True)
class OmniWeights:
    """Omnibus weight tensor with entries ``tensor[k, l, q]``."""

    tensor: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        if t.ndim != 3 or len(set(t.shape)) != 1:
            raise ValidationError(f"weight tensor must be (m, m, m), got {t.shape}")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def m(self):
        return self.tensor.shape[0]

    @property
    def is_womni(self):
        """True when block (i, j) mixes only graphs i and j."""
        mask = np.ones_like(self.tensor, dtype=bool)
        idx = np.arange(self.m)
        mask[idx[:, None], :, idx[:, None]] = False  # q == k allowed
        mask[:, idx[:, None], idx[:, None]] = False  # q == l allowed
        return not np.abs(self.tensor[mask]).max(initial=0.0) > 0


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple  # 1-based, as reported
    value: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self):
        return not self.violations

    def summary(self):
        if self.ok:
            return "valid Omnibus weighting"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  [{v.kind}] at {v.indices}: {v.message}" for v in self.violations]
        return "\n".join(lines)


def validate(weights, tol=DEFAULT_TOL, dominance_slack=0.0):
    """Check every structural invariant, reporting violations with indices.

    Dominance is strict by default; pass a small ``dominance_slack`` for
    optimizer output that sits on constraint boundaries.
    """
    c = np.asarray(weights.tensor if isinstance(weights, OmniWeights) else weights, dtype=float)
    m = c.shape[0]
    bad = []

    asym = np.abs(c - c.transpose(1, 0, 2))
    for k, l, q in zip(*np.nonzero(asym > tol)):
        if k < l:
            bad.append(
                Violation(
                    "partial-symmetry",
                    (int(k) + 1, int(l) + 1, int(q) + 1),
                    float(asym[k, l, q]),
                    f"C[k,l,q] != C[l,k,q] (diff {asym[k, l, q]:.3g})",
                )
            )

    for k, l, q in zip(*np.nonzero((c < -tol) | (c > 1 + tol))):
        bad.append(
            Violation(
                "range",
                (int(k) + 1, int(l) + 1, int(q) + 1),
                float(c[k, l, q]),
                f"weight {c[k, l, q]:.6g} outside [0, 1]",
            )
        )

    # Convex-combination sums; because of partial symmetry the i > j sums
    # are the same constraints, so only i <= j is checked.
    sums = c.sum(axis=2)
    for i, j in zip(*np.nonzero(np.abs(sums - 1) > tol)):
        if i <= j:
            bad.append(
                Violation(
                    "ccc-sum",
                    (int(i) + 1, int(j) + 1),
                    float(sums[i, j]),
                    f"block weights sum to {sums[i, j]:.6g}, expected 1",
                )
            )

    alpha = c.sum(axis=1)
    for k in range(m):
        for q in range(m):
            if q == k:
                continue
            margin = alpha[k, k] - alpha[k, q]
            if margin <= -dominance_slack:
                bad.append(
                    Violation(
                        "dominance",
                        (int(k) + 1, int(q) + 1),
                        float(margin),
                        f"alpha(k,q)={alpha[k, q]:.6g} not below alpha(k,k)={alpha[k, k]:.6g}",
                    )
                )

    return ValidationReport(tuple(bad))


def alpha_matrix(weights):
    """Row-sum matrix alpha(k, q) = sum_l C[k, l, q]."""
    c = weights.tensor if isinstance(weights, OmniWeights) else np.asarray(weights, dtype=float)
    return c.sum(axis=1)


def classical_omni(m):
    """The classical equal-weight Omnibus construction.

    Block (i, j) averages graphs i and j; block (i, i) is graph i alone.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    c = np.zeros((m, m, m))
    idx = np.arange(m)
    c[idx, idx, idx] = 1.0
    for i in range(m):
        for j in range(m):
            if i != j:
                c[i, j, i] = 0.5
                c[i, j, j] = 0.5
    return OmniWeights(c)


def womni_from_alpha(alpha, tol=DEFAULT_TOL):
    """Invert a row-sum matrix back to its unique WOMNI tensor.

    Requires rows summing to m, off-diagonal pairs alpha(i,k) + alpha(k,i)
    = 1, nonnegative entries and diagonal dominance.  alpha_matrix() of the
    result reproduces ``alpha`` exactly.
    """
    a = np.asarray(alpha, dtype=float)
    m = a.shape[0]
    if a.shape != (m, m):
        raise ValidationError(f"row-sum matrix must be square, got {a.shape}")
    rows = a.sum(axis=1)
    for i in np.flatnonzero(np.abs(rows - m) > tol * m):
        raise ValidationError(f"row {i + 1} sums to {rows[i]:.6g}, expected {m}")
    for i in range(m):
        for k in range(i + 1, m):
            s = a[i, k] + a[k, i]
            if abs(s - 1) > tol:
                raise ValidationError(
                    f"pair sum alpha({i + 1},{k + 1}) + alpha({k + 1},{i + 1}) = {s:.6g}, expected 1"
                )
    if a.min() < -tol:
        i, k = np.unravel_index(np.argmin(a), a.shape)
        raise ValidationError(f"negative weight alpha({i + 1},{k + 1}) = {a[i, k]:.6g}")
    for k in range(m):
        for q in range(m):
            if q != k and a[k, k] - a[k, q] <= -tol:
                raise ValidationError(
                    f"dominance fails at row {k + 1}: alpha(k,{q + 1}) >= alpha(k,k)"
                )

    c = np.zeros((m, m, m))
    idx = np.arange(m)
    c[idx, idx, idx] = 1.0
    for i in range(m):
        for k in range(m):
            if i == k:
                continue
            c[i, k, k] = a[i, k]
            c[k, i, k] = a[i, k]
            c[i, k, i] = 1.0 - a[i, k]
            c[k, i, i] = 1.0 - a[i, k]
    return OmniWeights(c)


def _special_blocks(layout, m):
    """Tensor from a dict {(i, j): [(q, w), ...]} of upper-triangle blocks."""
    c = np.zeros((m, m, m))
    for (i, j), parts in layout.items():
        for q, w in parts:
            c[i, j, q] = w
            c[j, i, q] = w
    return OmniWeights(c)


def special(name, m, params=None):
    """Named constructions with smaller flat correlation than classical.

    ``M3minus``/``M3plus`` (m=3) attain the minimum flat correlation
    2/3 + rho/3; ``M4plus`` (m=4) uses the exact constants a=(5-sqrt17)/2,
    b=(sqrt17-3)/2; ``M5plus`` (m=5) takes explicit mixing parameters
    (a, b, c, d) with a+b = c+d = 1 -- no choice of which beats classical,
    which is what makes the construction worth testing.
    """
    if name == "classical":
        return classical_omni(m)
    if name == "M3minus":
        _need(name, m, 3)
        return _special_blocks(
            {
                (0, 0): [(0, 1.0)],
                (1, 1): [(1, 1.0)],
                (2, 2): [(2, 1.0)],
                (0, 1): [(0, 1.0)],
                (0, 2): [(2, 1.0)],
                (1, 2): [(1, 1.0)],
            },
            3,
        )
    if name == "M3plus":
        _need(name, m, 3)
        return _special_blocks(
            {
                (0, 0): [(0, 1.0)],
                (1, 1): [(1, 1.0)],
                (2, 2): [(2, 1.0)],
                (0, 1): [(1, 1.0)],
                (0, 2): [(0, 1.0)],
                (1, 2): [(2, 1.0)],
            },
            3,
        )
    if name == "M4plus":
        _need(name, m, 4)
        a, b = M4PLUS_A, M4PLUS_B
        layout = {
            (0, 0): [(0, 1.0)],
            (1, 1): [(1, 1.0)],
            (2, 2): [(2, 1.0)],
            (3, 3): [(3, 1.0)],
            (0, 1): [(1, 1.0)],
            (0, 2): [(0, 1.0)],
            (1, 2): [(2, 1.0)],
            (0, 3): [(0, a), (3, b)],
            (1, 3): [(1, a), (3, b)],
            (2, 3): [(2, a), (3, b)],
        }
        return _special_blocks(layout, 4)
    if name == "M5plus":
        _need(name, m, 5)
        if params is None:
            raise ValidationError("M5plus needs parameters (a, b, c, d)")
        a, b, c, d = (float(v) for v in params)
        if not (0 <= a <= 1 and 0 <= c <= 1) or abs(a + b - 1) > 1e-12 or abs(c + d - 1) > 1e-12:
            raise ValidationError("M5plus parameters need a,b,c,d in [0,1] with a+b=c+d=1")
        layout = {
            (0, 0): [(0, 1.0)],
            (1, 1): [(1, 1.0)],
            (2, 2): [(2, 1.0)],
            (3, 3): [(3, 1.0)],
            (4, 4): [(4, 1.0)],
            (0, 1): [(1, 1.0)],
            (0, 2): [(0, 1.0)],
            (1, 2): [(2, 1.0)],
            (0, 3): [(0, a), (3, b)],
            (1, 3): [(1, a), (3, b)],
            (2, 3): [(2, a), (3, b)],
            (0, 4): [(0, c), (4, d)],
            (1, 4): [(1, c), (4, d)],
            (2, 4): [(2, c), (4, d)],
            (3, 4): [(3, c), (4, d)],
        }
        return _special_blocks(layout, 5)
    raise ValidationError(f"unknown construction {name!r}; choose from {SPECIAL_NAMES}")


def _need(name, m, required):
    if m != required:
        raise ValidationError(f"{name} requires m = {required}, got {m}")


def build_omnibus(collection, weights):
    """Assemble the mn x mn Omnibus matrix.

    Block (k, l) is ``sum_q C[k, l, q] A^(q)``; the result is symmetric and
    linear in each adjacency matrix.
    """
    c = weights.tensor
    m = weights.m
    if collection.m != m:
        raise ValidationError(f"collection has m={collection.m} but weights have m={m}")
    stack = collection.stack()
    n = collection.n
    blocks = np.einsum("klq,qij->kilj", c, stack)
    return blocks.reshape(m * n, m * n)


# ---------------------------------------------------------------------------
# persistence (json-tensor for C, dense-csv for row-sum matrices)


def save_weights(weights, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(weights.tensor.tolist()))


def load_weights(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read weight tensor {path}: {exc}") from exc
    return OmniWeights(np.asarray(data, dtype=float))
