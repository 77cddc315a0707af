"""Structural predicates: extractability, connectivity, fullness, determinability.

These decide when a rank-one completion is well posed.  A flattening is
*extractable* when its pairwise system has a one-dimensional nullspace; a
tensor is *determinable* when some mode's flattening is extractable and the
reshaped nullvector is itself determinable, down to the matrix base case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linsys import build_system, nullspace_dimension, smallest_singular
from .tensor import FlattenedView, PartialTensor, flatten, reshape_solution

# Relative magnitude below which a nullvector entry is reported as zero.
ZERO_ENTRY_RTOL = 1e-8


@dataclass(frozen=True)
class ModeCheck:
    """Extractability evidence for one flattening."""

    extractable: bool
    nullspace_dim: int
    sigma_min: float
    gap: float


@dataclass(frozen=True)
class AnalysisReport:
    extractable_per_mode: dict[int, ModeCheck]
    connected: bool
    mod_full: dict[int, bool]
    nonzero_entries: bool
    determinable: bool
    witness_chain: Optional[tuple[tuple[int, int], ...]] = None

    def to_dict(self) -> dict:
        return {
            "extractable_per_mode": {
                str(k): {
                    "extractable": c.extractable,
                    "nullspace_dim": c.nullspace_dim,
                    "sigma_min": c.sigma_min,
                    "gap": c.gap,
                }
                for k, c in self.extractable_per_mode.items()
            },
            "connected": self.connected,
            "mod_full": {str(t): v for t, v in self.mod_full.items()},
            "nonzero_entries": self.nonzero_entries,
            "determinable": self.determinable,
            "witness_chain": [list(step) for step in self.witness_chain]
            if self.witness_chain is not None
            else None,
        }


def is_extractable(view: FlattenedView, tol: float | None = None) -> tuple[bool, ModeCheck]:
    """Whether the flattening's pairwise system has a one-dimensional nullspace."""
    system = build_system(view)
    dim = nullspace_dimension(system, tol=tol)
    triplet = smallest_singular(system, tol=tol)
    check = ModeCheck(dim == 1, dim, triplet.sigma_min, triplet.gap)
    return check.extractable, check


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.count = n

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb
            self.count -= 1


def bipartite_connected(view: FlattenedView) -> bool:
    """Connectivity of the bipartite graph whose edges are the observed cells.

    One side holds every possible reduced row index, the other every column
    index; a vertex never touched by an observation is isolated and makes the
    graph disconnected.
    """
    total_rows = 1
    for n in view.reduced_dims:
        total_rows *= n
    if len(view.row_labels) < total_rows:
        return False
    if len(view.col_labels) < view.base_dims[view.mode - 1]:
        return False
    nrow = len(view.row_labels)
    uf = _UnionFind(nrow + len(view.col_labels))
    rowpos = view.row_positions
    colpos = {j: nrow + p for p, j in enumerate(view.col_labels)}
    for (vec, j) in view.obs:
        uf.union(rowpos[vec], colpos[j])
    return uf.count == 1


def observation_graph_connected(tensor: PartialTensor) -> bool:
    """Connectivity of the coordinate graph linking all modes through observations.

    Vertices are (mode, coordinate) pairs over the full dimensions; each
    observation links all its coordinates.  For matrices this coincides with
    the bipartite reading above.
    """
    offsets = np.cumsum([0] + list(tensor.dims))
    total = int(offsets[-1])
    uf = _UnionFind(total)
    for idx in tensor.entries:
        base = offsets[0] + idx[0] - 1
        for t in range(1, tensor.order):
            uf.union(base, int(offsets[t]) + idx[t] - 1)
    return uf.count == 1


def is_mod_full(tensor: PartialTensor, t: int) -> bool:
    """Whether every coordinate of mode t appears in some observed index."""
    if not 1 <= t <= tensor.order:
        raise ValueError(f"mode {t} out of range for order {tensor.order}")
    seen = {idx[t - 1] for idx in tensor.entries}
    return len(seen) == tensor.dims[t - 1]


def verify_unique_completion_hypotheses(tensor: PartialTensor) -> list[str]:
    """List the violated uniqueness hypotheses (empty when all hold).

    Checks fullness of every mode's coordinate projection and that all
    observed entries are nonzero.
    """
    violations = []
    for t in range(1, tensor.order + 1):
        if not is_mod_full(tensor, t):
            violations.append(f"mod-{t} fullness violated")
    for idx in sorted(tensor.entries):
        if tensor.entries[idx] == 0.0:
            violations.append(f"nonzero-entries violated at {idx}")
    return violations


def _search_chain(tensor: PartialTensor, tol: float | None) -> Optional[tuple[tuple[int, int], ...]]:
    """Depth-first search for a witness chain, ascending modes, backtracking."""
    m = tensor.order
    for k in range(1, m + 1):
        view = flatten(tensor, k)
        system = build_system(view)
        dim = nullspace_dimension(system, tol=tol)
        if dim != 1:
            continue
        if m == 2:
            return ((k, dim),)
        x_star = smallest_singular(system, tol=tol).right_vector
        sub = reshape_solution(x_star, view)
        deeper = _search_chain(sub, tol)
        if deeper is not None:
            return ((k, dim),) + deeper
    return None


def is_determinable(tensor: PartialTensor, tol: float | None = None) -> AnalysisReport:
    """Full structural report, including the recursive determinability search.

    The search tries modes in ascending order at every level and backtracks
    when a branch dead-ends; the first complete witness chain is reported as
    ``((mode, nullspace_dim), ...)`` with one entry per level.
    """
    if tensor.order < 2:
        raise ValueError("determinability needs order >= 2")
    per_mode: dict[int, ModeCheck] = {}
    for k in range(1, tensor.order + 1):
        _, per_mode[k] = is_extractable(flatten(tensor, k), tol=tol)
    chain = _search_chain(tensor, tol)
    return AnalysisReport(
        extractable_per_mode=per_mode,
        connected=observation_graph_connected(tensor),
        mod_full={t: is_mod_full(tensor, t) for t in range(1, tensor.order + 1)},
        nonzero_entries=all(v != 0.0 for v in tensor.entries.values()),
        determinable=chain is not None,
        witness_chain=chain,
    )


def entirely_nonzero(vector: np.ndarray, rtol: float = ZERO_ENTRY_RTOL) -> bool:
    """Whether all entries of a vector are nonzero relative to its largest."""
    vector = np.asarray(vector, dtype=float)
    if vector.size == 0:
        return True
    top = float(np.max(np.abs(vector)))
    if top == 0.0:
        return False
    return bool(np.all(np.abs(vector) > rtol * top))
