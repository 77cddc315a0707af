"""Recursive rank-one completion.

Each level flattens the current tensor along a chosen mode, takes the unit
vector closest to the nullspace of the pairwise system, reshapes it into a
tensor of one order less, and recurses; unwinding solves one closed-form
least-squares problem per level to recover that level's mode vector.

Mode selection and vector extraction run on the row-equilibrated system:
row scaling leaves the exact nullspace untouched while making the singular
spectrum reflect the ratio constraints uniformly, which keeps the recursion
stable when observed values span many orders of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linsys import (
    NumericalError,
    build_system,
    nullspace_dimension,
    row_equilibrated,
    smallest_singular,
)
from .tensor import PartialTensor, flatten, residual_on_omega

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class CompleteOptions:
    tol: float | None = None
    tie_rel: float = 1e-10
    method: str = "auto"
    max_iter: int = 200
    # The pairwise systems are extremely sparse, so the iterative solver
    # pays off far below the general-purpose dense cutoff.
    dense_limit: int = 128
    # Cyclic repetitions of the per-mode least-squares solve against the
    # input tensor after the unwind.  An exact fit is a fixed point, so
    # exact-data results are unchanged; on noisy data a couple of sweeps
    # tames the rare instance whose chain crossed an ill-conditioned level.
    refine_sweeps: int = 2


@dataclass(frozen=True)
class ModeStats:
    """Spectral statistics of one candidate flattening (equilibrated system)."""

    mode: int
    nrows: int
    ncols: int
    sigma_min: float
    sigma_second: float
    gap: float
    effective_gap: float
    underdetermined: bool
    unique_nullspace: bool
    x_star: np.ndarray
    row_labels: tuple
    nullspace_dim: Optional[int] = None


@dataclass(frozen=True)
class LevelRecord:
    """One level of the recursion chain."""

    level: int
    chosen_mode: int
    local_mode: int
    sigma_min: dict[int, float]
    gap: dict[int, float]
    x_star: np.ndarray
    labels: tuple
    underdetermined: bool
    unique_nullspace: bool
    nullspace_dim: Optional[int] = None


@dataclass(frozen=True)
class CompletionResult:
    u: list[np.ndarray]
    levels: list[LevelRecord]
    fit_residual: float
    status: str
    diagnostics: tuple[str, ...] = ()


def _mode_stats(tensor: PartialTensor, k: int, opts: CompleteOptions) -> ModeStats:
    view = flatten(tensor, k)
    system = row_equilibrated(build_system(view))
    method = opts.method
    if method == "auto":
        method = "dense" if system.ncols <= opts.dense_limit else "iterative"
    try:
        triplet = smallest_singular(system, tol=opts.tol, method=method, max_iter=opts.max_iter)
    except NumericalError:
        if method != "dense" and system.ncols <= 4096:
            triplet = smallest_singular(system, tol=opts.tol, method="dense", max_iter=opts.max_iter)
        else:
            raise
    l, n = system.nrows, system.ncols
    if not triplet.underdetermined:
        effective_gap = triplet.sigma_second - triplet.sigma_min
    elif l == n - 1:
        effective_gap = triplet.sigma_second
    else:
        effective_gap = 0.0
    # Rank margin: the equilibrated system has Frobenius norm <= sqrt(nrows),
    # so this bounds max(l, n) * eps * sigma_max from above.
    rank_tol = max(l, n, 1) * _EPS * max(1.0, math.sqrt(max(l, 1)))
    # Exact count only where it costs one small dense factorization.
    dim = nullspace_dimension(system, tol=opts.tol) if n <= opts.dense_limit else None
    return ModeStats(
        mode=k,
        nrows=l,
        ncols=n,
        sigma_min=triplet.sigma_min,
        sigma_second=triplet.sigma_second,
        gap=triplet.gap,
        effective_gap=effective_gap,
        underdetermined=triplet.underdetermined,
        unique_nullspace=triplet.sigma_second > rank_tol,
        x_star=triplet.right_vector,
        row_labels=view.row_labels,
        nullspace_dim=dim,
    )


def select_mode(
    tensor: PartialTensor,
    excluded: frozenset[int] | set[int] = frozenset(),
    options: CompleteOptions | None = None,
) -> tuple[int, dict[int, ModeStats]]:
    """Pick the flattening mode whose system is closest to nullity one.

    Candidates are ranked by the gap between their two smallest singular
    values (largest first), then by smallest ``sigma_min``, then by smallest
    mode index; comparisons use a relative tie band so that roundoff-level
    differences cannot flip the choice.  An underdetermined system with one
    row less than columns competes with gap equal to its smallest singular
    value; wider systems never carry a usable gap.
    """
    opts = options or CompleteOptions()
    if tensor.order < 2:
        raise ValueError("mode selection requires order >= 2")
    candidates = [k for k in range(1, tensor.order + 1) if k not in excluded]
    if not candidates:
        raise ValueError("all modes excluded")
    stats: dict[int, ModeStats] = {}
    failures = []
    for k in candidates:
        try:
            stats[k] = _mode_stats(tensor, k, opts)
        except NumericalError as exc:  # pragma: no cover - solver fallback path
            failures.append((k, exc))
    if not stats:
        raise NumericalError(f"all candidate modes failed numerically: {failures}")

    band = opts.tie_rel
    best_gap = max(st.effective_gap for st in stats.values())
    tied = [k for k, st in stats.items() if best_gap - st.effective_gap <= band * (1.0 + best_gap)]
    best_sigma = min(stats[k].sigma_min for k in tied)
    tied = [k for k in tied if stats[k].sigma_min - best_sigma <= band * (1.0 + stats[k].sigma_min)]
    return min(tied), stats


def extract_vector(
    tensor: PartialTensor, k: int, options: CompleteOptions | None = None
) -> tuple[np.ndarray, ModeStats]:
    """Unit vector spanning (or nearest to) the nullspace of mode k's system."""
    opts = options or CompleteOptions()
    stats = _mode_stats(tensor, k, opts)
    return stats.x_star, stats


def solve_mode_vector(
    tensor: PartialTensor, partial_factors: Sequence[np.ndarray], k: int
) -> tuple[np.ndarray, list[str]]:
    """Per-coordinate least-squares solve for the mode-k vector.

    ``partial_factors`` holds the factors of the other modes in ascending
    mode order (length order-1).  Coordinate j of the result is
    ``(w . a) / (w . w)`` over the observations whose mode-k index is j,
    where a stacks observed values and w the matching products of the other
    factors.  Coordinates with no usable observation get 0 and a diagnostic.
    """
    m = tensor.order
    if len(partial_factors) != m - 1:
        raise ValueError(f"expected {m - 1} factors, got {len(partial_factors)}")
    if not 1 <= k <= m:
        raise ValueError(f"mode {k} out of range")
    other_modes = [t for t in range(1, m + 1) if t != k]
    factors = {}
    for t, u in zip(other_modes, partial_factors):
        u = np.asarray(u, dtype=float)
        if u.shape != (tensor.dims[t - 1],):
            raise ValueError(f"factor for mode {t} has shape {u.shape}, expected ({tensor.dims[t-1]},)")
        factors[t] = u
    n_k = tensor.dims[k - 1]
    coords = tensor.coords
    w = np.ones(len(tensor))
    for t in other_modes:
        w *= factors[t][coords[:, t - 1] - 1]
    j = coords[:, k - 1] - 1
    num = np.bincount(j, weights=w * tensor.values, minlength=n_k)
    den = np.bincount(j, weights=w * w, minlength=n_k)
    u_k = np.zeros(n_k)
    usable = den > 0.0
    u_k[usable] = num[usable] / den[usable]
    diagnostics = [
        f"mode {k} coordinate {int(i) + 1} unconstrained; set to 0"
        for i in np.nonzero(~usable)[0]
    ]
    return u_k, diagnostics


def _extend_order_one(tensor: PartialTensor) -> tuple[np.ndarray, list[str]]:
    """Fill unobserved coordinates of an order-1 tensor with 1."""
    n = tensor.dims[0]
    u = np.ones(n)
    seen = np.zeros(n, dtype=bool)
    for idx, val in tensor.entries.items():
        u[idx[0] - 1] = val
        seen[idx[0] - 1] = True
    diagnostics = [
        f"coordinate {int(i) + 1} unobserved at recursion bottom; filled with 1"
        for i in np.nonzero(~seen)[0]
    ]
    return u, diagnostics


def _complete_level(
    tensor: PartialTensor,
    modes: tuple[int, ...],
    level: int,
    opts: CompleteOptions,
    records: list[LevelRecord],
    diagnostics: list[str],
) -> dict[int, np.ndarray]:
    """Recursive core; returns factors keyed by original mode number."""
    m = tensor.order
    if m == 1:
        u, diags = _extend_order_one(tensor)
        diagnostics.extend(diags)
        return {modes[0]: u}
    local_k, stats = select_mode(tensor, options=opts)
    chosen = stats[local_k]
    records.append(
        LevelRecord(
            level=level,
            chosen_mode=modes[local_k - 1],
            local_mode=local_k,
            sigma_min={modes[k - 1]: st.sigma_min for k, st in stats.items()},
            gap={modes[k - 1]: st.gap for k, st in stats.items()},
            x_star=chosen.x_star,
            labels=chosen.row_labels,
            underdetermined=chosen.underdetermined,
            unique_nullspace=chosen.unique_nullspace,
            nullspace_dim=chosen.nullspace_dim,
        )
    )
    sub = PartialTensor(
        tensor.dims[: local_k - 1] + tensor.dims[local_k:],
        {lab: float(v) for lab, v in zip(chosen.row_labels, chosen.x_star)},
    )
    sub_modes = modes[: local_k - 1] + modes[local_k:]
    factors = _complete_level(sub, sub_modes, level + 1, opts, records, diagnostics)
    partial = [factors[t] for t in sub_modes]
    u_k, diags = solve_mode_vector(tensor, partial, local_k)
    diagnostics.extend(diags)
    factors[modes[local_k - 1]] = u_k
    return factors


def complete(tensor: PartialTensor, options: CompleteOptions | None = None) -> CompletionResult:
    """Run the full recursion and return factors, chain records, and residual.

    Status is ``ok`` when every level's system had a one-dimensional
    nullspace (within tolerance) and no coordinate had to be defaulted;
    ``degraded`` preserves the output but flags those events; ``failed``
    marks an unrecoverable numerical breakdown.
    """
    opts = options or CompleteOptions()
    if len(tensor) == 0:
        raise ValueError("observation set is empty")
    m = tensor.order
    records: list[LevelRecord] = []
    diagnostics: list[str] = []
    try:
        factors = _complete_level(tensor, tuple(range(1, m + 1)), 0, opts, records, diagnostics)
        u = [factors[t] for t in range(1, m + 1)]
        for _ in range(opts.refine_sweeps if m >= 2 else 0):
            for k in range(1, m + 1):
                others = [u[t - 1] for t in range(1, m + 1) if t != k]
                u[k - 1], _ = solve_mode_vector(tensor, others, k)
        status = "ok"
    except NumericalError as exc:
        diagnostics.append(f"numerical failure: {exc}")
        u = [np.zeros(n) for n in tensor.dims]
        status = "failed"
    if status == "ok" and (diagnostics or any(not r.unique_nullspace for r in records)):
        for r in records:
            if not r.unique_nullspace:
                diagnostics.append(
                    f"level {r.level}: nullspace of mode {r.chosen_mode} is not one-dimensional"
                )
        status = "degraded"
    return CompletionResult(
        u=u,
        levels=records,
        fit_residual=residual_on_omega(tensor, u),
        status=status,
        diagnostics=tuple(diagnostics),
    )
