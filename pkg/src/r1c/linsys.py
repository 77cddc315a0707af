"""Sparse homogeneous systems from flattenings and their small singular pairs.

Every pair of observations sharing a column of a flattening yields one
two-nonzero row; the stacked rows form a sparse homogeneous system whose
nullspace carries the row profile of any rank-one completion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .tensor import FlattenedView, Index

_EPS = float(np.finfo(np.float64).eps)

# Dense SVD below this column count, block inverse iteration above.
DENSE_COLUMN_LIMIT = 512


class NumericalError(RuntimeError):
    """Iterative solve failed to converge; carries the best iterate found."""

    def __init__(self, message, best_vector=None, residual=None):
        super().__init__(message)
        self.best_vector = best_vector
        self.residual = residual


@dataclass(frozen=True)
class SparseSystem:
    """COO triplets of the pairwise system, with per-row provenance.

    ``row_provenance[r] = (j, vec_i, vec_i2)`` records that row r compares the
    observations (vec_i, j) and (vec_i2, j); the row reads
    ``value(vec_i, j) * x[vec_i2] - value(vec_i2, j) * x[vec_i] = 0``.
    Rows whose two observed values are both zero are kept in the row count but
    carry no triplets.
    """

    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    col_labels: Optional[tuple[Index, ...]] = None
    row_provenance: Optional[tuple[tuple[int, Index, Index], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.int64))
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.int64))
        object.__setattr__(self, "vals", np.asarray(self.vals, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def to_csr(self) -> sp.csr_matrix:
        return sp.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.nrows, self.ncols)
        ).tocsr()

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.nrows, self.ncols))
        np.add.at(dense, (self.rows, self.cols), self.vals)
        return dense

    @classmethod
    def from_dense(cls, matrix) -> "SparseSystem":
        matrix = np.asarray(matrix, dtype=float)
        rows, cols = np.nonzero(matrix)
        return cls(matrix.shape[0], matrix.shape[1], rows, cols, matrix[rows, cols])

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.vals))


class SingularTriplet(NamedTuple):
    """Smallest singular pair of a system.

    ``gap`` is the difference of the two smallest singular values when the
    system has at least as many rows as columns, and 0.0 with
    ``underdetermined=True`` otherwise.  ``sigma_second`` is the second
    smallest singular value with zero-padding to ``ncols`` values, which is
    what mode selection needs even in the underdetermined case.
    """

    sigma_min: float
    right_vector: np.ndarray
    gap: float
    underdetermined: bool
    sigma_second: float


def build_system(view: FlattenedView) -> SparseSystem:
    """Assemble the pairwise homogeneous system of a flattening.

    Rows enumerate unordered label pairs within each column group, columns
    ascending then pairs in lexicographic order, so the layout is
    deterministic and reproducible.
    """
    if len(view.row_labels) < 1:
        raise ValueError("flattening has no observed rows")
    pos = view.row_positions
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    provenance: list[tuple[int, Index, Index]] = []
    r = 0
    for j in view.col_labels:
        group = view.column_groups[j]
        for a, b in combinations(group, 2):
            va = view.obs[(a, j)]
            vb = view.obs[(b, j)]
            if va != 0.0:
                rows.append(r)
                cols.append(pos[b])
                vals.append(va)
            if vb != 0.0:
                rows.append(r)
                cols.append(pos[a])
                vals.append(-vb)
            provenance.append((j, a, b))
            r += 1
    return SparseSystem(
        nrows=r,
        ncols=len(view.row_labels),
        rows=np.array(rows, dtype=np.int64),
        cols=np.array(cols, dtype=np.int64),
        vals=np.array(vals, dtype=np.float64),
        col_labels=view.row_labels,
        row_provenance=tuple(provenance),
    )


def row_equilibrated(system: SparseSystem) -> SparseSystem:
    """Rescale every row to unit Euclidean norm (zero rows stay zero).

    Row scaling does not change the nullspace, but it makes the small
    singular pairs reflect the ratio constraints uniformly instead of being
    dominated by the largest observed values.
    """
    norms2 = np.zeros(max(system.nrows, 1))
    np.add.at(norms2, system.rows, system.vals**2)
    scale = np.ones_like(norms2)
    nz = norms2 > 0
    scale[nz] = 1.0 / np.sqrt(norms2[nz])
    return SparseSystem(
        system.nrows,
        system.ncols,
        system.rows,
        system.cols,
        system.vals * scale[system.rows],
        system.col_labels,
        system.row_provenance,
    )


def _sign_fix(v: np.ndarray) -> np.ndarray:
    """Flip so the first entry of largest magnitude is positive."""
    if v.size == 0:
        return v
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _start_block(n: int, b: int) -> np.ndarray:
    # Deterministic, well-spread start subspace: offset cosine modes.
    idx = np.arange(n)
    block = np.empty((n, b))
    for j in range(b):
        block[:, j] = np.cos((j + 1) * np.pi * (idx + 0.5) / n)
    block[:, 0] += 1.0
    q, _ = np.linalg.qr(block)
    return q


def _gram_smallest(csr: sp.csr_matrix, n: int, k: int, max_iter: int):
    """Smallest k eigenpairs of B^T B by shifted block inverse iteration.

    Deterministic: fixed start block, fixed iteration order.  Returns
    (eigenvalues ascending, eigenvectors) of the Gram matrix.
    """
    gram = (csr.T @ csr).tocsc()
    scale = float(abs(gram).sum(axis=0).max()) if gram.nnz else 0.0
    b = min(max(k + 2, 4), n)
    if scale == 0.0:
        vecs = np.zeros((n, b))
        vecs[np.arange(b), np.arange(b)] = 1.0
        return np.zeros(b), vecs
    lu = None
    for shift in (max(1e-8 * scale, 1e-280), max(1e-2 * scale, 1e-250)):
        try:
            lu = splu((gram + shift * sp.identity(n, format="csc")).tocsc())
            break
        except RuntimeError:
            continue
    if lu is None:
        raise NumericalError("shifted Gram factorization failed at all shifts")
    block = _start_block(n, b)
    prev = None
    lam = np.zeros(b)
    ritz = block
    for _ in range(max_iter):
        block = lu.solve(block)
        block, _ = np.linalg.qr(block)
        small = block.T @ (gram @ block)
        lam, w = np.linalg.eigh(small)
        ritz = block @ w
        if prev is not None and np.all(np.abs(lam - prev) <= 1e-13 * (scale + np.abs(lam))):
            break
        prev = lam
    lam = np.clip(lam, 0.0, None)
    # Convergence check on the smallest pair; the rest are only used as bounds.
    res = float(np.linalg.norm(gram @ ritz[:, 0] - lam[0] * ritz[:, 0]))
    if not np.isfinite(res) or res > 1e-6 * scale:
        raise NumericalError(
            f"inverse iteration stalled (residual {res:.3e} at scale {scale:.3e})",
            best_vector=ritz[:, 0],
            residual=res,
        )
    return lam, ritz


def smallest_singular(
    system: SparseSystem,
    tol: float | None = None,
    method: str = "auto",
    max_iter: int = 200,
) -> SingularTriplet:
    """Smallest singular value/right vector of the system, plus the gap.

    When ``nrows >= ncols`` this is the trailing singular pair; when
    ``nrows < ncols`` the system is underdetermined, ``sigma_min`` is reported
    as 0 and the vector is a unit nullspace element.  The returned vector has
    its largest-magnitude entry positive (ties to the lowest index).
    """
    l, n = system.nrows, system.ncols
    if n < 1:
        raise ValueError("system has no columns")
    under = l < n
    if l == 0:
        v = np.zeros(n)
        v[0] = 1.0
        return SingularTriplet(0.0, v, 0.0, True, 0.0)
    if n == 1:
        dense = system.to_dense()
        s = float(np.linalg.norm(dense[:, 0]))
        return SingularTriplet(s, np.ones(1), 0.0, False, 0.0)
    requested = method
    if method == "auto":
        method = "dense" if n <= DENSE_COLUMN_LIMIT else "iterative"
    if method == "dense":
        dense = system.to_dense()
        if under:
            # Small by construction; the full V exposes the nullspace rows.
            _, svals, vt = np.linalg.svd(dense, full_matrices=True)
            svals = np.concatenate([svals, np.zeros(n - l)])
            v = _sign_fix(vt[n - 1].copy())
            return SingularTriplet(0.0, v, 0.0, True, float(svals[n - 2]))
        if l <= 8 * n:
            _, svals, vt = np.linalg.svd(dense, full_matrices=False)
            v = _sign_fix(vt[n - 1].copy())
            sigma_min = float(svals[n - 1])
            sigma_second = float(svals[n - 2])
        else:
            # Very tall: work on the Gram matrix, then refine against B itself.
            lam, vecs = np.linalg.eigh(dense.T @ dense)
            v = _sign_fix(vecs[:, 0].copy())
            sigma_min = float(np.linalg.norm(dense @ v))
            sigma_second = float(np.linalg.norm(dense @ vecs[:, 1]))
        return SingularTriplet(sigma_min, v, sigma_second - sigma_min, False, sigma_second)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    csr = system.to_csr()
    try:
        _, vecs = _gram_smallest(csr, n, k=2, max_iter=max_iter)
    except NumericalError:
        if requested == "auto" and n <= 4096:
            return smallest_singular(system, tol=tol, method="dense", max_iter=max_iter)
        raise
    v = vecs[:, 0]
    v = _sign_fix(v / np.linalg.norm(v))
    # Evaluating through B itself recovers accuracy near zero that squared
    # Gram eigenvalues cannot resolve.
    sigma_min = float(np.linalg.norm(csr @ v))
    sigma_second = (
        float(np.linalg.norm(csr @ (vecs[:, 1] / np.linalg.norm(vecs[:, 1]))))
        if vecs.shape[1] > 1
        else 0.0
    )
    if under:
        # Pad the singular value list with zeros up to ncols.
        sigma_second = sigma_second if l == n - 1 else 0.0
        return SingularTriplet(0.0, v, 0.0, True, sigma_second)
    return SingularTriplet(sigma_min, v, sigma_second - sigma_min, False, sigma_second)


def _dense_singular_values(dense: np.ndarray) -> np.ndarray:
    """Singular values, zero-padded to ncols, descending."""
    l, n = dense.shape
    svals = np.linalg.svd(dense, compute_uv=False)
    return np.concatenate([svals, np.zeros(max(0, n - l))])


def nullspace_dimension(system: SparseSystem, tol: float | None = None, method: str = "auto") -> int:
    """Number of singular values at or below ``tol * max(1, sigma_max)``.

    Underdetermined systems count the structural deficit ``ncols - nrows`` as
    well.  Default ``tol`` is ``max(nrows, ncols) * eps``.
    """
    l, n = system.nrows, system.ncols
    if n < 1:
        raise ValueError("system has no columns")
    if l == 0:
        return n
    if tol is None:
        tol = max(l, n) * _EPS
    if method == "auto":
        method = "dense" if n <= DENSE_COLUMN_LIMIT else "iterative"
    if method == "dense":
        svals = _dense_singular_values(system.to_dense())
        threshold = tol * max(1.0, float(svals[0]))
        return int(np.sum(svals <= threshold))
    csr = system.to_csr()
    sigma_max = _sigma_max_estimate(csr, n)
    threshold = tol * max(1.0, sigma_max)
    k = 4
    while True:
        k_eff = min(k, n - 1) if n > 1 else 1
        _, vecs = _gram_smallest(csr, n, k=k_eff, max_iter=200)
        norms = np.linalg.norm(vecs, axis=0)
        sigmas = np.linalg.norm(csr @ (vecs / norms), axis=0)
        count = int(np.sum(np.sort(sigmas) <= threshold))
        structural = max(0, n - l)
        if count < vecs.shape[1] or vecs.shape[1] >= n:
            return max(count, structural)
        if k >= 64:
            if n <= 4096:
                svals = _dense_singular_values(system.to_dense())
                return int(np.sum(svals <= tol * max(1.0, float(svals[0]))))
            raise NumericalError(
                f"nullspace dimension exceeds {vecs.shape[1]}; system too large for dense fallback"
            )
        k *= 2


def _sigma_max_estimate(csr: sp.csr_matrix, n: int, iters: int = 60) -> float:
    """Deterministic power-iteration estimate of the largest singular value."""
    v = np.ones(n) / math.sqrt(n)
    v += np.arange(n) * (1e-3 / max(n, 1))
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(iters):
        w = csr.T @ (csr @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - last) <= 1e-10 * nw:
            break
        last = nw
    return math.sqrt(nw)


class StabilityBound(NamedTuple):
    constant: float
    radius: float
    wide: bool


def stability_constant(system: SparseSystem, tol: float | None = None) -> StabilityBound:
    """Nullvector perturbation bound for a system of nullity exactly one.

    For an l x n system of rank n-1 with second-smallest singular value s,
    a perturbation of spectral norm at most ``radius`` moves the sign-aligned
    unit nullvector by at most ``constant`` times that norm.  Tall systems
    give constant 4*sqrt(2)/s with radius s/4, wide ones (l = n-1) give
    3*sqrt(2)/s with radius s/3.
    """
    dim = nullspace_dimension(system, tol=tol)
    if dim != 1:
        raise ValueError(f"nullspace dimension is {dim}, expected exactly 1")
    triplet = smallest_singular(system, tol=tol)
    s = triplet.sigma_second
    wide = system.nrows < system.ncols
    factor = 3.0 if wide else 4.0
    return StabilityBound(factor * math.sqrt(2.0) / s, s / factor, wide)
