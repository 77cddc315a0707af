"""Partially observed tensors, mode-k flattenings, and observation-restricted norms.

A partially observed tensor is a dimension tuple together with a finite map
from 1-based multi-indices to real values.  All public indices are 1-based;
numpy coordinate arrays used internally are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

Index = tuple[int, ...]


def _check_index(idx, dims) -> Index:
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(dims):
        raise ValueError(f"index {idx} has {len(idx)} coordinates, expected {len(dims)}")
    for i, n in zip(idx, dims):
        if not 1 <= i <= n:
            raise ValueError(f"index {idx} out of range for dims {dims}")
    return idx


@dataclass(frozen=True)
class PartialTensor:
    """A tensor observed on a finite label set.

    ``entries`` maps multi-indices to observed values; its key set is the
    observation set.  Instances are immutable and safe to share.
    """

    dims: tuple[int, ...]
    entries: Mapping[Index, float]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) < 1 or any(n < 1 for n in dims):
            raise ValueError(f"invalid dims {self.dims}")
        entries = {_check_index(k, dims): float(v) for k, v in self.entries.items()}
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_cache", {})

    @classmethod
    def from_pairs(cls, dims, pairs: Iterable[tuple[Sequence[int], float]]) -> "PartialTensor":
        """Build from (index, value) pairs, rejecting duplicate indices."""
        entries: dict[Index, float] = {}
        for idx, val in pairs:
            key = tuple(int(i) for i in idx)
            if key in entries:
                raise ValueError(f"duplicate index {key}")
            entries[key] = float(val)
        return cls(tuple(dims), entries)

    @property
    def order(self) -> int:
        return len(self.dims)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def indices(self) -> tuple[Index, ...]:
        """Observation set, sorted lexicographically."""
        if "indices" not in self._cache:
            self._cache["indices"] = tuple(sorted(self.entries))
        return self._cache["indices"]

    @property
    def coords(self) -> np.ndarray:
        """1-based index matrix of shape (#observations, order), row i = indices[i]."""
        if "coords" not in self._cache:
            idx = self.indices
            arr = np.array(idx, dtype=np.int64) if idx else np.zeros((0, self.order), np.int64)
            self._cache["coords"] = arr
        return self._cache["coords"]

    @property
    def values(self) -> np.ndarray:
        """Observed values aligned with ``indices``."""
        if "values" not in self._cache:
            self._cache["values"] = np.array([self.entries[i] for i in self.indices], dtype=float)
        return self._cache["values"]

    def scaled(self, c: float) -> "PartialTensor":
        return PartialTensor(self.dims, {k: c * v for k, v in self.entries.items()})


@dataclass(frozen=True)
class FlattenedView:
    """The mode-k flattening of a partially observed tensor.

    Rows are labelled by the reduced multi-indices (mode k removed, original
    mode order preserved), columns by the mode-k coordinate.  ``row_labels``
    and ``col_labels`` are sorted, so positions are deterministic.
    """

    base_dims: tuple[int, ...]
    mode: int
    row_labels: tuple[Index, ...]
    col_labels: tuple[int, ...]
    obs: Mapping[tuple[Index, int], float]

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})

    @property
    def reduced_dims(self) -> tuple[int, ...]:
        k = self.mode
        return self.base_dims[: k - 1] + self.base_dims[k:]

    @property
    def column_groups(self) -> Mapping[int, tuple[Index, ...]]:
        """For each observed column, the sorted row labels observed in it."""
        if "groups" not in self._cache:
            groups: dict[int, list[Index]] = {}
            for (vec, j) in self.obs:
                groups.setdefault(j, []).append(vec)
            self._cache["groups"] = {j: tuple(sorted(g)) for j, g in groups.items()}
        return self._cache["groups"]

    @property
    def row_positions(self) -> Mapping[Index, int]:
        if "rowpos" not in self._cache:
            self._cache["rowpos"] = {lab: p for p, lab in enumerate(self.row_labels)}
        return self._cache["rowpos"]


def flatten(tensor: PartialTensor, mode: int) -> FlattenedView:
    """Flatten ``tensor`` along ``mode`` (1-based), keeping only observed cells."""
    m = tensor.order
    if m < 2:
        raise ValueError("flattening requires order >= 2")
    if not 1 <= mode <= m:
        raise ValueError(f"mode {mode} out of range for order {m}")
    obs: dict[tuple[Index, int], float] = {}
    for idx, val in tensor.entries.items():
        vec = idx[: mode - 1] + idx[mode:]
        obs[(vec, idx[mode - 1])] = val
    row_labels = tuple(sorted({vec for vec, _ in obs}))
    col_labels = tuple(sorted({j for _, j in obs}))
    return FlattenedView(tensor.dims, mode, row_labels, col_labels, obs)


def reshape_solution(x, view: FlattenedView) -> PartialTensor:
    """Reshape a vector labelled by ``view.row_labels`` into an order-(m-1) tensor.

    The result is observed exactly on the row label set; entry values copy x.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != len(view.row_labels):
        raise ValueError(
            f"solution length {x.shape[0]} does not match {len(view.row_labels)} row labels"
        )
    entries = {lab: float(x[p]) for p, lab in enumerate(view.row_labels)}
    return PartialTensor(view.reduced_dims, entries)


def omega_norm(tensor: PartialTensor) -> float:
    """Euclidean norm of the observed values."""
    return float(np.linalg.norm(tensor.values))


def outer_values(factors: Sequence[np.ndarray], coords: np.ndarray) -> np.ndarray:
    """Evaluate the outer product of ``factors`` at 1-based index rows ``coords``."""
    out = np.ones(coords.shape[0], dtype=float)
    for t, u in enumerate(factors):
        out *= np.asarray(u, dtype=float)[coords[:, t] - 1]
    return out


def residual_on_omega(tensor: PartialTensor, factors: Sequence[np.ndarray]) -> float:
    """Norm of (tensor - outer product of factors) over the observation set."""
    if len(factors) != tensor.order:
        raise ValueError(f"expected {tensor.order} factors, got {len(factors)}")
    for t, (u, n) in enumerate(zip(factors, tensor.dims), start=1):
        if np.asarray(u).shape != (n,):
            raise ValueError(f"factor {t} has shape {np.asarray(u).shape}, expected ({n},)")
    if not len(tensor):
        return 0.0
    fit = outer_values(factors, tensor.coords)
    return float(np.linalg.norm(tensor.values - fit))
