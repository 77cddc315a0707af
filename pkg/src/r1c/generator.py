"""Seeded random instances: observation sets, rank-one ground truth, noise.

Observation sets are built mode by mode: starting from all coordinates of the
first mode, each step links the current label set and the next mode's
coordinates by a random connected chain of edges, so every flattening along
the newest mode stays extractable for generic nonzero data.

All randomness flows through numpy's PCG64 seeded from a SeedSequence, with
one spawned substream per purpose (permutations, chain extensions, factors,
noise) so outputs are reproducible across platforms and order of use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import Index, PartialTensor, outer_values

_PERMUTATIONS, _EXTENSIONS, _FACTORS, _NOISE = range(4)


def _stream(seed: int, purpose: int) -> np.random.Generator:
    children = np.random.SeedSequence(seed).spawn(4)
    return np.random.Generator(np.random.PCG64(children[purpose]))


@dataclass(frozen=True)
class GeneratorConfig:
    dims: tuple[int, ...]
    seed: int
    eps: float = 0.0

    def __post_init__(self):
        if not self.dims or any(n < 1 for n in self.dims):
            raise ValueError(f"invalid dims {self.dims}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


def random_observation_set(dims: Sequence[int], seed: int) -> tuple[Index, ...]:
    """Random connected observation pattern over ``dims``, sorted.

    The pattern for one mode is a chain: a random permutation of the current
    labels is threaded through a random permutation of the new mode's
    coordinates, the shorter side extended by uniform picks; consecutive
    chain links share a vertex, so the bipartite graph of every step is
    connected.  The final set has at most ``2 * max(sides) - 1`` elements per
    step (duplicates collapse).
    """
    dims = tuple(int(n) for n in dims)
    perm_rng = _stream(seed, _PERMUTATIONS)
    ext_rng = _stream(seed, _EXTENSIONS)
    labels: list[Index] = [(i,) for i in range(1, dims[0] + 1)]
    for t in range(1, len(dims)):
        m_cur, n_next = len(labels), dims[t]
        label_order = [int(i) for i in perm_rng.permutation(m_cur)]
        coord_order = [int(j) + 1 for j in perm_rng.permutation(n_next)]
        if m_cur >= n_next:
            coord_order += [int(j) for j in ext_rng.integers(1, n_next + 1, size=m_cur - n_next)]
            length = m_cur
        else:
            label_order += [int(i) for i in ext_rng.integers(0, m_cur, size=n_next - m_cur)]
            length = n_next
        edges = {(labels[label_order[0]], coord_order[0])}
        for l in range(1, length):
            edges.add((labels[label_order[l]], coord_order[l - 1]))
            edges.add((labels[label_order[l]], coord_order[l]))
        labels = sorted(lab + (j,) for lab, j in edges)
    return tuple(labels)


def random_rank_one(dims: Sequence[int], seed: int) -> list[np.ndarray]:
    """Independent standard-normal factor vectors, one per mode."""
    rng = _stream(seed, _FACTORS)
    return [rng.standard_normal(int(n)) for n in dims]


def rank_one_values(factors: Sequence[np.ndarray], indices: Sequence[Index]) -> np.ndarray:
    """Entries of the factors' outer product at the given 1-based indices."""
    if not len(indices):
        return np.zeros(0)
    coords = np.array(list(indices), dtype=np.int64)
    return outer_values(factors, coords)


def perturb(tensor: PartialTensor, eps: float, seed: int) -> PartialTensor:
    """Multiplicative uniform noise: each observed value scaled by 1 + eps*r.

    ``r`` is uniform on [-1, 1], drawn independently per entry in sorted
    index order; ``eps = 0`` returns an identical tensor.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    rng = _stream(seed, _NOISE)
    indices = tensor.indices
    r = rng.uniform(-1.0, 1.0, size=len(indices))
    entries = {idx: tensor.entries[idx] * (1.0 + eps * r[q]) for q, idx in enumerate(indices)}
    return PartialTensor(tensor.dims, entries)


@dataclass(frozen=True)
class GeneratedInstance:
    config: GeneratorConfig
    omega: tuple[Index, ...]
    factors: list[np.ndarray]
    exact: PartialTensor
    noisy: PartialTensor
    noise_norm: float


def make_instance(dims: Sequence[int], seed: int, eps: float = 0.0) -> GeneratedInstance:
    """Observation set + rank-one data + noise, all from one seed."""
    config = GeneratorConfig(tuple(int(n) for n in dims), int(seed), float(eps))
    omega = random_observation_set(config.dims, config.seed)
    factors = random_rank_one(config.dims, config.seed)
    values = rank_one_values(factors, omega)
    exact = PartialTensor(config.dims, dict(zip(omega, values)))
    noisy = perturb(exact, config.eps, config.seed) if eps > 0 else exact
    noise_norm = float(np.linalg.norm(noisy.values - exact.values))
    return GeneratedInstance(config, omega, factors, exact, noisy, noise_norm)
