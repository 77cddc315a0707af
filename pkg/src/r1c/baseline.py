"""Levenberg-Marquardt baseline fitting all factor vectors at once.

Minimizes the squared misfit between observed values and the outer product
of the stacked factor variables, with the analytic Jacobian.  Used only as
the comparison point for the recursive method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import PartialTensor


@dataclass(frozen=True)
class NlsOptions:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    initial_damping: Optional[float] = None
    seed: int = 0
    min_gain_ratio: float = 0.0
    damping_increase: float = 3.0
    damping_decrease: float = 3.0

    def __post_init__(self):
        if self.max_iterations < 1 or self.gradient_tolerance <= 0:
            raise ValueError("max_iterations and gradient_tolerance must be positive")
        if self.damping_increase <= 1 or self.damping_decrease <= 1:
            raise ValueError("damping factors must exceed 1")


@dataclass(frozen=True)
class NlsResult:
    factors: list[np.ndarray]
    objective: float
    iterations: int
    converged: bool
    gradient_norm: float


def _split(x: np.ndarray, dims) -> list[np.ndarray]:
    out, start = [], 0
    for n in dims:
        out.append(x[start : start + n])
        start += n
    return out


def _residual_jacobian(x: np.ndarray, tensor: PartialTensor, offsets, want_jacobian=True):
    m = tensor.order
    coords = tensor.coords
    factors = _split(x, tensor.dims)
    per_mode = np.empty((m, len(tensor)))
    for t in range(m):
        per_mode[t] = factors[t][coords[:, t] - 1]
    fit = per_mode.prod(axis=0)
    residual = tensor.values - fit
    if not want_jacobian:
        return residual, None
    jac = np.zeros((len(tensor), offsets[-1]))
    rows = np.arange(len(tensor))
    for t in range(m):
        others = np.ones(len(tensor))
        for s in range(m):
            if s != t:
                others *= per_mode[s]
        jac[rows, offsets[t] + coords[:, t] - 1] = -others
    return residual, jac


def nls_fit(
    tensor: PartialTensor,
    options: NlsOptions | None = None,
    initial: Optional[list[np.ndarray]] = None,
) -> NlsResult:
    """Fit factor vectors by damped least squares from a random start.

    Returns the best iterate found; non-convergence is reported through the
    ``converged`` flag rather than raised.  The objective never increases
    across accepted steps.
    """
    opts = options or NlsOptions()
    if len(tensor) == 0:
        raise ValueError("observation set is empty")
    dims = tensor.dims
    offsets = np.cumsum([0] + list(dims))
    if initial is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(opts.seed)))
        x = np.concatenate([rng.standard_normal(n) for n in dims])
    else:
        x = np.concatenate([np.asarray(u, dtype=float) for u in initial])
        if x.shape[0] != offsets[-1]:
            raise ValueError("initial factors do not match dims")

    residual, jac = _residual_jacobian(x, tensor, offsets)
    objective = float(residual @ residual)
    damping = opts.initial_damping
    if damping is None:
        col_norms2 = (jac**2).sum(axis=0)
        damping = 1e-3 * float(col_norms2.mean()) if col_norms2.size else 1e-3
        damping = max(damping, 1e-12)
    gradient = jac.T @ residual
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        gnorm = float(np.linalg.norm(2.0 * gradient))
        if gnorm <= opts.gradient_tolerance:
            return NlsResult(_split(x, dims), objective, iterations - 1, True, gnorm)
        normal = jac.T @ jac
        normal[np.diag_indices_from(normal)] += damping
        try:
            step = np.linalg.solve(normal, -gradient)
        except np.linalg.LinAlgError:
            damping *= opts.damping_increase
            continue
        x_new = x + step
        residual_new, _ = _residual_jacobian(x_new, tensor, offsets, want_jacobian=False)
        objective_new = float(residual_new @ residual_new)
        predicted = float(step @ (damping * step - gradient))
        actual = objective - objective_new
        ratio = actual / predicted if predicted > 0 else (1.0 if actual > 0 else -1.0)
        if actual > 0 and ratio > opts.min_gain_ratio:
            x = x_new
            residual, jac = _residual_jacobian(x, tensor, offsets)
            objective = objective_new
            gradient = jac.T @ residual
            damping /= opts.damping_decrease
        else:
            damping *= opts.damping_increase
    gnorm = float(np.linalg.norm(2.0 * gradient))
    return NlsResult(_split(x, dims), objective, iterations, gnorm <= opts.gradient_tolerance, gnorm)
