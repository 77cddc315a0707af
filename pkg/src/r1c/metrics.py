"""Evaluation quantities for a completed instance against ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import Index, outer_values


@dataclass(frozen=True)
class Metrics:
    """Completion quality for one trial.

    ``err_ab`` is the norm of the difference of the two outer products over
    the observation set; ``err_rt`` divides by the noise norm and is NaN with
    ``err_rt_defined=False`` when that norm is zero.  ``sin_theta`` averages
    the per-mode angular errors, each scale-invariant in [0, 1].
    """

    err_ab: float
    err_rt: float
    sin_theta: float
    density: float
    runtime_seconds: float
    err_rt_defined: bool = True


def completion_errors(
    u_true: Sequence[np.ndarray],
    u_hat: Sequence[np.ndarray],
    omega: Sequence[Index],
    delta_norm: float,
    runtime_seconds: float = 0.0,
) -> Metrics:
    """Compare two factor tuples over an observation set.

    Angles clamp the cosine to [-1, 1]; a zero factor vector on either side
    is rejected naming the offending mode.
    """
    if len(u_true) != len(u_hat):
        raise ValueError("factor tuples have different lengths")
    m = len(u_true)
    dims = []
    for t in range(m):
        a = np.asarray(u_true[t], dtype=float)
        b = np.asarray(u_hat[t], dtype=float)
        if a.shape != b.shape:
            raise ValueError(f"mode {t + 1}: factor shapes differ ({a.shape} vs {b.shape})")
        if np.linalg.norm(a) == 0.0 or np.linalg.norm(b) == 0.0:
            raise ValueError(f"mode {t + 1}: zero factor vector")
        dims.append(a.shape[0])
    if not len(omega):
        raise ValueError("observation set is empty")
    coords = np.array(list(omega), dtype=np.int64)
    diff = outer_values(u_true, coords) - outer_values(u_hat, coords)
    err_ab = float(np.linalg.norm(diff))
    defined = delta_norm > 0.0
    err_rt = err_ab / delta_norm if defined else math.nan
    sins = []
    for t in range(m):
        a = np.asarray(u_true[t], dtype=float)
        b = np.asarray(u_hat[t], dtype=float)
        a = a / float(np.linalg.norm(a))
        b = b / float(np.linalg.norm(b))
        c = min(1.0, max(-1.0, float(a @ b)))
        # |sin(arccos(c))| evaluated through the rejection of a from b, which
        # stays exact near 0 and pi where 1 - c*c loses all precision
        sins.append(float(np.linalg.norm(a - c * b)))
    density = len(omega) / math.prod(dims)
    return Metrics(
        err_ab=err_ab,
        err_rt=err_rt,
        sin_theta=float(np.mean(sins)),
        density=density,
        runtime_seconds=runtime_seconds,
        err_rt_defined=defined,
    )
