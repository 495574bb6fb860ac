"""Log-linear smoothing of cell counts by iterative proportional fitting.

The model of order m keeps all interactions among at most m of the d
axes and drops the higher-order ones; operationally that means matching
every m-way margin of the observed table.  Only the fitted frequencies
matter downstream, never the log-linear parameters themselves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True)
class MarginSpec:
    """The axis subsets whose margins the fit must reproduce."""

    subsets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        subsets = tuple(tuple(sorted(s)) for s in self.subsets)
        if len(set(subsets)) != len(subsets):
            raise ValueError("margin subsets must be distinct")
        object.__setattr__(self, "subsets", subsets)

    @classmethod
    def all_subsets(cls, d: int, m: int) -> "MarginSpec":
        """All C(d, m) subsets of size m out of d axes."""
        if not 1 <= m <= d:
            raise ValueError(f"order m must satisfy 1 <= m <= d, got m={m}, d={d}")
        return cls(tuple(itertools.combinations(range(d), m)))


@dataclass(frozen=True)
class LogLinearFit:
    """Fitted frequencies, their probabilities, and convergence diagnostics."""

    fitted: np.ndarray
    probs: np.ndarray
    iterations: int
    max_margin_gap: float
    converged: bool


def margin(counts: np.ndarray, shape: Sequence[int], subset: Sequence[int]) -> np.ndarray:
    """Sum a flat row-major table over every axis not in ``subset``.

    The result has shape (r_k for k in sorted(subset)); the empty subset
    yields the grand total as a 0-d array.
    """
    shape = tuple(shape)
    table = np.asarray(counts).reshape(shape)
    drop = tuple(k for k in range(len(shape)) if k not in set(subset))
    return table.sum(axis=drop)


def _broadcast_over(values: np.ndarray, d: int, subset: tuple[int, ...]) -> np.ndarray:
    """Reshape a margin-shaped array so it broadcasts against the full table."""
    expand = tuple(k for k in range(d) if k not in set(subset))
    return np.expand_dims(values, axis=expand)


def ipf_fit(
    counts: np.ndarray,
    shape: Sequence[int],
    spec: MarginSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LogLinearFit:
    """Iterative proportional fitting of the hierarchical model in ``spec``.

    Starting from the uniform table scaled to the observed total, each
    cycle rescales the current table so that one margin at a time matches
    the observed one (0/0 reads as 0, which preserves structural zeros).
    Iteration stops when the largest absolute margin gap falls below
    ``tol``.  Hitting ``max_iter`` is recorded in the fit, not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    shape = tuple(int(r) for r in shape)
    observed = np.asarray(counts, dtype=float).reshape(shape)
    if np.any(observed < 0):
        raise ValueError("counts must be non-negative")
    n = observed.sum()
    if n <= 0:
        raise ValueError("counts must have a positive total")

    d = len(shape)
    target = {s: margin(observed, shape, s) for s in spec.subsets}
    fitted = np.full(shape, n / observed.size)

    gap = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        for s in spec.subsets:
            current = margin(fitted, shape, s)
            ratio = np.divide(
                target[s], current, out=np.zeros_like(current), where=current > 0
            )
            fitted *= _broadcast_over(ratio, d, s)
        gap = max(
            float(np.max(np.abs(margin(fitted, shape, s) - target[s])))
            for s in spec.subsets
        )
        if gap < tol:
            break

    flat = fitted.reshape(-1)
    return LogLinearFit(
        fitted=flat,
        probs=flat / n,
        iterations=iterations,
        max_margin_gap=gap,
        converged=gap < tol,
    )


def fit_probabilities(fit: LogLinearFit, n: int) -> np.ndarray:
    """Cell probabilities fitted/n; they sum to one."""
    if n <= 0:
        raise ValueError("n must be positive")
    return fit.fitted / n


def model_dof(shape: Sequence[int], m: int) -> int:
    """Free parameters of the order-m model: sum over retained interaction terms.

    Diagnostic only; the saturated table has prod(r_k) parameters and the
    drop from saturated to order d-1 equals prod(r_k - 1).
    """
    shape = tuple(shape)
    total = 0
    for t in range(m + 1):
        for subset in itertools.combinations(range(len(shape)), t):
            total += math.prod(shape[k] - 1 for k in subset)
    return total
