"""Data-driven rectangular partition of the sample space.

Each axis is split into intervals whose end-points are sample quantiles
taken at Beta(3/4, 3/4) quantile levels, so central intervals come out
shorter than the outer ones.  The number of intervals per axis follows
Scott's normal reference rule for histogram bin widths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv

BIN_COUNT_MIN = 2
BIN_COUNT_MAX = 50


class DegenerateAxisError(ValueError):
    """A coordinate has zero sample variance, so no bin width exists."""


class LatticeConstructionError(ValueError):
    """Breakpoints could not be made strictly increasing."""


@dataclass(frozen=True)
class Sample:
    """An n x d matrix of observations.

    Requires finite entries, n >= 2, and strictly positive standard
    deviation on every column.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError("sample data must be a 2-d array of shape (n, d)")
        n, d = data.shape
        if n < 2:
            raise ValueError(f"need at least 2 observations, got {n}")
        if d < 1:
            raise ValueError("need at least one coordinate")
        if not np.all(np.isfinite(data)):
            raise ValueError("sample contains non-finite entries")
        if np.any(data.std(axis=0, ddof=1) <= 0.0):
            raise DegenerateAxisError("every column must have positive variance")
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Lattice:
    """Per-axis strictly increasing breakpoints; axis k has r_k cells."""

    breaks: tuple[np.ndarray, ...]

    def __post_init__(self):
        breaks = tuple(np.asarray(b, dtype=float) for b in self.breaks)
        for k, b in enumerate(breaks):
            if b.ndim != 1 or b.size < 3:
                raise LatticeConstructionError(
                    f"axis {k}: need at least 3 breakpoints (2 cells)"
                )
            if not np.all(np.diff(b) > 0.0):
                raise LatticeConstructionError(
                    f"axis {k}: breakpoints are not strictly increasing"
                )
        object.__setattr__(self, "breaks", breaks)

    @property
    def d(self) -> int:
        return len(self.breaks)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b.size - 1 for b in self.breaks)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def widths(self, axis: int) -> np.ndarray:
        return np.diff(self.breaks[axis])


@dataclass(frozen=True)
class CellIndex:
    """Multidimensional cell subscript with a row-major flattening."""

    idx: tuple[int, ...]

    def flat(self, lattice: Lattice) -> int:
        return int(np.ravel_multi_index(self.idx, lattice.shape))


@dataclass(frozen=True)
class CellTable:
    """Observed cell counts and geometric cell volumes, flat row-major."""

    lattice: Lattice
    counts: np.ndarray
    volumes: np.ndarray | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (self.lattice.n_cells,):
            raise ValueError("counts must be flat over the lattice cells")
        volumes = self.volumes
        if volumes is None:
            volumes = cell_volumes(self.lattice)
        volumes = np.asarray(volumes, dtype=float)
        if volumes.shape != counts.shape or np.any(volumes <= 0.0):
            raise ValueError("volumes must be positive and match counts")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "volumes", volumes)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def scott_bin_counts(sample: Sample) -> np.ndarray:
    """Number of bins per axis from the normal reference rule.

    The bin width is b_k = 3.5 * s_k * n**(-1/(2+d)); the count is the
    per-axis sample range divided by b_k, rounded, then clamped to
    [BIN_COUNT_MIN, BIN_COUNT_MAX].
    """
    data = sample.data
    n, d = data.shape
    s = data.std(axis=0, ddof=1)
    if np.any(s <= 0.0):
        raise DegenerateAxisError("zero-variance column")
    widths = 3.5 * s * n ** (-1.0 / (2.0 + d))
    ranges = data.max(axis=0) - data.min(axis=0)
    r = np.rint(ranges / widths).astype(int)
    return np.clip(r, BIN_COUNT_MIN, BIN_COUNT_MAX)


def beta_quantile_levels(r_k: int) -> np.ndarray:
    """Levels (0, 1/r_k, ..., 1) mapped through the Beta(3/4, 3/4) quantile."""
    if r_k < 1:
        raise ValueError("need at least one interval")
    levels = np.arange(r_k + 1) / r_k
    return betaincinv(0.75, 0.75, levels)


def beta_breakpoints(values: np.ndarray, r_k: int) -> np.ndarray:
    """Interval end-points on one axis: sample quantiles at Beta(3/4,3/4) levels.

    The end-points are the sample min and max; interior levels compress
    toward the sample centre.  Tied quantiles are perturbed upward by the
    smallest representable step to keep the output strictly increasing.
    """
    values = np.asarray(values, dtype=float)
    breaks = np.quantile(values, beta_quantile_levels(r_k))
    for i in range(1, breaks.size):
        if breaks[i] <= breaks[i - 1]:
            breaks[i] = np.nextafter(breaks[i - 1], np.inf)
    if not np.all(np.diff(breaks) > 0.0):
        raise LatticeConstructionError("breakpoints not increasing after perturbation")
    return breaks


def build_lattice(sample: Sample, offset: int = 0) -> Lattice:
    """Lattice with Scott bin counts shifted by ``offset`` (floor of 2 per axis)."""
    r = scott_bin_counts(sample) + offset
    r = np.maximum(r, BIN_COUNT_MIN)
    breaks = tuple(
        beta_breakpoints(sample.data[:, k], int(r[k])) for k in range(sample.d)
    )
    return Lattice(breaks)


def locate_rows(lattice: Lattice, points: np.ndarray) -> np.ndarray:
    """Per-axis cell subscripts for each row of ``points``, shape (n, d).

    Cells are half-open on the right except the last one; coordinates
    beyond the lattice hull clamp to the boundary cells.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.empty(points.shape, dtype=np.intp)
    for k, b in enumerate(lattice.breaks):
        j = np.searchsorted(b, points[:, k], side="right") - 1
        idx[:, k] = np.clip(j, 0, b.size - 2)
    return idx


def locate(lattice: Lattice, point: np.ndarray) -> CellIndex:
    """Cell containing a single point (total on finite inputs)."""
    idx = locate_rows(lattice, np.asarray(point, dtype=float).reshape(1, -1))[0]
    return CellIndex(tuple(int(i) for i in idx))


def cell_volumes(lattice: Lattice) -> np.ndarray:
    """Flat row-major vector of cell volumes."""
    vol = np.ones((1,))
    for k in range(lattice.d):
        vol = np.multiply.outer(vol, lattice.widths(k)).reshape(-1)
    return vol


def tabulate(sample: Sample, lattice: Lattice) -> CellTable:
    """Count sample points per cell; the counts always sum to n."""
    idx = locate_rows(lattice, sample.data)
    flat = np.ravel_multi_index(tuple(idx.T), lattice.shape)
    counts = np.bincount(flat, minlength=lattice.n_cells)
    return CellTable(lattice, counts)


def crude_density(table: CellTable, n: int, point: np.ndarray) -> float:
    """Piecewise-constant estimate n_j / (n * vol(R_j)) at ``point``."""
    if n <= 0:
        raise ValueError("n must be positive")
    j = locate(table.lattice, point).flat(table.lattice)
    return float(table.counts[j]) / (n * float(table.volumes[j]))
