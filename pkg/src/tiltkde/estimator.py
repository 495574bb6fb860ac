"""Kernel density estimation with cell-level reweighting.

The classical Gaussian-product kernel estimate is perturbed by weighting
every observation with w_j = fitted/observed count of its lattice cell,
so the local smoother approximately respects the globally smoothed cell
probabilities.  Three variants handle empty cells differently:

* plain    - keep the n observations, renormalize by the weight total n_w;
             fitted mass sitting on empty cells is simply dropped.
* average  - arithmetic mean of three plain estimates on lattices whose
             per-axis cell counts differ by -1, 0, +1.
* fill     - additional constructed points are placed inside empty cells
             so their fitted mass re-enters the estimate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import CellTable, Lattice, Sample, build_lattice, locate_rows, tabulate
from .loglinear import LogLinearFit, MarginSpec, ipf_fit

VARIANTS = ("classical", "plain", "average", "fill")

_EVAL_CHUNK = 4_000_000  # max kernel-matrix entries held at once


@dataclass(frozen=True)
class Bandwidth:
    """Diagonal smoothing matrix diag(h_1, ..., h_d)."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if h.size < 1 or np.any(h <= 0.0) or not np.all(np.isfinite(h)):
            raise ValueError("bandwidths must be positive and finite")
        object.__setattr__(self, "h", h)

    @property
    def d(self) -> int:
        return self.h.size

    @property
    def det_h(self) -> float:
        return float(np.prod(self.h))


@dataclass(frozen=True)
class WeightedSample:
    """Kernel centres with positive weights; n_real of them are observations."""

    points: np.ndarray
    weights: np.ndarray
    n_real: int

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if points.shape[0] != weights.size:
            raise ValueError("points and weights must have matching length")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be strictly positive")
        if not 0 < self.n_real <= points.shape[0]:
            raise ValueError("n_real must count a prefix of the points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def n_w(self) -> float:
        return float(self.weights.sum())

    @property
    def real_points(self) -> np.ndarray:
        return self.points[: self.n_real]


@dataclass(frozen=True)
class FillConfig:
    """Knobs of the empty-cell fill heuristic."""

    n_a: int = 3
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.n_a < 1:
            raise ValueError("n_a must be at least 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


def normal_scale_factor(d: int, n: int) -> float:
    """Scale-free part of the normal reference bandwidth, (4/((d+2)n))^(1/(d+4))."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    return (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def normal_scale_bandwidth(sample: Sample) -> Bandwidth:
    """Diagonal bandwidth h_k = s_k * (4/((d+2)n))^(1/(d+4)).

    This normal reference rule is the package-wide default; an explicit
    vector can be supplied wherever a Bandwidth is accepted.
    """
    s = sample.data.std(axis=0, ddof=1)
    if np.any(s <= 0.0):
        raise ValueError("zero-variance column")
    return Bandwidth(s * normal_scale_factor(sample.d, sample.n))


def _kernel_block(scaled_q: np.ndarray, scaled_p: np.ndarray) -> np.ndarray:
    """exp(-0.5 ||q_i - p_j||^2) for pre-scaled rows, shape (len(q), len(p))."""
    sq = (
        (scaled_q * scaled_q).sum(axis=1)[:, None]
        - 2.0 * scaled_q @ scaled_p.T
        + (scaled_p * scaled_p).sum(axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-0.5 * sq)


def kernel_matrix(points: np.ndarray, bw: Bandwidth, x: np.ndarray) -> np.ndarray:
    """Unnormalized kernel values exp(-0.5 ||h^-1 (x_i - p_j)||^2).

    Rows follow the query points, columns the kernel centres; multiply by
    (2 pi)^(-d/2) / (total_weight * det h) weighted column sums to reach a
    density.  Materializes the full matrix, so keep query batches modest.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    queries = np.atleast_2d(np.asarray(x, dtype=float))
    if queries.shape[1] != points.shape[1]:
        raise ValueError("query dimension does not match the kernel centres")
    return _kernel_block(queries / bw.h, points / bw.h)


def _eval_weighted(
    points: np.ndarray, weights: np.ndarray, denom: float, bw: Bandwidth, x: np.ndarray
) -> float | np.ndarray:
    """sum_i w_i phi_d(h^-1 (x - p_i)) / (denom * det h), chunked over queries."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    queries = np.atleast_2d(x)
    n, d = points.shape
    if queries.shape[1] != d:
        raise ValueError("query dimension does not match the sample")
    norm = (2.0 * math.pi) ** (-0.5 * d) / (denom * bw.det_h)
    scaled_pts = points / bw.h

    out = np.empty(queries.shape[0])
    step = max(1, _EVAL_CHUNK // max(n, 1))
    for lo in range(0, queries.shape[0], step):
        block = _kernel_block(queries[lo : lo + step] / bw.h, scaled_pts)
        out[lo : lo + step] = block @ weights
    out *= norm
    return float(out[0]) if single else out


def kde(sample: Sample, bw: Bandwidth, x: np.ndarray) -> float | np.ndarray:
    """Classical kernel estimate (1/(n det h)) sum_i phi_d(h^-1 (x - z_i))."""
    n = sample.n
    return _eval_weighted(sample.data, np.ones(n), float(n), bw, x)


def wkde(ws: WeightedSample, bw: Bandwidth, x: np.ndarray) -> float | np.ndarray:
    """Weighted kernel estimate (1/(n_w det h)) sum_i w_i phi_d(h^-1 (x - p_i))."""
    return _eval_weighted(ws.points, ws.weights, ws.n_w, bw, x)


def cell_weights(table: CellTable, fit: LogLinearFit) -> np.ndarray:
    """Per-cell weights fitted/observed; empty cells come back as NaN."""
    counts = table.counts
    out = np.full(counts.shape, np.nan)
    occupied = counts > 0
    out[occupied] = fit.fitted[occupied] / counts[occupied]
    return out


@dataclass(frozen=True)
class FitResult:
    """A fitted estimator: kernel centres, weights, bandwidth, and provenance."""

    variant: str
    weighted: WeightedSample
    bandwidth: Bandwidth
    lattice: Lattice | None = None
    table: CellTable | None = None
    loglin: LogLinearFit | None = None

    def density(self, x: np.ndarray) -> float | np.ndarray:
        return wkde(self.weighted, self.bandwidth, x)

    @property
    def dropped_mass(self) -> float:
        """Fitted mass on empty cells that the estimate does not carry."""
        if self.table is None or self.loglin is None:
            return 0.0
        empty = self.table.counts == 0
        on_empty = float(self.loglin.fitted[empty].sum())
        return 0.0 if self.variant == "fill" else on_empty


def fit_classical(sample: Sample, bandwidth: Bandwidth | None = None) -> FitResult:
    """Unweighted estimator; equals kde everywhere."""
    bw = bandwidth or normal_scale_bandwidth(sample)
    ws = WeightedSample(sample.data, np.ones(sample.n), sample.n)
    return FitResult("classical", ws, bw)


def _plain_pipeline(
    sample: Sample, m: int, offset: int
) -> tuple[Lattice, CellTable, LogLinearFit, np.ndarray]:
    lattice = build_lattice(sample, offset)
    table = tabulate(sample, lattice)
    fit = ipf_fit(table.counts, lattice.shape, MarginSpec.all_subsets(sample.d, m))
    w_cell = cell_weights(table, fit)
    idx = locate_rows(lattice, sample.data)
    flat = np.ravel_multi_index(tuple(idx.T), lattice.shape)
    return lattice, table, fit, w_cell[flat]


def fit_plain(
    sample: Sample,
    m: int,
    bandwidth: Bandwidth | None = None,
    offset: int = 0,
) -> FitResult:
    """Cell-weighted estimator on the baseline lattice.

    m = d saturates the log-linear model, all weights collapse to 1 and
    the result equals the classical estimate.
    """
    if not 1 <= m <= sample.d:
        raise ValueError(f"order m must satisfy 1 <= m <= d, got m={m}, d={sample.d}")
    bw = bandwidth or normal_scale_bandwidth(sample)
    lattice, table, fit, w_obs = _plain_pipeline(sample, m, offset)
    ws = WeightedSample(sample.data, w_obs, sample.n)
    return FitResult("plain", ws, bw, lattice, table, fit)


def fill_empty_cells(
    sample: Sample,
    table: CellTable,
    fit: LogLinearFit,
    cfg: FillConfig = FillConfig(),
) -> list[tuple[np.ndarray, float]]:
    """Constructed points for every cell with zero count but positive fitted mass.

    Each such cell receives ceil(fitted) points, each one a weighted
    average of the 2^d cell corners.  Corner weights accumulate, over the
    n_a not-yet-used observations nearest to the cell centre, the inverse
    square root of the observation-to-corner distance.  Once the sorted
    observation list is exhausted it restarts from the nearest.  The cell
    mass splits evenly, weight fitted/ceil(fitted) per point.
    """
    lattice = table.lattice
    data = sample.data
    shape = lattice.shape
    out: list[tuple[np.ndarray, float]] = []

    fill_cells = np.nonzero((table.counts == 0) & (fit.fitted > 0.0))[0]
    for j in fill_cells:
        sub = np.unravel_index(j, shape)
        lo = np.array([lattice.breaks[k][sub[k]] for k in range(lattice.d)])
        hi = np.array([lattice.breaks[k][sub[k] + 1] for k in range(lattice.d)])
        center = 0.5 * (lo + hi)
        corners = np.array(list(itertools.product(*zip(lo, hi))))

        order = np.argsort(np.linalg.norm(data - center, axis=1), kind="stable")
        ptr = 0
        n_hat = float(fit.fitted[j])
        n_bar = math.ceil(n_hat)
        for _ in range(n_bar):
            corner_w = np.zeros(corners.shape[0])
            for _ in range(cfg.n_a):
                if ptr >= order.size:
                    ptr = 0
                obs = data[order[ptr]]
                ptr += 1
                dist = np.linalg.norm(corners - obs, axis=1)
                corner_w += 1.0 / np.sqrt(dist + cfg.epsilon)
            point = corner_w @ corners / corner_w.sum()
            out.append((point, n_hat / n_bar))
    return out


def fit_fill(
    sample: Sample,
    m: int,
    cfg: FillConfig = FillConfig(),
    bandwidth: Bandwidth | None = None,
) -> FitResult:
    """Plain estimator plus constructed points carrying the empty-cell mass.

    The centre count exceeds n whenever empty cells get filled, but the
    weight total returns to n up to the fitting tolerance.
    """
    if not 1 <= m <= sample.d:
        raise ValueError(f"order m must satisfy 1 <= m <= d, got m={m}, d={sample.d}")
    bw = bandwidth or normal_scale_bandwidth(sample)
    lattice, table, fit, w_obs = _plain_pipeline(sample, m, offset=0)
    extra = fill_empty_cells(sample, table, fit, cfg)
    if extra:
        pts = np.vstack([sample.data, np.array([p for p, _ in extra])])
        wts = np.concatenate([w_obs, np.array([w for _, w in extra])])
    else:
        pts, wts = sample.data, w_obs
    ws = WeightedSample(pts, wts, sample.n)
    return FitResult("fill", ws, bw, lattice, table, fit)


@dataclass(frozen=True)
class AverageFit:
    """Mean of three plain estimates on neighbouring grid resolutions."""

    fits: tuple[FitResult, FitResult, FitResult]
    bandwidth: Bandwidth

    def density(self, x: np.ndarray) -> float | np.ndarray:
        return sum(f.density(x) for f in self.fits) / 3.0


def fit_average(
    sample: Sample, m: int, bandwidth: Bandwidth | None = None
) -> AverageFit:
    """Plain fits on lattices with offsets -1, 0, +1 under one shared bandwidth."""
    bw = bandwidth or normal_scale_bandwidth(sample)
    fits = tuple(fit_plain(sample, m, bandwidth=bw, offset=o) for o in (-1, 0, 1))
    return AverageFit(fits, bw)


def dump_estimator(result: FitResult, path) -> None:
    """Plain-text estimator dump: header block, then points as CSV rows.

    Floats print with shortest round-trip precision so dumps are stable
    golden files for a fixed input.
    """
    ws = result.weighted
    lines = [
        "# tiltkde estimator state",
        f"variant : {result.variant}",
        f"d : {ws.points.shape[1]}",
        f"n_real : {ws.n_real}",
        f"n_points : {ws.points.shape[0]}",
        f"n_w : {ws.n_w!r}",
        "bandwidth : " + " ".join(repr(float(v)) for v in result.bandwidth.h),
    ]
    if result.lattice is not None:
        for k, breaks in enumerate(result.lattice.breaks):
            lines.append(
                f"axis {k} breaks : " + " ".join(repr(float(b)) for b in breaks)
            )
    lines.append("points :")
    d = ws.points.shape[1]
    lines.append(",".join(f"x{k + 1}" for k in range(d)) + ",weight")
    for p, w in zip(ws.points, ws.weights):
        lines.append(",".join(repr(float(v)) for v in p) + f",{w!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
