"""Monte-Carlo benchmarking of the weighted estimators against classical KDE.

A case draws ``n_iter`` replicates from a mixture, fits every requested
method per replicate, and scores the estimates with the error functional
|f - fhat| / f**p at two sets of points: a fixed hypercube grid and the
sampled observations themselves.  Errors pool across replicates into one
set per (method, evaluation set); the report carries their quantiles and
the relative improvement over classical KDE.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import (
    Bandwidth,
    FillConfig,
    FitResult,
    fill_empty_cells,
    fit_plain,
    kernel_matrix,
    normal_scale_bandwidth,
)
from .lattice import Sample
from .skewdist import MixtureSpec, mixture_density, sample_mixture

QUANTILE_LEVELS = (0.25, 0.50, 0.75, 0.90, 0.95, 0.99)
METHODS = ("kde", "wkde", "wkdeA", "fill+wkde")
SUPPORTED_P = (0.0, 0.5, 1.0)
DEFAULT_SEED = 20070401


@dataclass(frozen=True)
class EvalGrid:
    """Cartesian grid of N0^d points with per-axis coordinates on [-q, q]."""

    q: float
    n_target: int
    n0: int
    points: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def _ceil_root(n: int, d: int) -> int:
    """Smallest integer whose d-th power reaches n, exact in integer arithmetic."""
    k = max(1, round(n ** (1.0 / d)))
    while k**d < n:
        k += 1
    while k > 1 and (k - 1) ** d >= n:
        k -= 1
    return k


def eval_grid(d: int, q: float, n_target: int) -> EvalGrid:
    """Evaluation grid on the hypercube (-q, q)^d, endpoints included.

    The per-axis count is N0 = ceil(n_target**(1/d)).
    """
    if d < 1 or n_target < 1:
        raise ValueError("d and n_target must be positive")
    if q <= 0:
        raise ValueError("q must be positive")
    n0 = _ceil_root(n_target, d)
    axis = np.linspace(-q, q, n0)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return EvalGrid(q=float(q), n_target=int(n_target), n0=n0, points=points)


def error_at(f_true: float, f_hat: float, p: float = 0.5) -> float:
    """Estimation error |f - fhat| / f**p at one point; f must be positive."""
    if p not in SUPPORTED_P:
        raise ValueError(f"p must be one of {SUPPORTED_P}")
    if not f_true > 0.0:
        raise ValueError("true density must be positive")
    return abs(f_true - f_hat) / f_true**p


def error_values(f_true: np.ndarray, f_hat: np.ndarray, p: float = 0.5) -> np.ndarray:
    """Vectorized error functional; underflowed true densities yield +inf.

    The true densities in scope are positive everywhere, but extreme tail
    points can underflow to zero in double precision; those evaluations
    are carried as explicit infinities rather than clamped.
    """
    if p not in SUPPORTED_P:
        raise ValueError(f"p must be one of {SUPPORTED_P}")
    f_true = np.asarray(f_true, dtype=float)
    f_hat = np.asarray(f_hat, dtype=float)
    diff = np.abs(f_true - f_hat)
    if p == 0.0:
        return diff
    denom = f_true if p == 1.0 else np.sqrt(f_true)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = diff / denom
    return np.where(denom > 0.0, out, np.inf)


def quantiles(values: np.ndarray, levels=QUANTILE_LEVELS) -> np.ndarray:
    """Linear-interpolation sample quantiles (the usual type-7 convention).

    Infinite values sort to the top and propagate as infinities instead
    of turning into NaN during interpolation.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("cannot take quantiles of an empty set")
    srt = np.sort(values)
    out = np.empty(len(levels))
    for i, p in enumerate(levels):
        if not 0.0 <= p <= 1.0:
            raise ValueError("levels must lie in [0, 1]")
        pos = p * (srt.size - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, srt.size - 1)
        g = pos - lo
        if g == 0.0 or srt[lo] == srt[hi]:
            out[i] = srt[lo]
        else:
            out[i] = srt[lo] + g * (srt[hi] - srt[lo])
    return out


def improvement(q0: float, q: float) -> float:
    """Relative error reduction (q0 - q) / q0 against the classical baseline."""
    if not q0 > 0.0:
        raise ValueError("baseline quantile must be positive")
    return (q0 - q) / q0


@dataclass(frozen=True)
class CaseConfig:
    """One simulation case: generative model, grid, methods, and seeding."""

    n_iter: int
    n: int
    d: int
    m: int
    q: float
    dist: MixtureSpec
    n_target: int = 2000
    seed: int = DEFAULT_SEED
    methods: tuple[str, ...] = METHODS
    p: float = 0.5
    fill: FillConfig = FillConfig()

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.dist.d != self.d:
            raise ValueError("distribution dimension must match d")
        if not 1 <= self.m <= self.d:
            raise ValueError("m must satisfy 1 <= m <= d")
        if self.q <= 0 or self.n_target < 1:
            raise ValueError("grid parameters must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must be distinct")
        if self.p not in SUPPORTED_P:
            raise ValueError(f"p must be one of {SUPPORTED_P}")

    @property
    def weighted_methods(self) -> tuple[str, ...]:
        return tuple(m for m in self.methods if m != "kde")


def check_m_constraint(cfg: CaseConfig) -> None:
    """Reject m >= d when a weighted method is requested.

    The library itself tolerates m = d (the weights saturate to 1); the
    front end enforces the strict constraint.
    """
    if cfg.weighted_methods and cfg.m >= cfg.d:
        raise ValueError(
            f"weighted methods require m < d (got m={cfg.m}, d={cfg.d})"
        )


@dataclass(frozen=True)
class CaseReport:
    """Pooled error quantiles per method and evaluation set, plus R(p) columns."""

    config: CaseConfig
    levels: tuple[float, ...]
    grid_quantiles: dict[str, np.ndarray]
    sample_quantiles: dict[str, np.ndarray]
    grid_improvement: dict[str, np.ndarray] | None
    sample_improvement: dict[str, np.ndarray] | None
    replicates_done: int
    failures: tuple[tuple[int, str], ...]
    ipf_nonconverged: int
    wall_clock: float


def _weighted_density(
    kmat: np.ndarray, weights: np.ndarray, n_w: float, bw: Bandwidth
) -> np.ndarray:
    d = bw.d
    return (kmat @ weights) * ((2.0 * math.pi) ** (-0.5 * d) / (n_w * bw.det_h))


def _replicate_errors(cfg: CaseConfig, rep: int):
    """Errors for one replicate: {method: (grid_errors, sample_errors)}."""
    grid = eval_grid(cfg.d, cfg.q, cfg.n_target)
    f_grid = np.atleast_1d(mixture_density(grid.points, cfg.dist))

    rng = np.random.default_rng([cfg.seed, rep])
    data = sample_mixture(cfg.dist, rng, cfg.n)
    sample = Sample(data)
    f_samp = np.atleast_1d(mixture_density(data, cfg.dist))
    bw = normal_scale_bandwidth(sample)

    # One kernel matrix per evaluation set serves every method; only the
    # fill variant appends extra centre columns.
    k_grid = kernel_matrix(data, bw, grid.points)
    k_samp = kernel_matrix(data, bw, data)

    nonconverged = 0
    plains: dict[int, FitResult] = {}

    def plain_fit(offset: int) -> FitResult:
        nonlocal nonconverged
        if offset not in plains:
            fit = fit_plain(sample, cfg.m, bandwidth=bw, offset=offset)
            if not fit.loglin.converged:
                nonconverged += 1
            plains[offset] = fit
        return plains[offset]

    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for method in cfg.methods:
        if method == "kde":
            ones = np.ones(cfg.n)
            est_grid = _weighted_density(k_grid, ones, float(cfg.n), bw)
            est_samp = _weighted_density(k_samp, ones, float(cfg.n), bw)
        elif method == "wkde":
            ws = plain_fit(0).weighted
            est_grid = _weighted_density(k_grid, ws.weights, ws.n_w, bw)
            est_samp = _weighted_density(k_samp, ws.weights, ws.n_w, bw)
        elif method == "wkdeA":
            parts_g, parts_s = [], []
            for off in (-1, 0, 1):
                ws = plain_fit(off).weighted
                parts_g.append(_weighted_density(k_grid, ws.weights, ws.n_w, bw))
                parts_s.append(_weighted_density(k_samp, ws.weights, ws.n_w, bw))
            est_grid = sum(parts_g) / 3.0
            est_samp = sum(parts_s) / 3.0
        elif method == "fill+wkde":
            base = plain_fit(0)
            extra = fill_empty_cells(sample, base.table, base.loglin, cfg.fill)
            if extra:
                pts = np.array([p for p, _ in extra])
                wts = np.array([w for _, w in extra])
                weights = np.concatenate([base.weighted.weights, wts])
                n_w = float(weights.sum())
                kg = np.hstack([k_grid, kernel_matrix(pts, bw, grid.points)])
                ks = np.hstack([k_samp, kernel_matrix(pts, bw, data)])
            else:
                weights, n_w = base.weighted.weights, base.weighted.n_w
                kg, ks = k_grid, k_samp
            est_grid = _weighted_density(kg, weights, n_w, bw)
            # Evaluation stays on the real observations only.
            est_samp = _weighted_density(ks, weights, n_w, bw)
        else:  # pragma: no cover - guarded by CaseConfig
            raise ValueError(method)
        out[method] = (
            error_values(f_grid, est_grid, cfg.p),
            error_values(f_samp, est_samp, cfg.p),
        )
    return out, nonconverged


def _replicate_task(args):
    cfg, rep = args
    try:
        return rep, _replicate_errors(cfg, rep), None
    except Exception as exc:  # noqa: BLE001 - replicate isolation by design
        return rep, None, f"{type(exc).__name__}: {exc}"


def run_case(cfg: CaseConfig, workers: int = 1) -> CaseReport:
    """Run all replicates of a case and pool their errors.

    Replicates are independent (each derives its RNG stream from the case
    seed and its own index) so the pooled result does not depend on the
    worker count.  Per-replicate failures are recorded and skipped.
    """
    start = time.perf_counter()
    tasks = [(cfg, rep) for rep in range(cfg.n_iter)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=1))
    else:
        results = [_replicate_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    pooled: dict[str, dict[str, list[np.ndarray]]] = {
        m: {"grid": [], "sample": []} for m in cfg.methods
    }
    failures = []
    nonconverged = 0
    done = 0
    for rep, payload, err in results:
        if err is not None:
            failures.append((rep, err))
            continue
        per_method, bad_fits = payload
        nonconverged += bad_fits
        done += 1
        for method, (eg, es) in per_method.items():
            pooled[method]["grid"].append(eg)
            pooled[method]["sample"].append(es)
    if done == 0:
        raise RuntimeError(f"all {cfg.n_iter} replicates failed: {failures[:3]}")

    grid_q = {
        m: quantiles(np.concatenate(pooled[m]["grid"])) for m in cfg.methods
    }
    samp_q = {
        m: quantiles(np.concatenate(pooled[m]["sample"])) for m in cfg.methods
    }

    grid_r = samp_r = None
    if "kde" in cfg.methods:
        grid_r = {
            m: np.array(
                [improvement(q0, q) for q0, q in zip(grid_q["kde"], grid_q[m])]
            )
            for m in cfg.methods
        }
        samp_r = {
            m: np.array(
                [improvement(q0, q) for q0, q in zip(samp_q["kde"], samp_q[m])]
            )
            for m in cfg.methods
        }

    return CaseReport(
        config=cfg,
        levels=QUANTILE_LEVELS,
        grid_quantiles=grid_q,
        sample_quantiles=samp_q,
        grid_improvement=grid_r,
        sample_improvement=samp_r,
        replicates_done=done,
        failures=tuple(failures),
        ipf_nonconverged=nonconverged,
        wall_clock=time.perf_counter() - start,
    )


def format_number(x: float) -> str:
    """Shortest round-trip decimal; infinities render as the bare word Inf."""
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return repr(float(x))


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _quantile_csv(report: CaseReport, which: str) -> str:
    table = report.grid_quantiles if which == "grid" else report.sample_quantiles
    header = "method," + ",".join(f"p{int(round(l * 100))}" for l in report.levels)
    rows = [header]
    for method in report.config.methods:
        rows.append(
            method + "," + ",".join(format_number(v) for v in table[method])
        )
    return "\n".join(rows) + "\n"


def summary_rows(report: CaseReport) -> list[dict[str, object]]:
    """Per-method improvement summary at the 0.50/0.75/0.95 levels."""
    if report.grid_improvement is None:
        return []
    cfg = report.config
    idx = {level: i for i, level in enumerate(report.levels)}
    rows = []
    for method in cfg.weighted_methods:
        row: dict[str, object] = {
            "method": method,
            "d": cfg.d,
            "m": cfg.m,
            "mix.p": cfg.dist.mix_p,
            "n": cfg.n,
        }
        for level in (0.50, 0.75, 0.95):
            row[f"grid.{int(level * 100)}"] = report.grid_improvement[method][idx[level]]
            row[f"obs.{int(level * 100)}"] = report.sample_improvement[method][idx[level]]
        rows.append(row)
    return rows


def _summary_csv(report: CaseReport) -> str:
    cols = (
        "method", "d", "m", "mix.p", "n",
        "grid.50", "obs.50", "grid.75", "obs.75", "grid.95", "obs.95",
    )
    lines = [",".join(cols)]
    for row in summary_rows(report):
        cells = []
        for c in cols:
            v = row[c]
            cells.append(format_number(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_report_csvs(report: CaseReport, out_dir: str) -> list[str]:
    """Write quantile tables and the improvement summary; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for which, name in (("grid", "quantiles_grid.csv"), ("sample", "quantiles_sample.csv")):
        path = os.path.join(out_dir, name)
        _atomic_write(path, _quantile_csv(report, which))
        paths.append(path)
    path = os.path.join(out_dir, "summary.csv")
    _atomic_write(path, _summary_csv(report))
    paths.append(path)
    return paths


def render_improvement(report: CaseReport) -> str:
    """Human-readable R(p) summary of every method against kde."""
    if report.grid_improvement is None:
        return "improvement summary unavailable (kde not among the methods)\n"
    lines = [
        f"replicates: {report.replicates_done}/{report.config.n_iter}"
        f"  ipf non-converged fits: {report.ipf_nonconverged}"
        f"  wall clock: {report.wall_clock:.1f}s",
        "relative improvement vs kde, positive is better "
        f"(error exponent p={report.config.p}):",
        "method      set     " + "  ".join(f"R({l:.2f})" for l in report.levels),
    ]
    for method in report.config.methods:
        for which, table in (
            ("grid", report.grid_improvement),
            ("obs", report.sample_improvement),
        ):
            vals = "  ".join(f"{v: .4f}" for v in table[method])
            lines.append(f"{method:<11} {which:<7} {vals}")
    return "\n".join(lines) + "\n"
