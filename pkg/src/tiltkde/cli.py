"""Command-line front end.

Three commands: ``fit`` runs an estimator on a data CSV and dumps its
state, ``simulate`` runs a Monte-Carlo case file and emits the quantile
and summary CSVs, ``grid-demo`` prints evaluation-grid sizes.

Exit codes: 0 success, 2 malformed input (CSV or case file, the message
names the line or key), 3 constraint violation (a weighted variant with
m >= d).  Output files are written to a temporary name and atomically
renamed, so failures leave no partial files behind.
"""

from __future__ import annotations

import dataclasses
import os
import sys

import click
import numpy as np

from . import caseio, estimator, simharness
from .lattice import Sample

EXIT_BAD_INPUT = 2
EXIT_CONSTRAINT = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_numeric_csv(path: str, min_rows: int = 1) -> np.ndarray:
    """Numeric CSV with an optional single header line; exits 2 on malformed input."""
    rows: list[list[float]] = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                parsed = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:  # header line
                    width = len(cells)
                    continue
                _fail(EXIT_BAD_INPUT, f"{path}: line {lineno}: non-numeric value")
            else:
                if width is None:
                    width = len(parsed)
                elif len(parsed) != width:
                    _fail(
                        EXIT_BAD_INPUT,
                        f"{path}: line {lineno}: expected {width} columns, "
                        f"got {len(parsed)}",
                    )
                rows.append(parsed)
    if len(rows) < min_rows:
        _fail(EXIT_BAD_INPUT, f"{path}: need at least {min_rows} data rows")
    return np.array(rows)


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_bandwidth(text: str | None, d: int) -> estimator.Bandwidth | None:
    if text is None:
        return None
    try:
        h = np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        _fail(EXIT_BAD_INPUT, f"--bandwidth: cannot parse '{text}'")
    if h.size != d:
        _fail(EXIT_BAD_INPUT, f"--bandwidth: expected {d} entries, got {h.size}")
    try:
        return estimator.Bandwidth(h)
    except ValueError as exc:
        _fail(EXIT_BAD_INPUT, f"--bandwidth: {exc}")


@click.group()
def main():
    """Density estimation with log-linear cell weights, plus its benchmark harness."""


@main.command()
@click.argument("data_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--m", type=int, default=2, show_default=True, help="log-linear order")
@click.option(
    "--variant",
    type=click.Choice(estimator.VARIANTS),
    default="plain",
    show_default=True,
)
@click.option("--bandwidth", default=None, help="explicit h_1,...,h_d (comma separated)")
@click.option("--out-dir", default=".", show_default=True)
@click.option(
    "--eval-points",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="CSV of points at which to evaluate the fitted density",
)
def fit(data_csv, m, variant, bandwidth, out_dir, eval_points):
    """Fit an estimator to DATA_CSV and dump its state."""
    data = _read_numeric_csv(data_csv, min_rows=2)
    try:
        sample = Sample(data)
    except ValueError as exc:
        _fail(EXIT_BAD_INPUT, f"{data_csv}: {exc}")

    if variant != "classical" and m >= sample.d:
        _fail(
            EXIT_CONSTRAINT,
            f"variant '{variant}' requires m < d (got m={m}, d={sample.d}); "
            "only the saturating classical estimator allows m >= d",
        )

    bw = _parse_bandwidth(bandwidth, sample.d)
    os.makedirs(out_dir, exist_ok=True)

    if variant == "classical":
        fits = [estimator.fit_classical(sample, bw)]
        density = fits[0].density
    elif variant == "plain":
        fits = [estimator.fit_plain(sample, m, bandwidth=bw)]
        density = fits[0].density
    elif variant == "fill":
        fits = [estimator.fit_fill(sample, m, bandwidth=bw)]
        density = fits[0].density
    else:
        avg = estimator.fit_average(sample, m, bandwidth=bw)
        fits = list(avg.fits)
        density = avg.density

    if len(fits) == 1:
        estimator.dump_estimator(fits[0], os.path.join(out_dir, "estimator_dump.txt"))
    else:
        for off, f in zip((-1, 0, 1), fits):
            estimator.dump_estimator(
                f, os.path.join(out_dir, f"estimator_dump_offset{off:+d}.txt")
            )

    if eval_points is not None:
        pts = _read_numeric_csv(eval_points, min_rows=1)
        if pts.shape[1] != sample.d:
            _fail(
                EXIT_BAD_INPUT,
                f"{eval_points}: expected {sample.d} columns, got {pts.shape[1]}",
            )
        values = np.atleast_1d(density(pts))
        header = ",".join(f"x{k + 1}" for k in range(sample.d)) + ",fhat"
        lines = [header]
        for row, v in zip(pts, values):
            lines.append(
                ",".join(simharness.format_number(c) for c in row)
                + ","
                + simharness.format_number(v)
            )
        _atomic_write(os.path.join(out_dir, "evaluations.csv"), "\n".join(lines) + "\n")

    click.echo(f"fitted variant={variant} on n={sample.n}, d={sample.d}")


@main.command()
@click.argument("case_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-iter", type=int, default=None, help="override replicate count")
@click.option("--seed", type=int, default=None, help="override the master seed")
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out-dir", default=".", show_default=True)
@click.option("--p", type=click.Choice(["0", "0.5", "1"]), default=None)
@click.option("--methods", default=None, help="comma-separated method subset")
def simulate(case_file, n_iter, seed, threads, out_dir, p, methods):
    """Run the Monte-Carlo case in CASE_FILE and write its report CSVs."""
    try:
        cfg = caseio.parse_case_file(case_file)
    except caseio.CaseFileError as exc:
        _fail(EXIT_BAD_INPUT, f"{case_file}: {exc}")

    overrides = {}
    if n_iter is not None:
        overrides["n_iter"] = n_iter
    if seed is not None:
        overrides["seed"] = seed
    if p is not None:
        overrides["p"] = float(p)
    if methods is not None:
        overrides["methods"] = tuple(
            tok for tok in methods.replace(",", " ").split() if tok
        )
    if overrides:
        try:
            cfg = dataclasses.replace(cfg, **overrides)
        except ValueError as exc:
            _fail(EXIT_BAD_INPUT, str(exc))

    try:
        simharness.check_m_constraint(cfg)
    except ValueError as exc:
        _fail(EXIT_CONSTRAINT, str(exc))

    report = simharness.run_case(cfg, workers=max(1, threads))
    paths = simharness.write_report_csvs(report, out_dir)
    click.echo(simharness.render_improvement(report), nl=False)
    for path in paths:
        click.echo(f"wrote {path}")


@main.command("grid-demo")
@click.argument("d", type=int)
@click.argument("q", type=float)
@click.argument("n_target", type=int)
def grid_demo(d, q, n_target):
    """Print the evaluation-grid size for dimension D, half-width Q, target N."""
    try:
        grid = simharness.eval_grid(d, q, n_target)
    except ValueError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    click.echo(f"N0 : {grid.n0}")
    click.echo(f"Npts : {grid.n_points}")


if __name__ == "__main__":
    main()
