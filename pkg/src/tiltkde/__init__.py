"""Multivariate density estimation with log-linear cell reweighting."""

from .estimator import (
    AverageFit,
    Bandwidth,
    FillConfig,
    FitResult,
    WeightedSample,
    cell_weights,
    fill_empty_cells,
    fit_average,
    fit_classical,
    fit_fill,
    fit_plain,
    kde,
    normal_scale_bandwidth,
    wkde,
)
from .lattice import (
    CellIndex,
    CellTable,
    Lattice,
    Sample,
    beta_breakpoints,
    build_lattice,
    crude_density,
    locate,
    scott_bin_counts,
    tabulate,
)
from .loglinear import LogLinearFit, MarginSpec, fit_probabilities, ipf_fit, margin
from .simharness import (
    CaseConfig,
    CaseReport,
    EvalGrid,
    error_at,
    eval_grid,
    improvement,
    quantiles,
    run_case,
    write_report_csvs,
)
from .skewdist import (
    ComponentSpec,
    MixtureSpec,
    ar1_scale,
    mixture_density,
    sample_component,
    sample_mixture,
    sn_density,
    st_density,
)

__version__ = "0.1.0"

__all__ = [
    "AverageFit",
    "Bandwidth",
    "CaseConfig",
    "CaseReport",
    "CellIndex",
    "CellTable",
    "ComponentSpec",
    "EvalGrid",
    "FillConfig",
    "FitResult",
    "Lattice",
    "LogLinearFit",
    "MarginSpec",
    "MixtureSpec",
    "Sample",
    "WeightedSample",
    "ar1_scale",
    "beta_breakpoints",
    "build_lattice",
    "cell_weights",
    "crude_density",
    "error_at",
    "eval_grid",
    "fill_empty_cells",
    "fit_average",
    "fit_classical",
    "fit_fill",
    "fit_plain",
    "fit_probabilities",
    "improvement",
    "ipf_fit",
    "kde",
    "locate",
    "margin",
    "mixture_density",
    "normal_scale_bandwidth",
    "quantiles",
    "run_case",
    "sample_component",
    "sample_mixture",
    "scott_bin_counts",
    "sn_density",
    "st_density",
    "tabulate",
    "wkde",
    "write_report_csvs",
]
