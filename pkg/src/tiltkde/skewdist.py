"""Multivariate skew-normal (SN) and skew-t (ST) families and their mixtures.

Component parameters are a location vector xi, a positive-definite scale
matrix Omega, a slant vector alpha, and degrees of freedom nu (infinite
for SN).  Densities are evaluated in log space; sampling goes through the
augmented-normal stochastic representation, with a single chi-square
divisor shared across coordinates for the ST case.

Cholesky factorization is the only linear-algebra primitive used here:
it certifies positive definiteness and yields determinants, Mahalanobis
forms, and correlated normal draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, log_ndtr, stdtr


@dataclass(frozen=True)
class ComponentSpec:
    """One SN or ST component; ``nu=inf`` selects the SN case."""

    xi: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    nu: float = math.inf

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float).reshape(-1)
        omega = np.asarray(self.omega, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        d = xi.size
        if omega.shape != (d, d):
            raise ValueError(f"scale matrix must be {d}x{d}")
        if alpha.size != d:
            raise ValueError("slant must match the location dimension")
        if not np.allclose(omega, omega.T, atol=1e-12, rtol=0.0):
            raise ValueError("scale matrix must be symmetric")
        if not (self.nu > 0):
            raise ValueError("degrees of freedom must be positive")
        try:
            chol = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise ValueError("scale matrix must be positive definite") from exc
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "_chol", chol)

    @property
    def d(self) -> int:
        return self.xi.size

    @property
    def is_skew_normal(self) -> bool:
        return math.isinf(self.nu)

    @property
    def scale_diag(self) -> np.ndarray:
        """Per-axis scale omega_k = sqrt(Omega_kk)."""
        return np.sqrt(np.diag(self.omega))

    @property
    def correlation(self) -> np.ndarray:
        w = self.scale_diag
        return self.omega / np.outer(w, w)


@dataclass(frozen=True)
class MixtureSpec:
    """Convex combination pi * f1 + (1 - pi) * f2; pi = 1 drops f2."""

    comp1: ComponentSpec
    comp2: ComponentSpec | None = None
    mix_p: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.mix_p <= 1.0):
            raise ValueError("mixing proportion must lie in (0, 1]")
        if self.mix_p == 1.0 and self.comp2 is not None:
            raise ValueError("mix_p = 1 admits no second component")
        if self.mix_p < 1.0 and self.comp2 is None:
            raise ValueError("mix_p < 1 requires a second component")
        if self.comp2 is not None and self.comp2.d != self.comp1.d:
            raise ValueError("components must share a dimension")

    @property
    def d(self) -> int:
        return self.comp1.d


def ar1_scale(d: int, rho: float) -> np.ndarray:
    """Toeplitz scale matrix with entry (i, j) equal to rho**|i - j|."""
    if not abs(rho) < 1:
        raise ValueError("rho must satisfy |rho| < 1")
    if d < 1:
        raise ValueError("dimension must be at least 1")
    idx = np.arange(d)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def _standardize(x: np.ndarray, spec: ComponentSpec) -> tuple[np.ndarray, np.ndarray, bool]:
    """Rows of x centred at xi, plus their Mahalanobis forms under Omega."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x) - spec.xi
    y = np.linalg.solve(spec._chol, pts.T)
    mahal = np.einsum("ij,ij->j", y, y)
    return pts, mahal, single


def _log_det_omega(spec: ComponentSpec) -> float:
    return 2.0 * float(np.log(np.diag(spec._chol)).sum())


def sn_density(x: np.ndarray, spec: ComponentSpec) -> float | np.ndarray:
    """SN density 2 * phi_d(x - xi; Omega) * Phi(alpha' w^-1 (x - xi)).

    Accepts one point of shape (d,) or a batch of shape (n, d).
    """
    if not spec.is_skew_normal:
        raise ValueError("component has finite nu; use st_density")
    pts, mahal, single = _standardize(x, spec)
    d = spec.d
    log_phi = -0.5 * (d * math.log(2.0 * math.pi) + _log_det_omega(spec) + mahal)
    t = pts / spec.scale_diag @ spec.alpha
    out = np.exp(math.log(2.0) + log_phi + log_ndtr(t))
    return float(out[0]) if single else out


def st_density(x: np.ndarray, spec: ComponentSpec) -> float | np.ndarray:
    """ST density 2 * t_d(x - xi; Omega, nu) * T1(a * sqrt((nu+d)/(nu+Q)); nu+d).

    Here Q is the Mahalanobis form of x - xi under Omega and a is the
    slant projection alpha' w^-1 (x - xi).
    """
    if spec.is_skew_normal:
        raise ValueError("component has infinite nu; use sn_density")
    pts, mahal, single = _standardize(x, spec)
    d, nu = spec.d, spec.nu
    log_t = (
        gammaln(0.5 * (nu + d))
        - gammaln(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - 0.5 * _log_det_omega(spec)
        - 0.5 * (nu + d) * np.log1p(mahal / nu)
    )
    a = pts / spec.scale_diag @ spec.alpha
    tail = stdtr(nu + d, a * np.sqrt((nu + d) / (nu + mahal)))
    with np.errstate(divide="ignore"):
        out = np.exp(math.log(2.0) + log_t + np.log(tail))
    return float(out[0]) if single else out


def component_density(x: np.ndarray, spec: ComponentSpec) -> float | np.ndarray:
    return sn_density(x, spec) if spec.is_skew_normal else st_density(x, spec)


def sample_component(
    spec: ComponentSpec, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Exact draws via the augmented-normal representation.

    A (d+1)-variate normal with correlation block [[1, delta'], [delta,
    corr(Omega)]] is drawn, the sign of the extra coordinate is folded
    into the remaining d, and the result is rescaled by the per-axis
    scales.  ST draws divide by sqrt(W/nu) with one chi-square W per draw.
    """
    m = 1 if size is None else int(size)
    corr = spec.correlation
    alpha = spec.alpha
    denom = math.sqrt(1.0 + float(alpha @ corr @ alpha))
    delta = corr @ alpha / denom

    aug = np.empty((spec.d + 1, spec.d + 1))
    aug[0, 0] = 1.0
    aug[0, 1:] = delta
    aug[1:, 0] = delta
    aug[1:, 1:] = corr
    chol = np.linalg.cholesky(aug)

    draws = rng.standard_normal((m, spec.d + 1)) @ chol.T
    z = np.where(draws[:, [0]] > 0.0, draws[:, 1:], -draws[:, 1:])
    if not spec.is_skew_normal:
        w = rng.chisquare(spec.nu, size=m)
        z = z / np.sqrt(w / spec.nu)[:, None]
    out = spec.xi + z * spec.scale_diag
    return out[0] if size is None else out


def mixture_density(x: np.ndarray, spec: MixtureSpec) -> float | np.ndarray:
    """Density pi * f1(x) + (1 - pi) * f2(x)."""
    f1 = component_density(x, spec.comp1)
    if spec.comp2 is None:
        return f1
    f2 = component_density(x, spec.comp2)
    return spec.mix_p * f1 + (1.0 - spec.mix_p) * f2


def sample_mixture(
    spec: MixtureSpec, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draws from the mixture; component 1 is picked with probability pi."""
    if spec.comp2 is None:
        return sample_component(spec.comp1, rng, size)
    m = 1 if size is None else int(size)
    pick1 = rng.random(m) < spec.mix_p
    out = np.empty((m, spec.d))
    n1 = int(pick1.sum())
    if n1:
        out[pick1] = sample_component(spec.comp1, rng, n1).reshape(n1, spec.d)
    if m - n1:
        out[~pick1] = sample_component(spec.comp2, rng, m - n1).reshape(m - n1, spec.d)
    return out[0] if size is None else out
