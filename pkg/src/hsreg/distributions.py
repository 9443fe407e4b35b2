"""Mixing laws for scale mixtures of normals.

Gamma, gamma-gamma (inverted-beta-2) and product-of-gammas densities and
samplers for the latent coefficient variances, plus an empirical estimator
of the power-law exponent of a mixing density near zero (the "sparsity
shape"): the z such that the density behaves like psi^(z-1) as psi -> 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import special

from .errors import ConfigError, InsufficientDataError

__all__ = [
    "GammaParams",
    "GammaGammaParams",
    "PointMass",
    "MixingLaw",
    "gamma_logdensity",
    "gg_logdensity",
    "gg_sample",
    "product_two_gammas_logdensity",
    "estimate_sparsity_shape",
    "DEFAULT_EPS_GRID",
]


@dataclass(frozen=True)
class GammaParams:
    """Shape/rate parameters of a gamma mixing law."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ConfigError(f"gamma parameters must be positive, got {self}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def sparsity_shape(self) -> float:
        return self.shape

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("gamma density evaluated at non-positive value")
        return (self.shape * np.log(self.rate) - special.gammaln(self.shape)
                + (self.shape - 1.0) * np.log(x) - self.rate * x)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)


@dataclass(frozen=True)
class GammaGammaParams:
    """Parameters of the gamma-gamma law GG(shape, tail, scale).

    ``shape`` controls the density near zero, ``tail`` the polynomial tail
    index, and ``scale`` the overall scale. The mean shape*scale/(tail-1)
    exists only for tail > 1.
    """

    shape: float
    tail: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.tail > 0 and self.scale > 0):
            raise ConfigError(f"gamma-gamma parameters must be positive, got {self}")

    @property
    def mean(self) -> float:
        if self.tail <= 1:
            raise ValueError(f"mean undefined for tail={self.tail} <= 1")
        return self.shape * self.scale / (self.tail - 1.0)

    @property
    def sparsity_shape(self) -> float:
        return self.shape

    def logpdf(self, x):
        return gg_logdensity(x, self)

    def sample(self, rng: np.random.Generator, size=None):
        return gg_sample(self, rng, size=size)


@dataclass(frozen=True)
class PointMass:
    """Degenerate mixing law concentrated at a single positive value."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ConfigError(f"point mass must sit at a positive value, got {self.value}")

    @property
    def mean(self) -> float:
        return self.value

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x == self.value, 0.0, -np.inf)

    def sample(self, rng: np.random.Generator, size=None):
        return np.full(size, self.value) if size is not None else self.value


MixingLaw = Union[GammaParams, GammaGammaParams, PointMass]


def gamma_logdensity(psi, p: GammaParams):
    return p.logpdf(psi)


def gg_logdensity(psi, p: GammaGammaParams):
    """Log density of the gamma-gamma (inverted-beta-2) law.

    log g(psi) = shape*log(1/scale) + lgamma(shape+tail) - lgamma(shape)
                 - lgamma(tail) + (shape-1)*log(psi)
                 - (shape+tail)*log(1 + psi/scale)
    """
    psi = np.asarray(psi, dtype=float)
    if np.any(~np.isfinite(psi)) or np.any(psi <= 0):
        raise ValueError("gamma-gamma density requires finite psi > 0")
    lam, c, d = p.shape, p.tail, p.scale
    return (-lam * np.log(d) + special.gammaln(lam + c) - special.gammaln(lam)
            - special.gammaln(c) + (lam - 1.0) * np.log(psi)
            - (lam + c) * np.log1p(psi / d))


def gg_sample(p: GammaGammaParams, rng: np.random.Generator, size=None):
    """Draw from GG(shape, tail, scale) via its beta representation.

    If B ~ Beta(shape, tail) then scale*B/(1-B) has the gamma-gamma law;
    equivalently psi/(psi+scale) is Beta(shape, tail) distributed.
    """
    b = rng.beta(p.shape, p.tail, size=size)
    return p.scale * b / (1.0 - b)


def product_two_gammas_logdensity(psi, lambda1: float, lambda2: float):
    """Log density of the product of two independent Ga(lambda_i, 1) draws.

    g(psi) = [2 / (Gamma(l1) Gamma(l2))] * psi^((l1+l2)/2 - 1)
             * K_{|l1-l2|}(2 sqrt(psi))
    with K the modified Bessel function of the third kind. Evaluated through
    the exponentially scaled Bessel function so large psi does not underflow.
    """
    psi = np.asarray(psi, dtype=float)
    if np.any(~np.isfinite(psi)) or np.any(psi <= 0):
        raise ValueError("product-of-gammas density requires finite psi > 0")
    if not (lambda1 > 0 and lambda2 > 0):
        raise ConfigError("both gamma shapes must be positive")
    nu = abs(lambda1 - lambda2)
    x = 2.0 * np.sqrt(psi)
    # kve(nu, x) = exp(x) * K_nu(x), accurate to ~1e-14 relative over this range
    log_k = np.log(special.kve(nu, x)) - x
    return (np.log(2.0) - special.gammaln(lambda1) - special.gammaln(lambda2)
            + ((lambda1 + lambda2) / 2.0 - 1.0) * np.log(psi) + log_k)


DEFAULT_EPS_GRID = np.geomspace(1e-2, 1e-5, 12)

_MIN_TAIL_COUNT = 100   # draws required below the largest grid point
_MIN_POINT_COUNT = 10   # draws required for a grid point to enter the fit


def estimate_sparsity_shape(
    draw: Callable[[int], np.ndarray],
    n: int = 1_000_000,
    eps_grid: np.ndarray | None = None,
) -> float:
    """Estimate the power-law exponent of a mixing density near zero.

    If the density of psi behaves like kappa * psi^(z-1) near 0, the CDF
    satisfies F(eps) ~ kappa * eps^z / z, so z is the slope of
    log F(eps) against log eps. ``draw`` must map a count to that many
    independent samples of psi.

    Grid points with fewer than 10 samples below them are dropped from the
    regression; if fewer than 100 samples fall below the largest grid point
    (or fewer than three points survive), an InsufficientDataError carrying
    the observed count is raised.
    """
    if n < 1_000_000:
        raise ValueError(f"need at least 1e6 draws for a stable estimate, got {n}")
    if eps_grid is None:
        eps_grid = DEFAULT_EPS_GRID
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid <= 0) or np.any(eps_grid > 0.1):
        raise ValueError("eps_grid values must lie in (0, 0.1]")
    if np.any(np.diff(eps_grid) >= 0):
        raise ValueError("eps_grid must be strictly decreasing")

    samples = np.sort(np.asarray(draw(n), dtype=float))
    counts = np.searchsorted(samples, eps_grid, side="right")
    if counts[0] < _MIN_TAIL_COUNT:
        raise InsufficientDataError(
            f"only {counts[0]} of {n} draws fall below max(eps_grid)="
            f"{eps_grid[0]:g}; too few to resolve the near-zero slope",
            count=int(counts[0]),
        )
    keep = counts >= _MIN_POINT_COUNT
    if keep.sum() < 3:
        raise InsufficientDataError(
            f"only {int(keep.sum())} grid points have at least "
            f"{_MIN_POINT_COUNT} draws below them",
            count=int(counts[0]),
        )
    log_eps = np.log(eps_grid[keep])
    log_cdf = np.log(counts[keep] / n)
    slope = np.polyfit(log_eps, log_cdf, 1)[0]
    return float(slope)
