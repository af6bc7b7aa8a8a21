"""Kernel density estimation of strategy-utility distributions.

Gaussian kernel; bandwidth chosen by held-out log-likelihood over a
geometric grid around the training-sample standard deviation.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-9
DEFAULT_HOLDOUT_FRACTION = 0.05
BANDWIDTH_GRID_EXPONENTS = range(-6, 4)
GRID_POINTS = 512
GRID_MARGIN_BANDWIDTHS = 6.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class TooFewPointsError(ValueError):
    pass


def kde_density(utilities: list[float], h: float, x: float) -> float:
    """f(x) = (1/(n*h)) * sum of K((x - u_i)/h) with standard normal K."""
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if not utilities:
        raise ValueError("need at least one data point")
    total = 0.0
    for u in utilities:
        z = (x - u) / h
        total += _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    return total / (len(utilities) * h)


def kde_grid(utilities: list[float], h: float, grid: np.ndarray) -> np.ndarray:
    """Vectorized kde_density over a grid of evaluation points."""
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if not utilities:
        raise ValueError("need at least one data point")
    data = np.asarray(utilities, dtype=float)
    z = (grid[:, None] - data[None, :]) / h
    return (_INV_SQRT_2PI * np.exp(-0.5 * z * z)).sum(axis=1) / (len(data) * h)


def normal_pdf(x: float, mean: float, std: float) -> float:
    std = max(std, SIGMA_FLOOR)
    z = (x - mean) / std
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z) / std


def fit_normal(utilities: list[float]) -> tuple[float, float]:
    """Sample mean and sample standard deviation (n-1 denominator)."""
    if len(utilities) < 2:
        raise TooFewPointsError("normal fit needs at least two points")
    return statistics.fmean(utilities), statistics.stdev(utilities)


def select_bandwidth(
    utilities: list[float],
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
    seed: int = 0,
) -> float:
    """Bandwidth maximizing held-out log-likelihood.

    A seeded shuffle withholds `holdout_fraction` of the data; candidate
    bandwidths are sigma * 2^k for k in -6..3 where sigma is the training
    split's standard deviation (floored to avoid zero-width kernels).
    Ties go to the smallest bandwidth, so the result is deterministic.
    """
    if len(utilities) < 20:
        raise TooFewPointsError(
            f"bandwidth selection needs >= 20 points, got {len(utilities)}"
        )
    if not 0 < holdout_fraction < 1:
        raise ValueError("holdout fraction must lie in (0, 1)")
    order = list(range(len(utilities)))
    random.Random(seed).shuffle(order)
    n_held = max(1, round(len(utilities) * holdout_fraction))
    held = [utilities[i] for i in order[:n_held]]
    train = [utilities[i] for i in order[n_held:]]
    sigma = max(statistics.stdev(train) if len(train) > 1 else 0.0, SIGMA_FLOOR)
    best_h = None
    best_ll = None
    for k in BANDWIDTH_GRID_EXPONENTS:
        h = sigma * 2.0 ** k
        ll = 0.0
        for x in held:
            ll += math.log(max(kde_density(train, h, x), 1e-300))
        if best_ll is None or ll > best_ll:
            best_h, best_ll = h, ll
    return best_h


@dataclass
class DensityEstimate:
    """A density sampled on a regular grid wide enough that its numeric
    integral is 1 to within about 1e-3."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    holdout_fraction: float

    def integral(self) -> float:
        return float(np.trapz(self.density, self.grid))


def density_grid(lo: float, hi: float, h: float,
                 points: int = GRID_POINTS) -> np.ndarray:
    pad = GRID_MARGIN_BANDWIDTHS * h
    return np.linspace(lo - pad, hi + pad, points)


def estimate_density(
    utilities: list[float],
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
    seed: int = 0,
    bandwidth: float | None = None,
    grid: np.ndarray | None = None,
) -> DensityEstimate:
    """KDE with selected (or given) bandwidth on an auto-sized grid."""
    h = bandwidth if bandwidth is not None else \
        select_bandwidth(utilities, holdout_fraction, seed)
    if grid is None:
        grid = density_grid(min(utilities), max(utilities), h)
    return DensityEstimate(
        grid=grid,
        density=kde_grid(utilities, h, grid),
        bandwidth=h,
        holdout_fraction=holdout_fraction,
    )
