"""Log-normality tests of simulated price distributions at fixed horizons.

Both tests standardize the log prices with the sample mean and standard
deviation, so the reported p-values ignore the estimation of these two
parameters: KS p-values come out conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .simulate import ForecastEnsemble
from .util import write_csv

#: Significance levels in percent and the matching Anderson-Darling thresholds.
SIGNIFICANCE_LEVELS = (15.0, 10.0, 5.0, 2.5, 1.0)
AD_CRITICAL_VALUES = (0.575, 0.655, 0.785, 0.916, 1.090)

MIN_SAMPLE_SIZE = 8

Sample = Union[Sequence[float], np.ndarray]


class GofError(ValueError):
    """Base class for samples that cannot be tested."""


class NonPositivePrice(GofError):
    """Raised when a sample holds a price that has no logarithm."""


class DegenerateSample(GofError):
    """Raised when the log prices have zero spread."""


class SampleTooSmall(GofError):
    """Raised when a sample is smaller than the minimum test size."""


class GofTest(str, Enum):
    KS = "KS"
    AD = "AD"


@dataclass(frozen=True)
class GofResult:
    test: GofTest
    horizon_step: int
    statistic: float
    p_value: Optional[float] = None
    ad_critical_values: tuple[float, ...] = field(default=AD_CRITICAL_VALUES)
    reject_at: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.statistic < 0:
            raise ValueError(f"Test statistic must be non-negative: {self.statistic}")

    @property
    def statistic_squared(self) -> float:
        return self.statistic**2

    def to_dict(self) -> dict:
        return {
            "test": self.test.value,
            "horizon_step": self.horizon_step,
            "statistic": self.statistic,
            "statistic_squared": self.statistic_squared,
            "p_value": self.p_value,
            "reject_at": list(self.reject_at),
        }


def _standardized_logs(sample: Sample) -> np.ndarray:
    prices = np.asarray(sample, dtype=float)
    if prices.size < MIN_SAMPLE_SIZE:
        raise SampleTooSmall(
            f"Need at least {MIN_SAMPLE_SIZE} prices, got {prices.size}."
        )
    if np.any(prices <= 0):
        raise NonPositivePrice("Log-normality tests need strictly positive prices.")
    y = np.log(prices)
    # A constant sample leaves a rounding-level std instead of exactly zero.
    if np.ptp(y) == 0:
        raise DegenerateSample("Log prices have zero spread.")
    return np.sort((y - np.mean(y)) / np.std(y, ddof=1))


def ks_lognormal(sample: Sample, horizon_step: int = 0) -> GofResult:
    """Kolmogorov-Smirnov distance to the fitted log-normal distribution."""
    z = _standardized_logs(sample)
    n = z.size
    statistic = float(stats.kstest(z, "norm").statistic)
    p_value = float(stats.kstwobign.sf(math.sqrt(n) * statistic))
    return GofResult(
        test=GofTest.KS,
        horizon_step=horizon_step,
        statistic=statistic,
        p_value=p_value,
        reject_at=tuple(
            level for level in SIGNIFICANCE_LEVELS if p_value < level / 100
        ),
    )


def ad_lognormal(sample: Sample, horizon_step: int = 0) -> GofResult:
    """Anderson-Darling statistic against the fitted log-normal distribution.

    The statistic is compared with fixed thresholds at the 15, 10, 5, 2.5 and
    1 percent levels.
    """
    z = _standardized_logs(sample)
    n = z.size
    i = np.arange(1, n + 1)
    # ln(1 - u) through the survival function keeps the tails finite.
    terms = (2 * i - 1) * (stats.norm.logcdf(z) + stats.norm.logsf(z[::-1]))
    statistic = max(float(-n - np.sum(terms) / n), 0.0)
    return GofResult(
        test=GofTest.AD,
        horizon_step=horizon_step,
        statistic=statistic,
        reject_at=tuple(
            level
            for level, critical in zip(SIGNIFICANCE_LEVELS, AD_CRITICAL_VALUES)
            if statistic > critical
        ),
    )


def gof_at_steps(
    ensemble: ForecastEnsemble, steps: Iterable[int]
) -> tuple[list[GofResult], list[GofResult]]:
    """KS and AD results for the ensemble cross-section at each step."""
    ks, ad = [], []
    for step in steps:
        sample = ensemble.at_step(step)
        ks.append(ks_lognormal(sample, step))
        ad.append(ad_lognormal(sample, step))
    return ks, ad


def write_ks(path: Path, results: Sequence[GofResult]) -> Path:
    rows = (
        [r.horizon_step, r.statistic, r.p_value, " ".join(map(str, r.reject_at))]
        for r in results
    )
    return write_csv(path, ["time", "statistic", "p_value", "reject_at"], rows)


def write_ad(path: Path, results: Sequence[GofResult]) -> Path:
    header = [
        "time",
        "statistic",
        "statistic_squared",
        *(f"critical_{level:g}" for level in SIGNIFICANCE_LEVELS),
        "reject_at",
    ]
    rows = (
        [
            r.horizon_step,
            r.statistic,
            r.statistic_squared,
            *r.ad_critical_values,
            " ".join(map(str, r.reject_at)),
        ]
        for r in results
    )
    return write_csv(path, header, rows)


@dataclass(frozen=True, eq=False)
class LogDistribution:
    """Histogram of log prices with the fitted normal density at bin centers."""

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    mu: float
    s: float

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2

    def write_csv(self, path: Path) -> Path:
        rows = zip(
            self.edges[:-1].tolist(),
            self.edges[1:].tolist(),
            self.centers.tolist(),
            self.counts.tolist(),
            self.density.tolist(),
        )
        return write_csv(
            path, ["bin_low", "bin_high", "center", "count", "normal_density"], rows
        )


def distribution_export(
    ensemble: ForecastEnsemble, horizon_step: int, n_bins: int = 50
) -> LogDistribution:
    if n_bins < 1:
        raise ValueError(f"n_bins must be at least 1: {n_bins}")
    prices = ensemble.at_step(horizon_step)
    if np.any(prices <= 0):
        raise NonPositivePrice(
            f"Step {horizon_step} holds non-positive prices; log distribution undefined."
        )
    y = np.log(prices)
    mu = float(np.mean(y))
    s = float(np.std(y, ddof=1)) if np.ptp(y) > 0 else 0.0
    counts, edges = np.histogram(y, bins=n_bins)
    centers = (edges[:-1] + edges[1:]) / 2
    density = stats.norm.pdf(centers, mu, s) if s > 0 else np.zeros(n_bins)
    return LogDistribution(edges=edges, counts=counts, density=density, mu=mu, s=s)
