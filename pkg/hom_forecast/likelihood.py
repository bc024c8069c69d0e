from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import LOGGER
from .data import IndexRange, mask_from_ranges
from .model import ModelParams, diffusion_coeff, drift
from .simulate import DEFAULT_VARIANCE_FLOOR

LOG_2PI = math.log(2 * math.pi)

PROFILE_PARAMETERS = ("a", "b", "sigma", "tau")


class LikelihoodError(ValueError):
    """Base class for failures to evaluate the log-likelihood."""


class InsufficientData(LikelihoodError):
    """Raised when the series holds no transition with a valid lag."""


class NonFiniteLikelihood(LikelihoodError):
    """Raised when the log-likelihood evaluates to NaN or infinity."""


@dataclass(frozen=True, eq=False)
class LikelihoodInput:
    """Price series scored by the Euler-Maruyama transition density.

    The first max(tau, params.tau) + 1 prices are conditioning data only, so
    an input built with `tau` equal to the largest delay under consideration
    scores every candidate delay on the same transitions.
    """

    series: np.ndarray
    tau: int = 0
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    excluded: tuple[IndexRange, ...] = field(default=())

    def __post_init__(self):
        series = np.array(self.series, dtype=float)
        series.setflags(write=False)
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "excluded", tuple(map(tuple, self.excluded)))
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative: {self.tau}")
        if self.variance_floor <= 0:
            raise ValueError(f"variance_floor must be positive: {self.variance_floor}")
        if not np.all(np.isfinite(series)):
            raise ValueError("Likelihood input contains non-finite prices.")
        if len(series) < self.tau + 2:
            raise InsufficientData(
                f"{len(series)} price(s) cannot condition on tau={self.tau}."
            )


def transition_terms(params: ModelParams, data: LikelihoodInput) -> np.ndarray:
    """Per-transition Gaussian log-densities, excluded transitions removed."""
    x = data.series
    n = len(x)
    if n < params.tau + 2:
        raise InsufficientData(f"{n} price(s) cannot condition on tau={params.tau}.")
    first = max(data.tau, params.tau)
    current = x[first : n - 1]
    lagged = x[first - params.tau : n - 1 - params.tau]
    following = x[first + 1 :]

    mean = current + drift(params, lagged)
    variance = np.maximum(diffusion_coeff(params, current) ** 2, data.variance_floor)
    terms = -0.5 * (LOG_2PI + np.log(variance)) - (following - mean) ** 2 / (
        2 * variance
    )
    if data.excluded:
        excluded = mask_from_ranges(n, data.excluded)
        index = np.arange(first, n - 1)
        keep = ~(excluded[index] | excluded[index + 1] | excluded[index - params.tau])
        terms = terms[keep]
    return terms


def log_likelihood(params: ModelParams, data: LikelihoodInput) -> float:
    value = float(np.sum(transition_terms(params, data)))
    if not math.isfinite(value):
        raise NonFiniteLikelihood(f"Log-likelihood is {value} at {params}.")
    return value


def log_likelihood_profile(
    data: LikelihoodInput,
    fixed: ModelParams,
    free: str,
    grid: Iterable[float],
    workers: int = 1,
) -> list[tuple[float, Optional[float]]]:
    """Log-likelihood along `grid` for the `free` parameter, others from `fixed`.

    Points that cannot be evaluated are reported as None.
    """
    if free not in PROFILE_PARAMETERS:
        raise ValueError(f"Unknown parameter {free!r}, expected one of {PROFILE_PARAMETERS}.")
    values: Sequence[float] = list(grid)
    if not values:
        raise ValueError("Profile grid is empty.")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("Profile grid contains non-finite values.")

    def evaluate(value: float) -> Optional[float]:
        try:
            return log_likelihood(replace(fixed, **{free: value}), data)
        except ValueError as error:
            LOGGER.debug(f"Profile point {free}={value} failed: {error}")
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(evaluate, values))
    else:
        results = [evaluate(v) for v in values]
    return list(zip(values, results))
