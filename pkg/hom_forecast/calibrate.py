"""Two-phase maximum likelihood calibration.

A coarse, deterministic grid search provides the starting point (mean price
for b, standard deviation of log prices for sigma, a joint grid over a and
tau); coordinate ascent then cycles through a, b, sigma (golden section
search) and tau (exhaustive integer scan) until a sweep stops improving the
log-likelihood.
"""

# __future__ import needed for classmethod factory functions; should be dropped
# with py 3.10.
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable

import numpy as np

from .config import PipelineConfig
from .core import LOGGER
from .data import IndexRange, PriceSeries, SeriesSplit, date_ranges_to_indices, split_series
from .likelihood import LikelihoodError, LikelihoodInput, log_likelihood
from .model import ModelKind, ModelParams, warn_if_not_mean_reverting
from .optimize import golden_section_max

A_GRID = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1)

TAU_GRID_SIZE = 20

SIGMA_FLOOR = 1e-6

LINE_SEARCH_RTOL = 1e-10

CONTINUOUS = ("a", "b", "sigma")


class CalibrationError(RuntimeError):
    """Raised when the log-likelihood cannot be evaluated during calibration."""


class PipelineError(RuntimeError):
    """Raised by the fit pipeline, tagged with the stage that failed."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


Bound = tuple[float, float]


@dataclass(frozen=True)
class SearchBox:
    a: Bound = (0.0, 1.0)
    b: Bound = (0.0, 1.0)
    sigma: Bound = (SIGMA_FLOOR, 1.0)
    tau: tuple[int, int] = (0, 0)

    def __post_init__(self):
        for name in CONTINUOUS:
            low, high = getattr(self, name)
            if not (math.isfinite(low) and math.isfinite(high) and low < high):
                raise ValueError(f"Invalid search bounds for {name}: ({low}, {high})")
        low, high = self.tau
        if int(low) != low or int(high) != high or not 0 <= low <= high:
            raise ValueError(f"Invalid search bounds for tau: ({low}, {high})")
        object.__setattr__(self, "tau", (int(low), int(high)))

    @classmethod
    def default(cls, train: np.ndarray, history_len: int) -> SearchBox:
        low, high = 0.2 * float(np.min(train)), 5 * float(np.max(train))
        if not low < high:
            low, high = min(low, high) - 1.0, max(low, high) + 1.0
        return cls(b=(low, high), tau=(0, history_len))

    def with_overrides(self, overrides: dict[str, list[float]]) -> SearchBox:
        return replace(self, **{k: tuple(v) for k, v in overrides.items()})

    def clip(self, name: str, value: float) -> float:
        low, high = getattr(self, name)
        return min(max(value, low), high)

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in (*CONTINUOUS, "tau")}


@dataclass(frozen=True)
class InitGuess:
    a0: float
    b0: float
    sigma0: float
    tau0: int
    search_box: SearchBox

    def params(self, kind: ModelKind = ModelKind.HOM) -> ModelParams:
        return ModelParams(self.a0, self.b0, self.sigma0, self.tau0, kind)


@dataclass(frozen=True)
class SweepRecord:
    sweep: int
    params: ModelParams
    loglik: float

    def to_dict(self) -> dict:
        return {"sweep": self.sweep, "loglik": self.loglik, **self.params.to_dict()}


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    final_loglik: float
    sweeps: int
    converged: bool
    initial_loglik: float
    trace: tuple[SweepRecord, ...] = field(default=())

    def to_dict(self, trace: bool = False) -> dict:
        result = {
            "params": self.params.to_dict(),
            "final_loglik": self.final_loglik,
            "initial_loglik": self.initial_loglik,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "mean_reverting": self.params.mean_reverting,
        }
        if trace:
            result["trace"] = [record.to_dict() for record in self.trace]
        return result


@dataclass(frozen=True)
class CalibrationRun:
    fit: FitResult
    split: SeriesSplit
    init: InitGuess


def _log_sigma_guess(train: np.ndarray) -> float:
    if np.all(train > 0):
        return float(np.std(np.log(train), ddof=1))
    LOGGER.warning(
        "Training prices are not all positive; initializing sigma from relative steps."
    )
    return float(np.std(np.diff(train), ddof=1) / np.mean(np.abs(train)))


def initial_guess(
    split: SeriesSplit,
    bounds: SearchBox | None = None,
    excluded: tuple[IndexRange, ...] = (),
) -> InitGuess:
    train = split.train.prices
    box = bounds or SearchBox.default(train, split.history_len)
    b0 = box.clip("b", float(np.mean(train)))
    sigma0 = _log_sigma_guess(train) if len(train) > 1 else 0.0
    sigma0 = box.clip("sigma", max(sigma0, SIGMA_FLOOR))

    data = LikelihoodInput(
        split.conditioning.prices, tau=split.history_len, excluded=excluded
    )
    a_low, a_high = box.a
    a_grid = [a for a in A_GRID if a_low <= a <= a_high] or [(a_low + a_high) / 2]
    tau_grid = sorted(
        {int(t) for t in np.rint(np.linspace(box.tau[0], box.tau[1], TAU_GRID_SIZE))}
    )

    best = None
    for a, tau in product(a_grid, tau_grid):
        loglik = log_likelihood(ModelParams(a, b0, sigma0, tau), data)
        if best is None or loglik > best[0]:
            best = (loglik, a, tau)
    assert best is not None
    _, a0, tau0 = best
    LOGGER.info(
        f"Initial guess a={a0}, b={b0:.6g}, sigma={sigma0:.6g}, tau={tau0} "
        f"({len(a_grid) * len(tau_grid)} grid evaluations)."
    )
    return InitGuess(a0, b0, sigma0, tau0, box)


def _objective(data: LikelihoodInput) -> Callable[[ModelParams], float]:
    def evaluate(params: ModelParams) -> float:
        try:
            return log_likelihood(params, data)
        except LikelihoodError as error:
            raise CalibrationError(f"Log-likelihood failed at {params}: {error}")

    return evaluate


def coordinate_ascent(
    init: InitGuess,
    data: LikelihoodInput,
    tol: float = 1e-8,
    max_sweeps: int = 100,
    kind: ModelKind = ModelKind.HOM,
) -> FitResult:
    if tol <= 0:
        raise ValueError(f"tol must be positive: {tol}")
    box = init.search_box
    evaluate = _objective(data)
    params = init.params(kind)
    best = initial = evaluate(params)
    trace = [SweepRecord(0, params, best)]
    converged = False
    sweep = 0

    for sweep in range(1, max_sweeps + 1):
        start = best
        for name in CONTINUOUS:
            low, high = getattr(box, name)
            current = params
            value, loglik = golden_section_max(
                lambda v, name=name, current=current: evaluate(
                    replace(current, **{name: v})
                ),
                low,
                high,
                LINE_SEARCH_RTOL * (high - low),
            )
            if loglik > best:
                params, best = replace(params, **{name: value}), loglik

        tau_low, tau_high = box.tau
        current = params
        for tau in range(tau_low, tau_high + 1):
            if tau == current.tau:
                continue
            loglik = evaluate(replace(current, tau=tau))
            if loglik > best:
                params, best = replace(current, tau=tau), loglik

        trace.append(SweepRecord(sweep, params, best))
        LOGGER.debug(f"Sweep {sweep}: loglik={best:.10g} {params}")
        if best - start <= tol * abs(best):
            converged = True
            break

    if not converged:
        LOGGER.warning(f"Coordinate ascent did not converge in {max_sweeps} sweeps.")
    LOGGER.info(f"Fitted {params} with loglik={best:.10g} after {sweep} sweep(s).")
    warn_if_not_mean_reverting(params)
    return FitResult(
        params=params,
        final_loglik=best,
        sweeps=sweep,
        converged=converged,
        initial_loglik=initial,
        trace=tuple(trace),
    )


def conditioning_input(split: SeriesSplit, config: PipelineConfig) -> LikelihoodInput:
    """Likelihood input over history and training data, conditioned on the history."""
    excluded: tuple[IndexRange, ...] = ()
    if config.mask_likelihood:
        excluded = tuple(
            date_ranges_to_indices(split.conditioning, config.exclusion_dates())
        )
        LOGGER.info(f"Excluding {len(excluded)} range(s) from the likelihood.")
    return LikelihoodInput(
        split.conditioning.prices, tau=split.history_len, excluded=excluded
    )


def fit_pipeline(
    series: PriceSeries,
    config: PipelineConfig,
    kind: ModelKind = ModelKind.HOM,
) -> CalibrationRun:
    """Split, initialize and calibrate one model on a cleaned price series."""
    try:
        split = split_series(series, config.split_spec())
    except ValueError as error:
        raise PipelineError("split", error)

    try:
        box = SearchBox.default(split.train.prices, split.history_len)
        box = box.with_overrides(config.bounds)
        if kind is ModelKind.MARKOV:
            box = replace(box, tau=(0, 0))
        if box.tau[1] > split.history_len:
            raise ValueError(
                f"tau bound {box.tau[1]} exceeds the set-aside history {split.history_len}."
            )
    except ValueError as error:
        raise PipelineError("bounds", error)

    try:
        data = conditioning_input(split, config)
        init = initial_guess(split, box, data.excluded)
    except ValueError as error:
        raise PipelineError("initial_guess", error)

    try:
        fit = coordinate_ascent(
            init, data, tol=config.tol, max_sweeps=config.max_sweeps, kind=kind
        )
    except (CalibrationError, ValueError) as error:
        raise PipelineError("coordinate_ascent", error)
    return CalibrationRun(fit=fit, split=split, init=init)
