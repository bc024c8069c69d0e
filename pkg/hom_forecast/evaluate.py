"""Mean-path forecasts over the validation window and their error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .calibrate import FitResult, fit_pipeline
from .config import PipelineConfig
from .core import LOGGER
from .data import (
    IndexRange,
    PriceSeries,
    SeriesSplit,
    date_ranges_to_indices,
    detect_frozen_runs,
    mask_from_ranges,
)
from .model import HistoryWindow, ModelKind, ModelParams
from .simulate import ForecastEnsemble, SimConfig, simulate_paths
from .util import derive_seed, write_csv

METRICS_HEADER = ("model", "MAE", "MRE", "RMSE", "RMSR", "MXE", "n_points_used", "seed")


class MetricsError(ValueError):
    """Base class for failures to compute forecast error metrics."""


class LengthMismatch(MetricsError):
    """Raised when forecast and realized prices differ in length."""


class ZeroRealizedPrice(MetricsError):
    """Raised when a relative metric would divide by a zero realized price."""


class EmptyEvaluationSet(MetricsError):
    """Raised when the exclusion mask leaves no point to evaluate."""


@dataclass(frozen=True)
class EvalReport:
    """Forecast errors over the unmasked points; relative metrics in percent."""

    mae: float
    mre_pct: float
    rmse: float
    rmsr_pct: float
    mxe: float
    n_points_used: int
    excluded_ranges: tuple[IndexRange, ...] = field(default=())
    seed: Optional[int] = None
    model: str = ""

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "mae": self.mae,
            "mre_pct": self.mre_pct,
            "rmse": self.rmse,
            "rmsr_pct": self.rmsr_pct,
            "mxe": self.mxe,
            "n_points_used": self.n_points_used,
            "excluded_ranges": [list(r) for r in self.excluded_ranges],
            "seed": self.seed,
        }

    def row(self) -> list:
        return [
            self.model,
            self.mae,
            self.mre_pct,
            self.rmse,
            self.rmsr_pct,
            self.mxe,
            self.n_points_used,
            self.seed,
        ]


def mean_path(ensemble: ForecastEnsemble) -> np.ndarray:
    """Arithmetic mean price across paths, one value per step.

    Averaged as deviations from the first path, so identical paths give that
    path back exactly.
    """
    first = ensemble.paths[0]
    return first + (ensemble.paths - first).mean(axis=0)


def error_metrics(
    forecast: Union[Sequence[float], np.ndarray],
    realized: Union[Sequence[float], np.ndarray],
    mask: Sequence[IndexRange] = (),
) -> EvalReport:
    forecast = np.asarray(forecast, dtype=float)
    realized = np.asarray(realized, dtype=float)
    if forecast.shape != realized.shape or forecast.ndim != 1:
        raise LengthMismatch(
            f"Forecast has {forecast.size} point(s), realized has {realized.size}."
        )
    keep = ~mask_from_ranges(len(realized), mask)
    if not keep.any():
        raise EmptyEvaluationSet("Every point of the evaluation window is excluded.")

    residual = forecast[keep] - realized[keep]
    scale = np.abs(realized[keep])
    if np.any(scale == 0):
        raise ZeroRealizedPrice("Relative errors are undefined for a zero realized price.")
    absolute = np.abs(residual)
    relative = absolute / scale
    return EvalReport(
        mae=float(np.mean(absolute)),
        mre_pct=100 * float(np.mean(relative)),
        rmse=math.sqrt(float(np.mean(residual**2))),
        rmsr_pct=100 * math.sqrt(float(np.mean(relative**2))),
        mxe=float(np.max(absolute)),
        n_points_used=int(keep.sum()),
        excluded_ranges=tuple(tuple(r) for r in mask),
    )


def validation_mask(split: SeriesSplit, config: PipelineConfig) -> list[IndexRange]:
    """Excluded index ranges of the validation window."""
    ranges = date_ranges_to_indices(split.validation, config.exclusion_dates())
    if config.auto_exclude_frozen:
        frozen = detect_frozen_runs(split.validation, config.frozen_min_run)
        if frozen:
            LOGGER.info(f"Excluding {len(frozen)} frozen run(s) from the evaluation.")
        ranges.extend(frozen)
    return sorted(ranges)


def forecast_validation(
    params: ModelParams,
    split: SeriesSplit,
    n_paths: int,
    seed: int,
    workers: int = 1,
    horizon: Optional[int] = None,
) -> ForecastEnsemble:
    """Simulate from the end of the training data, by default over the validation window.

    The delay window is taken from the last tau prices before the anchor, which
    may reach back into the set-aside history.
    """
    history = HistoryWindow.from_prices(split.conditioning.prices, params.tau)
    config = SimConfig(
        horizon=horizon or len(split.validation),
        n_paths=n_paths,
        seed=seed,
        workers=workers,
    )
    return simulate_paths(params, history, config)


@dataclass(frozen=True, eq=False)
class ModelEvaluation:
    params: ModelParams
    ensemble: ForecastEnsemble
    report: EvalReport
    fit: Optional[FitResult] = None

    @property
    def mean(self) -> np.ndarray:
        return mean_path(self.ensemble)

    def to_dict(self) -> dict:
        result = {"params": self.params.to_dict(), "metrics": self.report.to_dict()}
        if self.fit is not None:
            result["fit"] = self.fit.to_dict()
        return result


def evaluate_params(
    params: ModelParams,
    split: SeriesSplit,
    config: PipelineConfig,
    seed: int,
    fit: Optional[FitResult] = None,
) -> ModelEvaluation:
    ensemble = forecast_validation(params, split, config.n_paths, seed, config.workers)
    mask = validation_mask(split, config)
    report = error_metrics(mean_path(ensemble), split.validation.prices, mask)
    report = replace(report, seed=seed, model=params.kind.value)
    LOGGER.info(
        f"{params.kind.value}: MAE={report.mae:.6g} RMSE={report.rmse:.6g} "
        f"over {report.n_points_used} point(s)."
    )
    return ModelEvaluation(params=params, ensemble=ensemble, report=report, fit=fit)


@dataclass(frozen=True, eq=False)
class ModelComparison:
    split: SeriesSplit
    hom: ModelEvaluation
    markov: ModelEvaluation

    @property
    def evaluations(self) -> tuple[ModelEvaluation, ModelEvaluation]:
        return self.hom, self.markov

    def to_dict(self) -> dict:
        return {
            "split": self.split.describe(),
            "HOM": self.hom.to_dict(),
            "Markov": self.markov.to_dict(),
        }

    def write_metrics(self, path: Path) -> Path:
        return write_csv(path, METRICS_HEADER, [e.report.row() for e in self.evaluations])

    def write_forecast(self, path: Path) -> Path:
        """Plot-ready table of realized prices and both mean paths."""
        rows = zip(
            self.split.validation.dates,
            self.split.validation.prices.tolist(),
            self.hom.mean.tolist(),
            self.markov.mean.tolist(),
        )
        return write_csv(path, ["date", "realized", "HOM", "Markov"], rows)


def evaluate_split(
    split: SeriesSplit,
    hom: ModelParams,
    markov: ModelParams,
    config: PipelineConfig,
    fits: tuple[Optional[FitResult], Optional[FitResult]] = (None, None),
) -> ModelComparison:
    """Forecast both models over the validation window with the same seed."""
    if markov.tau != 0:
        raise ValueError(f"Markov parameters must have tau = 0, got tau = {markov.tau}.")
    seed = derive_seed(config.seed, "forecast")
    return ModelComparison(
        split=split,
        hom=evaluate_params(hom, split, config, seed, fit=fits[0]),
        markov=evaluate_params(markov.markov(), split, config, seed, fit=fits[1]),
    )


def compare_models(series: PriceSeries, config: PipelineConfig) -> ModelComparison:
    """Fit the delayed and the Markov model, then forecast and score both."""
    hom_run = fit_pipeline(series, config, ModelKind.HOM)
    markov_run = fit_pipeline(series, config, ModelKind.MARKOV)
    return evaluate_split(
        hom_run.split,
        hom_run.fit.params,
        markov_run.fit.params,
        config,
        fits=(hom_run.fit, markov_run.fit),
    )
