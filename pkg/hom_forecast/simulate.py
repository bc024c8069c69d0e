"""Euler-Maruyama simulation of the delayed mean-reversion price model.

The time step is one observation (dt = 1). Path ``k`` of a run with seed ``s``
draws its Gaussian increments from ``PCG64(SeedSequence([s, k]))`` through
``Generator.standard_normal`` (ziggurat), so every path is reproducible on its
own and independent of how many threads generate the noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import LOGGER
from .data import PriceSeries
from .model import HistoryWindow, ModelParams, diffusion_coeff, drift
from .util import write_csv

DT = 1.0
SQRT_DT = 1.0

DEFAULT_N_PATHS = 2000

DEFAULT_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    n_paths: int = DEFAULT_N_PATHS
    seed: int = 0
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1: {self.horizon}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be at least 1: {self.n_paths}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer: {self.seed}")
        if self.variance_floor <= 0:
            raise ValueError(f"variance_floor must be positive: {self.variance_floor}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1: {self.workers}")


@dataclass(frozen=True, eq=False)
class ForecastEnsemble:
    """Simulated prices, one row per path, one column per step after the start."""

    paths: np.ndarray
    seed: Optional[int] = None
    params: Optional[ModelParams] = None
    start_step: int = 0

    def __post_init__(self):
        if self.paths.ndim != 2 or not self.paths.size:
            raise ValueError(
                f"Ensemble needs a non-empty paths matrix, got {self.paths.shape}."
            )
        self.paths.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    def at_step(self, step: int) -> np.ndarray:
        """Cross-section of prices `step` steps after the start (1-based)."""
        if not 1 <= step <= self.horizon:
            raise ValueError(f"Step {step} outside of horizon 1..{self.horizon}.")
        return self.paths[:, step - 1]

    def summary(self) -> np.ndarray:
        """Per-step mean, 5th and 95th percentile as a (horizon, 3) array."""
        return np.column_stack(
            [
                self.paths.mean(axis=0),
                np.percentile(self.paths, 5, axis=0),
                np.percentile(self.paths, 95, axis=0),
            ]
        )

    def write_paths(self, path: Path) -> Path:
        header = [f"step_{self.start_step + k + 1}" for k in range(self.horizon)]
        return write_csv(path, header, self.paths.tolist())

    def write_summary(self, path: Path, dates: Sequence[date] | None = None) -> Path:
        dates = list(dates or [])
        rows = (
            [self.start_step + k + 1, dates[k] if k < len(dates) else None, *stats]
            for k, stats in enumerate(self.summary().tolist())
        )
        return write_csv(path, ["step", "date", "mean", "p05", "p95"], rows)


@dataclass(frozen=True, eq=False)
class EnsembleTail:
    """State of every path after `step` steps: its delay window and current price."""

    windows: tuple[HistoryWindow, ...]
    step: int = 0

    @property
    def n_paths(self) -> int:
        return len(self.windows)

    def buffers(self, params: ModelParams) -> np.ndarray:
        for window in self.windows:
            window.check(params)
        return np.vstack([window.buffer() for window in self.windows])


def step(params: ModelParams, current, lagged, noise):
    """One Euler-Maruyama step; works on scalars and on arrays of paths."""
    return (
        current
        + drift(params, lagged) * DT
        + diffusion_coeff(params, current) * SQRT_DT * noise
    )


def path_noise(seed: int, path_index: int, start: int, count: int) -> np.ndarray:
    """Standard normal draws `start .. start + count - 1` of one path's substream."""
    generator = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, path_index]))
    )
    if start:
        generator.standard_normal(start)
    return generator.standard_normal(count)


def _noise_matrix(
    seed: int, n_paths: int, start: int, count: int, workers: int
) -> np.ndarray:
    def row(path_index: int) -> np.ndarray:
        return path_noise(seed, path_index, start, count)

    if workers == 1:
        return np.vstack([row(k) for k in range(n_paths)])
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return np.vstack(list(executor.map(row, range(n_paths))))


def _integrate(params: ModelParams, buffers: np.ndarray, noise: np.ndarray) -> np.ndarray:
    tau = params.tau
    n_paths, horizon = noise.shape
    prices = np.empty((n_paths, tau + 1 + horizon))
    prices[:, : tau + 1] = buffers
    for k in range(horizon):
        prices[:, tau + k + 1] = step(
            params, prices[:, tau + k], prices[:, k], noise[:, k]
        )
    if not np.all(np.isfinite(prices)):
        raise FloatingPointError("Simulation diverged to non-finite prices.")
    return prices[:, tau + 1 :]


def simulate_paths(
    params: ModelParams, history: HistoryWindow, config: SimConfig
) -> ForecastEnsemble:
    history.check(params)
    LOGGER.info(
        f"Simulating {config.n_paths} path(s) over {config.horizon} step(s) "
        f"(tau={params.tau}, seed={config.seed})."
    )
    noise = _noise_matrix(config.seed, config.n_paths, 0, config.horizon, config.workers)
    buffers = np.broadcast_to(history.buffer(), (config.n_paths, params.tau + 1))
    return ForecastEnsemble(_integrate(params, buffers, noise), config.seed, params)


def tail_windows(
    ensemble: ForecastEnsemble, history: HistoryWindow, step: int
) -> EnsembleTail:
    """Per-path delay windows of `ensemble` after its first `step` steps."""
    if ensemble.params is None:
        raise ValueError("Cannot cut delay windows from an ensemble without parameters.")
    tau = ensemble.params.tau
    history.check(ensemble.params)
    if not 0 <= step <= ensemble.horizon:
        raise ValueError(f"Step {step} outside of 0..{ensemble.horizon}.")
    full = np.hstack(
        [
            np.broadcast_to(history.buffer(), (ensemble.n_paths, tau + 1)),
            ensemble.paths,
        ]
    )
    return EnsembleTail(
        tuple(
            HistoryWindow(tuple(row[step : step + tau]), row[step + tau])
            for row in full
        ),
        step=ensemble.start_step + step,
    )


def resume_simulation(
    tail: EnsembleTail, params: ModelParams, config: SimConfig
) -> ForecastEnsemble:
    """Continue every path from its window with the rest of its noise substream."""
    if tail.n_paths != config.n_paths:
        raise ValueError(
            f"Tail holds {tail.n_paths} path(s), config asks for {config.n_paths}."
        )
    buffers = tail.buffers(params)
    noise = _noise_matrix(
        config.seed, tail.n_paths, tail.step, config.horizon, config.workers
    )
    return ForecastEnsemble(
        _integrate(params, buffers, noise), config.seed, params, start_step=tail.step
    )


def _weekdays(start: date, count: int) -> list[date]:
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day += timedelta(days=1)
    return days


def synthetic_series(
    params: ModelParams,
    n_points: int,
    seed: int,
    start_date: date = date(2019, 1, 1),
    history: HistoryWindow | None = None,
    source_label: str = "synthetic",
) -> PriceSeries:
    """One simulated path on consecutive weekdays, starting from `history`.

    Without a history the path starts at rest at the mean-reversion level b.
    """
    history = history or HistoryWindow.constant(params.b, params.tau)
    ensemble = simulate_paths(
        params, history, SimConfig(horizon=n_points - 1, n_paths=1, seed=seed)
    )
    prices = np.append(history.anchor, ensemble.paths[0])
    return PriceSeries.from_arrays(
        _weekdays(start_date, n_points), prices, source_label=source_label
    )
