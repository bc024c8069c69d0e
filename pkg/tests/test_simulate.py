from datetime import date

import numpy as np
import pytest

from hom_forecast.model import HistoryMismatch, HistoryWindow, ModelKind, ModelParams
from hom_forecast.simulate import (
    EnsembleTail,
    ForecastEnsemble,
    SimConfig,
    path_noise,
    resume_simulation,
    simulate_paths,
    step,
    synthetic_series,
    tail_windows,
)
from hom_forecast.util import read_matrix_csv


@pytest.mark.parametrize(
    "params, current, lagged, noise, expected",
    [
        (ModelParams(0, 100, 0), 123.0, 7.0, 2.5, 123.0),
        (ModelParams(0.1, 400, 0.01), 380.0, 300.0, 0.0, 390.0),
        (ModelParams(0, 1, 0.02), 100.0, 0.0, 1.5, 103.0),
    ],
)
def test_step(params, current, lagged, noise, expected):
    assert step(params, current, lagged, noise) == pytest.approx(expected)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=1, n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=1, seed=-1)


def test_deterministic_path():
    params = ModelParams(0.5, 100, 0.0)
    ensemble = simulate_paths(
        params, HistoryWindow.constant(80, 0), SimConfig(horizon=3, n_paths=4)
    )
    assert ensemble.paths.shape == (4, 3)
    np.testing.assert_allclose(ensemble.paths, [[90, 95, 97.5]] * 4)


def test_constant_path_at_mean():
    params = ModelParams(0.3, 100, 0.0, tau=2)
    history = HistoryWindow((100, 100), 100)
    ensemble = simulate_paths(params, history, SimConfig(horizon=20, n_paths=2))
    np.testing.assert_array_equal(ensemble.paths, np.full((2, 20), 100.0))


def test_delay_buffer_rolls_forward():
    # Without noise, x[k+1] = x[k] + a (b - x[k - tau]).
    params = ModelParams(0.1, 10, 0.0, tau=2)
    history = HistoryWindow((0.0, 5.0), 8.0)
    ensemble = simulate_paths(params, history, SimConfig(horizon=6, n_paths=1))
    x = [0.0, 5.0, 8.0]
    for _ in range(6):
        x.append(x[-1] + 0.1 * (10 - x[-3]))
    np.testing.assert_allclose(ensemble.paths[0], x[3:])


def test_history_mismatch():
    params = ModelParams(0.1, 100, 0.01, tau=5)
    with pytest.raises(HistoryMismatch):
        simulate_paths(params, HistoryWindow.constant(100, 4), SimConfig(horizon=3))


def test_ensemble_shape_and_reproducibility():
    params = ModelParams(0.01, 100, 0.02, tau=3)
    history = HistoryWindow.constant(100, 3)
    config = SimConfig(horizon=210, n_paths=2000, seed=11)
    first = simulate_paths(params, history, config)
    second = simulate_paths(params, history, config)
    assert first.paths.shape == (2000, 210)
    assert np.all(np.isfinite(first.paths))
    np.testing.assert_array_equal(first.paths, second.paths)


def test_independent_of_worker_count():
    params = ModelParams(0.05, 100, 0.02, tau=4)
    history = HistoryWindow.constant(95, 4)
    single = simulate_paths(params, history, SimConfig(horizon=50, n_paths=64, seed=3))
    threaded = simulate_paths(
        params, history, SimConfig(horizon=50, n_paths=64, seed=3, workers=4)
    )
    np.testing.assert_array_equal(single.paths, threaded.paths)


def test_paths_use_distinct_substreams():
    params = ModelParams(0.05, 100, 0.02)
    ensemble = simulate_paths(
        params, HistoryWindow.constant(100, 0), SimConfig(horizon=10, n_paths=2)
    )
    assert not np.array_equal(ensemble.paths[0], ensemble.paths[1])


def test_path_noise_continues_substream():
    full = path_noise(5, 2, 0, 30)
    np.testing.assert_array_equal(path_noise(5, 2, 12, 18), full[12:])


def test_tau_zero_hom_equals_markov():
    hom = ModelParams(0.05, 100, 0.02, tau=0)
    markov = ModelParams(0.05, 100, 0.02, kind=ModelKind.MARKOV)
    history = HistoryWindow.constant(90, 0)
    config = SimConfig(horizon=40, n_paths=100, seed=8)
    np.testing.assert_array_equal(
        simulate_paths(hom, history, config).paths,
        simulate_paths(markov, history, config).paths,
    )


@pytest.mark.parametrize("tau", [0, 1, 7, 50])
@pytest.mark.parametrize("split_at", [0, 40, 99])
def test_resume_reproduces_uninterrupted_run(tau, split_at):
    params = ModelParams(0.05, 100, 0.02, tau=tau)
    history = HistoryWindow(tuple(np.linspace(90, 110, tau)), 100.0)
    full = simulate_paths(params, history, SimConfig(horizon=100, n_paths=25, seed=4))
    tail = tail_windows(full, history, split_at)
    assert tail.step == split_at
    resumed = resume_simulation(
        tail, params, SimConfig(horizon=100 - split_at, n_paths=25, seed=4)
    )
    assert resumed.start_step == split_at
    np.testing.assert_array_equal(resumed.paths, full.paths[:, split_at:])


def test_resume_with_short_window():
    params = ModelParams(0.05, 100, 0.02, tau=5)
    tail = EnsembleTail((HistoryWindow.constant(100, 4),), step=3)
    with pytest.raises(HistoryMismatch):
        resume_simulation(tail, params, SimConfig(horizon=5, n_paths=1))


def test_resume_path_count_mismatch():
    params = ModelParams(0.05, 100, 0.02)
    tail = EnsembleTail((HistoryWindow.constant(100, 0),) * 2)
    with pytest.raises(ValueError):
        resume_simulation(tail, params, SimConfig(horizon=5, n_paths=3))


@pytest.mark.parametrize("tau", [0, 5, 10])
def test_long_run_mean(tau):
    params = ModelParams(0.05, 100, 0.01, tau=tau)
    ensemble = simulate_paths(
        params,
        HistoryWindow.constant(100, tau),
        SimConfig(horizon=10000, n_paths=200, seed=tau),
    )
    path_means = ensemble.paths[:, 4999:].mean(axis=1)
    standard_error = path_means.std(ddof=1) / np.sqrt(len(path_means))
    assert abs(path_means.mean() - 100) < 3 * standard_error


def test_ensemble_summary_and_exports(tmp_path):
    paths = np.array([[1.0, 2.0, 3.0], [3.0, 4.0, 5.0]])
    ensemble = ForecastEnsemble(paths, seed=1)
    summary = ensemble.summary()
    np.testing.assert_allclose(summary[:, 0], [2, 3, 4])
    assert np.all(summary[:, 1] <= summary[:, 0])
    assert np.all(summary[:, 0] <= summary[:, 2])
    np.testing.assert_array_equal(ensemble.at_step(2), [2.0, 4.0])
    with pytest.raises(ValueError):
        ensemble.at_step(4)

    ensemble.write_paths(tmp_path / "ensemble.csv")
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "ensemble.csv"), paths)
    ensemble.write_summary(tmp_path / "summary.csv", [date(2020, 1, 1)])
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == "step,date,mean,p05,p95"
    assert lines[1].startswith("1,2020-01-01,2.0,")
    assert lines[3].startswith("3,,4.0,")


def test_ensemble_is_read_only():
    ensemble = ForecastEnsemble(np.ones((2, 2)))
    with pytest.raises(ValueError):
        ensemble.paths[0, 0] = 2.0


def test_synthetic_series(true_params):
    series = synthetic_series(true_params, 50, seed=2, start_date=date(2021, 1, 1))
    assert len(series) == 50
    assert series.prices[0] == true_params.b
    assert all(day.weekday() < 5 for day in series.dates)
    again = synthetic_series(true_params, 50, seed=2, start_date=date(2021, 1, 1))
    assert again == series
