import math

import numpy as np
import pytest
from scipy import stats

from hom_forecast.likelihood import (
    InsufficientData,
    LikelihoodInput,
    NonFiniteLikelihood,
    log_likelihood,
    log_likelihood_profile,
    transition_terms,
)
from hom_forecast.model import ModelParams
from hom_forecast.simulate import synthetic_series

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def test_single_transition():
    params = ModelParams(0.0, 100, 0.01)
    value = log_likelihood(params, LikelihoodInput([100.0, 100.0]))
    assert value == pytest.approx(-HALF_LOG_2PI)
    assert value == pytest.approx(-0.9189, abs=1e-4)


def test_zero_residuals_unit_variance():
    # A constant series at the level b has zero residuals; sigma * x = 1.
    series = np.full(12, 50.0)
    params = ModelParams(0.3, 50, 0.02, tau=3)
    value = log_likelihood(params, LikelihoodInput(series))
    assert value == pytest.approx(-(12 - 1 - 3) * HALF_LOG_2PI)


def _brute_force(params, series):
    total = 0.0
    for i in range(params.tau, len(series) - 1):
        mean = series[i] + params.a * (params.b - series[i - params.tau])
        sd = max(abs(params.sigma * series[i]), 1e-6)
        total += stats.norm.logpdf(series[i + 1], mean, sd)
    return total


@pytest.mark.parametrize("tau", [0, 1, 4])
def test_matches_per_term_oracle(tau):
    params = ModelParams(0.15, 100, 0.02, tau=tau)
    series = synthetic_series(ModelParams(0.2, 100, 0.02, tau=2), 20, seed=5).prices
    assert log_likelihood(params, LikelihoodInput(series)) == pytest.approx(
        _brute_force(params, series), rel=1e-12
    )


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        LikelihoodInput([1.0, 2.0], tau=1)
    with pytest.raises(InsufficientData):
        log_likelihood(ModelParams(0.1, 1, 0.1, tau=3), LikelihoodInput([1.0, 2.0, 3.0]))


def test_variance_floor_keeps_zero_prices_finite():
    params = ModelParams(0.1, 1, 0.5)
    value = log_likelihood(params, LikelihoodInput([0.0, 0.0, 0.1]))
    assert math.isfinite(value)


def test_non_finite_likelihood():
    params = ModelParams(1e300, 1e300, 0.0)
    with pytest.raises(NonFiniteLikelihood):
        log_likelihood(params, LikelihoodInput([-1e300, 1e300, -1e300]))


def test_conditioning_offset():
    series = synthetic_series(ModelParams(0.2, 100, 0.02), 30, seed=1).prices
    params = ModelParams(0.2, 100, 0.02, tau=2)
    assert len(transition_terms(params, LikelihoodInput(series))) == 27
    assert len(transition_terms(params, LikelihoodInput(series, tau=10))) == 19


def test_additivity_over_contiguous_split():
    params = ModelParams(0.1, 100, 0.02, tau=3)
    series = synthetic_series(ModelParams(0.2, 100, 0.02, tau=3), 60, seed=9).prices
    whole = log_likelihood(params, LikelihoodInput(series))
    cut = 25
    left = log_likelihood(params, LikelihoodInput(series[: cut + 1]))
    right = log_likelihood(
        params, LikelihoodInput(series[cut - params.tau :], tau=params.tau)
    )
    assert whole == pytest.approx(left + right, rel=1e-12)


def test_tau_zero_equals_markov():
    series = synthetic_series(ModelParams(0.2, 100, 0.02), 40, seed=3).prices
    hom = ModelParams(0.2, 101, 0.03, tau=0)
    data = LikelihoodInput(series)
    assert log_likelihood(hom, data) == log_likelihood(hom.markov(), data)


def test_frozen_segment_exclusion_invariance():
    params = ModelParams(0.1, 100, 0.02, tau=3)
    series = synthetic_series(ModelParams(0.2, 100, 0.02, tau=3), 50, seed=2).prices
    frozen = np.concatenate([series, np.full(15, series[-1])])
    base = log_likelihood(params, LikelihoodInput(series))
    masked = log_likelihood(
        params, LikelihoodInput(frozen, excluded=((len(series), len(frozen) - 1),))
    )
    assert masked == pytest.approx(base, rel=1e-12)


def test_exclusion_drops_lagged_transitions():
    params = ModelParams(0.1, 100, 0.02, tau=2)
    series = np.linspace(90, 110, 20)
    kept = transition_terms(params, LikelihoodInput(series, excluded=((5, 5),)))
    # Transitions 4, 5 and 7 touch index 5 as target, current or lagged price.
    assert len(kept) == 17 - 3


def test_profile_single_point():
    params = ModelParams(0.1, 100, 0.02, tau=1)
    data = LikelihoodInput(np.linspace(95, 105, 15))
    [(value, loglik)] = log_likelihood_profile(data, params, "a", [0.25])
    assert value == 0.25
    assert loglik == log_likelihood(ModelParams(0.25, 100, 0.02, tau=1), data)


def test_profile_order_and_failures():
    params = ModelParams(0.1, 100, 0.02, tau=1)
    data = LikelihoodInput(np.linspace(95, 105, 15))
    profile = log_likelihood_profile(data, params, "sigma", [0.01, -1.0, 0.03], workers=2)
    assert [value for value, _ in profile] == [0.01, -1.0, 0.03]
    assert profile[1][1] is None
    assert profile[0][1] is not None


def test_profile_validation():
    params = ModelParams(0.1, 100, 0.02)
    data = LikelihoodInput([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        log_likelihood_profile(data, params, "gamma", [1.0])
    with pytest.raises(ValueError):
        log_likelihood_profile(data, params, "a", [])
    with pytest.raises(ValueError):
        log_likelihood_profile(data, params, "a", [float("inf")])


def test_b_profile_maximum_at_closest_grid_point():
    truth = ModelParams(0.3, 100, 0.005)
    series = synthetic_series(truth, 300, seed=4).prices
    data = LikelihoodInput(series)
    grid = np.linspace(95, 105, 41)
    profile = log_likelihood_profile(data, truth, "b", grid)
    best = max(profile, key=lambda point: point[1])[0]
    # The log-likelihood is quadratic in b; its maximizer in closed form:
    x, a = series, truth.a
    target = x[1:] - x[:-1] + a * x[:-1]
    weights = 1 / (truth.sigma * x[:-1]) ** 2
    optimum = np.sum(weights * target) / (a * np.sum(weights))
    assert best == grid[np.argmin(np.abs(grid - optimum))]


def test_tau_profile_finds_delay():
    truth = ModelParams(0.3, 100, 0.002, tau=4)
    series = synthetic_series(truth, 400, seed=6).prices
    data = LikelihoodInput(series, tau=10)
    profile = log_likelihood_profile(data, truth, "tau", range(11))
    assert max(profile, key=lambda point: point[1])[0] == 4
