#!/usr/bin/env python

"""
.. currentmodule:: conftest

Provide fixtures for all tests.
"""

from pathlib import Path

import click
import pytest

from hom_forecast.application_state import ApplicationState
from hom_forecast.config import PipelineConfig
from hom_forecast.model import ModelParams
from hom_forecast.simulate import synthetic_series


# Adapted from https://github.com/pytest-dev/pytest/issues/1872#issuecomment-375108891:
@pytest.fixture(scope="session")
def monkeypatch_session():
    from _pytest.monkeypatch import MonkeyPatch

    m = MonkeyPatch()
    yield m
    m.undo()


# Avoid accidentally reading or writing from the host home directory.
@pytest.fixture(scope="class", autouse=True)
def home_path(tmp_path_factory, monkeypatch_session):
    home_dir = tmp_path_factory.mktemp("home")
    assert isinstance(home_dir, Path)
    monkeypatch_session.setattr(Path, "home", lambda: home_dir)


# Avoid accidentally reading or writing from the host config directory.
@pytest.fixture(scope="class", autouse=True)
def app_config_dir(tmp_path_factory, monkeypatch_session):
    app_config_dir = tmp_path_factory.mktemp("app_dirs")
    monkeypatch_session.setattr(
        click, "get_app_dir", lambda app_id: str(app_config_dir.joinpath(app_id))
    )
    yield app_config_dir


# Relative output directories end up in a scratch directory.
@pytest.fixture(autouse=True)
def _work_dir(tmp_path_factory, monkeypatch):
    monkeypatch.chdir(tmp_path_factory.mktemp("work"))


@pytest.fixture
def config():
    return PipelineConfig()


@pytest.fixture
def small_config():
    "Settings sized for the short synthetic series."
    return PipelineConfig(history_len=30, n_paths=200, max_sweeps=30)


@pytest.fixture
def application_state():
    return ApplicationState()


@pytest.fixture(scope="session")
def true_params():
    return ModelParams(a=0.2, b=100.0, sigma=0.01, tau=5)


@pytest.fixture(scope="session")
def delayed_series(true_params):
    "A 400-point path of the delayed model."
    return synthetic_series(true_params, 400, seed=7)


@pytest.fixture
def series_csv(tmp_path, delayed_series):
    path = tmp_path / "prices.csv"
    path.write_text(delayed_series.to_csv())
    return path


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        dest="slow",
        default=False,
        help="Enable long running tests.",
    )


def pytest_configure(config):
    if not config.option.slow:
        setattr(config.option, "markexpr", "not slow")  # noqa
