#!/usr/bin/env python
"""Fit, forecast and evaluate delayed mean-reversion models of commodity prices."""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import click
import numpy as np
from tabulate import tabulate

from .application_state import ApplicationState
from .calibrate import PipelineError, conditioning_input, fit_pipeline
from .config import SHORT_SERIES_HISTORY_LEN
from .core import LOGGER
from .data import detect_frozen_runs, split_series
from .evaluate import (
    METRICS_HEADER,
    compare_models,
    evaluate_split,
    forecast_validation,
    mean_path,
)
from .gof import distribution_export, gof_at_steps, write_ad, write_ks
from .likelihood import PROFILE_PARAMETERS, log_likelihood_profile
from .model import HistoryWindow, ModelKind, ModelParams
from .simulate import ForecastEnsemble, SimConfig, simulate_paths
from .util import derive_seed, read_matrix_csv, spinner, write_csv, write_json
from .version import __version__

LOGGING_LEVELS = {
    0: logging.ERROR,
    1: logging.WARN,
    2: logging.INFO,
    3: logging.DEBUG,
}  #: a mapping of `verbose` option counts to logging levels


pass_app_state = click.make_pass_decorator(ApplicationState, ensure=True)


def exception_handler(exception_type, exception, _traceback):
    click.echo(f"Unexpected {exception_type.__name__}: {exception}", err=True)
    click.echo(
        "Use verbose mode `hom-forecast --verbose` to see full stack trace", err=True
    )


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Report domain errors raised within the block as tagged CLI errors."""
    try:
        yield
    except (PipelineError, ValueError, FileNotFoundError, FloatingPointError) as error:
        raise click.ClickException(f"{name}: {error}")


def _short_series(ctx, _param, value):
    if value:
        ctx.ensure_object(ApplicationState).configure(
            history_len=SHORT_SERIES_HISTORY_LEN
        )


def _override(name):
    def callback(ctx, _param, value):
        if value is None or value == ():
            return
        app_state = ctx.ensure_object(ApplicationState)
        if name == "bounds":
            value = {
                **app_state.config.bounds,
                **{bound: [low, high] for bound, low, high in value},
            }
        elif name == "exclusions":
            value = [list(pair) for pair in value]
        try:
            app_state.configure(**{name: value})
        except ValueError as error:
            raise click.BadParameter(str(error))

    return callback


# (declarations, configuration field, click attributes)
PIPELINE_OPTIONS = (
    (
        ("-i", "--input"),
        "input",
        dict(type=click.Path(dir_okay=False), help="CSV file with date and price columns."),
    ),
    (
        ("--history-len",),
        "history_len",
        dict(type=click.IntRange(min=0), help="Observations set aside as history."),
    ),
    (
        ("--short-series",),
        "history_len",
        dict(
            is_flag=True,
            callback=_short_series,
            help=(
                f"Set aside {SHORT_SERIES_HISTORY_LEN} observations, "
                "for series of a few hundred points."
            ),
        ),
    ),
    (
        ("--train-frac",),
        "train_frac",
        dict(
            type=click.FloatRange(min=0, max=1, min_open=True, max_open=True),
            help="Fraction of the remaining data used for training.",
        ),
    ),
    (("--seed",), "seed", dict(type=click.IntRange(min=0), help="Seed of the run.")),
    (("--n-paths",), "n_paths", dict(type=click.IntRange(min=1), help="Ensemble size.")),
    (
        ("--workers",),
        "workers",
        dict(type=click.IntRange(min=1), help="Threads for noise generation."),
    ),
    (
        ("-o", "--output-dir"),
        "output_dir",
        dict(type=click.Path(file_okay=False), help="Directory for all outputs."),
    ),
)

MASK_OPTION = (
    ("--mask-likelihood/--no-mask-likelihood",),
    "mask_likelihood",
    dict(
        default=None,
        help="Drop transitions touching the exclusion ranges from the likelihood.",
    ),
)

FIT_OPTIONS = (
    (
        ("--tol",),
        "tol",
        dict(type=click.FloatRange(min=0, min_open=True), help="Relative tolerance."),
    ),
    (
        ("--max-sweeps",),
        "max_sweeps",
        dict(type=click.IntRange(min=1), help="Maximum coordinate ascent sweeps."),
    ),
    (
        ("--bound",),
        "bounds",
        dict(
            type=(click.Choice(["a", "b", "sigma", "tau"]), float, float),
            multiple=True,
            help="Search interval of a parameter, e.g. '--bound tau 0 30'.",
        ),
    ),
    MASK_OPTION,
)

EXCLUSION_OPTIONS = (
    (
        ("--exclude",),
        "exclusions",
        dict(
            type=(str, str),
            multiple=True,
            help="Inclusive date range (YYYY-MM-DD YYYY-MM-DD) to leave out.",
        ),
    ),
    (
        ("--auto-exclude-frozen/--no-auto-exclude-frozen",),
        "auto_exclude_frozen",
        dict(
            default=None,
            help="Also leave out runs of identical prices in the validation window.",
        ),
    ),
)


def with_options(*options):
    """Add options that override fields of the pipeline configuration."""

    def decorator(cmd):
        for decls, name, attrs in reversed(options):
            attrs = {"callback": _override(name), **attrs}
            cmd = click.option(*decls, expose_value=False, **attrs)(cmd)
        return cmd

    return decorator


def _load_series(app_state):
    with stage("ingest"):
        return app_state.load_series()


def _split(app_state, series):
    with stage("split"):
        return split_series(series, app_state.config.split_spec())


def _required(options: dict, name: str, flag: str):
    if name not in options:
        raise click.UsageError(f"Missing option '{flag}'.")
    return options[name]


def _load_params(path: str) -> ModelParams:
    with stage("params"):
        return ModelParams.loads(Path(path).read_text())


def _params_table(params: ModelParams) -> str:
    return tabulate(
        [[params.kind.value, params.a, params.b, params.sigma, params.tau]],
        headers=["model", "a", "b", "sigma", "tau"],
        floatfmt=".6g",
    )


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "-v",
    "--verbose",
    count=True,
    help=(
        "Increase the output verbosity. "
        "Use '-vv' or '-vvv' for even more verbose output"
    ),
)
@click.option(
    "-c",
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False),
    help="TOML (or .json) file with pipeline settings.",
)
@pass_app_state
def cli(app_state, verbose, config_file):
    # Use the verbosity count to determine the logging level...
    logging.basicConfig(
        level=LOGGING_LEVELS[verbose] if verbose in LOGGING_LEVELS else logging.DEBUG
    )
    if verbose > 0:
        click.secho(
            f"Verbose logging is enabled. "
            f"(LEVEL={logging.getLogger().getEffectiveLevel()})",
            fg="yellow",
            err=True,
        )

    # Hide stack trace by default.
    if verbose == 0:
        sys.excepthook = exception_handler

    LOGGER.info(f"User configuration file path: {app_state.config_path}")
    if config_file:
        with stage("config"):
            app_state.load_config(Path(config_file))
    app_state.check_version()


@cli.command()
def version():
    """Show the version of hom-forecast."""
    click.echo(click.style(f"hom-forecast {__version__}", bold=True))


@cli.command()
@click.option(
    "--model",
    type=click.Choice(["hom", "markov"], case_sensitive=False),
    help="Fit the delayed model or the Markov model (tau = 0). [default: hom]",
)
@click.option(
    "--trace/--no-trace",
    "with_trace",
    default=None,
    help="Include the sweep trace in fit.json.",
)
@with_options(*PIPELINE_OPTIONS, *FIT_OPTIONS)
@pass_app_state
def fit(app_state, model, with_trace):
    """Calibrate model parameters on the history and training data."""
    options = app_state.command_options("fit", model=model, trace=with_trace)
    model = options.get("model", "hom").lower()
    kind = ModelKind.MARKOV if model == "markov" else ModelKind.HOM
    series = _load_series(app_state)
    with stage("fit"):
        with spinner(f"Calibrating {kind.value} model...", delay=0.5):
            run = fit_pipeline(series, app_state.config, kind)

    out = app_state.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "params.json").write_text(run.fit.params.dumps())
    write_json(out / "trace.json", [record.to_dict() for record in run.fit.trace])
    write_json(
        out / "fit.json",
        {
            **run.fit.to_dict(trace=options.get("trace", False)),
            "split": run.split.describe(),
            "search_box": run.init.search_box.to_dict(),
        },
    )
    app_state.save_effective_config()

    click.echo(_params_table(run.fit.params))
    click.echo(
        f"loglik={run.fit.final_loglik:.10g} sweeps={run.fit.sweeps} "
        f"converged={run.fit.converged}"
    )
    if not run.fit.params.mean_reverting:
        click.secho("Warning: fitted a <= 0, the model is not mean-reverting.", fg="yellow")


@cli.command()
@click.option(
    "-p",
    "--params",
    "params_file",
    type=click.Path(exists=True, dir_okay=False),
    help="Parameter file written by 'fit'.",
)
@click.option(
    "--horizon",
    type=click.IntRange(min=1),
    help="Steps to simulate. [default: length of the validation window]",
)
@click.option(
    "--ensemble/--no-ensemble",
    "write_ensemble",
    default=None,
    help="Also write every simulated path.",
)
@with_options(*PIPELINE_OPTIONS)
@pass_app_state
def forecast(app_state, params_file, horizon, write_ensemble):
    """Simulate an ensemble from the end of the training data."""
    options = app_state.command_options(
        "forecast", params=params_file, horizon=horizon, ensemble=write_ensemble
    )
    params = _load_params(_required(options, "params", "--params"))
    split = _split(app_state, _load_series(app_state))
    config = app_state.config
    seed = derive_seed(config.seed, "forecast")
    with stage("forecast"):
        with spinner("Simulating ensemble...", delay=0.5):
            ensemble = forecast_validation(
                params,
                split,
                config.n_paths,
                seed,
                config.workers,
                horizon=options.get("horizon"),
            )

    out = app_state.output_dir
    dates = split.validation.dates
    mean = mean_path(ensemble).tolist()
    write_csv(
        out / "mean_path.csv",
        ["step", "date", "mean"],
        ([k + 1, dates[k] if k < len(dates) else None, m] for k, m in enumerate(mean)),
    )
    ensemble.write_summary(out / "summary.csv", dates)
    if options.get("ensemble", False):
        ensemble.write_paths(out / "ensemble.csv")
    app_state.save_effective_config()
    click.echo(
        f"Simulated {ensemble.n_paths} path(s) over {ensemble.horizon} step(s) "
        f"into {out}."
    )


def _echo_metrics(comparison):
    click.echo(
        tabulate(
            [e.report.row()[:-1] for e in comparison.evaluations],
            headers=METRICS_HEADER[:-1],
            floatfmt=".4f",
        )
    )


def _write_comparison(app_state, comparison):
    out = app_state.output_dir
    comparison.write_metrics(out / "metrics.csv")
    comparison.write_forecast(out / "forecast.csv")
    write_json(out / "comparison.json", comparison.to_dict())
    app_state.save_effective_config()


@cli.command()
@click.option(
    "--hom-params",
    type=click.Path(exists=True, dir_okay=False),
    help="Parameter file of the delayed model.",
)
@click.option(
    "--markov-params",
    type=click.Path(exists=True, dir_okay=False),
    help="Parameter file of the Markov model.",
)
@with_options(*PIPELINE_OPTIONS, *EXCLUSION_OPTIONS)
@pass_app_state
def evaluate(app_state, hom_params, markov_params):
    """Score both models' mean paths against the validation window."""
    options = app_state.command_options(
        "evaluate", hom_params=hom_params, markov_params=markov_params
    )
    hom = _load_params(_required(options, "hom_params", "--hom-params"))
    markov = _load_params(_required(options, "markov_params", "--markov-params"))
    split = _split(app_state, _load_series(app_state))
    with stage("evaluate"):
        with spinner("Forecasting validation window...", delay=0.5):
            comparison = evaluate_split(split, hom, markov, app_state.config)
    _write_comparison(app_state, comparison)
    _echo_metrics(comparison)


@cli.command()
@with_options(*PIPELINE_OPTIONS, *FIT_OPTIONS, *EXCLUSION_OPTIONS)
@pass_app_state
def compare(app_state):
    """Fit both models and score their forecasts over the validation window."""
    series = _load_series(app_state)
    with stage("compare"):
        with spinner("Calibrating and forecasting both models...", delay=0.5):
            comparison = compare_models(series, app_state.config)
    out = app_state.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for evaluation, name in zip(comparison.evaluations, ("hom", "markov")):
        (out / f"{name}_params.json").write_text(evaluation.params.dumps())
    _write_comparison(app_state, comparison)
    click.echo(_params_table(comparison.hom.params))
    click.echo(_params_table(comparison.markov.params))
    _echo_metrics(comparison)


@cli.command()
@click.option(
    "-p",
    "--params",
    "params_file",
    type=click.Path(exists=True, dir_okay=False),
    help="Simulate a fresh ensemble from the end of the training data.",
)
@click.option(
    "-e",
    "--ensemble",
    "ensemble_file",
    type=click.Path(exists=True, dir_okay=False),
    help="Test an ensemble written by 'forecast --ensemble' or 'simulate'.",
)
@click.option(
    "--step",
    "steps",
    type=click.IntRange(min=1),
    multiple=True,
    help="Horizon step to test; repeat for several. [default: from config]",
)
@click.option(
    "--bins",
    type=click.IntRange(min=1),
    help="Histogram bins of the exported distributions. [default: 50]",
)
@with_options(*PIPELINE_OPTIONS)
@pass_app_state
def goftest(app_state, params_file, ensemble_file, steps, bins):
    """Test the log-normality of simulated prices at fixed horizons."""
    options = app_state.command_options(
        "goftest",
        exclusive=("params", "ensemble"),
        params=params_file,
        ensemble=ensemble_file,
        steps=list(steps) or None,
        bins=bins,
    )
    params_file, ensemble_file = options.get("params"), options.get("ensemble")
    if bool(params_file) == bool(ensemble_file):
        raise click.UsageError("Pass exactly one of --params and --ensemble.")
    config = app_state.config
    steps = options.get("steps") or list(config.gof_steps)
    bins = options.get("bins", 50)

    if ensemble_file:
        with stage("goftest"):
            ensemble = ForecastEnsemble(read_matrix_csv(Path(ensemble_file)))
    else:
        params = _load_params(params_file)
        split = _split(app_state, _load_series(app_state))
        with stage("goftest"):
            with spinner("Simulating paths...", delay=0.5):
                ensemble = forecast_validation(
                    params,
                    split,
                    config.n_paths,
                    derive_seed(config.seed, "goftest"),
                    config.workers,
                    horizon=max(steps),
                )

    out = app_state.output_dir
    with stage("goftest"):
        ks, ad = gof_at_steps(ensemble, steps)
        for step in steps:
            distribution_export(ensemble, step, bins).write_csv(
                out / f"distribution_{step}.csv"
            )
    write_ks(out / "ks.csv", ks)
    write_ad(out / "ad.csv", ad)
    app_state.save_effective_config()

    click.echo(
        tabulate(
            [
                [k.horizon_step, k.statistic, k.p_value, a.statistic, a.statistic_squared]
                for k, a in zip(ks, ad)
            ],
            headers=["step", "KS", "p-value", "AD", "AD squared"],
            floatfmt=".4f",
        )
    )


@cli.command()
@click.option(
    "-p",
    "--params",
    "params_file",
    type=click.Path(exists=True, dir_okay=False),
    help="Model parameter file.",
)
@click.option("--horizon", type=click.IntRange(min=1), help="Steps to simulate.")
@click.option(
    "--anchor",
    type=float,
    help=(
        "Start every path at rest at this price. [default: end of the input "
        "series if configured, the level b otherwise]"
    ),
)
@click.option(
    "--summary/--no-summary", default=None, help="Write per-step statistics only."
)
@with_options(*PIPELINE_OPTIONS)
@pass_app_state
def simulate(app_state, params_file, horizon, anchor, summary):
    """Generate a raw ensemble of simulated paths."""
    options = app_state.command_options(
        "simulate", params=params_file, horizon=horizon, anchor=anchor, summary=summary
    )
    params = _load_params(_required(options, "params", "--params"))
    horizon = _required(options, "horizon", "--horizon")
    anchor = options.get("anchor")
    config = app_state.config
    if anchor is not None:
        history = HistoryWindow.constant(anchor, params.tau)
    elif config.input is not None:
        series = _load_series(app_state)
        with stage("simulate"):
            history = HistoryWindow.from_prices(series.prices, params.tau)
    else:
        history = HistoryWindow.constant(params.b, params.tau)

    with stage("simulate"):
        sim_config = SimConfig(
            horizon=horizon,
            n_paths=config.n_paths,
            seed=derive_seed(config.seed, "simulate"),
            workers=config.workers,
        )
        with spinner("Simulating paths...", delay=0.5):
            ensemble = simulate_paths(params, history, sim_config)

    out = app_state.output_dir
    if options.get("summary", False):
        ensemble.write_summary(out / "summary.csv")
    else:
        ensemble.write_paths(out / "ensemble.csv")
    app_state.save_effective_config()
    click.echo(f"Simulated {ensemble.n_paths} path(s) over {horizon} step(s).")


@cli.command("detect-frozen")
@click.option(
    "--min-run",
    type=click.IntRange(min=2),
    expose_value=False,
    callback=_override("frozen_min_run"),
    help="Shortest run of identical prices to report. [default: from config]",
)
@with_options(*PIPELINE_OPTIONS)
@pass_app_state
def detect_frozen(app_state):
    """List runs of identical consecutive prices in the input series."""
    series = _load_series(app_state)
    runs = detect_frozen_runs(series, app_state.config.frozen_min_run)
    dates = series.dates
    rows = [
        [first, last, dates[first], dates[last], last - first + 1]
        for first, last in runs
    ]
    header = ["first_index", "last_index", "first_date", "last_date", "length"]
    write_csv(app_state.output_dir / "frozen.csv", header, rows)
    app_state.save_effective_config()
    if rows:
        click.echo(tabulate(rows, headers=header))
    else:
        click.echo("No frozen runs found.")


@cli.command()
@click.option(
    "-p",
    "--params",
    "params_file",
    type=click.Path(exists=True, dir_okay=False),
    help="Parameters held fixed except for the profiled one.",
)
@click.option(
    "--parameter",
    type=click.Choice(PROFILE_PARAMETERS),
    help="Parameter to vary.",
)
@click.option(
    "--grid",
    type=(float, float, click.IntRange(min=1)),
    help="Grid as LOW HIGH COUNT.",
)
@with_options(*PIPELINE_OPTIONS, MASK_OPTION)
@pass_app_state
def profile(app_state, params_file, parameter, grid):
    """Evaluate the log-likelihood along one parameter."""
    options = app_state.command_options(
        "profile",
        params=params_file,
        parameter=parameter,
        # Floats keep the TOML array homogeneous.
        grid=[float(x) for x in grid] if grid else None,
    )
    params = _load_params(_required(options, "params", "--params"))
    parameter = _required(options, "parameter", "--parameter")
    if parameter not in PROFILE_PARAMETERS:
        raise click.UsageError(f"Unknown profile parameter: {parameter!r}")
    split = _split(app_state, _load_series(app_state))
    low, high, count = _required(options, "grid", "--grid")
    values = np.linspace(low, high, int(count))
    if parameter == "tau":
        values = np.unique(np.rint(values))
    with stage("profile"):
        data = conditioning_input(split, app_state.config)
        points = log_likelihood_profile(
            data, params, parameter, values.tolist(), app_state.config.workers
        )
    write_csv(app_state.output_dir / "profile.csv", [parameter, "loglik"], points)
    app_state.save_effective_config()
    best = max((p for p in points if p[1] is not None), key=lambda p: p[1], default=None)
    if best is None:
        raise click.ClickException("profile: no grid point could be evaluated.")
    click.echo(f"Best {parameter}={best[0]:.6g} with loglik={best[1]:.10g}")


if __name__ == "__main__":
    cli()
