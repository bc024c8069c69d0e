"""Configuration and input shared by the subcommands of one invocation."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import click
from packaging.version import parse

from .config import PipelineConfig, read_config_file
from .core import APPLICATION_ID, LOGGER
from .data import PriceSeries, parse_csv
from .version import __version__

EFFECTIVE_CONFIG_NAME = "config.toml"


def _application_config_path():
    return Path(click.get_app_dir(APPLICATION_ID)) / "config.toml"


def _load_config():
    try:
        return PipelineConfig.load(_application_config_path())
    except FileNotFoundError:
        return PipelineConfig()


@dataclass
class ApplicationState:
    config_path: Path = field(default_factory=_application_config_path)
    config: PipelineConfig = field(default_factory=_load_config)

    def load_config(self, path: Path) -> None:
        """Apply the values set in `path` on top of the current configuration."""
        LOGGER.info(f"Reading configuration from {path}.")
        self.config = PipelineConfig.from_dict(
            {**self.config.to_dict(), **read_config_file(path)}
        )

    def configure(self, **overrides: Any) -> None:
        self.config = self.config.merged(**overrides)

    def command_options(
        self, command: str, exclusive: tuple[str, ...] = (), **given: Any
    ) -> dict[str, Any]:
        """Options of `command`: those given, the others from the configuration.

        The result is recorded in the configuration so that the effective
        config file repeats the run. Giving any option of `exclusive` discards
        the stored values of all of them.
        """
        given = {k: v for k, v in given.items() if v is not None}
        stored = dict(self.config.commands.get(command, {}))
        if any(name in given for name in exclusive):
            for name in exclusive:
                stored.pop(name, None)
        options = {**stored, **given}
        self.configure(commands={**self.config.commands, command: options})
        return options

    def check_version(self) -> None:
        installed = parse(__version__)
        if self.config.version and parse(self.config.version) > installed:
            LOGGER.warning(
                f"Configuration was written by version {self.config.version}, "
                f"newer than the installed {__version__}."
            )
        self.config.version = str(installed)

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output_dir)

    def save_effective_config(self) -> Path:
        path = self.output_dir / EFFECTIVE_CONFIG_NAME
        self.config.save(path)
        LOGGER.info(f"Wrote {path}")
        return path

    def load_series(self) -> PriceSeries:
        if self.config.input is None:
            raise ValueError("No input file configured; use --input.")
        path = Path(self.config.input)
        try:
            raw = path.read_bytes()
        except (FileNotFoundError, IsADirectoryError):
            raise FileNotFoundError(f"Input file not found: {path}")
        return parse_csv(raw, self.config.schema, source_label=path.name)
