# __future__ import needed for classmethod factory functions; should be dropped
# with py 3.10.
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any
from uuid import uuid4

import toml

from .data import CsvSchema, SplitSpec
from .simulate import DEFAULT_N_PATHS

DEFAULT_HISTORY_LEN = 400

#: Set-aside history used for short series of a few hundred points.
SHORT_SERIES_HISTORY_LEN = 75

DEFAULT_GOF_STEPS = (90, 150, 210)

BOUND_NAMES = ("a", "b", "sigma", "tau")


@dataclass
class PipelineConfig:
    input: str | None = None
    schema: CsvSchema = field(default_factory=CsvSchema)
    history_len: int = DEFAULT_HISTORY_LEN
    train_frac: float = 0.8
    bounds: dict[str, list[float]] = field(default_factory=dict)
    tol: float = 1e-8
    max_sweeps: int = 100
    n_paths: int = DEFAULT_N_PATHS
    seed: int = 0
    workers: int = 1
    exclusions: list[list[str]] = field(default_factory=list)
    mask_likelihood: bool = False
    auto_exclude_frozen: bool = False
    frozen_min_run: int = 5
    gof_steps: list[int] = field(default_factory=lambda: list(DEFAULT_GOF_STEPS))
    output_dir: str = "hom-output"

    # Options of individual commands, keyed by command name.
    commands: dict[str, dict[str, Any]] = field(default_factory=dict)

    # Version of the tool that last wrote this configuration.
    version: str | None = None

    def __post_init__(self):
        if isinstance(self.schema, dict):
            self.schema = CsvSchema(**self.schema)
        self.split_spec()  # validates history_len and train_frac
        unknown = set(self.bounds) - set(BOUND_NAMES)
        if unknown:
            raise ValueError(f"Unknown bound(s) {sorted(unknown)}.")
        for name, bound in self.bounds.items():
            if len(bound) != 2 or not bound[0] <= bound[1]:
                raise ValueError(f"Invalid bounds for {name}: {bound}")
        # TOML arrays must be homogeneous.
        self.bounds = {k: [float(v) for v in bound] for k, bound in self.bounds.items()}
        if self.tol <= 0:
            raise ValueError(f"tol must be positive: {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1: {self.max_sweeps}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be at least 1: {self.n_paths}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1: {self.workers}")
        if self.frozen_min_run < 2:
            raise ValueError(f"frozen_min_run must be at least 2: {self.frozen_min_run}")
        if any(step < 1 for step in self.gof_steps):
            raise ValueError(f"gof_steps must be positive: {self.gof_steps}")
        self.exclusion_dates()  # validates exclusion ranges
        if not all(isinstance(options, dict) for options in self.commands.values()):
            raise ValueError(f"Command options must be tables: {self.commands}")

    def split_spec(self) -> SplitSpec:
        return SplitSpec(history_len=self.history_len, train_frac=self.train_frac)

    def exclusion_dates(self) -> list[tuple[date, date]]:
        ranges = []
        for pair in self.exclusions:
            if len(pair) != 2:
                raise ValueError(f"Exclusion range must be a date pair: {pair}")
            first, last = (date.fromisoformat(str(day)) for day in pair)
            if last < first:
                raise ValueError(f"Exclusion range ends before it starts: {pair}")
            ranges.append((first, last))
        return ranges

    def merged(self, **overrides: Any) -> PipelineConfig:
        """Copy with every override that is not None applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        config = asdict(self)
        config["gof_steps"] = list(self.gof_steps)
        return {k: v for k, v in config.items() if v is not None}

    @classmethod
    def from_dict(cls, config: dict) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(config) - known
        if unknown:
            raise ValueError(f"Unknown configuration key(s): {sorted(unknown)}")
        return cls(**config)

    @classmethod
    def loads(cls, blob: str) -> PipelineConfig:
        return cls.from_dict(toml.loads(blob))

    def dumps(self) -> str:
        return toml.dumps(self.to_dict())

    @classmethod
    def load(cls, path: Path) -> PipelineConfig:
        return cls.from_dict(read_config_file(path))

    def save(self, path: Path, safe: bool = True) -> None:
        path.parent.mkdir(exist_ok=True, parents=True)
        blob = (
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
            if path.suffix == ".json"
            else self.dumps()
        )
        if safe:
            path_tmp = path.with_suffix(f".{uuid4()!s}")
            path_tmp.write_text(blob)
            path_tmp.replace(path)
        else:
            path.write_text(blob)


def read_config_file(path: Path) -> dict:
    """Raw key/value pairs of a TOML (or, by suffix, JSON) configuration file."""
    if path.suffix == ".json":
        return json.loads(path.read_text())
    return toml.loads(path.read_text())
