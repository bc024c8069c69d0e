import csv
import json
import logging
import zlib
from contextlib import contextmanager
from pathlib import Path
from threading import Event, Timer
from time import perf_counter
from typing import Any, Generator, Iterable, Optional, Sequence

import click
import click_spinner
import numpy as np

from .core import LOGGER


@contextmanager
def spinner(
    msg: Optional[str] = None, final: Optional[str] = "done.", delay: float = 0
) -> Generator[None, None, None]:
    """Display spinner only after an optional initial delay."""

    def spin() -> None:
        # Don't show spinner if verbose output is enabled
        level = logging.getLogger().getEffectiveLevel()
        show_spinner = level == logging.NOTSET or level >= logging.ERROR
        if msg:
            click.echo(f"{msg.rstrip()} ", nl=not show_spinner, err=True)

        if show_spinner:
            with click_spinner.spinner():  # type: ignore
                stop.wait()
            click.echo(final if (completed.is_set() and msg) else " ", err=True)
        else:
            stop.wait()

    stop = Event()
    completed = Event()
    timed_spinner = Timer(delay, spin)
    timed_spinner.start()
    start = perf_counter()
    try:
        yield
        timed_spinner.cancel()
        completed.set()
        LOGGER.debug(f"{msg or 'Step'} took {perf_counter() - start:.2f} s.")
    finally:
        stop.set()
        timed_spinner.join()


def derive_seed(seed: int, tag: str) -> int:
    """Deterministic 64-bit sub-seed for one purpose of a run."""
    sequence = np.random.SeedSequence([seed, zlib.crc32(tag.encode())])
    return int(sequence.generate_state(1, np.uint64)[0])


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(exist_ok=True, parents=True)
    path.write_text(dumps_json(obj))
    LOGGER.info(f"Wrote {path}")
    return path


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(exist_ok=True, parents=True)
    with path.open("w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    LOGGER.info(f"Wrote {path}")
    return path


def read_matrix_csv(path: Path) -> np.ndarray:
    """Read a headered CSV of numbers (one row per path) into a matrix."""
    with path.open(newline="") as file:
        reader = csv.reader(file)
        next(reader, None)
        rows = [[float(cell) for cell in row] for row in reader if row]
    if not rows:
        raise ValueError(f"No rows in {path}.")
    return np.array(rows, dtype=float)
