# __future__ import needed for classmethod factory functions; should be dropped
# with py 3.10.
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .core import LOGGER

DEFAULT_TRAIN_FRAC = 0.8

MIN_SERIES_LENGTH = 3

IndexRange = tuple[int, int]  #: inclusive (first, last) observation indices


class SchemaError(ValueError):
    """Raised when the configured columns are missing from the input file."""


class EmptySeries(ValueError):
    """Raised when fewer than three valid observations remain after cleaning."""


class SplitError(ValueError):
    """Raised when a series is too short for the requested split."""


@dataclass(frozen=True)
class CsvSchema:
    date_column: str = "date"
    price_column: str = "price"
    date_format: str = "%Y-%m-%d"
    delimiter: str = ","

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise ValueError(f"Invalid delimiter {self.delimiter!r}.")
        if self.date_column == self.price_column:
            raise ValueError("Date and price columns must differ.")


@dataclass(frozen=True)
class PriceObservation:
    date: date
    price: float

    def __post_init__(self):
        if not math.isfinite(self.price):
            raise ValueError(f"Price on {self.date} is not finite: {self.price}")


@dataclass(frozen=True)
class PriceSeries:
    """Dated spot prices, strictly increasing in date."""

    observations: tuple[PriceObservation, ...] = ()
    source_label: str = ""
    dropped_rows: int = field(default=0, compare=False)
    duplicate_dates: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        for previous, current in zip(self.observations, self.observations[1:]):
            if current.date <= previous.date:
                raise ValueError(
                    f"Dates must be strictly increasing ({previous.date} >= {current.date})."
                )

    @classmethod
    def from_arrays(
        cls, dates: Iterable[date], prices: Iterable[float], source_label: str = ""
    ) -> PriceSeries:
        return cls(
            tuple(PriceObservation(d, float(p)) for d, p in zip(dates, prices)),
            source_label=source_label,
        )

    @classmethod
    def concat(cls, *parts: PriceSeries) -> PriceSeries:
        label = parts[0].source_label if parts else ""
        return cls(tuple(o for part in parts for o in part.observations), label)

    def __len__(self) -> int:
        return len(self.observations)

    def __getitem__(self, key: slice) -> PriceSeries:
        if not isinstance(key, slice):
            raise TypeError("PriceSeries supports slicing only.")
        return PriceSeries(self.observations[key], self.source_label)

    @cached_property
    def prices(self) -> np.ndarray:
        prices = np.fromiter((o.price for o in self.observations), dtype=float)
        prices.setflags(write=False)
        return prices

    @property
    def dates(self) -> list[date]:
        return [o.date for o in self.observations]

    def to_csv(self, schema: CsvSchema | None = None) -> str:
        schema = schema or CsvSchema()
        buffer = io.StringIO()
        writer = csv.writer(buffer, delimiter=schema.delimiter, lineterminator="\n")
        writer.writerow([schema.date_column, schema.price_column])
        for o in self.observations:
            writer.writerow([o.date.strftime(schema.date_format), repr(o.price)])
        return buffer.getvalue()


@dataclass(frozen=True)
class SplitSpec:
    history_len: int = 400
    train_frac: float = DEFAULT_TRAIN_FRAC

    def __post_init__(self):
        if self.history_len < 0:
            raise ValueError(f"history_len must be non-negative: {self.history_len}")
        if not 0 < self.train_frac < 1:
            raise ValueError(f"train_frac must lie in (0, 1): {self.train_frac}")


@dataclass(frozen=True)
class SeriesSplit:
    history: PriceSeries
    train: PriceSeries
    validation: PriceSeries

    @property
    def history_len(self) -> int:
        return len(self.history)

    @property
    def conditioning(self) -> PriceSeries:
        """History followed by training data, the input of calibration."""
        return PriceSeries.concat(self.history, self.train)

    def describe(self) -> dict:
        def span(part: PriceSeries) -> dict:
            dates = part.dates
            return {
                "length": len(part),
                "first": dates[0].isoformat() if dates else None,
                "last": dates[-1].isoformat() if dates else None,
            }

        return {
            "history": span(self.history),
            "train": span(self.train),
            "validation": span(self.validation),
        }


def parse_csv(
    raw: Union[bytes, str],
    schema: CsvSchema | None = None,
    source_label: str = "",
) -> PriceSeries:
    """Parse delimiter-separated spot prices into a cleaned, date-sorted series.

    Rows with an unparseable date or a non-finite/unparseable price are
    dropped. Of several rows with the same date the last one is kept.
    """
    schema = schema or CsvSchema()
    text = raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw
    reader = csv.DictReader(io.StringIO(text), delimiter=schema.delimiter)
    fieldnames = [name.strip() for name in (reader.fieldnames or [])]
    missing = [
        column
        for column in (schema.date_column, schema.price_column)
        if column not in fieldnames
    ]
    if missing:
        raise SchemaError(f"Missing column(s) {missing}, found {fieldnames}.")
    reader.fieldnames = fieldnames

    by_date: dict[date, float] = {}
    dropped = duplicates = 0
    for row in reader:
        try:
            day = datetime.strptime(
                (row[schema.date_column] or "").strip(), schema.date_format
            ).date()
            price = float((row[schema.price_column] or "").strip())
        except (TypeError, ValueError):
            dropped += 1
            continue
        if not math.isfinite(price):
            dropped += 1
            continue
        if day in by_date:
            duplicates += 1
        by_date[day] = price

    if dropped:
        LOGGER.info(f"Dropped {dropped} malformed row(s).")
    if duplicates:
        LOGGER.info(f"Replaced {duplicates} duplicate date(s) by their last row.")
    if len(by_date) < MIN_SERIES_LENGTH:
        raise EmptySeries(
            f"Only {len(by_date)} valid row(s), at least {MIN_SERIES_LENGTH} required."
        )

    observations = tuple(PriceObservation(d, by_date[d]) for d in sorted(by_date))
    return PriceSeries(
        observations,
        source_label=source_label,
        dropped_rows=dropped,
        duplicate_dates=duplicates,
    )


def split_series(series: PriceSeries, spec: SplitSpec) -> SeriesSplit:
    n = len(series)
    if spec.history_len + 2 >= n:
        raise SplitError(
            f"history_len={spec.history_len} leaves too few of {n} observations."
        )
    remainder = n - spec.history_len
    n_train = math.floor(spec.train_frac * remainder)
    if n_train < 1 or n_train >= remainder:
        raise SplitError(
            f"train_frac={spec.train_frac} of {remainder} observations leaves an empty segment."
        )
    boundary = spec.history_len + n_train
    split = SeriesSplit(
        history=series[: spec.history_len],
        train=series[spec.history_len : boundary],
        validation=series[boundary:],
    )
    LOGGER.info(
        f"Split {n} observations: history={len(split.history)}, "
        f"train={len(split.train)}, validation={len(split.validation)}."
    )
    return split


def detect_frozen_runs(
    series: Union[PriceSeries, Sequence[float], np.ndarray], min_run: int
) -> list[IndexRange]:
    """Maximal runs of identical consecutive prices at least `min_run` long."""
    if min_run < 2:
        raise ValueError(f"min_run must be at least 2: {min_run}")
    prices = series.prices if isinstance(series, PriceSeries) else np.asarray(series)
    runs: list[IndexRange] = []
    start = 0
    for i in range(1, len(prices) + 1):
        if i == len(prices) or prices[i] != prices[start]:
            if i - start >= min_run:
                runs.append((start, i - 1))
            start = i
    return runs


def date_ranges_to_indices(
    series: PriceSeries, ranges: Iterable[tuple[date, date]]
) -> list[IndexRange]:
    """Inclusive index ranges of the observations falling in each date range."""
    dates = np.array(series.dates, dtype="datetime64[D]")
    indices: list[IndexRange] = []
    for first, last in ranges:
        inside = np.flatnonzero(
            (dates >= np.datetime64(first, "D")) & (dates <= np.datetime64(last, "D"))
        )
        if inside.size:
            indices.append((int(inside[0]), int(inside[-1])))
    return sorted(indices)


def mask_from_ranges(length: int, ranges: Iterable[IndexRange]) -> np.ndarray:
    """Boolean array that is True on every excluded index."""
    mask = np.zeros(length, dtype=bool)
    for first, last in ranges:
        mask[max(first, 0) : min(last, length - 1) + 1] = True
    return mask
