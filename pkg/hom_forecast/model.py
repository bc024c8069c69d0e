# __future__ import needed for classmethod factory functions; should be dropped
# with py 3.10.
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Sequence, TypeVar, Union

import numpy as np

from .core import LOGGER

Price = TypeVar("Price", float, np.ndarray)


class HistoryMismatch(ValueError):
    """Raised when a delay buffer does not hold exactly tau prices."""


class ModelKind(str, Enum):
    HOM = "HOM"
    MARKOV = "Markov"


@dataclass(frozen=True)
class ModelParams:
    """Constant coefficients of dx = a (b - x(t - tau)) dt + sigma x dw.

    `tau` counts observation steps. The Markov model is the special case
    tau = 0 and is labelled with `kind`.
    """

    a: float
    b: float
    sigma: float
    tau: int = 0
    kind: ModelKind = ModelKind.HOM

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if isinstance(self.tau, float) and self.tau.is_integer():
            object.__setattr__(self, "tau", int(self.tau))
        if not isinstance(self.tau, (int, np.integer)) or self.tau < 0:
            raise ValueError(f"tau must be a non-negative integer: {self.tau!r}")
        object.__setattr__(self, "tau", int(self.tau))
        for name in ("a", "b", "sigma"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"Parameter {name} is not finite: {value}")
            object.__setattr__(self, name, value)
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative: {self.sigma}")
        if self.kind is ModelKind.MARKOV and self.tau != 0:
            raise ValueError(f"Markov model requires tau = 0, got tau = {self.tau}.")

    @property
    def mean_reverting(self) -> bool:
        return self.a > 0

    def markov(self) -> ModelParams:
        return replace(self, tau=0, kind=ModelKind.MARKOV)

    def to_dict(self) -> dict:
        params = asdict(self)
        params["kind"] = self.kind.value
        return params

    @classmethod
    def from_dict(cls, params: dict) -> ModelParams:
        unknown = set(params) - {"a", "b", "sigma", "tau", "kind"}
        if unknown:
            raise ValueError(f"Unknown model parameter(s): {sorted(unknown)}")
        return cls(**params)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, blob: str) -> ModelParams:
        return cls.from_dict(json.loads(blob))


@dataclass(frozen=True)
class HistoryWindow:
    """The tau prices preceding the start price (oldest first) and the start price."""

    values: tuple[float, ...]
    anchor: float

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("History window contains non-finite prices.")
        if not math.isfinite(self.anchor):
            raise ValueError(f"Anchor price is not finite: {self.anchor}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "anchor", float(self.anchor))

    @property
    def tau(self) -> int:
        return len(self.values)

    @classmethod
    def from_prices(
        cls, prices: Union[Sequence[float], np.ndarray], tau: int
    ) -> HistoryWindow:
        """Window made of the last tau + 1 prices, the last one being the anchor."""
        prices = np.asarray(prices, dtype=float)
        if len(prices) < tau + 1:
            raise HistoryMismatch(
                f"Need {tau + 1} prices to start a tau={tau} model, got {len(prices)}."
            )
        return cls(tuple(prices[len(prices) - tau - 1 : -1]), prices[-1])

    @classmethod
    def constant(cls, price: float, tau: int) -> HistoryWindow:
        return cls((price,) * tau, price)

    def buffer(self) -> np.ndarray:
        """Delay buffer of length tau + 1: window followed by anchor."""
        return np.append(np.asarray(self.values, dtype=float), self.anchor)

    def check(self, params: ModelParams) -> None:
        if self.tau != params.tau:
            raise HistoryMismatch(
                f"History window holds {self.tau} prices, model has tau={params.tau}."
            )


def drift(params: ModelParams, lagged_price: Price) -> Price:
    return params.a * (params.b - lagged_price)


def diffusion_coeff(params: ModelParams, current_price: Price) -> Price:
    return params.sigma * current_price


def warn_if_not_mean_reverting(params: ModelParams) -> None:
    if not params.mean_reverting:
        LOGGER.warning(
            f"Fitted mean-reversion speed a={params.a} is not positive; "
            "the long-run mean does not apply."
        )
