"""
Delayed mean-reversion (higher order Markovian) commodity price models:
simulation, likelihood calibration, Monte-Carlo forecasting and evaluation.

.. currentmodule:: hom_forecast
"""

from .model import HistoryWindow, ModelKind, ModelParams
from .version import __version__

__all__ = [
    "HistoryWindow",
    "ModelKind",
    "ModelParams",
    "__version__",
]
