"""Naive persistence forecaster.

An h-step-ahead forecast issued at time t can observe the series only up to
t, so the persistence forecast for the value at t is the target observed h
steps earlier. Any smaller lag would leak future information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistoryError, InvalidArgumentError


@dataclass(frozen=True)
class NaiveModel:
    horizon_steps: int

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise InvalidArgumentError(
                f"horizon_steps must be >= 1, got {self.horizon_steps}"
            )


def naive_forecast(series, horizon_steps: int, t: int) -> float:
    """Persistence forecast for index ``t``: the value at ``t - horizon_steps``."""
    if horizon_steps < 1:
        raise InvalidArgumentError(
            f"horizon_steps must be >= 1, got {horizon_steps}"
        )
    if t < horizon_steps:
        raise InsufficientHistoryError(
            f"forecast at index {t} needs {horizon_steps} steps of history"
        )
    return float(np.asarray(series, dtype=np.float64)[t - horizon_steps])


def naive_forecast_series(series, horizon_steps: int) -> np.ndarray:
    """Vectorized persistence forecasts for every valid index.

    Element k is the forecast for index ``horizon_steps + k``, equal to
    ``series[k]``; equivalent to calling :func:`naive_forecast` per index.
    """
    s = np.asarray(series, dtype=np.float64)
    if horizon_steps < 1:
        raise InvalidArgumentError(
            f"horizon_steps must be >= 1, got {horizon_steps}"
        )
    if horizon_steps >= len(s):
        raise InsufficientHistoryError(
            f"series of length {len(s)} has no index with {horizon_steps} steps of history"
        )
    return s[:-horizon_steps].copy()
