"""Order-of-growth classification of unaveraged characteristics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .characteristic import CharacteristicSeries
from .fits import diverges


@dataclass(frozen=True)
class GrowthResult:
    """Slope of ``log t`` against ``u`` (finite order) or ``log u`` (log order).

    ``ratio_diverges`` and ``beta`` are filled when the previous-degree series is
    given: the first tests ``t_k / t_{k-1} -> inf``; the second is the fitted
    exponent in ``t_k / t_{k-1} >= c / u^beta`` (``beta < 1`` is the slow-growth
    hypothesis).
    """

    mode: str
    order: float
    intercept: float
    residual: float
    ratio_diverges: bool | None = None
    c: float | None = None
    beta: float | None = None


def growth_classify(series: CharacteristicSeries, mode: str = "finite",
                    previous: CharacteristicSeries | None = None, tol: float = 2.0) -> GrowthResult:
    """Least-squares growth exponent of ``t`` on the schedule.

    Raises:
        ValueError: for fewer than 8 radii, a non-monotone series, or a bad mode.
    """
    if mode not in ("finite", "log"):
        raise ValueError("mode must be 'finite' or 'log'")
    u, t = series.radii, series.t
    if u.size < 8:
        raise ValueError("growth classification needs at least 8 radii")
    slack = tol * (series.t_err[1:] + series.t_err[:-1]) + 1e-12 * np.abs(t[1:])
    if np.any(np.diff(t) < -slack):
        raise ValueError("series is not monotone; fit refused")
    if np.any(t <= 0):
        raise ValueError("series has non-positive values; fit refused")
    if mode == "finite":
        x = u
    else:
        if np.any(u <= 0):
            raise ValueError("log-order mode needs positive radii")
        x = np.log(u)
    y = np.log(t)
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((y - A @ coef) ** 2)))
    order = float(coef[1])
    if abs(order) < 1e-12:
        order = 0.0
    out = dict(mode=mode, order=order, intercept=float(coef[0]), residual=res)
    if previous is not None:
        q = t / previous.t
        out["ratio_diverges"] = diverges(u, q)[0]
        if np.all(u > 0):
            b = np.polyfit(np.log(u), np.log(q), 1)
            out["beta"] = float(-b[0])
            out["c"] = float(math.exp(b[1]))
    return GrowthResult(**out)
