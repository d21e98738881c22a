"""Declared-form extrapolation fits used by the condition checkers.

A finite schedule cannot prove a limit or a divergence. These helpers fit a
small family of declared models and report which one explains the data best;
verdicts built on them mean "numerically consistent with".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

P_GRID = np.geomspace(0.05, 8.0, 60)


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    rss: float
    limit: float = math.nan
    extra: dict = field(default_factory=dict)


def _lin_ls(cols: list[np.ndarray], y: np.ndarray) -> tuple[np.ndarray, float]:
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return coef, float(res @ res)


def _bic(rss: float, n: int, k: int) -> float:
    return n * math.log(max(rss, 1e-300) / n) + k * math.log(n)


def limit_fit(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Fit ``y ~ c + a x^-p`` and ``y ~ c + a exp(-p x)``; ``limit`` is the fitted ``c``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ones = np.ones_like(x)
    best = None
    span = max(x.max() - x.min(), 1e-12)
    xs = (x - x.min()) / span
    for p in P_GRID:
        cands = [("exp", np.exp(-p * xs))]
        if np.all(x > 0):
            cands.append(("power", (x / x.min()) ** (-p)))
        for name, col in cands:
            coef, rss = _lin_ls([ones, col], y)
            if best is None or rss < best.rss:
                best = FitResult(name, {"c": float(coef[0]), "a": float(coef[1]), "p": float(p)}, rss,
                                 float(coef[0]))
    return best


def tends_to_zero(x: np.ndarray, y: np.ndarray, rel_tol: float = 0.05) -> tuple[bool, FitResult]:
    """Whether a positive decreasing-type curve is consistent with limit 0.

    The limit is fitted on the last half of the schedule (at least 4 points),
    where the asymptotic form is most plausible. Decay as slow as ``1/log x``
    is not distinguishable from a positive limit on desk-scale schedules.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = min(y.size // 2, max(y.size - 4, 0))
    fit = limit_fit(x[h:], y[h:])
    scale = float(np.max(np.abs(y)))
    noise = math.sqrt(fit.rss / y.size)
    ok = fit.limit <= max(rel_tol * scale, 3.0 * noise) and y[-1] < y[0]
    return bool(ok), fit


POWER_DIVERGENCE_EXPONENT = 1.25


def divergence_fit(x: np.ndarray, F: np.ndarray) -> FitResult:
    """Classify the growth of a nondecreasing curve from the tail of its slope.

    The increments ``g = dF/dx`` over the last half of the schedule are fitted
    by ``log g = a - p log x`` (power decay) and ``log g = a - q x`` (exponential
    decay). ``F`` is judged unbounded when ``g`` does not decay, or decays like
    a power with ``p <= POWER_DIVERGENCE_EXPONENT``. A tail of a few radii
    cannot separate ``x^-1`` from ``x^-1.1``; the margin above 1 is the declared
    tolerance for the harmonic borderline.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    xm = 0.5 * (x[1:] + x[:-1])
    g = np.diff(F) / np.diff(x)
    h = max(3, g.size // 2)
    xt, gt = xm[-h:], g[-h:]
    if np.all(gt > 0) and gt[-1] >= gt[0]:
        return FitResult("nondecaying", {"g_first": float(gt[0]), "g_last": float(gt[-1])}, 0.0, math.inf)
    if np.any(gt <= 0):
        return FitResult("stalled", {"g_min": float(gt.min())}, 0.0, float(F[-1]))
    lg = np.log(gt)
    fits = []
    coef, rss = _lin_ls([np.ones_like(xt), -xt], lg)
    fits.append(FitResult("exp-decay", {"a": float(coef[0]), "q": float(coef[1])}, rss, math.nan))
    if np.all(xt > 0):
        coef, rss = _lin_ls([np.ones_like(xt), -np.log(xt)], lg)
        fits.append(FitResult("power-decay", {"a": float(coef[0]), "p": float(coef[1])}, rss, math.nan))
    best = min(fits, key=lambda f: (f.rss, f.model))
    if best.model == "power-decay" and best.params["p"] <= POWER_DIVERGENCE_EXPONENT:
        return FitResult(best.model, best.params, best.rss, math.inf)
    return best


def diverges(x: np.ndarray, F: np.ndarray) -> tuple[bool, FitResult]:
    """Whether a nondecreasing curve is consistent with divergence."""
    F = np.asarray(F, dtype=float)
    if F.size < 4:
        raise ValueError("divergence test needs at least 4 points")
    fit = divergence_fit(x, F)
    return bool(math.isinf(fit.limit) and F[-1] > F[0]), fit
