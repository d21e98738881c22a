"""Numerical checks of the mass-ratio conditions on sampled characteristics.

Every checker returns the curve it judged, the witness radii (the subsequence
realizing the lim inf / lim sup on the schedule) and the fit used to
extrapolate. Verdicts on limits and divergences are tagged ``extrapolated``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .characteristic import CharacteristicSeries
from .fits import diverges, tends_to_zero

CONDITION_IDS = (
    "simpledMR", "alphaMR", "minimaldMR", "MR1supdelta", "logdclosed", "MR2sup", "diskEnergy", "scaleCond",
)
MIN_RADII = 8


class InsufficientScheduleError(ValueError):
    pass


@dataclass
class ConditionResult:
    id: str
    j: int
    holds: bool
    witness: list[float]
    x: np.ndarray
    y: np.ndarray
    extrapolated: bool = True
    fit: dict = field(default_factory=dict)
    note: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.id, "j": self.j, "holds": self.holds, "witness": [float(v) for v in self.witness],
            "extrapolated": self.extrapolated, "fit": self.fit, "note": self.note,
            "curve": {"x": [float(v) for v in self.x], "y": [float(v) for v in self.y]},
        }


def _get(bundle: Mapping, kind: str, j: int) -> CharacteristicSeries:
    try:
        s = bundle[(kind, j)]
    except KeyError:
        raise ValueError(f"condition needs the {kind}-case series of degree {j}") from None
    if s.radii.size < MIN_RADII:
        raise InsufficientScheduleError(f"need at least {MIN_RADII} radii, got {s.radii.size}")
    return s


def _cumtrap(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))])


def running_min_envelope(y: np.ndarray) -> np.ndarray:
    """``e(r_i) = min_{l <= i} y(r_l)``.

    For a positive curve ``e -> 0`` exactly when ``lim inf y = 0``, and ``e`` is
    monotone, so the limit fit sees the subsequence realizing the lim inf.
    """
    return np.minimum.accumulate(np.asarray(y, dtype=float))


def _records_min(x: np.ndarray, y: np.ndarray) -> list[float]:
    out, cur = [], math.inf
    for xi, yi in zip(x, y):
        if yi < cur:
            cur = yi
            out.append(float(xi))
    return out


def _records_max(x: np.ndarray, y: np.ndarray) -> list[float]:
    out, cur = [], -math.inf
    for xi, yi in zip(x, y):
        if yi > cur:
            cur = yi
            out.append(float(xi))
    return out


def _divergence_x(s: CharacteristicSeries, R: float) -> np.ndarray:
    if math.isinf(R):
        return s.radii
    # distance to the boundary in the sigma scale
    return -np.log(np.exp(R) - np.exp(s.radii))


def _fitdict(fit) -> dict:
    return {"model": fit.model, "params": fit.params, "rss": fit.rss,
            "limit": None if not math.isfinite(fit.limit) else fit.limit}


def _to_zero(cid: str, j: int, x, y, use_envelope: bool, note: str = "") -> ConditionResult:
    y = np.asarray(y, dtype=float)
    curve = running_min_envelope(y) if use_envelope else y
    ok, fit = tends_to_zero(x, curve)
    return ConditionResult(cid, j, ok, _records_min(x, y), np.asarray(x), y, True, _fitdict(fit), note)


def _to_inf(cid: str, j: int, x, F, xfit, note: str = "") -> ConditionResult:
    F = np.asarray(F, dtype=float)
    env = np.maximum.accumulate(F)
    ok, fit = diverges(xfit, env)
    return ConditionResult(cid, j, ok, _records_max(x, F), np.asarray(x), F, True, _fitdict(fit), note)


def _alpha(name: str):
    if name == "identity":
        return lambda s: s
    if name == "slog":
        return lambda s: (s + math.e) * np.log(s + math.e)
    raise ValueError(f"unknown alpha {name!r}; use 'identity' or 'slog'")


def check_condition(cid: str, bundle: Mapping, params: Mapping | None = None) -> ConditionResult:
    """Evaluate one condition on sampled data.

    Args:
        cid: Condition id (see ``CONDITION_IDS``).
        bundle: ``{(kind, j): CharacteristicSeries}`` with kind ``d`` or ``ddc``;
            ``scaleCond`` instead needs ``bundle["scale"]``, a ``ScaledRatios``.
        params: ``j`` (default 1), ``R`` (sup of tau, default inf), ``alpha``
            (``identity`` or ``slog``) for alphaMR.
    """
    params = dict(params or {})
    j = int(params.get("j", 1))
    R = float(params.get("R", math.inf))
    if cid == "simpledMR":
        a = _get(bundle, "d", j)
        b = _get(bundle, "d", j - 1)
        y = b.t / a.T
        return _to_zero(cid, j, a.radii, y, use_envelope=False)
    if cid == "alphaMR":
        a = _get(bundle, "d", j)
        b = _get(bundle, "d", j - 1)
        alpha = _alpha(params.get("alpha", "identity"))
        y = alpha(a.T) * b.T / a.T**2
        return _to_zero(cid, j, a.radii, y, use_envelope=True, note=f"alpha={params.get('alpha', 'identity')}")
    if cid == "minimaldMR":
        b = _get(bundle, "d", j - 1)
        F = _cumtrap(b.radii, 1.0 / b.T)
        return _to_inf(cid, j, b.radii, F, _divergence_x(b, R), "integral from the first radius")
    if cid == "MR1supdelta":
        a = _get(bundle, "d", j)
        b = _get(bundle, "d", j - 1)
        deltas = np.array([1.0, 0.5, 0.25, 0.1, 0.05])
        curves = np.stack([d * _cumtrap(a.radii, np.maximum(a.T, 0) ** (1 - d) / b.T) for d in deltas])
        F = curves.max(axis=0)
        return _to_inf(cid, j, a.radii, F, _divergence_x(a, R), "sup over delta in {1,.5,.25,.1,.05}")
    if cid == "logdclosed":
        a = _get(bundle, "ddc", j)
        b = _get(bundle, "ddc", j - 1)
        y = np.abs(a.radii) * b.t * a.t / a.T**2
        return _to_zero(cid, j, a.radii, y, use_envelope=True)
    if cid == "MR2sup":
        a = _get(bundle, "ddc", j)
        b = _get(bundle, "ddc", j - 1)
        logT = np.log(np.maximum(a.T, 1e-300))
        valid = logT > 0
        if not np.any(valid):
            return ConditionResult(cid, j, False, [], a.radii, np.full(a.radii.size, math.nan), True, {},
                                   "log T_j never positive on the schedule")
        integ = _cumtrap(a.radii, a.t / b.t)
        y = np.where(valid, integ / np.where(valid, logT, 1.0), math.nan)
        x = a.radii[valid]
        res = _to_inf(cid, j, x, y[valid], _divergence_x(a, R)[valid])
        res.x, res.y = a.radii, y
        return res
    if cid == "diskEnergy":
        a = _get(bundle, "ddc", j)
        sig = np.exp(a.radii)
        F = _cumtrap(np.concatenate([[0.0], sig]), np.concatenate([[0.0], a.t]))[1:]
        xfit = -np.log(np.exp(R) - sig) if math.isfinite(R) else sig
        return _to_inf(cid, j, sig, F, xfit, "x = sigma; integral of t_j d sigma from 0")
    if cid == "scaleCond":
        sr = bundle.get("scale")
        if sr is None:
            raise ValueError("scaleCond needs bundle['scale'] (see scaled_ratios)")
        if sr.radii.size < MIN_RADII:
            raise InsufficientScheduleError(f"need at least {MIN_RADII} radii, got {sr.radii.size}")
        per_n = np.nanmin(sr.ratio, axis=1)
        n = np.arange(1, per_n.size + 1, dtype=float)
        return _to_zero(cid, sr.j, n, per_n, use_envelope=True, note=f"c={sr.c}; x = family index")
    raise ValueError(f"unknown condition {cid!r}; known: {', '.join(CONDITION_IDS)}")
