"""Positivity of the intersection pairing and the scaling (Brody) dichotomy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..maps import DivisorSpec, ExhaustionSpec, MapSpec, hyperplane_kernel
from ..nevanlinna.characteristic import characteristic
from ..nevanlinna.conditions import MIN_RADII, check_condition
from ..nevanlinna.counting import CountingError, _probe_containment, counting_function, preimage_counting_sum
from ..nevanlinna.defects import ScaledRatios, scaled_ratios
from ..quad import QuadPlan
from .pairings import ddc_pairing


@dataclass
class IntersectionCurve:
    """``<S_r / c_r, alpha + dd^c U>`` for ``[Z] = alpha + dd^c U`` on a schedule.

    ``alpha`` is the FS form (the class of a hyperplane) and ``U = -K(., a) <= 0``.
    ``pairing = alpha_term + ddc_term``; it equals the counting term ``N / c_r``
    (the pull-back of ``[Z]`` paired with ``u_r``), which is listed alongside.

    Attributes:
        radii: Schedule.
        c_r: Masses ``T_1``.
        alpha_term: ``<S_r, omega> / c_r`` (normalized mass, 1).
        ddc_term, ddc_err: ``<dd^c S_r, U> / c_r`` and its error estimate.
        jensen_term: Boundary-average form of ``ddc_term`` (k = 1, logAbs), else NaN.
        pairing: ``alpha_term + ddc_term``; NaN when ``phi(0)`` lies on ``Z``.
        counting: ``N(Z, r) / c_r``; NaN when counting is unavailable.
        preimage_sum: ``sum u_r`` over enumerated preimages, divided by ``c_r``.
        positive: Verdict, the tail of the curve is ``>= -3`` errors.
    """

    divisor: DivisorSpec
    radii: np.ndarray
    c_r: np.ndarray
    alpha_term: np.ndarray
    ddc_term: np.ndarray
    ddc_err: np.ndarray
    jensen_term: np.ndarray
    pairing: np.ndarray
    counting: np.ndarray
    preimage_sum: np.ndarray
    positive: bool
    meta: dict = field(default_factory=dict)

    def curve(self) -> np.ndarray:
        """The curve used for the verdict (pairing, or the counting term as fallback)."""
        return np.where(np.isfinite(self.pairing), self.pairing, self.counting)


def intersection_positivity(mp: MapSpec, exh: ExhaustionSpec, Z: DivisorSpec, schedule: Sequence[float],
                            plan: QuadPlan | None = None) -> IntersectionCurve:
    """Pairing of the normalized currents ``S_{1,r}`` with ``alpha + dd^c U``.

    Raises:
        CountingError: The image of the map lies in ``Z``.
    """
    if Z.codim != 1:
        raise ValueError("intersection positivity is implemented for hyperplanes")
    if Z.m != mp.m:
        raise ValueError(f"divisor lives in P^{Z.m}, map in P^{mp.m}")
    plan = plan or QuadPlan()
    radii = np.asarray(schedule, dtype=float)
    exh.check_schedule(radii)
    _probe_containment(mp, exh, Z)
    T1 = characteristic(mp, exh, 1, radii, "ddc", plan)
    c_r = T1.T
    a = Z.a

    def U(Y):
        return -hyperplane_kernel(Y, a)

    F0, _ = mp.evaluate(np.zeros((1, mp.k), dtype=complex))
    centre_on_Z = not math.isfinite(float(hyperplane_kernel(F0, a)[0]))
    n = radii.size
    ddc, ddc_err, jen = np.full(n, math.nan), np.full(n, math.nan), np.full(n, math.nan)
    if not centre_on_Z:
        for i, r in enumerate(radii):
            res = ddc_pairing(mp, exh, 1, float(r), U, plan=plan.with_(seed=(plan.seed + i) % 2**64))
            ddc[i] = res.value / c_r[i]
            ddc_err[i] = res.stderr / c_r[i]
            if res.jensen is not None:
                jen[i] = res.jensen / c_r[i]
    alpha = np.ones(n)
    pairing = alpha + ddc

    counting = np.full(n, math.nan)
    note = []
    try:
        N = counting_function(mp, exh, Z, radii, "ddc", plan=plan.with_(budget=min(plan.budget, 2**16))).N
        counting = N / c_r
    except CountingError as exc:
        note.append(f"counting unavailable: {exc}")
    pre = np.full(n, math.nan)
    if mp.preimage_fn is not None:
        pre = np.array([preimage_counting_sum(mp, exh, Z, float(r)) for r in radii]) / c_r

    out = IntersectionCurve(Z, radii, c_r, alpha, ddc, ddc_err, jen, pairing, counting, pre, False,
                            {"centre_on_divisor": centre_on_Z, "parabolic": exh.is_parabolic, "note": "; ".join(note)})
    cur = out.curve()
    err = np.where(np.isfinite(ddc_err), ddc_err, 0.0)
    tail = slice(n // 2, None)
    finite = np.isfinite(cur[tail])
    out.positive = bool(finite.any() and np.all(cur[tail][finite] >= -3.0 * err[tail][finite] - 1e-12))
    return out


# ---------------------------------------------------------------------------
# scaling dichotomy


RATIO_WITNESS = 0.05


@dataclass
class BrodyResult:
    """Outcome of the scaled-ratio dichotomy for a family on the unit ball.

    Attributes:
        verdict: ``ddc-limit`` (some degree carries a dd^c-closed cluster
            current), ``volume-bound`` (graph volumes over ``B_{r/c^k}`` stay
            bounded) or ``degenerate``.
        j: Degree of the witness for ``ddc-limit``.
        witness: ``(j, map index, radius, ratio)`` of the smallest scaled ratio.
        ratios: ``ScaledRatios`` per degree.
        volume_bound: ``max_{n, r} t_j(phi_n, r - k log c)`` per degree.
        bound: Maximum of ``volume_bound`` over degrees (the telescoped constant).
        degenerate: Labels of maps without mass at some degree.
    """

    verdict: str
    j: int | None
    witness: tuple | None
    ratios: dict
    volume_bound: dict
    bound: float
    degenerate: list
    scale_condition: dict = field(default_factory=dict)


def brody_detector(family: Sequence[MapSpec], exh: ExhaustionSpec, c: float, schedule: Sequence[float],
                   plan: QuadPlan | None = None) -> BrodyResult:
    """Scaled ratios ``t_{j-1}(phi_n, r) / t_j(phi_n, r/c)`` and the volume alternative.

    Radii are tau-levels, so ``r/c`` is ``r - log c``. The schedule must stay
    below the level of ``R / c^k``, where the volumes of the telescoped bound
    are evaluated.

    Raises:
        ValueError: Fewer than 3 maps or 5 radii, or the schedule reaches ``R / c^k``.
    """
    if len(family) < 3:
        raise ValueError("the dichotomy needs a family of at least 3 maps")
    radii = np.asarray(schedule, dtype=float)
    if radii.size < 5:
        raise ValueError("the dichotomy needs at least 5 radii")
    if not c > 1:
        raise ValueError("scale constant c must exceed 1")
    k = exh.k
    limit = exh.R - k * math.log(c)
    if radii.max() >= limit:
        raise ValueError(f"schedule exceeds the level of R/c^k = {limit:.6g}")
    plan = plan or QuadPlan()
    ratios: dict[int, ScaledRatios] = {}
    vols: dict[int, float] = {}
    conds: dict[int, bool] = {}
    degenerate: set[str] = set()
    best = None
    for j in range(1, k + 1):
        sr = scaled_ratios(family, exh, j, c, radii, plan)
        ratios[j] = sr
        for i, lab in enumerate(sr.labels):
            if np.all(~np.isfinite(sr.ratio[i])):
                degenerate.add(lab)
        vols[j] = float(np.nanmax(sr.volume)) if np.any(np.isfinite(sr.volume)) else math.nan
        if np.any(np.isfinite(sr.ratio)):
            n_i, r_i = np.unravel_index(np.nanargmin(sr.ratio), sr.ratio.shape)
            cand = (j, int(n_i), float(radii[r_i]), float(sr.ratio[n_i, r_i]))
            if best is None or cand[3] < best[3]:
                best = cand
        if radii.size >= MIN_RADII and np.all(np.any(np.isfinite(sr.ratio), axis=1)):
            conds[j] = check_condition("scaleCond", {"scale": sr}).holds
    labels = sorted(degenerate)
    bound = float(np.nanmax(list(vols.values()))) if any(np.isfinite(v) for v in vols.values()) else math.nan
    if best is None:
        return BrodyResult("degenerate", None, None, ratios, vols, bound, labels, conds)
    fired = [j for j in ratios if conds.get(j, False)]
    if best[3] < RATIO_WITNESS or fired:
        j = best[0] if best[3] < RATIO_WITNESS else fired[0]
        return BrodyResult("ddc-limit", j, best, ratios, vols, bound, labels, conds)
    return BrodyResult("volume-bound", None, best, ratios, vols, bound, labels, conds)
