"""Proximity potentials, capacity lower bounds, averaged defects and scaled ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..forms import ChartPoint, fs_sample
from ..maps import DivisorSpec, ExhaustionSpec, MapSpec, hyperplane_kernel
from ..quad import QuadPlan
from .characteristic import CharacteristicSeries, characteristic
from .counting import DefectReport, defect_report

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DiscreteMeasure:
    """``nu = sum_i w_i delta_{a_i}`` on divisors, with a pluggable kernel.

    ``kernel(Z, a)`` maps ``(n, m+1)`` homogeneous points to ``(n,)`` values;
    the hyperplane kernel ``log(||Z|| ||a|| / |<Z, a>|)`` is the default.
    """

    divisors: tuple
    weights: np.ndarray
    kernel: Kernel = hyperplane_kernel

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size != len(self.divisors) or w.size == 0:
            raise ValueError("one weight per divisor is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, divisors: Sequence[DivisorSpec], kernel: Kernel = hyperplane_kernel) -> "DiscreteMeasure":
        n = len(divisors)
        return cls(tuple(divisors), np.full(n, 1.0 / n), kernel)

    @property
    def m(self) -> int:
        return self.divisors[0].m


def fibonacci_values(n: int) -> list[complex]:
    """``n`` finite points of P^1 equidistributed for the FS (spherical) measure.

    Fibonacci lattice on the unit sphere, mapped to the chart ``w = Z_1/Z_0`` by
    stereographic projection; the poles are avoided by half-step offsets.
    """
    if n < 1:
        raise ValueError("need at least one point")
    i = np.arange(n) + 0.5
    zc = 1.0 - 2.0 * i / n
    phi = np.pi * (3.0 - math.sqrt(5.0)) * i
    rad = np.sqrt(1.0 - zc**2)
    w = rad * np.exp(1j * phi) / (1.0 - zc)
    return [complex(v) for v in w]


def potential_values(nu: DiscreteMeasure, Z: np.ndarray) -> np.ndarray:
    """``U_nu`` at homogeneous points ``(n, m+1)``; ``+inf`` on a divisor of positive weight."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    out = np.zeros(Z.shape[0])
    for d, w in zip(nu.divisors, nu.weights):
        if w == 0:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out + w * nu.kernel(Z, d.a)
    return out


def proximity_potential(nu: DiscreteMeasure, z: ChartPoint | np.ndarray) -> tuple[float, bool]:
    """``U_nu(z) = sum_i w_i K(z, a_i)`` and the flag "``z`` lies on a divisor"."""
    Z = z.homogeneous() if isinstance(z, ChartPoint) else np.asarray(z, dtype=complex)
    v = float(potential_values(nu, Z.reshape(1, -1))[0])
    if not math.isfinite(v):
        return math.inf, True
    return v, False


@dataclass(frozen=True)
class PotentialSup:
    """Sampled sup of ``U_nu`` and the capacity lower bound ``1/sup``.

    For a discrete ``nu`` the exact sup is ``+inf`` (the kernel is singular on
    each divisor); the sampled value is the documented finite proxy.
    """

    sup: float
    argmax: np.ndarray
    samples: int
    capacity_lower_bound: float


def potential_sup(nu: DiscreteMeasure, samples: int = 10_000, seed: int = 0) -> PotentialSup:
    """Sup of ``U_nu`` over ``samples`` FS-uniform points of P^m."""
    if samples < 10_000:
        raise ValueError("the sup estimate uses at least 10^4 samples")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x5E,)))
    Z = fs_sample(nu.m, samples, rng)
    U = potential_values(nu, Z)
    i = int(np.argmax(U))
    sup = float(U[i])
    return PotentialSup(sup, Z[i], samples, 1.0 / sup if sup > 0 else math.inf)


@dataclass
class DefectSuiteResult:
    """Averaged defect analysis for a measure on divisors.

    Attributes:
        reports: One ``DefectReport`` per divisor.
        radii: Schedule.
        avg_defect: ``|1 - int N dnu / T_1|`` per radius.
        mean_abs_defect: ``int |delta| dnu`` per radius.
        bound_unit: ``||U_nu|| t_0 / T_1`` per radius (the bound without ``C``).
        C_train, C_test: ``max avg_defect / bound_unit`` on even / odd radii.
        stable: ``C_test <= 1.2 C_train``.
        tails: ``{eps: nu({a : delta(a, r) > eps})}`` per radius.
        sup: Potential sup used.
    """

    reports: list
    radii: np.ndarray
    avg_defect: np.ndarray
    mean_abs_defect: np.ndarray
    bound_unit: np.ndarray
    C_train: float
    C_test: float
    stable: bool
    tails: dict
    sup: PotentialSup
    meta: dict = field(default_factory=dict)

    def bound(self) -> np.ndarray:
        return self.C_train * self.bound_unit

    def tail_ratio(self, lo: float = 0.2, hi: float = 0.4) -> np.ndarray:
        """``tail(lo) / tail(hi)`` per radius; NaN where the upper tail is empty."""
        a, b = self.tails[lo], self.tails[hi]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(b > 0, a / np.where(b > 0, b, 1.0), math.nan)


def fit_constant(ratio: np.ndarray, slack: float = 0.2) -> tuple[float, float, bool]:
    """Fit ``C`` on even-indexed radii and check it on odd ones within ``+slack``."""
    ratio = np.asarray(ratio, dtype=float)
    if ratio.size < 2:
        raise ValueError("need at least two radii to split into train/test")
    c_tr = float(np.nanmax(ratio[0::2]))
    c_te = float(np.nanmax(ratio[1::2]))
    return c_tr, c_te, bool(c_te <= (1.0 + slack) * c_tr)


def defect_suite(mp: MapSpec, exh: ExhaustionSpec, nu: DiscreteMeasure, schedule: Sequence[float],
                 plan: QuadPlan | None = None, eps_tails: Sequence[float] = (0.2, 0.4),
                 sup_samples: int = 10_000) -> DefectSuiteResult:
    """Per-divisor defects, their nu-average and the bound ``C ||U_nu|| t_0 / T_1``."""
    plan = plan or QuadPlan()
    radii = np.asarray(schedule, dtype=float)
    T1 = characteristic(mp, exh, 1, radii, "ddc", plan)
    t0 = characteristic(mp, exh, 0, radii, "ddc", plan)
    reports = [defect_report(mp, exh, d, T1, plan) for d in nu.divisors]
    W = nu.weights
    N_avg = sum(w * r.N for w, r in zip(W, reports))
    avg = np.abs(1.0 - N_avg / T1.T)
    deltas = np.stack([r.delta for r in reports])
    mean_abs = W @ np.abs(deltas)
    sup = potential_sup(nu, sup_samples, plan.seed)
    unit = sup.sup * t0.t / T1.T
    c_tr, c_te, ok = fit_constant(avg / unit)
    tails = {float(e): W @ (deltas > e).astype(float) for e in eps_tails}
    return DefectSuiteResult(reports, radii, avg, mean_abs, unit, c_tr, c_te, ok, tails, sup,
                             {"T1": T1.T, "t0": t0.t})


# ---------------------------------------------------------------------------
# scaled ratios for families


@dataclass
class ScaledRatios:
    """``t_{j-1}(phi_n, r) / t_j(phi_n, r - log c)`` for a family (u-scale).

    ``ratio[n, i]`` is NaN where ``t_j`` at the shifted radius is degenerate.
    ``volume[n, i] = t_j(phi_n, r_i - k log c)`` feeds the telescoped bound.
    """

    j: int
    c: float
    radii: np.ndarray
    ratio: np.ndarray
    numer: np.ndarray
    denom: np.ndarray
    volume: np.ndarray
    labels: list


def scaled_ratios(family: Sequence[MapSpec], exh: ExhaustionSpec, j: int, c: float, schedule: Sequence[float],
                  plan: QuadPlan | None = None) -> ScaledRatios:
    """Scaled ratios of a family on a schedule of u-levels."""
    if not c > 1:
        raise ValueError("scale constant c must exceed 1")
    plan = plan or QuadPlan()
    radii = np.asarray(schedule, dtype=float)
    k = exh.k
    shift = math.log(c)
    lowest = float(radii[0]) - k * shift
    # the shifted radii may fall below the bookkeeping radius r0; lower it for the evaluation
    ex = replace(exh, r0=min(exh.r0, lowest - 1.0)) if lowest <= exh.r0 else exh
    num, den, vol = [], [], []
    for mp in family:
        a = characteristic(mp, exh, j - 1, radii, "ddc", plan)
        b = characteristic(mp, ex, j, radii - shift, "ddc", plan)
        v = characteristic(mp, ex, j, radii - k * shift, "ddc", plan)
        num.append(a.t)
        den.append(np.where(b.degenerate(), math.nan, b.t))
        vol.append(v.t)
    num, den, vol = np.array(num), np.array(den), np.array(vol)
    return ScaledRatios(j, float(c), radii, num / den, num, den, vol, [mp.label for mp in family])
