"""Characteristic functions t_j, T_j and the mass ratios built from them.

Radius variable: every radius is a tau-level ``u`` (``u = log sigma`` for the
log-type exhaustions). Two averaging conventions are supported:

* ``ddc``: ``T_j(r) = int_{-inf}^r t_j(u) du = int_{B_r} (r - tau) dmu_j``,
  the weight ``log+(r/sigma)``;
* ``d``: ``A_j(r) = int_{r0}^r t_j(u) du = int_{B_r} (r - max(tau, r0)) dmu_j``,
  the integral behind the weight ``(1 - tau/r)+`` for ``tau >= r0``.

Both are computed as weighted integrals over ``B_r`` (layer-cake identity); a
trapezoid cumulation of t over the schedule is kept as an independent check.
The point mass of ``(dd^c tau)^k`` is booked at level ``r0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..forms import wedge_density
from ..maps import ExhaustionSpec, MapSpec
from ..quad import QuadPlan, region_cloud

WEIGHT_KINDS = ("ddc", "d")


class DegenerateMapError(ValueError):
    """A ratio was requested at a degree where the map carries no mass."""


def degree_density(mp: MapSpec, exh: ExhaustionSpec, j: int) -> Callable[[np.ndarray], np.ndarray]:
    """Density of ``(dd^c tau)^{k-j} ^ phi^* omega^j`` off the singular set."""
    k = exh.k
    if mp.k != k:
        raise ValueError(f"map has domain dimension {mp.k}, exhaustion {k}")
    if not 0 <= j <= k:
        raise ValueError(f"degree j={j} outside 0..{k}")

    def density(z: np.ndarray) -> np.ndarray:
        groups = []
        if k - j:
            groups.append((exh.ddctau(z), k - j))
        if j:
            groups.append((mp.pullback_fs(z), j))
        return wedge_density(groups)

    return density


def radial_weight(kind: str, exh: ExhaustionSpec, r: float) -> Callable[[np.ndarray], np.ndarray]:
    """Layer-cake weight ``r - tau`` (ddc) or ``r - max(tau, r0)`` (d), zero outside B_r."""
    if kind == "ddc":
        return lambda tau: np.maximum(r - tau, 0.0)
    if kind == "d":
        return lambda tau: np.maximum(r - np.maximum(tau, exh.r0), 0.0)
    raise ValueError(f"unknown weight kind {kind!r}")


def weighted_mass(cloud, dens: np.ndarray, kind: str, exh: ExhaustionSpec, r: float,
                  density: Callable[[np.ndarray], np.ndarray], plan: QuadPlan, bandwidth=None) -> tuple[float, float]:
    """``int_{B_r} weight * density`` for the layer-cake weight of ``kind``.

    The d-case weight has a kink at ``r0``; it is evaluated as
    ``int_{B_r} (r - tau) - int_{B_r0} (r0 - tau)`` so that both integrands are
    smooth in tau.
    """
    b = cloud.estimate(dens * np.maximum(r - cloud.tau, 0.0))
    if kind == "ddc" or r <= exh.r0:
        return b.value, b.stderr
    inner = region_cloud(exh, exh.r0, plan, bandwidth=bandwidth)
    c = inner.estimate(inner.apply(density) * np.maximum(exh.r0 - inner.tau, 0.0))
    return b.value - c.value, math.hypot(b.stderr, c.stderr)


def point_mass(exh: ExhaustionSpec, j: int, r: float) -> tuple[float, float]:
    """Contributions ``(to t_j, to T_j)`` of the singular part of ``(dd^c tau)^k``."""
    if j != 0 or r <= exh.r0:
        return 0.0, 0.0
    return exh.point_mass, exh.point_mass * (r - exh.r0)


@dataclass
class CharacteristicSeries:
    """Sampled ``t_j`` and its average on a radius schedule.

    Attributes:
        j: Degree.
        radii: Increasing tau-levels.
        t, t_err: ``t_j`` and its quadrature error.
        T, T_err: ``T_j`` (ddc) or ``A_j`` (d) from the weighted integral.
        T_trap: Same quantity by trapezoid cumulation of ``t`` from the first radius.
        weight_kind: ``ddc`` or ``d``.
        scale: Label of the radius variable.
    """

    j: int
    radii: np.ndarray
    t: np.ndarray
    t_err: np.ndarray
    T: np.ndarray
    T_err: np.ndarray
    T_trap: np.ndarray
    weight_kind: str
    k: int = 1
    map_label: str = ""
    exh_kind: str = ""
    scale: str = "log-sigma"
    meta: dict = field(default_factory=dict)

    def index(self, r: float) -> int:
        i = int(np.argmin(np.abs(self.radii - r)))
        if abs(self.radii[i] - r) > 1e-9 * max(1.0, abs(r)):
            raise ValueError(f"radius {r} is not on the schedule")
        return i

    def at(self, r: float) -> tuple[float, float, float, float]:
        i = self.index(r)
        return self.t[i], self.t_err[i], self.T[i], self.T_err[i]

    def degenerate(self) -> np.ndarray:
        """Mask of radii where ``t_j`` is indistinguishable from zero."""
        return ~(self.t > 3.0 * self.t_err) | (self.t <= 1e-14)

    def check_invariants(self, tol: float = 2.0) -> list[str]:
        """Violations of ``t >= -2 err`` and monotone ``T`` (empty when fine)."""
        out = []
        if np.any(self.t < -tol * self.t_err - 1e-12):
            out.append("t_j negative beyond tolerance")
        dT = np.diff(self.T)
        slack = tol * (self.T_err[1:] + self.T_err[:-1]) + 1e-12
        if np.any(dT < -slack):
            out.append("T_j decreasing beyond tolerance")
        if self.T[0] < -tol * self.T_err[0] - 1e-12:
            out.append("T_j(r_1) negative")
        return out


def _trapezoid_cumulative(r: np.ndarray, t: np.ndarray, head: float) -> np.ndarray:
    inc = 0.5 * (t[1:] + t[:-1]) * np.diff(r)
    return head + np.concatenate([[0.0], np.cumsum(inc)])


def characteristic(
    mp: MapSpec,
    exh: ExhaustionSpec,
    j: int,
    schedule: Sequence[float],
    weight_kind: str = "ddc",
    plan: QuadPlan | None = None,
) -> CharacteristicSeries:
    """Compute ``t_j`` and ``T_j`` (or ``A_j``) on a schedule of tau-levels.

    Args:
        mp: Map.
        exh: Exhaustion of the domain.
        j: Degree, ``0 <= j <= k``.
        schedule: Increasing radii inside ``(r0, R)``.
        weight_kind: ``ddc`` or ``d``.
        plan: Quadrature plan; the seed is offset by the radius index.
    """
    if weight_kind not in WEIGHT_KINDS:
        raise ValueError(f"weight kind must be one of {WEIGHT_KINDS}")
    plan = plan or QuadPlan()
    radii = np.asarray(schedule, dtype=float)
    exh.check_schedule(radii)
    density = degree_density(mp, exh, j)
    t, te, T, Te = [], [], [], []
    for i, r in enumerate(radii):
        cloud = region_cloud(exh, r, plan.with_(seed=(plan.seed + i) % 2**64), bandwidth=mp.angular_bandwidth)
        dens = cloud.apply(density)
        a = cloud.estimate(dens)
        bv, be = weighted_mass(cloud, dens, weight_kind, exh, r, density, plan.with_(seed=(plan.seed + i) % 2**64),
                               mp.angular_bandwidth)
        pt, pT = point_mass(exh, j, r)
        t.append(a.value + pt)
        te.append(a.stderr)
        T.append(bv + pT)
        Te.append(be)
    t, te, T, Te = map(np.array, (t, te, T, Te))
    return CharacteristicSeries(
        j=j, radii=radii, t=t, t_err=te, T=T, T_err=Te,
        T_trap=_trapezoid_cumulative(radii, t, T[0]), weight_kind=weight_kind, k=exh.k,
        map_label=mp.label, exh_kind=exh.kind,
    )


# ---------------------------------------------------------------------------
# mass ratios


@dataclass(frozen=True)
class MassRatio:
    value: float
    stderr: float
    direct: float | None = None
    direct_err: float | None = None


def _rel(a: float, ea: float) -> float:
    return ea / abs(a) if a else math.inf


def d_mass_ratio(series_j: CharacteristicSeries, series_jm1: CharacteristicSeries, r: float) -> MassRatio:
    """d-mass ratio ``I_j(r) = A_{j-1}(r) t_j(r) / A_j(r)^2``.

    Raises:
        DegenerateMapError: if ``t_j`` or ``A_j`` vanishes at r.
    """
    if series_j.weight_kind != "d" or series_jm1.weight_kind != "d":
        raise ValueError("d-mass ratio needs d-case series")
    if series_j.j != series_jm1.j + 1:
        raise ValueError("series degrees must be j and j-1")
    i = series_j.index(r)
    tj, tje = series_j.t[i], series_j.t_err[i]
    A, Ae = series_j.T[i], series_j.T_err[i]
    A1, A1e = series_jm1.T[series_jm1.index(r)], series_jm1.T_err[series_jm1.index(r)]
    if series_j.degenerate()[i] or A <= 0:
        raise DegenerateMapError(f"degenerate: t_{series_j.j} vanishes at r={r}")
    val = A1 * tj / A**2
    rel = math.sqrt(_rel(A1, A1e) ** 2 + _rel(tj, tje) ** 2 + 4 * _rel(A, Ae) ** 2) if A1 else 0.0
    return MassRatio(float(val), float(abs(val) * rel))


def ddc_mass_ratio(series_j: CharacteristicSeries, series_jm1: CharacteristicSeries, r: float) -> MassRatio:
    """dd^c-mass ratio ``J_j(r) = t_{j-1}(r) / T_j(r)``.

    Raises:
        DegenerateMapError: if ``T_j(r) <= 0`` or ``t_j`` is zero within error.
    """
    if series_j.weight_kind != "ddc":
        raise ValueError("dd^c-mass ratio needs a ddc-case series for degree j")
    if series_j.j != series_jm1.j + 1:
        raise ValueError("series degrees must be j and j-1")
    i = series_j.index(r)
    T, Te = series_j.T[i], series_j.T_err[i]
    i1 = series_jm1.index(r)
    t1, t1e = series_jm1.t[i1], series_jm1.t_err[i1]
    if T <= 0 or series_j.degenerate()[i]:
        raise DegenerateMapError(f"degenerate: T_{series_j.j}(r={r}) <= 0")
    val = t1 / T
    rel = math.hypot(_rel(t1, t1e), _rel(T, Te)) if t1 else 0.0
    return MassRatio(float(val), float(abs(val) * rel))


def ratio_curve(kind: str, series_j: CharacteristicSeries, series_jm1: CharacteristicSeries) -> tuple[np.ndarray, np.ndarray]:
    """Ratio values along the schedule; NaN marks indeterminate radii."""
    fn = d_mass_ratio if kind == "d" else ddc_mass_ratio
    vals, errs = [], []
    for r in series_j.radii:
        try:
            mr = fn(series_j, series_jm1, r)
            vals.append(mr.value)
            errs.append(mr.stderr)
        except DegenerateMapError:
            vals.append(math.nan)
            errs.append(math.nan)
    return np.array(vals), np.array(errs)


def dirichlet_density(mp: MapSpec, exh: ExhaustionSpec, j: int) -> Callable[[np.ndarray], np.ndarray]:
    """Density of ``d tau ^ d^c tau ^ (dd^c tau)^{k-j} ^ phi^* omega^{j-1}``."""
    k = exh.k
    if not 1 <= j <= k:
        raise ValueError("Dirichlet form needs 1 <= j <= k")

    def density(z: np.ndarray) -> np.ndarray:
        g = exh.dtau(z)
        groups = [(g[:, :, None] * np.conj(g)[:, None, :], 1)]
        if k - j:
            groups.append((exh.ddctau(z), k - j))
        if j - 1:
            groups.append((mp.pullback_fs(z), j - 1))
        return wedge_density(groups)

    return density


def d_mass_ratio_direct(mp: MapSpec, exh: ExhaustionSpec, j: int, r: float, plan: QuadPlan | None = None) -> MassRatio:
    """``I_j(r)`` from the Dirichlet form of ``v_r = (1 - tau/r)``.

    Computes ``E = int_{r0 < tau < r} dv ^ d^c v ^ (dd^c tau)^{k-j} ^ phi^* omega^{j-1}``,
    ``c_r = int (1 - max(tau, r0)/r) (dd^c tau)^{k-j} ^ phi^* omega^j`` and
    ``t_j(r)`` by independent quadratures and returns ``E t_j / c_r^2``.
    """
    plan = plan or QuadPlan()
    if not r > exh.r0:
        raise ValueError("radius must exceed r0")
    cloud_e = region_cloud(exh, r, plan.with_(seed=(plan.seed + 101) % 2**64), lo=exh.r0,
                           bandwidth=mp.angular_bandwidth)
    E = cloud_e.estimate(cloud_e.apply(dirichlet_density(mp, exh, j)))
    cloud = region_cloud(exh, r, plan.with_(seed=(plan.seed + 202) % 2**64), bandwidth=mp.angular_bandwidth)
    density = degree_density(mp, exh, j)
    dens = cloud.apply(density)
    tj = cloud.estimate(dens)
    a_val, a_err = weighted_mass(cloud, dens, "d", exh, r, density, plan.with_(seed=(plan.seed + 202) % 2**64),
                                 mp.angular_bandwidth)
    if a_val <= 0 or tj.value <= 3 * tj.stderr:
        raise DegenerateMapError(f"degenerate: t_{j} vanishes at r={r}")
    e_val, e_err = E.value / r**2, E.stderr / r**2
    c_val, c_err = a_val / r, a_err / r
    val = e_val * tj.value / c_val**2
    rel = math.sqrt(_rel(e_val, e_err) ** 2 + _rel(tj.value, tj.stderr) ** 2 + 4 * _rel(c_val, c_err) ** 2)
    return MassRatio(float(val), float(abs(val) * rel))
