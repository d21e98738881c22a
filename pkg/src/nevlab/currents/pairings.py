"""Derivative pairings ``<dd^c S_r, psi>`` and ``<d S_r, theta>``.

For ``v = v_r = (r - tau)+`` and the smoothing ``chi_delta`` with
``chi'' = (1/delta) 1_[0, delta]``, ``chi(0) = chi'(0) = 0``,

    <dd^c S_{delta,r}, psi> = I_1 + I_2,
    I_1 = -int chi'(v) (dd^c tau)^{k-j+1} ^ phi^* psi,
    I_2 = (1/delta) int_{r-delta < tau < r} d tau ^ d^c tau ^ (dd^c tau)^{k-j} ^ phi^* psi,

for ``psi = f omega^{j-1}``. ``I_1`` contains the point mass of
``(dd^c tau)^k`` when ``j = 1``. The value at ``delta -> 0`` is obtained by
Richardson extrapolation (the error is ``O(delta)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..forms import TestForm, wedge_density
from ..maps import ExhaustionSpec, MapSpec
from ..nevanlinna.characteristic import point_mass
from ..quad import QuadPlan, integrate_boundary, region_cloud
from .core import weight_profile

DELTAS = (1e-1, 1e-2, 1e-3)


def chi_delta(s: np.ndarray, delta: float) -> np.ndarray:
    """``s^2 / (2 delta)`` on ``[0, delta]``, ``s - delta/2`` beyond, 0 below."""
    s = np.asarray(s, dtype=float)
    return np.where(s <= 0, 0.0, np.where(s < delta, s * s / (2 * delta), s - 0.5 * delta))


def chi_delta_prime(s: np.ndarray, delta: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.clip(s / delta, 0.0, 1.0)


def _fvals(mp: MapSpec, f: Callable[[np.ndarray], np.ndarray], z: np.ndarray) -> np.ndarray:
    F = mp.evaluate(z)[0]
    return np.asarray(f(F / np.linalg.norm(F, axis=1, keepdims=True)), dtype=float)


def _as_function(psi) -> Callable[[np.ndarray], np.ndarray]:
    return psi.f if isinstance(psi, TestForm) else psi


@dataclass
class PairingResult:
    """Extrapolated pairing with its per-delta values and cross-checks."""

    value: float
    stderr: float
    per_delta: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict)
    jensen: float | None = None
    jensen_err: float | None = None


def richardson_linear(deltas: Sequence[float], vals: Sequence[float]) -> tuple[float, float]:
    """Extrapolate ``v(delta) = v0 + a delta + b delta^2`` to 0 from three deltas."""
    d = np.asarray(deltas, dtype=float)
    v = np.asarray(vals, dtype=float)
    A = np.vander(d, N=d.size, increasing=True)
    coef = np.linalg.solve(A, v)
    v0 = float(coef[0])
    return v0, abs(v0 - float(v[np.argmin(d)]))


def ddc_pairing(mp: MapSpec, exh: ExhaustionSpec, j: int, r: float, psi, deltas: Sequence[float] = DELTAS,
                plan: QuadPlan | None = None, jensen_check: bool = True) -> PairingResult:
    """``<dd^c S_{j,r}, psi>`` for ``psi = f omega^{j-1}`` (ddc-case weight).

    Args:
        psi: TestForm of degree ``j - 1`` or a function of unit homogeneous
            coordinates.
        deltas: Smoothing widths for the extrapolation.
        jensen_check: For k = 1, j = 1 also return
            ``avg_{tau = r} f(phi) - f(phi(0))``.
    """
    return ddc_pairings(mp, exh, j, r, [psi], deltas, plan, jensen_check)[0]


def ddc_pairings(mp: MapSpec, exh: ExhaustionSpec, j: int, r: float, psis: Sequence, deltas: Sequence[float] = DELTAS,
                 plan: QuadPlan | None = None, jensen_check: bool = True) -> list[PairingResult]:
    """``ddc_pairing`` for several test forms sharing the quadrature clouds."""
    k = exh.k
    if not 1 <= j <= k:
        raise ValueError(f"degree j={j} outside 1..{k}")
    for psi in psis:
        if isinstance(psi, TestForm) and psi.j != j - 1:
            raise ValueError(f"test form must have degree {j - 1}")
    plan = plan or QuadPlan()
    fs = [_as_function(psi) for psi in psis]

    def i1_density(z):
        groups = [(exh.ddctau(z), k - j + 1)]
        if j - 1:
            groups.append((mp.pullback_fs(z), j - 1))
        return wedge_density(groups)

    def i2_density(z):
        g = exh.dtau(z)
        groups = [(g[:, :, None] * np.conj(g)[:, None, :], 1)]
        if k - j:
            groups.append((exh.ddctau(z), k - j))
        if j - 1:
            groups.append((mp.pullback_fs(z), j - 1))
        return wedge_density(groups)

    def unit(z):
        F = mp.evaluate(z)[0]
        return F / np.linalg.norm(F, axis=1, keepdims=True)

    cloud = region_cloud(exh, r, plan, bandwidth=mp.angular_bandwidth)
    d1 = cloud.apply(i1_density)
    Y1 = cloud.apply(unit)
    v = weight_profile("ddc", exh, r)(cloud.tau)
    bands = []
    for i, dlt in enumerate(deltas):
        band = region_cloud(exh, r, plan.with_(seed=(plan.seed + 31 + i) % 2**64), lo=r - dlt,
                            bandwidth=mp.angular_bandwidth)
        bands.append((dlt, band, band.apply(i2_density), band.apply(unit)))
    pts = None
    if j == 1 and point_mass(exh, 0, r)[0]:
        pts, pw = exh.singular_support(1)
        Y0 = unit(pts)
    out = []
    for f in fs:
        f1 = np.asarray(f(Y1), dtype=float)
        pm = 0.0 if pts is None else float(np.sum(pw * np.asarray(f(Y0), dtype=float)))
        per, errs, parts = {}, {}, {}
        for dlt, band, d2, Y2 in bands:
            a = cloud.estimate(d1 * f1 * chi_delta_prime(v, dlt))
            b = band.estimate(d2 * np.asarray(f(Y2), dtype=float))
            I1 = -(a.value + pm)
            I2 = b.value / dlt
            per[dlt] = I1 + I2
            errs[dlt] = math.hypot(a.stderr, b.stderr / dlt)
            parts[dlt] = {"I1": I1, "I2": I2}
        val, ext = richardson_linear(list(per), list(per.values()))
        res = PairingResult(val, math.hypot(ext, max(errs.values())), per, parts)
        if jensen_check and k == 1 and j == 1 and exh.kind == "logAbs":
            circ = integrate_boundary(lambda z, f=f: _fvals(mp, f, z), exh, r, plan)
            f0 = float(_fvals(mp, f, np.zeros((1, 1), dtype=complex))[0])
            res.jensen = circ.value - f0
            res.jensen_err = circ.stderr
        out.append(res)
    return out


@dataclass
class BoundStudy:
    """``|<dd^c S_r, psi>| / (c_r ||psi||_inf J_j(r))`` over forms and radii.

    ``ratio[f, i]`` for form ``f`` at radius ``i``; the constant is fitted on
    even-indexed radii and tested on odd ones.
    """

    radii: np.ndarray
    ratio: np.ndarray
    J: np.ndarray
    C_train: float
    C_test: float
    stable: bool


def ddc_bound_study(mp: MapSpec, exh: ExhaustionSpec, j: int, forms: Sequence[TestForm], schedule: Sequence[float],
                    plan: QuadPlan | None = None, slack: float = 0.2) -> BoundStudy:
    """Ratios behind the bound ``|<dd^c S_r, psi>| <= C c_r ||psi|| J_j(r)``."""
    from ..nevanlinna.characteristic import characteristic
    from ..nevanlinna.defects import fit_constant

    plan = plan or QuadPlan()
    radii = np.asarray(schedule, dtype=float)
    Tj = characteristic(mp, exh, j, radii, "ddc", plan)
    tj1 = characteristic(mp, exh, j - 1, radii, "ddc", plan)
    J = tj1.t / Tj.T
    ratio = np.zeros((len(forms), radii.size))
    for i, r in enumerate(radii):
        res = ddc_pairings(mp, exh, j, float(r), forms, plan=plan.with_(seed=(plan.seed + i) % 2**64),
                           jensen_check=False)
        for fi, (tf, pr) in enumerate(zip(forms, res)):
            ratio[fi, i] = abs(pr.value) / (Tj.T[i] * tf.sup_norm * J[i])
    worst = np.max(ratio, axis=0)
    c_tr, c_te, ok = fit_constant(worst, slack)
    return BoundStudy(radii, ratio, J, c_tr, c_te, ok)


def d_pairing(mp: MapSpec, exh: ExhaustionSpec, j: int, r: float, h: TestForm, weight_kind: str = "d",
              plan: QuadPlan | None = None) -> PairingResult:
    """``int dv_r ^ (dd^c tau)^{k-j} ^ phi^*(theta ^ omega^{j-1})`` with ``theta = d'h``.

    ``h`` is a dictionary function, ``theta = sum_i dh/dZ_i dZ_i`` its (1,0)
    part. Only the ``dbar v ^ phi^* theta`` component survives in bidegree
    ``(k, k)``. ``v_r`` is Lipschitz, so no smoothing is needed: ``dv_r`` is
    ``-d tau / r`` on ``{r0 < tau < r}`` (d-case) or ``-d tau`` on ``B_r``
    (ddc-case). Returns the complex pairing's real and imaginary parts in
    ``parts`` and its modulus as ``value``.
    """
    k = exh.k
    if not 1 <= j <= k:
        raise ValueError(f"degree j={j} outside 1..{k}")
    plan = plan or QuadPlan()
    if weight_kind == "d":
        if not r > 0:
            raise ValueError("the d-case weight needs r > 0")
        scale, lo = -1.0 / r, max(exh.r0, exh.u_min)
    elif weight_kind == "ddc":
        scale, lo = -1.0, None
    else:
        raise ValueError("weight_kind must be 'd' or 'ddc'")

    def density(z):
        F, J = mp.evaluate(z)
        Fn = F / np.linalg.norm(F, axis=1, keepdims=True)
        Jn = J / np.linalg.norm(F, axis=1)[:, None, None]
        gh = h.grad(Fn)
        theta = np.einsum("ni,nip->np", gh, Jn)
        dv = scale * exh.dtau(z)
        C = 1j * np.pi * dv[:, :, None] * theta[:, None, :]
        groups = [(C, 1)]
        if k - j:
            groups.append((exh.ddctau(z), k - j))
        if j - 1:
            groups.append((mp.pullback_fs(z), j - 1))
        return wedge_density(groups, hermitian=False)

    if lo is not None and not lo < r:
        return PairingResult(0.0, 0.0, parts={"re": 0.0, "im": 0.0})
    cloud = region_cloud(exh, r, plan, lo=lo, bandwidth=mp.angular_bandwidth)
    val, err = cloud.estimate_complex(cloud.apply(density))
    return PairingResult(abs(val), err, parts={"re": val.real, "im": val.imag})
