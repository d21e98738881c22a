"""Counting functions, proximity and the First Main Theorem residual.

Conventions (u-scale, ``u = log sigma``):

* ``n(D, s)`` counts preimages of ``D`` in ``B_s`` with multiplicity (k = 1,
  or points when k = m); for hyperplanes in k >= 2 it is the mass of
  ``[phi^* D] ^ (dd^c tau)^{k-1}`` on ``B_s``.
* ``N(D, r) = sum_i (r - tau(z_i)) + n_0 r`` in the ddc-case, the classical
  counting function with the ``n(0) log r`` term for preimages at the centre.
  It equals ``int_{B_r cap phi^-1 D} u_r`` with ``u_r = log+(r / sigma)``.
* d-case: ``N_d(D, r) = int_{r0}^r n(D, s) ds``.

``N`` is assembled from exactly located jumps of the step function ``n``
rather than by trapezoid cumulation over the schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..maps import DivisorSpec, ExhaustionSpec, MapSpec, hyperplane_kernel
from ..quad import QuadPlan, QuadResult, QuadratureError, integrate_boundary
from ..forms import fs_pullback_coeff

EPS_LADDER = (1e-2, 1e-3, 1e-4)
MAX_ATTEMPTS = 5
PERTURB = 1e-6


class ZeroOnContourError(QuadratureError):
    """A preimage of the divisor lies on (or numerically at) the contour."""


class CountingError(ValueError):
    """Counting failed: low confidence, unsupported setting, or containment."""


@dataclass(frozen=True)
class CountResult:
    """Value of ``n(D, s)``.

    Attributes:
        value: Rounded count when ``integral``, else the raw value.
        raw: Unrounded estimate (winding number or extrapolated flux).
        distance: ``|raw - value|`` for integral counts, else the error estimate.
        mode: ``argument`` or ``smoothedPL``.
        s: Level actually used (after perturbation retries).
        integral: Whether the count is an integer by construction.
        detail: Per-epsilon fluxes and the extrapolation used (smoothedPL).
    """

    value: float
    raw: float
    distance: float
    mode: str
    s: float
    integral: bool = True
    attempts: int = 1
    detail: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# argument principle (k = 1)


def _pairing(mp: MapSpec, a: np.ndarray, z: np.ndarray):
    F, J = mp.evaluate(z)
    g = F @ a
    dg = np.einsum("nik,i->nk", J, a)
    return F, g, dg


def _winding(mp: MapSpec, a: np.ndarray, rho: float, max_step: float = 0.5, max_rounds: int = 60) -> float:
    """``(1/2 pi i) oint g'/g dz`` on ``|z| = rho`` with adaptive arcs.

    On an arc the integral of ``g'/g`` is the increment of ``log g``; its
    imaginary part is read off the principal argument of ``g(b)/g(a)``, which
    is exact while the phase turns by less than ``pi`` along the arc. Arcs
    whose phase step exceeds ``max_step`` are bisected, so only the
    neighbourhood of a nearby preimage is refined. The starting grid resolves
    the angular bandwidth of the map. The returned value is the sum of the
    arc increments divided by ``2 pi``; it is an integer up to rounding.
    """
    n0 = int(max(256, 16 * float(mp.angular_bandwidth(np.array([rho]))[0])))
    th = 2 * np.pi * np.arange(n0 + 1) / n0

    def gval(theta):
        F, g, _ = _pairing(mp, a, (rho * np.exp(1j * theta)).reshape(-1, 1))
        scale = np.linalg.norm(F, axis=1)
        # only an exact zero is fatal: tiny values still carry a reliable phase
        if np.any(np.abs(g) <= 1e-300 * scale) or not np.all(np.isfinite(g)):
            raise ZeroOnContourError(f"divisor preimage on the circle |z| = {rho:.17g}")
        return g / scale

    g = gval(th)
    g[-1] = g[0]
    for _ in range(max_rounds):
        dphi = np.angle(g[1:] / g[:-1])
        bad = np.abs(dphi) > max_step
        if not np.any(bad):
            return float(np.sum(dphi) / (2 * np.pi))
        idx = np.nonzero(bad)[0]
        mid = 0.5 * (th[idx] + th[idx + 1])
        gm = gval(mid)
        th = np.insert(th, idx + 1, mid)
        g = np.insert(g, idx + 1, gm)
    raise ZeroOnContourError(f"phase of the divisor pairing unresolved on |z| = {rho:.17g}")


def _argument_count(mp: MapSpec, exh: ExhaustionSpec, a: np.ndarray, s: float) -> float:
    if exh.orientation != 1:
        raise CountingError("argument-principle counting needs an exhaustion increasing with |z|")
    return _winding(mp, a, float(exh.radius(s)))


# ---------------------------------------------------------------------------
# smoothed Poincare-Lelong (k >= 2), evaluated as a boundary flux


def _sphere3_nodes(rho: float, n_psi: int, n_ang: int):
    """Nodes on ``S^3(rho)`` in Hopf coordinates with coordinate tangent vectors.

    ``z = rho (cos psi e^{i a}, sin psi e^{i b})``; Gauss-Legendre in ``psi`` on
    ``[0, pi/2]`` and trapezoid in ``a, b``. Returns points, the three tangent
    vectors ``d/dpsi, d/da, d/db`` and the coordinate weights.
    """
    x, wx = np.polynomial.legendre.leggauss(n_psi)
    psi = 0.25 * np.pi * (x + 1.0)
    wpsi = 0.25 * np.pi * wx
    ang = 2 * np.pi * np.arange(n_ang) / n_ang
    P, A, B = np.meshgrid(psi, ang, ang, indexing="ij")
    W = np.broadcast_to(wpsi[:, None, None], P.shape) * (2 * np.pi / n_ang) ** 2
    P, A, B, W = (v.reshape(-1) for v in (P, A, B, W))
    ea, eb = np.exp(1j * A), np.exp(1j * B)
    c, s = np.cos(P), np.sin(P)
    z = rho * np.stack([c * ea, s * eb], axis=1)
    t_psi = rho * np.stack([-s * ea, c * eb], axis=1)
    t_a = rho * np.stack([1j * c * ea, np.zeros_like(ea)], axis=1)
    t_b = rho * np.stack([np.zeros_like(eb), 1j * s * eb], axis=1)
    return z, (t_psi, t_a, t_b), W


def _dc(grad: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``d^c u (X) = Im(du(X)) / pi`` for ``grad[p] = du/dz_p``."""
    return np.einsum("np,np->n", grad, X).imag / np.pi


def _ddc(C: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Value of the (1,1)-form with coefficient ``C`` on real vectors ``X, Y``."""
    return -(2.0 / np.pi) * np.einsum("np,npq,nq->n", np.conj(Y), C, X).imag


def _point_target(mp: MapSpec, b: np.ndarray):
    """Holomorphic ``H: C^k -> C^k`` whose zeros are the preimages of ``[b]``."""
    c = int(np.argmax(np.abs(b)))
    rest = [i for i in range(b.size) if i != c]

    def H(z):
        F, J = mp.evaluate(z)
        h = b[c] * F[:, rest] - b[rest][None, :] * F[:, [c]]
        dh = b[c] * J[:, rest, :] - b[rest][None, :, None] * J[:, [c], :]
        return h, dh

    return H


def point_flux(H, k: int, rho: float, eps: float, n_psi: int = 48, n_ang: int = 96) -> float:
    """``int_{S_rho} d^c u ^ dd^c u`` for ``u = 1/2 log(||H||^2 + eps^2)``, k = 2.

    By Stokes this equals ``int_{B_rho} (dd^c u)^2``, the smoothed count of
    zeros of ``H``; ``dd^c u`` is the pullback of the Fubini-Study form by
    ``z -> [eps : H(z)]``. ``eps = 0`` is allowed when ``H`` has no zero on the
    sphere.
    """
    if k != 2:
        raise CountingError("smoothed point counting is implemented for k = 2")
    z, (t1, t2, t3), W = _sphere3_nodes(rho, n_psi, n_ang)
    h, dh = H(z)
    nrm2 = np.sum(np.abs(h) ** 2, axis=1) + eps**2
    grad = 0.5 * np.einsum("ni,nip->np", np.conj(h), dh) / nrm2[:, None]
    Fe = np.concatenate([np.full((h.shape[0], 1), eps, dtype=complex), h], axis=1)
    Je = np.concatenate([np.zeros((h.shape[0], 1, k), dtype=complex), dh], axis=1)
    C = fs_pullback_coeff(Fe, Je)
    val = (_dc(grad, t1) * _ddc(C, t2, t3) - _dc(grad, t2) * _ddc(C, t1, t3)
           + _dc(grad, t3) * _ddc(C, t1, t2))
    # (psi, a, b) is negatively oriented for the outward-normal boundary orientation
    return -float(np.sum(W * val))


def hyperplane_flux(mp: MapSpec, exh: ExhaustionSpec, a: np.ndarray, s: float, eps: float,
                    plan: QuadPlan) -> QuadResult:
    """``int_{S} d^c u ^ (dd^c tau)^{k-1}`` for ``u = 1/2 log(|g|^2 + eps^2)``.

    On the sphere of a logAbs exhaustion this is the sphere average of
    ``rho d u / d rho = Re(conj(g) <z, grad g>) / (|g|^2 + eps^2)``.
    """

    def integrand(z):
        _, g, dg = _pairing(mp, a, z)
        return (np.conj(g) * np.einsum("np,np->n", z, dg)).real / (np.abs(g) ** 2 + eps**2)

    return integrate_boundary(integrand, exh, s, plan)


def richardson_eps(eps: Sequence[float], vals: Sequence[float]) -> tuple[float, float]:
    """Extrapolate ``f(eps) = f0 + c1 eps^2 + c2 eps^4`` to ``eps = 0``.

    Returns the extrapolated value and the change against the smallest-eps
    value as an error estimate.
    """
    e2 = np.asarray(eps, dtype=float) ** 2
    v = np.asarray(vals, dtype=float)
    A = np.vander(e2, N=len(e2), increasing=True)
    coef = np.linalg.solve(A, v)
    f0 = float(coef[0])
    return f0, abs(f0 - float(v[np.argmin(e2)]))


def _smoothed_count(mp, exh, div, s, eps, plan) -> tuple[float, float, dict, bool]:
    if exh.kind != "logAbs":
        raise CountingError("smoothed counting in k >= 2 needs the logAbs exhaustion")
    if not mp.holomorphic:
        raise CountingError("smoothed counting needs a holomorphic representative (map is rescaled)")
    rho = float(exh.radius(s))
    if div.codim == mp.m and div.codim == mp.k:
        H = _point_target(mp, div.a)
        vals = [point_flux(H, mp.k, rho, e) for e in eps]
        coarse = point_flux(H, mp.k, rho, eps[-1], n_psi=32, n_ang=64)
        raw, ext = richardson_eps(eps, vals)
        err = max(ext, abs(coarse - vals[-1]))
        return raw, err, {"eps": list(eps), "flux": vals}, True
    if div.codim != 1:
        raise CountingError("only hyperplanes and points (k = m) are supported")
    res = [hyperplane_flux(mp, exh, div.a, s, e, plan) for e in eps]
    vals = [r.value for r in res]
    raw, ext = richardson_eps(eps, vals)
    err = max(ext, max(r.stderr for r in res))
    return raw, err, {"eps": list(eps), "flux": vals}, False


def count_preimages(mp: MapSpec, exh: ExhaustionSpec, divisor: DivisorSpec, s: float,
                    mode: str = "auto", eps: Sequence[float] = EPS_LADDER,
                    plan: QuadPlan | None = None, max_distance: float = 0.1) -> CountResult:
    """``n(D, s)`` by the argument principle (k = 1) or smoothed Poincare-Lelong.

    On a zero on the contour the level is moved by ``1e-6`` (up to 5 attempts).

    Raises:
        CountingError: unsupported setting, or argument-principle distance to
            the nearest integer above ``max_distance``.
    """
    if divisor.m != mp.m:
        raise CountingError(f"divisor lives in P^{divisor.m}, map targets P^{mp.m}")
    if mode == "auto":
        mode = "argument" if mp.k == 1 and divisor.codim == 1 else "smoothedPL"
    if mode not in ("argument", "smoothedPL"):
        raise ValueError(f"unknown counting mode {mode!r}")
    if mode == "argument" and not (mp.k == 1 and divisor.codim == 1):
        raise CountingError("argument-principle mode needs k = 1 and a hyperplane")
    if not s < exh.R:
        raise CountingError(f"level {s} is not below R = {exh.R}")
    _probe_containment(mp, exh, divisor)
    plan = plan or QuadPlan(budget=2**16)
    last = None
    for attempt in range(MAX_ATTEMPTS):
        s_try = s + attempt * PERTURB
        try:
            if mode == "argument":
                raw = _argument_count(mp, exh, divisor.a, s_try)
                val = float(round(raw))
                dist = abs(raw - val)
                if dist > max_distance:
                    raise CountingError(f"winding number {raw:.6g} is not within {max_distance} of an integer")
                return CountResult(val, raw, dist, mode, s_try, True, attempt + 1)
            raw, err, detail, integral = _smoothed_count(mp, exh, divisor, s_try, tuple(eps), plan)
            detail["error"] = err
            if integral:
                val = float(round(raw))
                return CountResult(val, raw, abs(raw - val), mode, s_try, True, attempt + 1, detail)
            return CountResult(raw, raw, err, mode, s_try, False, attempt + 1, detail)
        except ZeroOnContourError as exc:
            last = exc
    raise CountingError(f"zero on contour after {MAX_ATTEMPTS} perturbations: {last}")


def _probe_containment(mp: MapSpec, exh: ExhaustionSpec, divisor: DivisorSpec, n: int = 64) -> None:
    """Reject maps whose image is contained in a hyperplane divisor."""
    if divisor.codim != 1:
        return
    rng = np.random.default_rng(12345)
    # containment is global; probe a fixed region instead of the (possibly tiny) level s
    rho = float(exh.radius(exh.r0))
    z = rng.standard_normal((n, mp.k)) + 1j * rng.standard_normal((n, mp.k))
    z *= (rho * rng.random((n, 1)) ** (1.0 / (2 * mp.k))) / np.linalg.norm(z, axis=1, keepdims=True)
    F, _ = mp.evaluate(z)
    if np.all(np.abs(F @ divisor.a) <= 1e-12 * np.linalg.norm(F, axis=1)):
        raise CountingError("the image of the map is contained in the divisor")


# ---------------------------------------------------------------------------
# counting function


@dataclass
class CountingSeries:
    """``n`` and ``N`` on a schedule, with the located jump levels of ``n``.

    ``jumps`` are ``(level, multiplicity)`` pairs; ``n0`` preimages were found
    inside ``B_{floor}`` and are booked at the centre.
    """

    radii: np.ndarray
    n: np.ndarray
    N: np.ndarray
    weight_kind: str
    mode: str
    jumps: list = field(default_factory=list)
    n0: float = 0.0
    floor: float = -math.inf
    N_err: np.ndarray | None = None


def _jump_levels(count, lo: float, hi: float, n_lo: float, n_hi: float, tol: float) -> list[tuple[float, float]]:
    """Locate jumps of a monotone step function on ``(lo, hi]`` by bisection."""
    out = []
    stack = [(lo, hi, n_lo, n_hi)]
    while stack:
        a, b, na, nb = stack.pop()
        if nb == na:
            continue
        if b - a <= tol:
            out.append((0.5 * (a + b), nb - na))
            continue
        mid = 0.5 * (a + b)
        nm = count(mid)
        stack.append((mid, b, nm, nb))
        stack.append((a, mid, na, nm))
    return sorted(out)


def counting_function(mp: MapSpec, exh: ExhaustionSpec, divisor: DivisorSpec, schedule: Sequence[float],
                      weight_kind: str = "ddc", mode: str = "auto", plan: QuadPlan | None = None,
                      floor_depth: float = 12.0, tol: float = 1e-9) -> CountingSeries:
    """``N(D, r)`` on a schedule.

    For integer-valued counts the jumps of ``n`` between a floor level
    ``schedule[0] - floor_depth`` and the last radius are located by bisection
    to ``tol`` and ``N`` is summed exactly. Preimages below the floor are booked
    at the centre (``tau = -inf``), matching the ``n(0) log r`` term. Hyperplanes
    in k >= 2 give a continuous ``n``; there ``N`` is the trapezoid cumulation
    in ``u`` over the schedule.
    """
    if weight_kind not in ("ddc", "d"):
        raise ValueError("weight_kind must be 'ddc' or 'd'")
    radii = np.asarray(schedule, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(np.diff(radii) <= 0):
        raise ValueError("schedule must be a non-empty increasing sequence")
    plan = plan or QuadPlan(budget=2**16)

    def count_res(s):
        return count_preimages(mp, exh, divisor, s, mode=mode, plan=plan)

    first = count_res(float(radii[0]))
    if not first.integral:
        res = [first] + [count_res(float(r)) for r in radii[1:]]
        n = np.array([c.value for c in res])
        err = np.array([c.distance for c in res])
        lo = exh.r0
        head = n[0] * (radii[0] - lo) if weight_kind == "d" else math.nan
        if weight_kind == "ddc":
            raise CountingError("ddc-case N for hyperplanes in k >= 2 is not supported; use weight_kind='d'")
        steps = 0.5 * (n[1:] + n[:-1]) * np.diff(radii)
        N = head + np.concatenate([[0.0], np.cumsum(steps)])
        return CountingSeries(radii, n, N, weight_kind, first.mode, [], 0.0, lo,
                              np.cumsum(np.concatenate([[err[0]], err[1:] * np.diff(radii)])))

    floor = float(radii[0]) - floor_depth
    if math.isfinite(exh.u_min):
        floor = max(floor, exh.u_min + tol)
    cache: dict[float, float] = {}

    def count(s):
        if s not in cache:
            cache[s] = count_res(s).value
        return cache[s]

    n0 = count(floor)
    levels = [floor] + [float(r) for r in radii]
    jumps = []
    for a, b in zip(levels[:-1], levels[1:]):
        jumps += _jump_levels(count, a, b, count(a), count(b), tol)
    n = np.array([count(float(r)) for r in radii])
    N = np.array([_N_from_jumps(r, jumps, n0, weight_kind, exh.r0) for r in radii])
    return CountingSeries(radii, n, N, weight_kind, first.mode, jumps, n0, floor, np.full(radii.size, tol * max(n.max(), 1)))


def _N_from_jumps(r: float, jumps, n0: float, weight_kind: str, r0: float) -> float:
    if weight_kind == "ddc":
        return n0 * r + sum(m * (r - s) for s, m in jumps if s < r)
    return n0 * (r - r0) + sum(m * (r - max(s, r0)) for s, m in jumps if s < r)


def preimage_counting_sum(mp: MapSpec, exh: ExhaustionSpec, divisor: DivisorSpec, r: float,
                          weight_kind: str = "ddc") -> float:
    """``int_{B_r cap phi^-1 D} u_r`` summed over explicitly enumerated preimages.

    Preimages at the centre contribute ``r`` (the ``n(0) log r`` term).
    """
    pts = mp.preimages(divisor, float(exh.radius(r)))
    if pts is None:
        raise CountingError(f"map {mp.label} has no preimage enumeration")
    norms = np.linalg.norm(np.atleast_2d(pts), axis=1) if len(pts) else np.zeros(0)
    total = 0.0
    for rho in norms:
        tau = -math.inf if rho == 0 else float(exh.tau(np.array([[rho] + [0.0] * (mp.k - 1)]))[0])
        if weight_kind == "ddc":
            total += r if rho == 0 else r - tau
        else:
            total += r - max(tau, exh.r0)
    return total


# ---------------------------------------------------------------------------
# proximity and the First Main Theorem


def proximity(mp: MapSpec, exh: ExhaustionSpec, divisor: DivisorSpec, r: float,
              plan: QuadPlan | None = None) -> QuadResult:
    """``m(D, r) = int_{dB_r} K(phi, a) d^c tau ^ (dd^c tau)^{k-1}``.

    A contour through a preimage (infinite kernel) is retried at ``r + 1e-6``.
    """
    if divisor.codim != 1:
        raise CountingError("proximity is implemented for hyperplane divisors")
    plan = plan or QuadPlan(budget=2**16)

    def kernel(z):
        F, _ = mp.evaluate(z)
        return hyperplane_kernel(F, divisor.a)

    last = None
    for attempt in range(MAX_ATTEMPTS):
        try:
            return integrate_boundary(kernel, exh, r + attempt * PERTURB, plan.with_(budget=max(plan.budget, 2**14)),
                                      rtol=1e-10)
        except QuadratureError as exc:
            last = exc
    raise CountingError(f"proximity failed near level {r}: {last}")


def fmt_constant(mp: MapSpec, divisor: DivisorSpec, centre: np.ndarray | None = None) -> float:
    """``K(phi(0), a)``: the constant in ``N + m = T_1 + K(phi(0), a)`` (k = 1, logAbs)."""
    z0 = np.zeros((1, mp.k), dtype=complex) if centre is None else np.asarray(centre, dtype=complex).reshape(1, -1)
    F, _ = mp.evaluate(z0)
    return float(hyperplane_kernel(F, divisor.a)[0])


@dataclass
class DefectReport:
    """Counting, proximity and defect of one divisor on a schedule."""

    divisor: DivisorSpec
    radii: np.ndarray
    n: np.ndarray
    N: np.ndarray
    m: np.ndarray
    m_err: np.ndarray
    T1: np.ndarray
    T1_err: np.ndarray
    mode: str
    fmt_constant: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def delta(self) -> np.ndarray:
        """``delta(D, r) = 1 - N(D, r) / T_1(r)``."""
        return 1.0 - self.N / self.T1

    @property
    def delta_err(self) -> np.ndarray:
        return np.abs(self.N) * self.T1_err / self.T1**2

    def check_invariants(self, tol: float = 3.0) -> list[str]:
        bad = []
        if np.any(np.diff(self.N) < -1e-9 * (1 + np.abs(self.N[1:]))):
            bad.append("N decreases")
        if np.any(self.delta > 1 + tol * self.delta_err + 1e-12):
            bad.append("delta exceeds 1")
        if not np.all(np.isfinite(fmt_residual(self))):
            bad.append("non-finite FMT residual")
        return bad


def fmt_residual(report: DefectReport) -> np.ndarray:
    """``N + m - T_1`` on the report schedule."""
    return report.N + report.m - report.T1


def defect_report(mp: MapSpec, exh: ExhaustionSpec, divisor: DivisorSpec, T1_series,
                  plan: QuadPlan | None = None, mode: str = "auto") -> DefectReport:
    """Assemble ``N``, ``m`` and ``delta`` for one divisor against a ddc-case ``T_1`` series."""
    if T1_series.weight_kind != "ddc" or T1_series.j != 1:
        raise ValueError("defect report needs the ddc-case series of degree 1")
    radii = T1_series.radii
    cs = counting_function(mp, exh, divisor, radii, "ddc", mode=mode, plan=plan)
    prox = [proximity(mp, exh, divisor, float(r), plan) for r in radii]
    const = fmt_constant(mp, divisor) if exh.kind == "logAbs" and mp.k == 1 else math.nan
    return DefectReport(divisor, radii, cs.n, cs.N, np.array([p.value for p in prox]),
                        np.array([p.stderr for p in prox]), T1_series.T, T1_series.T_err, cs.mode, const,
                        {"jumps": cs.jumps, "n0": cs.n0})
