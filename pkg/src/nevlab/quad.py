"""Integration over sublevel sets ``B_r = {tau < r}`` and their boundaries.

Two strategies share one sample-cloud representation:

* ``radialGrid``: tau is split into equal shells, each integrated with the
  15-point Gauss-Kronrod rule; every radial node carries a trapezoid grid on
  the sphere (k = 1: circle, k = 2: Hopf coordinates). The error estimate
  combines the Kronrod/Gauss gap with the gap between the two interleaved
  halves of the angular grid.
* ``monteCarlo``: stratified sampling, uniform in volume inside each tau-shell
  (the innermost stratum is the full inner ball). The error is the stratified
  standard error.

Evaluation runs over fixed-size sample blocks, optionally in threads, and
partial sums are combined in a fixed pairwise-tree order, so every result is
independent of the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .maps import ExhaustionSpec

STRATEGIES = ("radialGrid", "monteCarlo")
THREADS_ENV = "NEVLAB_THREADS"

# 15-point Kronrod nodes on [0, 1] (mirrored) and the embedded 7-point Gauss weights
XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])


def gauss_kronrod_15() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes on [-1, 1], Kronrod weights and embedded Gauss weights (0 off the Gauss nodes)."""
    x = np.concatenate([-XGK[:-1], [0.0], XGK[-2::-1]])
    wk = np.concatenate([WGK[:-1], [WGK[-1]], WGK[-2::-1]])
    g_half = np.zeros(8)
    g_half[1::2] = WG
    wg = np.concatenate([g_half[:-1], [g_half[-1]], g_half[-2::-1]])
    return x, wk, wg


def thread_count() -> int:
    """Worker threads from ``NEVLAB_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class QuadratureError(ValueError):
    """Raised on non-finite integrand samples or invalid integration requests."""


@dataclass(frozen=True)
class QuadPlan:
    """Quadrature settings.

    Attributes:
        strategy: ``radialGrid`` or ``monteCarlo``.
        budget: Approximate number of integrand evaluations.
        seed: Root seed for Monte Carlo blocks.
        shells: Number of tau-strata.
        span: Depth below r kept by the grid when tau is unbounded below.
        block: Samples per evaluation block.
    """

    strategy: str = "radialGrid"
    budget: int = 1 << 18
    seed: int = 0
    shells: int = 64
    span: float = 14.0
    block: int = 8192

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.budget < 1000:
            raise ValueError("budget must be at least 1000 samples")
        if self.shells < 4:
            raise ValueError("at least 4 shells are required")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.block < 1:
            raise ValueError("block size must be positive")

    def with_(self, **kw) -> "QuadPlan":
        d = dict(self.__dict__)
        d.update(kw)
        return QuadPlan(**d)


@dataclass(frozen=True)
class QuadResult:
    value: float
    stderr: float
    samples_used: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise QuadratureError("quadrature produced a non-finite value")
        if not self.stderr >= 0:
            raise QuadratureError("negative or NaN error estimate")


def tree_sum(parts: list) -> np.ndarray:
    """Pairwise sum in a fixed order."""
    if not parts:
        return np.float64(0.0)
    parts = list(parts)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


@dataclass
class SampleCloud:
    """Weighted nodes of a quadrature rule on a region of C^k.

    ``weight`` already includes the volume element. For grid clouds, ``parity``
    splits the angular grid into two interleaved halves and ``gauss`` carries the
    embedded Gauss weights; for Monte Carlo clouds ``stratum`` indexes strata.
    """

    z: np.ndarray
    weight: np.ndarray
    tau: np.ndarray
    strategy: str
    stratum: np.ndarray
    parity: np.ndarray | None = None
    gauss: np.ndarray | None = None
    block: int = 8192

    @property
    def size(self) -> int:
        return self.weight.size

    def _slices(self) -> list[slice]:
        return [slice(i, min(i + self.block, self.size)) for i in range(0, self.size, self.block)]

    def apply(self, fn: Callable[[np.ndarray], np.ndarray], threads: int | None = None) -> np.ndarray:
        """Evaluate a vectorized pointwise function block by block."""
        slices = self._slices()
        threads = thread_count() if threads is None else threads
        if threads > 1 and len(slices) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(lambda s: np.asarray(fn(self.z[s])), slices))
        else:
            parts = [np.asarray(fn(self.z[s])) for s in slices]
        out = np.concatenate([np.broadcast_to(p, (s.stop - s.start,) + p.shape[1:]) for p, s in zip(parts, slices)])
        return out

    def check_finite(self, values: np.ndarray) -> None:
        bad = ~np.isfinite(values)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise QuadratureError(f"non-finite integrand at z={self.z[i]} (tau={self.tau[i]:.6g})")

    def _block_sums(self, x: np.ndarray) -> np.ndarray:
        return tree_sum([np.sum(x[s]) for s in self._slices()])

    def estimate(self, values: np.ndarray) -> QuadResult:
        """Integral of ``values`` against the cloud weights with an error estimate."""
        v = np.asarray(values)
        self.check_finite(v)
        wv = self.weight * v
        total = self._block_sums(wv)
        if self.strategy == "radialGrid":
            even = self._block_sums(np.where(self.parity == 0, wv, 0.0))
            odd = total - even
            ang = abs(even - odd)
            rad = abs(total - self._block_sums(self.gauss * v))
            err = math.hypot(ang, rad)
        else:
            ns = int(self.stratum.max()) + 1 if self.size else 0
            sums, sq, cnt = [], [], []
            for s in self._slices():
                st = self.stratum[s]
                sums.append(np.bincount(st, weights=np.real(wv[s]), minlength=ns))
                sq.append(np.bincount(st, weights=np.abs(wv[s]) ** 2, minlength=ns))
                cnt.append(np.bincount(st, minlength=ns).astype(float))
            S, Q, C = tree_sum(sums), tree_sum(sq), tree_sum(cnt)
            Cs = np.maximum(C, 2.0)
            var = np.maximum(Q / Cs - (S / Cs) ** 2, 0.0) * C * C / (Cs - 1)
            err = float(np.sqrt(np.sum(var)))
        val = complex(total)
        if val.imag != 0 and abs(val.imag) > 1e-12 * max(abs(val.real), 1e-300):
            raise QuadratureError("estimate() expects a real integrand; use estimate_complex")
        return QuadResult(float(val.real), float(err), self.size)

    def estimate_complex(self, values: np.ndarray) -> tuple[complex, float]:
        v = np.asarray(values)
        self.check_finite(v)
        re = self.estimate(np.real(v))
        im = self.estimate(np.imag(v))
        return complex(re.value, im.value), math.hypot(re.stderr, im.stderr)

    def subset(self, mask: np.ndarray) -> "SampleCloud":
        return SampleCloud(self.z[mask], self.weight[mask], self.tau[mask], self.strategy,
                           self.stratum[mask], None if self.parity is None else self.parity[mask],
                           None if self.gauss is None else self.gauss[mask], self.block)


# ---------------------------------------------------------------------------
# cloud construction


def _radial_nodes(lo: float, hi: float, shells: int):
    x, wk, wg = gauss_kronrod_15()
    edges = np.linspace(lo, hi, shells + 1)
    c = 0.5 * (edges[:-1] + edges[1:])
    h = 0.5 * (edges[1:] - edges[:-1])
    u = (c[:, None] + h[:, None] * x[None, :]).ravel()
    w = (h[:, None] * wk[None, :]).ravel()
    g = (h[:, None] * wg[None, :]).ravel()
    s = np.repeat(np.arange(shells), x.size)
    return u, w, g, s


def _circle_counts(rho: np.ndarray, budget: int, bandwidth, nmin: int = 16) -> np.ndarray:
    if bandwidth is None:
        demand = np.ones_like(rho)
    else:
        demand = np.maximum(np.asarray(bandwidth(rho), dtype=float), 1.0)
    lo, hi = 1e-6, float(budget)
    for _ in range(100):
        c = math.sqrt(lo * hi)
        tot = np.sum(np.maximum(nmin, c * demand))
        if tot > budget:
            hi = c
        else:
            lo = c
        if hi / lo < 1.001:
            break
    n = np.maximum(nmin, lo * demand)
    return (2 * np.ceil(n / 2)).astype(int)


def _sphere2_grid(n: int):
    """Hopf grid on S^3: s Gauss-Legendre, two trapezoid angles; weights sum to 2 pi^2."""
    xs, ws = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (xs + 1)
    ws = 0.5 * ws
    na = 2 * n
    ang = 2 * np.pi * np.arange(na) / na
    S, A, B = np.meshgrid(s, ang, ang, indexing="ij")
    W = np.broadcast_to(ws[:, None, None], S.shape) * (2 * np.pi / na) ** 2 * 0.5
    ia, ib = np.meshgrid(np.arange(na), np.arange(na), indexing="ij")
    par = np.broadcast_to(((ia + ib) % 2)[None], S.shape)
    pts = np.stack([np.sqrt(1 - S) * np.exp(1j * A), np.sqrt(S) * np.exp(1j * B)], axis=-1)
    return pts.reshape(-1, 2), W.ravel(), par.ravel().astype(np.int8)


def _grid_cloud(exh: ExhaustionSpec, lo: float, hi: float, plan: QuadPlan, bandwidth) -> SampleCloud:
    k = exh.k
    u, wu, gu, su = _radial_nodes(lo, hi, plan.shells)
    rho = exh.radius(u)
    zs, ws, gs, ts, ss, ps = [], [], [], [], [], []
    if k == 1:
        counts = _circle_counts(rho, plan.budget, bandwidth)
        for ui, wi, gi, si, ri, n in zip(u, wu, gu, su, rho, counts):
            th = 2 * np.pi * np.arange(n) / n
            vol = ri**2 * 2 * np.pi / n
            zs.append((ri * np.exp(1j * th)).reshape(-1, 1))
            ws.append(np.full(n, wi * vol))
            gs.append(np.full(n, gi * vol))
            ts.append(np.full(n, ui))
            ss.append(np.full(n, si))
            ps.append((np.arange(n) % 2).astype(np.int8))
    elif k == 2:
        per = max(plan.budget // u.size, 32)
        n = max(4, int(round((per / 4.0) ** (1.0 / 3.0))))
        sp, sw, spar = _sphere2_grid(n)
        for ui, wi, gi, si, ri in zip(u, wu, gu, su, rho):
            zs.append(ri * sp)
            ws.append(wi * ri**4 * sw)
            gs.append(gi * ri**4 * sw)
            ts.append(np.full(sw.size, ui))
            ss.append(np.full(sw.size, si))
            ps.append(spar)
    else:
        raise QuadratureError("radialGrid supports k <= 2; use monteCarlo")
    return SampleCloud(np.concatenate(zs), np.concatenate(ws), np.concatenate(ts), "radialGrid",
                       np.concatenate(ss).astype(np.int32), np.concatenate(ps), np.concatenate(gs),
                       plan.block)


def _ball_volume(k: int, rho: float) -> float:
    return math.pi**k / math.factorial(k) * rho ** (2 * k)


def _mc_cloud(exh: ExhaustionSpec, lo: float, hi: float, plan: QuadPlan, inner_ball: bool) -> SampleCloud:
    k = exh.k
    edges = np.linspace(lo, hi, plan.shells + 1)
    per = max(plan.budget // plan.shells, 2)
    zs, ws, ts, ss = [], [], [], []
    for s in range(plan.shells):
        ra, rb = sorted((float(exh.radius(edges[s])), float(exh.radius(edges[s + 1]))))
        if s == 0 and inner_ball:
            ra = 0.0
        a2k, b2k = ra ** (2 * k), rb ** (2 * k)
        vol = _ball_volume(k, rb) - _ball_volume(k, ra)
        done = 0
        b = 0
        while done < per:
            n = min(plan.block, per - done)
            rng = np.random.default_rng(np.random.SeedSequence(plan.seed, spawn_key=(s, b)))
            rad = (a2k + rng.random(n) * (b2k - a2k)) ** (1.0 / (2 * k))
            g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            zs.append(g * rad[:, None])
            ws.append(np.full(n, vol / per))
            with np.errstate(divide="ignore"):
                ts.append(exh.level(rad))
            ss.append(np.full(n, s, dtype=np.int32))
            done += n
            b += 1
    return SampleCloud(np.concatenate(zs), np.concatenate(ws), np.concatenate(ts), "monteCarlo",
                       np.concatenate(ss), None, None, plan.block)


def region_cloud(
    exh: ExhaustionSpec,
    hi: float,
    plan: QuadPlan,
    lo: float | None = None,
    bandwidth: Callable[[np.ndarray], np.ndarray] | None = None,
) -> SampleCloud:
    """Sample cloud for ``{lo < tau < hi}``; ``lo=None`` means the whole sublevel set.

    Args:
        exh: Exhaustion.
        hi: Upper tau level (must be < R).
        plan: Quadrature plan.
        lo: Lower level; defaults to the bottom of the domain.
        bandwidth: Angular frequency estimate (k = 1 grids only).
    """
    if not hi < exh.R:
        raise QuadratureError(f"radius {hi} is not below R = {exh.R}")
    inner_ball = False
    if lo is None:
        if math.isfinite(exh.u_min):
            lo = exh.u_min
        else:
            lo = hi - plan.span
            inner_ball = True
    if not lo < hi:
        raise QuadratureError(f"empty region: lo={lo} >= hi={hi}")
    if plan.strategy == "radialGrid":
        return _grid_cloud(exh, lo, hi, plan, bandwidth)
    return _mc_cloud(exh, lo, hi, plan, inner_ball)


def integrate_sublevel(
    density: Callable[[np.ndarray], np.ndarray],
    exh: ExhaustionSpec,
    r: float,
    plan: QuadPlan,
    weight: Callable[[np.ndarray], np.ndarray] | None = None,
    bandwidth: Callable[[np.ndarray], np.ndarray] | None = None,
    lo: float | None = None,
) -> QuadResult:
    """Integral of a density over ``B_r = {tau < r}`` against Lebesgue measure.

    Args:
        density: Vectorized evaluator on ``(n, k)`` points; dd^c factors of the
            form convention must already be folded in.
        exh: Exhaustion defining ``B_r``.
        r: Level, in the exhaustion's own (tau) scale.
        plan: Quadrature plan.
        weight: Optional function of tau multiplying the density.
        bandwidth: Angular frequency estimate for k = 1 grids.
        lo: Optional lower tau level (integrate over a shell instead).
    """
    cloud = region_cloud(exh, r, plan, lo=lo, bandwidth=bandwidth)
    vals = cloud.apply(density)
    if weight is not None:
        vals = vals * weight(cloud.tau)
    return cloud.estimate(vals)


def boundary_nodes(exh: ExhaustionSpec, r: float, n: int, rng: np.random.Generator | None = None):
    """Nodes and weights of the normalized boundary measure on ``{tau = r}``."""
    rho = float(exh.radius(r))
    if exh.k == 1:
        if rng is None:
            th = 2 * np.pi * np.arange(n) / n
        else:
            th = 2 * np.pi * rng.random(n)
        return (rho * np.exp(1j * th)).reshape(-1, 1), np.full(n, 1.0 / n)
    if rng is None and exh.k == 2:
        m = max(4, int(round((n / 4.0) ** (1 / 3))))
        pts, w, _ = _sphere2_grid(m)
        return rho * pts, w / np.sum(w)
    rng = rng or np.random.default_rng(0)
    g = rng.standard_normal((n, exh.k)) + 1j * rng.standard_normal((n, exh.k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return rho * g, np.full(n, 1.0 / n)


def integrate_boundary(
    g: Callable[[np.ndarray], np.ndarray],
    exh: ExhaustionSpec,
    r: float,
    plan: QuadPlan,
    rtol: float = 1e-12,
) -> QuadResult:
    """Integral of ``g`` against ``d^c tau ^ (dd^c tau)^{k-1}`` on ``{tau = r}``.

    For radial log-type exhaustions this is the normalized sphere measure.
    Grids use trapezoid doubling on the circle (k = 1) or a Hopf grid (k = 2);
    Monte Carlo uses uniform random boundary points.
    """
    if exh.k >= 2 and exh.kind != "logAbs":
        raise QuadratureError("boundary measure available only for logAbs when k >= 2")
    if not r < exh.R:
        raise QuadratureError(f"radius {r} is not below R = {exh.R}")
    if plan.strategy == "monteCarlo" or exh.k >= 3:
        rng = np.random.default_rng(np.random.SeedSequence(plan.seed, spawn_key=(0xB0,)))
        z, w = boundary_nodes(exh, r, plan.budget, rng)
        v = np.asarray(g(z), dtype=float)
        if not np.all(np.isfinite(v)):
            raise QuadratureError(f"non-finite boundary integrand at level {r}")
        return QuadResult(float(np.sum(w * v)), float(np.std(v) / math.sqrt(v.size)), v.size)
    if exh.k == 2:
        z, w = boundary_nodes(exh, r, plan.budget)
        v = np.asarray(g(z), dtype=float)
        zc, wc = boundary_nodes(exh, r, max(plan.budget // 8, 64))
        vc = np.asarray(g(zc), dtype=float)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(vc))):
            raise QuadratureError(f"non-finite boundary integrand at level {r}")
        val = float(np.sum(w * v))
        return QuadResult(val, abs(val - float(np.sum(wc * vc))), v.size + vc.size)
    n = 64
    z, w = boundary_nodes(exh, r, n)
    vals = np.asarray(g(z), dtype=float)
    prev = float(np.mean(vals))
    used = n
    while True:
        # midpoints of the current grid refine it to 2n nodes
        zr = z * np.exp(1j * np.pi / n)
        vm = np.asarray(g(zr), dtype=float)
        used += n
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vm))):
            raise QuadratureError(f"non-finite boundary integrand at level {r}")
        cur = 0.5 * (prev + float(np.mean(vm)))
        err = abs(cur - prev)
        z = np.concatenate([z, zr])
        vals = np.concatenate([vals, vm])
        n *= 2
        prev = cur
        if err <= rtol * (1.0 + abs(cur)) or used >= plan.budget:
            return QuadResult(cur, err, used)
