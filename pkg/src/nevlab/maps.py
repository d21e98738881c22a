"""Catalog of holomorphic maps into P^m and of psh exhaustions of their domains.

Maps return a homogeneous representative ``F`` together with its Jacobian.
Polynomial maps return the holomorphic representative itself. Exp-type maps
return ``(lam * F, lam * F')`` for a positive real ``lam(z)`` chosen to keep
entries of order one (``e^z`` overflows near ``|z| = 710``); every metric
quantity built from them is invariant under this rescaling (see
``forms.fs_pullback_coeff``), and they are flagged ``holomorphic=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .forms import fs_pullback_coeff

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MapSpec:
    """Holomorphic map ``phi: X -> P^m`` with ``X`` open in C^k.

    Attributes:
        k: Domain dimension.
        m: Target dimension.
        eval: ``(n, k)`` complex points to ``(n, m+1)`` homogeneous values.
        jac: ``(n, k)`` points to ``(n, m+1, k)`` Jacobians of the representative.
        kind: Catalog id or ``"user"``.
        params: Parameters the catalog entry was built from.
        bandwidth: Angular frequency estimate on the circle of radius rho, used to
            size angular grids.
        preimage_fn: Optional exact enumeration of preimages of a divisor.
        holomorphic: True when ``eval`` is a holomorphic representative (no
            positive rescaling); required by the smoothed counting kernels.
    """

    k: int
    m: int
    eval: Evaluator
    jac: Evaluator
    kind: str = "user"
    params: dict = field(default_factory=dict)
    bandwidth: Callable[[np.ndarray], np.ndarray] | None = None
    preimage_fn: Callable[["DivisorSpec", float], np.ndarray] | None = None
    holomorphic: bool = True

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"

    def evaluate(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Representative and Jacobian at points of shape ``(n, k)`` or ``(k,)``."""
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        z2 = z.reshape(-1, self.k)
        F, J = self.eval(z2), self.jac(z2)
        if single:
            return F[0], J[0]
        return F, J

    def pullback_fs(self, z: np.ndarray) -> np.ndarray:
        """Batched coefficient of ``phi^* omega`` at points ``(n, k)``."""
        F, J = self.eval(z), self.jac(z)
        return fs_pullback_coeff(F, J)

    def angular_bandwidth(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.bandwidth is None:
            return 1.0 + rho
        return np.asarray(self.bandwidth(rho), dtype=float)

    def preimages(self, divisor: "DivisorSpec", rho_max: float) -> np.ndarray | None:
        """Preimages of a divisor with ``||z|| < rho_max``, or None if not enumerable."""
        if self.preimage_fn is None:
            return None
        return self.preimage_fn(divisor, rho_max)


@dataclass(frozen=True)
class DivisorSpec:
    """Hyperplane ``{<Z, a> = 0}`` of P^m, or a point of P^m when ``codim == m``.

    The pairing is bilinear: ``<Z, a> = sum_i Z_i a_i``.
    """

    a: np.ndarray
    codim: int = 1

    def __post_init__(self) -> None:
        a = np.atleast_1d(np.asarray(self.a, dtype=complex))
        n = np.linalg.norm(a)
        if not n > 0 or not np.isfinite(n):
            raise ValueError("divisor vector must be non-zero and finite")
        if abs(n - 1.0) > 1e-12:
            a = a / n
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if not 1 <= self.codim <= a.size - 1:
            raise ValueError(f"codimension {self.codim} invalid in P^{a.size - 1}")

    @property
    def m(self) -> int:
        return self.a.size - 1

    @property
    def is_point(self) -> bool:
        return self.codim == self.m and self.m > 1

    @classmethod
    def value(cls, w: complex | None) -> "DivisorSpec":
        """Hyperplane of P^1 cut out by the target value ``w`` (None for infinity)."""
        if w is None:
            return cls(np.array([1.0, 0.0]))
        return cls(np.array([-complex(w), 1.0]))

    @classmethod
    def point(cls, b: Sequence[complex]) -> "DivisorSpec":
        """Point ``[b_0 : ... : b_m]`` of P^m, as a codimension-m divisor."""
        b = np.asarray(b, dtype=complex)
        return cls(b, codim=b.size - 1)

    def target_value(self) -> complex | None:
        """Finite value ``w`` with ``D = {Z_1/Z_0 = w}`` in P^1, or None for infinity."""
        if self.m != 1:
            raise ValueError("target values only defined on P^1")
        a0, a1 = self.a
        if abs(a1) < 1e-300:
            return None
        return -a0 / a1


def hyperplane_kernel(Z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``K(Z, a) = log(||Z|| ||a|| / |<Z, a>|)``; non-negative, +inf on the hyperplane."""
    Z = np.asarray(Z, dtype=complex)
    num = np.linalg.norm(Z, axis=-1) * np.linalg.norm(a)
    den = np.abs(Z @ np.asarray(a, dtype=complex))
    with np.errstate(divide="ignore"):
        return np.log(num) - np.log(den)


# ---------------------------------------------------------------------------
# catalog


def _col(z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=complex).reshape(-1)


def _power(d: int) -> MapSpec:
    if not (isinstance(d, (int, np.integer)) and d >= 1):
        raise ValueError(f"power map needs an integer d >= 1, got {d!r}")

    def ev(z):
        x = _col(z)
        return np.stack([np.ones_like(x), x**d], axis=1)

    def jac(z):
        x = _col(z)
        out = np.zeros((x.size, 2, 1), dtype=complex)
        out[:, 1, 0] = d * x ** (d - 1)
        return out

    def pre(div: DivisorSpec, rho_max: float):
        w = div.target_value()
        if w is None:
            return np.zeros((0, 1), dtype=complex)
        if w == 0:
            roots = np.zeros(d, dtype=complex)
        else:
            roots = abs(w) ** (1.0 / d) * np.exp(1j * (np.angle(w) + 2 * np.pi * np.arange(d)) / d)
        return roots[np.abs(roots) < rho_max].reshape(-1, 1)

    return MapSpec(1, 1, ev, jac, "power", {"d": int(d)}, lambda rho: d * np.ones_like(rho), pre)


def _poly(coeffs: Sequence[complex]) -> MapSpec:
    c = np.asarray(coeffs, dtype=complex)
    while c.size > 1 and c[-1] == 0:
        c = c[:-1]
    if c.size < 2:
        raise ValueError("polynomial must have degree >= 1")
    dc = c[1:] * np.arange(1, c.size)
    deg = c.size - 1

    def ev(z):
        x = _col(z)
        return np.stack([np.ones_like(x), np.polynomial.polynomial.polyval(x, c)], axis=1)

    def jac(z):
        x = _col(z)
        out = np.zeros((x.size, 2, 1), dtype=complex)
        out[:, 1, 0] = np.polynomial.polynomial.polyval(x, dc)
        return out

    def pre(div: DivisorSpec, rho_max: float):
        w = div.target_value()
        if w is None:
            return np.zeros((0, 1), dtype=complex)
        q = c.copy()
        q[0] -= w
        roots = np.polynomial.polynomial.polyroots(q)
        return roots[np.abs(roots) < rho_max].reshape(-1, 1)

    params = {"coeffs": [complex(v) if np.iscomplex(v) else float(v.real) for v in c]}
    return MapSpec(1, 1, ev, jac, "poly", params, lambda rho: deg * np.ones_like(rho), pre)


def _exp_scale(re: np.ndarray) -> np.ndarray:
    return -np.maximum(0.0, re)


def _exp() -> MapSpec:
    def ev(z):
        x = _col(z)
        s = _exp_scale(x.real)
        return np.stack([np.exp(s) + 0j, np.exp(x + s)], axis=1)

    def jac(z):
        x = _col(z)
        s = _exp_scale(x.real)
        out = np.zeros((x.size, 2, 1), dtype=complex)
        out[:, 1, 0] = np.exp(x + s)
        return out

    def pre(div: DivisorSpec, rho_max: float):
        w = div.target_value()
        if w is None or w == 0:
            return np.zeros((0, 1), dtype=complex)
        base = complex(np.log(complex(w)))
        nmax = int(math.ceil(rho_max / (2 * math.pi))) + 1
        cand = base + 2j * math.pi * np.arange(-nmax, nmax + 1)
        return cand[np.abs(cand) < rho_max].reshape(-1, 1)

    return MapSpec(1, 1, ev, jac, "exp", {}, lambda rho: 1.0 + rho, pre, holomorphic=False)


def _exp_curve() -> MapSpec:
    def scale(x):
        return -np.maximum.reduce([np.zeros(x.shape), np.log(np.maximum(np.abs(x), 1e-300)), x.real])

    def ev(z):
        x = _col(z)
        s = scale(x)
        lam = np.exp(s)
        return np.stack([lam + 0j, lam * x, np.exp(x + s)], axis=1)

    def jac(z):
        x = _col(z)
        s = scale(x)
        out = np.zeros((x.size, 3, 1), dtype=complex)
        out[:, 1, 0] = np.exp(s)
        out[:, 2, 0] = np.exp(x + s)
        return out

    return MapSpec(1, 2, ev, jac, "expCurve", {}, lambda rho: 1.0 + rho, None, holomorphic=False)


def _disk_cover() -> MapSpec:
    def h(x):
        return (1 + x) / (1 - x)

    def ev(z):
        x = _col(z)
        hv = h(x)
        s = _exp_scale(hv.real)
        return np.stack([np.exp(s) + 0j, np.exp(hv + s)], axis=1)

    def jac(z):
        x = _col(z)
        hv = h(x)
        s = _exp_scale(hv.real)
        out = np.zeros((x.size, 2, 1), dtype=complex)
        out[:, 1, 0] = np.exp(hv + s) * 2.0 / (1 - x) ** 2
        return out

    def bw(rho):
        return 4.0 + 2.0 / np.maximum(1.0 - rho, 1e-6) ** 2

    return MapSpec(1, 1, ev, jac, "diskCover", {}, bw, None, holomorphic=False)


def _dilate(s: complex) -> MapSpec:
    s = complex(s)
    if s == 0:
        raise ValueError("dilation factor must be non-zero")

    def ev(z):
        x = _col(z)
        return np.stack([np.ones_like(x), s * x], axis=1)

    def jac(z):
        x = _col(z)
        out = np.zeros((x.size, 2, 1), dtype=complex)
        out[:, 1, 0] = s
        return out

    def pre(div: DivisorSpec, rho_max: float):
        w = div.target_value()
        if w is None:
            return np.zeros((0, 1), dtype=complex)
        root = np.array([w / s])
        return root[np.abs(root) < rho_max].reshape(-1, 1)

    val = s.real if s.imag == 0 else s
    return MapSpec(1, 1, ev, jac, "dilate", {"s": val}, lambda rho: 2.0 * np.ones_like(rho), pre)


def _polyk(k: int, polys: Sequence[Sequence[complex]] | None, degrees: Sequence[int] | None) -> MapSpec:
    if k < 1:
        raise ValueError("polyk needs k >= 1")
    if polys is None:
        degs = list(degrees) if degrees is not None else [2] * k
        if len(degs) != k or any(d < 1 for d in degs):
            raise ValueError("polyk degrees must be k positive integers")
        polys = [[0.0] * d + [1.0] for d in degs]
    if len(polys) != k:
        raise ValueError(f"polyk needs {k} coordinate polynomials")
    cs = []
    for p in polys:
        c = np.asarray(p, dtype=complex)
        while c.size > 1 and c[-1] == 0:
            c = c[:-1]
        if c.size < 2:
            raise ValueError("each polyk coordinate must have degree >= 1")
        cs.append(c)
    dcs = [c[1:] * np.arange(1, c.size) for c in cs]
    pv = np.polynomial.polynomial.polyval

    def ev(z):
        z = np.asarray(z, dtype=complex).reshape(-1, k)
        p = np.stack([pv(z[:, i], cs[i]) for i in range(k)], axis=1)
        return np.concatenate([np.ones((z.shape[0], 1), dtype=complex), p], axis=1)

    def jac(z):
        z = np.asarray(z, dtype=complex).reshape(-1, k)
        out = np.zeros((z.shape[0], k + 1, k), dtype=complex)
        for i in range(k):
            out[:, i + 1, i] = pv(z[:, i], dcs[i])
        return out

    def pre(div: DivisorSpec, rho_max: float):
        if not div.is_point and k > 1:
            return None
        b = div.a
        if abs(b[0]) < 1e-14:
            return np.zeros((0, k), dtype=complex)
        tgt = b[1:] / b[0]
        roots = []
        for i in range(k):
            q = cs[i].copy()
            q[0] -= tgt[i]
            roots.append(np.polynomial.polynomial.polyroots(q))
        grid = np.array(np.meshgrid(*roots, indexing="ij")).reshape(k, -1).T
        return grid[np.linalg.norm(grid, axis=1) < rho_max]

    maxdeg = max(c.size - 1 for c in cs)
    params = {"k": k, "polys": [[float(v.real) if v.imag == 0 else complex(v) for v in c] for c in cs]}
    return MapSpec(k, k, ev, jac, "polyk", params, lambda rho: maxdeg * np.ones_like(rho), pre)


def _constant(value: complex) -> MapSpec:
    value = complex(value)

    def ev(z):
        x = _col(z)
        v = np.array([1.0, value])
        return np.tile(v, (x.size, 1)).astype(complex)

    def jac(z):
        return np.zeros((_col(z).size, 2, 1), dtype=complex)

    return MapSpec(1, 1, ev, jac, "constant", {"value": value.real if value.imag == 0 else value},
                   lambda rho: np.ones_like(rho), None)


CATALOG_IDS = ("power", "exp", "expCurve", "poly", "polyk", "diskCover", "dilate", "constant")


def catalog(id: str, params: dict | None = None) -> MapSpec:
    """Build a catalog map.

    Ids and parameters:
        ``power`` (``d``): z -> [1 : z^d].
        ``exp``: z -> [1 : e^z].
        ``expCurve``: z -> [1 : z : e^z] in P^2.
        ``poly`` (``coeffs``, ascending): z -> [1 : p(z)].
        ``polyk`` (``k`` and ``polys`` or ``degrees``): z -> [1 : p_1(z_1) : ... : p_k(z_k)].
        ``diskCover``: z -> [1 : exp((1+z)/(1-z))] on the unit disk.
        ``dilate`` (``s``): z -> [1 : s z]; the families n*z and z/n.
        ``constant`` (``value``): degenerate constant map.
    """
    p = dict(params or {})
    try:
        if id == "power":
            return _power(p.pop("d"))
        if id == "exp":
            return _exp()
        if id == "expCurve":
            return _exp_curve()
        if id == "poly":
            return _poly(p.pop("coeffs"))
        if id == "polyk":
            return _polyk(int(p.pop("k", 2)), p.pop("polys", None), p.pop("degrees", None))
        if id == "diskCover":
            return _disk_cover()
        if id == "dilate":
            return _dilate(p.pop("s"))
        if id == "constant":
            return _constant(p.pop("value", 1.0))
    except KeyError as exc:
        raise ValueError(f"catalog map {id!r} is missing parameter {exc.args[0]!r}") from None
    raise ValueError(f"unknown catalog map {id!r}; known: {', '.join(CATALOG_IDS)}")


def family(id: str, count: int = 5) -> list[MapSpec]:
    """Sequence families ``scale`` (n*z) and ``shrink`` (z/n) for n = 1..count."""
    if id == "scale":
        return [_dilate(n) for n in range(1, count + 1)]
    if id == "shrink":
        return [_dilate(1.0 / n) for n in range(1, count + 1)]
    raise ValueError(f"unknown family {id!r}")


# ---------------------------------------------------------------------------
# exhaustions


@dataclass(frozen=True)
class ExhaustionSpec:
    """Radial psh exhaustion ``tau`` of a domain in C^k.

    The domain is described in polar form: ``||z|| = exp(orientation * u)`` with
    ``u = tau`` away from the inner cut-off, ``u`` ranging over ``(u_min, R)``.

    Attributes:
        kind: Catalog id.
        k: Dimension.
        R: Supremum of tau.
        r0: Base radius; point masses of ``(dd^c tau)^k`` are booked at level r0.
        is_parabolic: ``(dd^c tau)^k`` vanishes off a compact set.
        is_log_type: ``tau = log sigma`` for an exhaustion sigma.
        orientation: +1 when ``||z||`` grows with tau, -1 when it shrinks.
        u_min: Infimum of tau (-inf for a punctured neighborhood of the origin).
    """

    kind: str
    k: int
    R: float
    r0: float
    is_parabolic: bool
    is_log_type: bool
    orientation: int = 1
    u_min: float = -math.inf
    point_mass: float = 1.0

    def radius(self, u: np.ndarray) -> np.ndarray:
        return np.exp(self.orientation * np.asarray(u, dtype=float))

    def level(self, rho: np.ndarray) -> np.ndarray:
        return self.orientation * np.log(np.asarray(rho, dtype=float))

    def tau(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(-1, self.k)
        return self.level(np.linalg.norm(z, axis=1))

    def dtau(self, z: np.ndarray) -> np.ndarray:
        """``d tau / d zbar_p``, shape (n, k)."""
        z = np.asarray(z, dtype=complex).reshape(-1, self.k)
        n2 = np.sum(np.abs(z) ** 2, axis=1)
        return self.orientation * z / (2.0 * n2[:, None])

    def ddctau(self, z: np.ndarray) -> np.ndarray:
        """Coefficient of ``dd^c tau`` off the singular set, shape (n, k, k)."""
        z = np.asarray(z, dtype=complex).reshape(-1, self.k)
        n2 = np.sum(np.abs(z) ** 2, axis=1)
        outer = z[:, :, None] * np.conj(z)[:, None, :]
        eye = np.eye(self.k)[None]
        out = 0.5 * (eye / n2[:, None, None] - outer / (n2**2)[:, None, None])
        if self.k == 1:
            out = np.zeros_like(out)
        return self.orientation * out

    def singular_support(self, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Points and weights carrying the point mass of ``(dd^c tau)^k``.

        The origin for log-type exhaustions of a ball; the circle at level r0
        (uniformly, ``n`` nodes) for the punctured disk.
        """
        if self.kind == "puncturedDisk":
            th = 2 * np.pi * np.arange(n) / n
            pts = (self.radius(self.r0) * np.exp(1j * th)).reshape(-1, 1)
            return pts, np.full(n, self.point_mass / n)
        return np.zeros((1, self.k), dtype=complex), np.array([self.point_mass])

    def contains(self, r: float) -> bool:
        return self.u_min < r < self.R

    def check_schedule(self, schedule: Sequence[float]) -> None:
        s = np.asarray(schedule, dtype=float)
        if s.size == 0 or np.any(np.diff(s) <= 0):
            raise ValueError("schedule must be non-empty and strictly increasing")
        if s[0] <= self.r0 or s[-1] >= self.R:
            raise ValueError(f"schedule must lie in (r0, R) = ({self.r0}, {self.R}) for {self.kind}")


EXHAUSTION_IDS = ("logAbs", "ballLog", "puncturedDisk")


def standard_exhaustion(id: str, k: int = 1, r0: float | None = None) -> ExhaustionSpec:
    """Standard exhaustions.

    ``logAbs``: tau = log||z|| on C^k, R = inf, parabolic.
    ``ballLog``: tau = log||z|| on the unit ball, R = 0; r0 < 0 only fixes where
    the origin's point mass is booked.
    ``puncturedDisk``: tau = log(1/|z|) on the punctured unit disk (k = 1).
    """
    if k < 1:
        raise ValueError("dimension must be >= 1")
    if id == "logAbs":
        return ExhaustionSpec("logAbs", k, math.inf, 0.5 if r0 is None else r0, True, True)
    if id == "ballLog":
        return ExhaustionSpec("ballLog", k, 0.0, -3.0 if r0 is None else r0, False, True)
    if id == "puncturedDisk":
        if k != 1:
            raise ValueError("puncturedDisk is one-dimensional")
        return ExhaustionSpec("puncturedDisk", 1, math.inf, 0.5 if r0 is None else r0, True, True,
                              orientation=-1, u_min=0.0)
    raise ValueError(f"unknown exhaustion {id!r}; known: {', '.join(EXHAUSTION_IDS)}")


# ---------------------------------------------------------------------------
# certification by sampling


def domain_probes(exh: ExhaustionSpec, n: int, rng: np.random.Generator, rho_max: float = 3.0) -> np.ndarray:
    """Random probe points in the domain (uniform direction, radius spread in log scale)."""
    g = rng.standard_normal((n, exh.k)) + 1j * rng.standard_normal((n, exh.k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    if exh.kind == "logAbs":
        rho = np.exp(rng.uniform(-2.0, math.log(rho_max), n))
    elif exh.kind == "ballLog":
        rho = rng.uniform(0.02, 0.98, n)
    else:
        rho = rng.uniform(0.02, 0.98, n)
    return g * rho[:, None]


def projected(F: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Jacobian of the normalized representative, projected off the fiber."""
    nrm = np.linalg.norm(F, axis=-1)
    fh = F / nrm[..., None]
    jn = J / nrm[..., None, None]
    along = np.einsum("...i,...ik->...k", np.conj(fh), jn)
    return jn - fh[..., :, None] * along[..., None, :]


def check_jacobian(mp: MapSpec, exh: ExhaustionSpec, n_probes: int = 100, rtol: float = 1e-6,
                   seed: int = 11) -> float:
    """Largest relative discrepancy between analytic and finite-difference Jacobians.

    Both are compared after projection off the fiber direction so that the
    positive rescaling of exp-type representatives drops out.

    Raises:
        ValueError: if the discrepancy exceeds ``rtol`` or ``eval`` vanishes.
    """
    rng = np.random.default_rng(seed)
    z = domain_probes(exh, n_probes, rng)
    F, J = mp.eval(z), mp.jac(z)
    if np.any(np.linalg.norm(F, axis=1) == 0):
        raise ValueError(f"{mp.label}: representative vanishes at a probe")
    pa = projected(F, J)
    worst = 0.0
    for c in range(mp.k):
        e = np.zeros(mp.k)
        e[c] = 1.0
        h = 1e-5 * (1.0 + np.linalg.norm(z, axis=1))[:, None]
        fp, fm = mp.eval(z + h * e), mp.eval(z - h * e)
        # compare directions in the fiber-normalized frame
        nrm = np.linalg.norm(F, axis=1)[:, None]
        fd = (fp / nrm - fm / nrm) / (2 * h)
        fh = F / nrm
        fd_proj = fd - fh * np.sum(np.conj(fh) * fd, axis=1, keepdims=True)
        scale = np.maximum(np.linalg.norm(pa[:, :, c], axis=1), 1e-3 * np.max(np.linalg.norm(pa, axis=1)))
        err = np.linalg.norm(fd_proj - pa[:, :, c], axis=1) / scale
        worst = max(worst, float(err.max()))
    if worst > rtol:
        raise ValueError(f"{mp.label}: Jacobian mismatch {worst:.2e} > {rtol:.0e}")
    return worst


def rank_fraction(mp: MapSpec, exh: ExhaustionSpec, n_probes: int = 1000, seed: int = 12) -> float:
    """Fraction of random probes where the projected Jacobian has rank k."""
    rng = np.random.default_rng(seed)
    z = domain_probes(exh, n_probes, rng)
    pa = projected(mp.eval(z), mp.jac(z))
    sv = np.linalg.svd(pa, compute_uv=False)
    ok = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1e-300)
    ok &= sv[:, 0] > 0
    return float(np.mean(ok))
