"""Discretized Ahlfors currents as weighted sample clouds on P^m."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..forms import (DICTIONARY_VERSION, ChartPoint, TestForm, dictionary, eval_dict_function, fs_distance,
                     fs_moments)
from ..maps import ExhaustionSpec, MapSpec
from ..nevanlinna.characteristic import DegenerateMapError, degree_density, point_mass
from ..quad import QuadPlan, SampleCloud, region_cloud, tree_sum

FORMAT_HEADER = "# nevlab-current v1"
WEIGHT_KINDS = ("ddc", "d")


def weight_profile(kind: str, exh: ExhaustionSpec, r: float):
    """Truncation weight ``u_r`` as a function of tau.

    ``ddc``: ``log+(r / sigma) = (r - tau)+``. ``d``: ``(1 - max(tau, r0) / r)+``,
    which is ``(1 - tau/r)+`` on ``tau >= r0`` (needs ``r > 0``).
    """
    if kind == "ddc":
        return lambda tau: np.maximum(r - tau, 0.0)
    if kind == "d":
        if not r > 0:
            raise ValueError("the d-case weight (1 - tau/r)+ needs r > 0")
        return lambda tau: np.maximum(1.0 - np.maximum(tau, exh.r0) / r, 0.0)
    raise ValueError(f"weight kind must be one of {WEIGHT_KINDS}")


@dataclass
class DiscreteCurrent:
    """``S_r`` pushed to P^m: weighted points ``y_i = phi(x_i)``.

    ``w_i = u_r(x_i) * density_j(x_i) * cell_i`` with the quadrature cloud kept
    so that pairings carry the cloud's error estimate. ``c_r`` is the tree-summed
    total weight, the pairing with ``omega^j``.
    """

    j: int
    r: float
    weight_kind: str
    y: np.ndarray
    w: np.ndarray
    x: np.ndarray
    c_r: float
    c_err: float
    provenance: dict = field(default_factory=dict)
    cloud: SampleCloud | None = None
    base: np.ndarray | None = None
    extra_y: np.ndarray | None = None
    extra_w: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.y.shape[1] - 1

    def _sum_values(self, fvals: np.ndarray, fextra: np.ndarray | None) -> tuple[float, float]:
        if self.cloud is not None:
            res = self.cloud.estimate(self.base * fvals)
            val, err = res.value, res.stderr
        else:
            val, err = float(tree_sum([np.sum(self.w * fvals)])), 0.0
        if fextra is not None and self.extra_w is not None:
            val += float(np.sum(self.extra_w * fextra))
        return val, err

    def pair_function(self, f, normalized: bool = False) -> tuple[float, float]:
        """``<S_r, f omega^j>`` for a function ``f`` of homogeneous coordinates."""
        fv = np.asarray(f(self.y), dtype=float)
        fe = None if self.extra_y is None else np.asarray(f(self.extra_y), dtype=float)
        val, err = self._sum_values(fv, fe)
        if normalized:
            return val / self.c_r, err / self.c_r
        return val, err

    def normalized_mass(self) -> float:
        return self.pair_function(lambda Y: np.ones(Y.shape[0]), normalized=True)[0]

    def restricted_mass(self, p: np.ndarray, radius: float) -> float:
        """Mass of the FS ball of the given radius around ``p``, normalized."""
        return self.pair_function(lambda Y: (fs_distance(Y, p) < radius).astype(float), normalized=True)[0]

    # -- serialization -----------------------------------------------------

    def header(self) -> dict:
        return {"j": self.j, "r": self.r, "weightKind": self.weight_kind, "c_r": self.c_r, "c_err": self.c_err,
                "m": self.m, "provenance": self.provenance, "dictionaryVersion": DICTIONARY_VERSION}

    def to_text(self, path: str | Path) -> None:
        """Columnar text: ``chart  re(w_1) im(w_1) ... re(w_m) im(w_m)  weight``.

        Line 1 is the format tag, line 2 a JSON header after ``# ``. Points
        are written in the chart of their largest homogeneous coordinate;
        floats use 17 significant digits. Point masses follow the cloud rows.
        """
        ys = self.y if self.extra_y is None else np.concatenate([self.y, self.extra_y])
        ws = self.w if self.extra_w is None else np.concatenate([self.w, self.extra_w])
        lines = [FORMAT_HEADER, "# " + json.dumps(self.header(), sort_keys=True)]
        for Y, wt in zip(ys, ws):
            cp = ChartPoint.from_homogeneous(Y)
            cols = [str(cp.chart)]
            for v in cp.w:
                cols += [format(v.real, ".17g"), format(v.imag, ".17g")]
            cols.append(format(float(wt), ".17g"))
            lines.append(" ".join(cols))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_text(cls, path: str | Path) -> "DiscreteCurrent":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != FORMAT_HEADER:
            raise ValueError("not a nevlab current file")
        hdr = json.loads(lines[1][2:])
        m = int(hdr["m"])
        rows = np.array([[float(t) for t in ln.split()] for ln in lines[2:] if ln.strip()]).reshape(-1, 2 * m + 2)
        ys = []
        for row in rows:
            w = row[1:1 + 2 * m:2] + 1j * row[2:2 + 2 * m:2]
            Y = ChartPoint(int(row[0]), tuple(w)).homogeneous()
            ys.append(Y / np.linalg.norm(Y))
        y = np.array(ys).reshape(-1, m + 1)
        return cls(int(hdr["j"]), float(hdr["r"]), hdr["weightKind"], y, rows[:, -1].copy(),
                   np.zeros((y.shape[0], 0)), float(hdr["c_r"]), float(hdr["c_err"]), hdr["provenance"])


def build_current(mp: MapSpec, exh: ExhaustionSpec, j: int, r: float, weight_kind: str = "ddc",
                  plan: QuadPlan | None = None) -> DiscreteCurrent:
    """Sample ``S_{j,r}`` on a quadrature cloud of ``B_r``.

    Raises:
        DegenerateMapError: the total mass vanishes.
    """
    plan = plan or QuadPlan()
    if not exh.u_min < r < exh.R:
        raise ValueError(f"radius {r} outside the domain levels ({exh.u_min}, {exh.R})")
    cloud = region_cloud(exh, r, plan, bandwidth=mp.angular_bandwidth)
    dens = cloud.apply(degree_density(mp, exh, j))
    base = dens * weight_profile(weight_kind, exh, r)(cloud.tau)
    F = mp.evaluate(cloud.z)[0]
    y = F / np.linalg.norm(F, axis=1, keepdims=True)
    w = cloud.weight * base
    res = cloud.estimate(base)
    c_r, c_err = res.value, res.stderr
    extra_y = extra_w = None
    if j == 0:
        _, pT = point_mass(exh, 0, r)
        if weight_kind == "d":
            pT = pT / r
        if pT > 0:
            pts, pw = exh.singular_support(1)
            F0 = mp.evaluate(pts)[0]
            extra_y = F0 / np.linalg.norm(F0, axis=1, keepdims=True)
            extra_w = pw / np.sum(pw) * pT
            c_r += float(np.sum(extra_w))
    if not c_r > 0:
        raise DegenerateMapError(f"current of degree {j} has no mass at r={r}")
    prov = {"map": mp.label, "exhaustion": exh.kind, "k": exh.k, "strategy": plan.strategy,
            "budget": plan.budget, "seed": plan.seed, "shells": plan.shells}
    return DiscreteCurrent(j, float(r), weight_kind, y, w, cloud.z, float(c_r), float(c_err), prov, cloud, base,
                           extra_y, extra_w)


def pair(current: DiscreteCurrent, psi: TestForm, normalized: bool = False) -> tuple[float, float]:
    """``<S_r, psi>`` for ``psi = f omega^j``; returns value and error estimate."""
    if psi.j != current.j:
        raise ValueError(f"test form has degree {psi.j}, current has degree {current.j}")
    if psi.m != current.m:
        raise ValueError(f"test form lives on P^{psi.m}, current on P^{current.m}")
    return current.pair_function(psi.f, normalized)


@dataclass(frozen=True)
class MomentVector:
    """Pairings of a normalized current with the frozen dictionary (entry 0 is 1)."""

    values: np.ndarray
    errors: np.ndarray
    version: str = DICTIONARY_VERSION

    def distance(self, other: "MomentVector | np.ndarray") -> float:
        o = other.values if isinstance(other, MomentVector) else np.asarray(other)
        return float(np.max(np.abs(self.values - o)))


def moments(current: DiscreteCurrent) -> MomentVector:
    entries = dictionary(current.m)
    vals, errs = [], []
    for e in entries:
        v, s = current.pair_function(lambda Y, e=e: eval_dict_function(e, Y), normalized=True)
        vals.append(v)
        errs.append(s)
    vals[0] = 1.0
    return MomentVector(np.array(vals), np.array(errs))


@dataclass
class ClusterReport:
    radii: np.ndarray
    pairwise: np.ndarray
    successive: np.ndarray
    converging: bool
    limit: MomentVector
    fs_distance: np.ndarray | None = None
    fs_decreasing: bool | None = None


def cluster_analysis(currents: Sequence[DiscreteCurrent], compare_fs: bool | None = None) -> ClusterReport:
    """Moment distances along a radius sequence.

    ``converging`` means successive distances decrease. When the current is of
    top degree on P^m with m = k (or ``compare_fs`` is set) the moments are also
    compared with those of the normalized FS volume.
    """
    if len(currents) < 3:
        raise ValueError("cluster analysis needs at least 3 radii")
    order = np.argsort([c.r for c in currents])
    cs = [currents[i] for i in order]
    mv = [moments(c) for c in cs]
    n = len(cs)
    pw = np.array([[mv[a].distance(mv[b]) for b in range(n)] for a in range(n)])
    succ = np.array([pw[i, i + 1] for i in range(n - 1)])
    conv = bool(np.all(np.diff(succ) < 0))
    rep = ClusterReport(np.array([c.r for c in cs]), pw, succ, conv, mv[-1])
    k = cs[0].provenance.get("k")
    if compare_fs is None:
        compare_fs = k == cs[0].m == cs[0].j
    if compare_fs:
        ref = fs_moments(cs[0].m)
        d = np.array([m.distance(ref) for m in mv])
        rep.fs_distance = d
        rep.fs_decreasing = bool(np.all(np.diff(d) < 0))
    return rep


@dataclass
class DensityPointReport:
    radii: np.ndarray
    ratio: np.ndarray
    kappa: float


def density_point_ratio(mp: MapSpec, exh: ExhaustionSpec, p: ChartPoint, delta_ball: float,
                        schedule: Sequence[float], j: int | None = None, weight_kind: str = "ddc",
                        plan: QuadPlan | None = None) -> DensityPointReport:
    """``r -> (S_r restricted to the FS ball B(p, delta)) / c_r`` and its tail minimum.

    The FS distance is ``arccos |<p, q>|`` (diameter ``pi/2``).
    """
    if not delta_ball > 0:
        raise ValueError("ball radius must be positive")
    j = mp.k if j is None else j
    P = p.homogeneous()
    P = P / np.linalg.norm(P)
    radii = np.asarray(schedule, dtype=float)
    plan = plan or QuadPlan()
    ratio = []
    for i, r in enumerate(radii):
        cur = build_current(mp, exh, j, float(r), weight_kind, plan.with_(seed=(plan.seed + i) % 2**64))
        ratio.append(cur.restricted_mass(P, delta_ball))
    ratio = np.array(ratio)
    tail = ratio[ratio.size // 2:]
    return DensityPointReport(radii, ratio, float(np.min(tail)))
