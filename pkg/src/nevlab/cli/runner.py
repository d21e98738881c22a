"""Scenario runner: analyses -> CSV tables, JSON report, current files and plot data.

Seeds: every analysis ``a`` and radius index ``i`` draws its quadrature seed
from ``SeedSequence(root, spawn_key=(crc32(a), i))``, so a partial rerun of
one analysis reproduces its numbers exactly. Analyses run on a thread pool of
``NEVLAB_THREADS`` workers; results are collected in a fixed order and every
reduction is order-independent, so outputs do not depend on the thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..currents import (brody_detector, build_current, cluster_analysis, ddc_bound_study, density_point_ratio,
                        intersection_positivity, moments)
from ..forms import DICTIONARY_VERSION, ChartPoint, dictionary_forms
from ..nevanlinna import (DiscreteMeasure, characteristic, check_condition, defect_report, defect_suite,
                          fmt_residual, growth_classify)
from ..quad import thread_count
from .config import ScenarioConfig

FORMAT_VERSION = "1"


class NumericalFailure(RuntimeError):
    """A numerical stage failed or produced NaN in a table."""


def derive_seed(root: int, label: str, index: int = 0) -> int:
    """64-bit seed for ``(analysis label, radius index)`` split from the root seed."""
    ss = np.random.SeedSequence(root, spawn_key=(zlib.crc32(label.encode()), index))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _clean(obj: Any, path: str, undefined: list[str]) -> Any:
    """JSON-safe copy: numpy scalars to Python, NaN to null (recorded), inf to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v, f"{path}.{k}", undefined) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, f"{path}[{i}]", undefined) for i, v in enumerate(obj)]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist(), path, undefined)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            undefined.append(path)
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj: Any) -> tuple[str, list[str]]:
    undefined: list[str] = []
    clean = _clean(obj, "$", undefined)
    return json.dumps(clean, sort_keys=True, indent=1, allow_nan=False) + "\n", undefined


@dataclass
class Artifacts:
    """Files written so far (relative paths), for the MANIFEST."""

    root: Path
    written: list = field(default_factory=list)

    def write_text(self, rel: str, text: str) -> None:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        self.written.append(rel)

    def write_csv(self, rel: str, header: list[str], rows: list[list[float]]) -> None:
        bad = [h for i, h in enumerate(header) if any(isinstance(r[i], float) and math.isnan(r[i]) for r in rows)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
        self.write_text(rel, buf.getvalue())
        if bad:
            raise NumericalFailure(f"NaN in {rel} column(s) {', '.join(bad)}")

    def plot(self, name: str, x, y) -> None:
        self.write_csv(f"plotdata/{name}.csv", ["x", "y"], [[float(a), float(b)] for a, b in zip(x, y)])

    def manifest(self, status: str, error: str = "") -> None:
        lines = [f"status: {status}"]
        if error:
            lines.append(f"error: {error}")
        lines += ["files:"] + [f"  {f}" for f in sorted(set(self.written))]
        (self.root / "MANIFEST").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# analyses; each returns (report section, deferred writers)


def _plan(cfg: ScenarioConfig, label: str):
    return cfg.plan.with_(seed=derive_seed(cfg.seed, label))


def _series(cfg: ScenarioConfig, kind: str, j: int):
    return characteristic(cfg.maps[0], cfg.exh, j, cfg.radii, kind, _plan(cfg, f"characteristic/{kind}/{j}"))


class Cache:
    """Characteristic series shared between analyses, computed once."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.store: dict = {}

    def get(self, kind: str, j: int):
        key = (kind, j)
        if key not in self.store:
            self.store[key] = _series(self.cfg, kind, j)
        return self.store[key]

    def warm(self, keys) -> None:
        keys = [k for k in dict.fromkeys(keys) if k not in self.store]
        with ThreadPoolExecutor(max_workers=thread_count()) as ex:
            for key, s in zip(keys, ex.map(lambda k: _series(self.cfg, *k), keys)):
                self.store[key] = s


def run_characteristics(cfg, cache, art):
    wk = cfg.weight_kind
    header, cols, sec = ["r"], [cfg.radii], {}
    for j in cfg.degrees:
        s = cache.get(wk, j)
        header += [f"t{j}", f"t{j}_err", f"T{j}", f"T{j}_err"]
        cols += [s.t, s.t_err, s.T, s.T_err]
        sec[f"j{j}"] = {"t_last": s.t[-1], "T_last": s.T[-1], "invariant_violations": s.check_invariants()}
        art.plot(f"t{j}", s.radii, s.t)
        art.plot(f"T{j}", s.radii, s.T)
    rows = [[float(c[i]) for c in cols] for i in range(cfg.radii.size)]
    art.write_csv("characteristics.csv", header, rows)
    return {"weight_kind": wk, **sec}


def run_mass_ratios(cfg, cache, art):
    header, cols, sec = ["r"], [cfg.radii], {}
    for j in [j for j in cfg.degrees if j >= 1]:
        a, b = cache.get("ddc", j), cache.get("ddc", j - 1)
        c, d = cache.get("d", j), cache.get("d", j - 1)
        J = b.t / a.T
        I = d.t / c.T
        header += [f"J{j}", f"I{j}"]
        cols += [J, I]
        sec[f"j{j}"] = {"J_last": J[-1], "I_last": I[-1], "J_decreasing": bool(np.all(np.diff(J) < 0))}
        art.plot(f"J{j}", cfg.radii, J)
        art.plot(f"I{j}", cfg.radii, I)
    art.write_csv("ratios.csv", header, [[float(c[i]) for c in cols] for i in range(cfg.radii.size)])
    return sec


def run_conditions(cfg, cache, art):
    from ..nevanlinna import CONDITION_IDS

    c = cfg.raw.get("conditions", {})
    j = int(c.get("j", 1))
    ids = c.get("ids", [cid for cid in CONDITION_IDS if cid != "scaleCond"])
    bundle = {(kind, jj): cache.get(kind, jj) for kind in ("d", "ddc") for jj in (j - 1, j)}
    R = cfg.exh.R
    out = []
    for cid in ids:
        res = check_condition(cid, bundle, {"j": j, "R": R})
        out.append(res.to_json())
    text, _ = dumps(out)
    art.write_text("conditions.json", text)
    return {cid: r["holds"] for cid, r in zip(ids, out)}


def run_growth(cfg, cache, art):
    k = cfg.exh.k
    s = cache.get("ddc", k)
    prev = cache.get("ddc", k - 1)
    out = {}
    for mode in ("finite", "log"):
        try:
            g = growth_classify(s, mode, prev)
            out[mode] = {"order": g.order, "intercept": g.intercept, "residual": g.residual,
                         "ratio_diverges": g.ratio_diverges, "beta": g.beta}
        except ValueError as exc:
            out[mode] = {"refused": str(exc)}
    return out


def run_currents(cfg, cache, art):
    cr = cfg.raw.get("currents", {})
    radii = [float(r) for r in cr.get("radii", cfg.radii[-3:])]
    write = bool(cr.get("write", True))
    j = max(cfg.degrees)
    mp = cfg.maps[0]

    def build(i_r):
        i, r = i_r
        return build_current(mp, cfg.exh, j, r, "ddc", cfg.plan.with_(seed=derive_seed(cfg.seed, "currents", i)))

    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        cur = list(ex.map(build, enumerate(radii)))
    rep = cluster_analysis(cur)
    if write:
        for i, c in enumerate(cur):
            c.provenance["seed"] = derive_seed(cfg.seed, "currents", i)
            rel = f"currents/S_j{j}_r{i}.txt"
            (art.root / "currents").mkdir(parents=True, exist_ok=True)
            c.to_text(art.root / rel)
            art.written.append(rel)
    art.plot("cluster_successive", rep.radii[1:], rep.successive)
    sec = {"j": j, "radii": rep.radii, "c_r": [c.c_r for c in cur], "successive": rep.successive,
           "converging": rep.converging, "limit_moments": rep.limit.values, "dictionaryVersion": DICTIONARY_VERSION}
    if rep.fs_distance is not None:
        sec["fs_distance"] = rep.fs_distance
        sec["fs_decreasing"] = rep.fs_decreasing
        art.plot("cluster_fs_distance", rep.radii, rep.fs_distance)
    return sec


def run_ddc_bounds(cfg, cache, art):
    n = int(cfg.raw.get("ddc_bounds", {}).get("forms", 12))
    mp = cfg.maps[0]
    out = {}
    for j in [j for j in cfg.degrees if j >= 1]:
        forms = dictionary_forms(mp.m, j - 1, n)
        bs = ddc_bound_study(mp, cfg.exh, j, forms, cfg.radii, _plan(cfg, f"ddcBounds/{j}"))
        worst = np.max(bs.ratio, axis=0)
        art.plot(f"ddc_bound_ratio_j{j}", bs.radii, worst)
        out[f"j{j}"] = {"C_train": bs.C_train, "C_test": bs.C_test, "stable": bs.stable, "max_ratio": worst}
    return out


def run_defects(cfg, cache, art):
    mp = cfg.maps[0]
    nu = DiscreteMeasure.uniform(cfg.divisors)
    res = defect_suite(mp, cfg.exh, nu, cfg.radii, _plan(cfg, "defects"))
    eps = sorted(res.tails)
    header = ["r", "avg_defect", "mean_abs_defect", "bound"] + [f"tail_{e:g}" for e in eps]
    rows = [[float(cfg.radii[i]), float(res.avg_defect[i]), float(res.mean_abs_defect[i]), float(res.bound()[i])]
            + [float(res.tails[e][i]) for e in eps] for i in range(cfg.radii.size)]
    art.write_csv("defects.csv", header, rows)
    art.plot("avg_defect", cfg.radii, res.avg_defect)
    art.plot("defect_bound", cfg.radii, res.bound())
    return {"C_train": res.C_train, "C_test": res.C_test, "stable": res.stable, "potential_sup": res.sup.sup,
            "capacity_lower_bound": res.sup.capacity_lower_bound,
            "bound_holds": bool(np.all(res.avg_defect <= res.bound() * (1 + 1e-12))),
            "delta_last": [float(r.delta[-1]) for r in res.reports]}


def run_fmt(cfg, cache, art):
    mp = cfg.maps[0]
    T1 = cache.get("ddc", 1)
    out = []
    for i, d in enumerate(cfg.divisors):
        rep = defect_report(mp, cfg.exh, d, T1, _plan(cfg, f"fmt/{i}"))
        res = fmt_residual(rep)
        out.append({"divisor": [[z.real, z.imag] for z in d.a], "residual": res, "fmt_constant": rep.fmt_constant,
                    "residual_std": float(np.std(res)), "delta": rep.delta})
    return {"divisors": out,
            "max_residual_std_rel": max(o["residual_std"] for o in out) / float(T1.T[-1])}


def run_brody(cfg, cache, art):
    c = float(cfg.raw["brody"]["c"])
    res = brody_detector(cfg.maps, cfg.exh, c, cfg.radii, _plan(cfg, "brody"))
    sec = {"verdict": res.verdict, "j": res.j, "witness": list(res.witness) if res.witness else None,
           "volume_bound": {str(k): v for k, v in res.volume_bound.items()}, "bound": res.bound,
           "degenerate": res.degenerate, "scale_condition": {str(k): v for k, v in res.scale_condition.items()}}
    for j, sr in res.ratios.items():
        art.plot(f"scaled_ratio_min_j{j}", cfg.radii, np.nanmin(sr.ratio, axis=0))
    return sec


def run_density_points(cfg, cache, art):
    dp = cfg.raw["density_points"]
    ball = float(dp.get("ball", 0.3))
    mp = cfg.maps[0]
    out = []
    for i, p in enumerate(dp["points"]):
        w = tuple(complex(p[2 * q], p[2 * q + 1]) for q in range(mp.m))
        rep = density_point_ratio(mp, cfg.exh, ChartPoint(0, w), ball, cfg.radii,
                                  plan=cfg.plan.with_(seed=derive_seed(cfg.seed, "densityPoints", i)))
        art.plot(f"density_ratio_{i}", rep.radii, rep.ratio)
        out.append({"point": p, "kappa": rep.kappa, "ratio": rep.ratio})
    return {"ball": ball, "points": out}


def run_intersection(cfg, cache, art):
    mp = cfg.maps[0]
    out = []
    for i, d in enumerate(cfg.divisors):
        ic = intersection_positivity(mp, cfg.exh, d, cfg.radii, _plan(cfg, f"intersection/{i}"))
        art.plot(f"intersection_{i}", ic.radii, ic.curve())
        out.append({"divisor": [[z.real, z.imag] for z in d.a], "positive": ic.positive, "curve": ic.curve(),
                    "counting": ic.counting if np.all(np.isfinite(ic.counting)) else None})
    return {"all_positive": all(o["positive"] for o in out), "divisors": out}


RUNNERS: dict[str, Callable] = {
    "characteristics": run_characteristics, "massRatios": run_mass_ratios, "conditions": run_conditions,
    "growth": run_growth, "currents": run_currents, "ddcBounds": run_ddc_bounds, "defects": run_defects,
    "fmt": run_fmt, "brody": run_brody, "densityPoints": run_density_points, "intersection": run_intersection,
}


def _needed_series(cfg: ScenarioConfig) -> list:
    keys = []
    a = set(cfg.analyses)
    if "characteristics" in a:
        keys += [(cfg.weight_kind, j) for j in cfg.degrees]
    if "massRatios" in a:
        keys += [(kind, jj) for j in cfg.degrees if j >= 1 for kind in ("ddc", "d") for jj in (j - 1, j)]
    if "conditions" in a:
        j = int(cfg.raw.get("conditions", {}).get("j", 1))
        keys += [(kind, jj) for kind in ("d", "ddc") for jj in (j - 1, j)]
    if "growth" in a:
        keys += [("ddc", cfg.exh.k), ("ddc", cfg.exh.k - 1)]
    if "fmt" in a:
        keys += [("ddc", 1)]
    return keys


def run(cfg: ScenarioConfig) -> int:
    """Run all analyses; returns the exit status (0 ok, 2 numerical failure)."""
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    art = Artifacts(out)
    config = {k: v for k, v in cfg.raw.items() if k != "output"}
    report: dict = {"format": FORMAT_VERSION, "seed": cfg.seed, "config": config, "radii": cfg.radii,
                    "map": [m.label for m in cfg.maps], "exhaustion": cfg.exh.kind, "k": cfg.exh.k,
                    "dictionaryVersion": DICTIONARY_VERSION, "analyses": {}}
    status, error = "complete", ""
    try:
        cache = Cache(cfg)
        if not cfg.is_family:
            cache.warm(_needed_series(cfg))
        order = [a for a in RUNNERS if a in cfg.analyses]
        with ThreadPoolExecutor(max_workers=thread_count()) as ex:
            futs = [ex.submit(RUNNERS[a], cfg, cache, art) for a in order]
            failures = []
            for a, f in zip(order, futs):
                try:
                    report["analyses"][a] = f.result()
                except Exception as exc:  # numerical stages report and continue
                    failures.append(f"{a}: {type(exc).__name__}: {exc}")
        if failures:
            raise NumericalFailure("; ".join(failures))
    except NumericalFailure as exc:
        status, error = "incomplete", str(exc)
    report["status"] = status
    if error:
        report["error"] = error
    text, undefined = dumps(report)
    if undefined:
        report["undefinedValues"] = undefined
        text, _ = dumps(report)
    art.write_text("report.json", text)
    art.manifest(status, error)
    return 0 if status == "complete" else 2
