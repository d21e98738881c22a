"""Scenario configuration: TOML files of ``key = value`` pairs in nested sections.

Grammar (all sections optional unless an analysis needs them)::

    seed = 0                       # root seed (64-bit unsigned)
    output = "out/run"             # artifact directory (relative to the config file)
    analyses = ["characteristics", "massRatios"]
    degrees = [0, 1]               # degrees j
    weight_kind = "ddc"            # "ddc" or "d"

    [map]                          # a single catalog map ...
    id = "power"
    params = { d = 2 }
    # ... or a family:  family = "scale", count = 5

    [exhaustion]
    id = "logAbs"                  # logAbs | ballLog | puncturedDisk
    k = 1
    # r0 = 0.5

    [schedule]
    min = 1.0
    max = 6.0
    count = 11
    spacing = "tau"                # "tau": min/max are tau-levels, linear in tau;
                                   # "logSigma": min/max are sigma values, linear in log sigma

    [quad]
    strategy = "radialGrid"        # or "monteCarlo"
    budget = 65536
    shells = 64

    [divisors]                     # explicit values on P^1 ("inf" for infinity),
    values = [0.0, 1.5, "inf"]     # hyperplane vectors (numbers or "a+bj" strings),
    # vectors = [[1, 0, -1]]       # or a sampler
    # sampler = "fibonacci"        # "fibonacci" (P^1) or "fs" (random, FS-uniform)
    # count = 50
    # seed = 3

    [conditions]
    ids = ["simpledMR", "alphaMR"]
    j = 1

    [brody]
    c = 1.5

    [currents]
    radii = [3.0, 4.0, 5.0]        # defaults to the last three scheduled radii
    write = true

    [density_points]
    points = [[0.5, 0.0]]          # chart coordinates w = Z_1/Z_0 as (re, im) pairs
    ball = 0.3

    [ddc_bounds]
    forms = 12
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..forms import fs_sample
from ..maps import CATALOG_IDS, EXHAUSTION_IDS, DivisorSpec, catalog, family, standard_exhaustion
from ..nevanlinna.conditions import CONDITION_IDS, MIN_RADII
from ..quad import QuadPlan

ANALYSES = ("characteristics", "massRatios", "conditions", "currents", "ddcBounds", "defects", "fmt", "brody",
            "growth", "densityPoints", "intersection")
FAMILY_IDS = ("scale", "shrink")
SPACINGS = ("tau", "logSigma")
TOP_KEYS = {"seed", "output", "analyses", "degrees", "weight_kind", "map", "exhaustion", "schedule", "quad",
            "divisors", "conditions", "brody", "currents", "density_points", "ddc_bounds"}


class ConfigError(ValueError):
    """The configuration does not validate; ``diagnostics`` lists every problem."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def load_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _num(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _complex(x: Any) -> complex:
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    if _num(x):
        return complex(x)
    raise ValueError(f"not a number: {x!r}")


def schedule_from(sec: dict) -> np.ndarray:
    lo, hi, n = float(sec["min"]), float(sec["max"]), int(sec["count"])
    if sec.get("spacing", "tau") == "logSigma":
        return np.linspace(math.log(lo), math.log(hi), n)
    return np.linspace(lo, hi, n)


def validate(raw: dict) -> list[str]:
    """Diagnostics ``"<field>: <problem>"`` for a parsed config; empty when valid."""
    d: list[str] = []
    for key in raw:
        if key not in TOP_KEYS:
            d.append(f"{key}: unknown key")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        d.append("seed: must be an integer in [0, 2^64)")
    analyses = raw.get("analyses", ["characteristics"])
    if not isinstance(analyses, list) or not analyses:
        d.append("analyses: must be a non-empty list")
        analyses = []
    for a in analyses:
        if a not in ANALYSES:
            d.append(f"analyses: unknown analysis {a!r}; known: {', '.join(ANALYSES)}")
    wk = raw.get("weight_kind", "ddc")
    if wk not in ("ddc", "d"):
        d.append("weight_kind: must be 'ddc' or 'd'")

    # exhaustion
    ex = raw.get("exhaustion", {})
    exh = None
    k = ex.get("k", 1)
    if ex.get("id", "logAbs") not in EXHAUSTION_IDS:
        d.append(f"exhaustion.id: unknown exhaustion {ex.get('id')!r}; known: {', '.join(EXHAUSTION_IDS)}")
    elif not isinstance(k, int) or k < 1:
        d.append("exhaustion.k: must be a positive integer")
    elif "r0" in ex and not _num(ex["r0"]):
        d.append("exhaustion.r0: must be a number")
    else:
        try:
            exh = standard_exhaustion(ex.get("id", "logAbs"), k, ex.get("r0"))
        except ValueError as exc:
            d.append(f"exhaustion: {exc}")

    # map or family
    mp = raw.get("map")
    maps = None
    if not isinstance(mp, dict):
        d.append("map: section is required")
    elif "family" in mp:
        if mp["family"] not in FAMILY_IDS:
            d.append(f"map.family: unknown family {mp['family']!r}; known: {', '.join(FAMILY_IDS)}")
        elif not isinstance(mp.get("count", 5), int) or mp.get("count", 5) < 3:
            d.append("map.count: a family needs at least 3 maps")
        else:
            maps = family(mp["family"], mp.get("count", 5))
        other = [a for a in analyses if a not in ("brody",)]
        if other:
            d.append(f"map.family: families only support the 'brody' analysis, not {', '.join(other)}")
    elif mp.get("id") not in CATALOG_IDS:
        d.append(f"map.id: unknown map {mp.get('id')!r}; known: {', '.join(CATALOG_IDS)}")
    else:
        try:
            maps = [catalog(mp["id"], mp.get("params", {}))]
        except (ValueError, TypeError) as exc:
            d.append(f"map.params: {exc}")
    if maps is not None and exh is not None and maps[0].k != exh.k:
        d.append(f"exhaustion.k: map has domain dimension {maps[0].k}, exhaustion k = {exh.k}")
    m = maps[0].m if maps else None

    # degrees
    degrees = raw.get("degrees", [0, 1])
    if not isinstance(degrees, list) or not degrees or not all(isinstance(j, int) for j in degrees):
        d.append("degrees: must be a non-empty list of integers")
    else:
        for j in degrees:
            if exh is not None and not 0 <= j <= exh.k:
                d.append(f"degrees: j = {j} outside 0..k = {exh.k}")

    # schedule
    sc = raw.get("schedule")
    radii = None
    if not isinstance(sc, dict):
        d.append("schedule: section is required")
    else:
        bad = [f for f in ("min", "max") if not _num(sc.get(f))]
        for f in bad:
            d.append(f"schedule.{f}: must be a number")
        if not isinstance(sc.get("count"), int) or sc.get("count", 0) < 2:
            d.append("schedule.count: must be an integer >= 2")
            bad.append("count")
        if sc.get("spacing", "tau") not in SPACINGS:
            d.append(f"schedule.spacing: must be one of {', '.join(SPACINGS)}")
            bad.append("spacing")
        if not bad:
            if sc.get("spacing") == "logSigma" and (sc["min"] <= 0 or sc["max"] <= 0):
                d.append("schedule.min: sigma values must be positive for logSigma spacing")
            elif not sc["min"] < sc["max"]:
                d.append("schedule.max: must exceed schedule.min")
            else:
                radii = schedule_from(sc)
                if exh is not None:
                    if radii[-1] >= exh.R:
                        d.append(f"schedule.max: level {radii[-1]:.6g} is not below R = {exh.R} for {exh.kind}")
                    if radii[0] <= exh.r0:
                        d.append(f"schedule.min: level {radii[0]:.6g} is not above r0 = {exh.r0} for {exh.kind}")

    # quad
    q = raw.get("quad", {})
    try:
        QuadPlan(**{kk: q[kk] for kk in q})
    except (TypeError, ValueError) as exc:
        d.append(f"quad: {exc}")

    # divisors
    dv = raw.get("divisors")
    needs_div = [a for a in analyses if a in ("defects", "fmt", "intersection")]
    if needs_div and not dv:
        d.append(f"divisors: required by {', '.join(needs_div)}")
    if dv:
        try:
            divs = divisors_from(dv, m if m is not None else 1)
            if not divs:
                d.append("divisors: empty divisor set")
        except (ValueError, TypeError, KeyError) as exc:
            d.append(f"divisors: {exc}")

    one_dim = [a for a in analyses if a in ("defects", "fmt")]
    if one_dim and exh is not None and (exh.k != 1 or exh.kind != "logAbs"):
        d.append(f"exhaustion: {', '.join(one_dim)} need k = 1 and logAbs")

    if "massRatios" in analyses or "conditions" in analyses:
        if isinstance(degrees, list) and not any(isinstance(j, int) and j >= 1 for j in degrees):
            d.append("degrees: mass ratios need some j >= 1")
    if "conditions" in analyses:
        c = raw.get("conditions", {})
        ids = c.get("ids", [cid for cid in CONDITION_IDS if cid != "scaleCond"])
        for cid in ids:
            if cid not in CONDITION_IDS:
                d.append(f"conditions.ids: unknown condition {cid!r}")
            elif cid == "scaleCond":
                d.append("conditions.ids: scaleCond is evaluated by the brody analysis")
        cj = c.get("j", 1)
        if exh is not None and (not isinstance(cj, int) or not 1 <= cj <= exh.k):
            d.append(f"conditions.j: must be in 1..{exh.k}")
        if sc and isinstance(sc.get("count"), int) and sc["count"] < MIN_RADII:
            d.append(f"schedule.count: conditions need at least {MIN_RADII} radii")
    if "growth" in analyses and sc and isinstance(sc.get("count"), int) and sc["count"] < 8:
        d.append("schedule.count: growth classification needs at least 8 radii")
    if "brody" in analyses:
        b = raw.get("brody", {})
        if not _num(b.get("c")) or not b.get("c") > 1:
            d.append("brody.c: scale constant must be a number > 1")
        elif exh is not None and radii is not None and radii[-1] >= exh.R - exh.k * math.log(b["c"]):
            d.append(f"schedule.max: exceeds the level of R/c^k = {exh.R - exh.k * math.log(b['c']):.6g}")
        if maps is not None and len(maps) < 3:
            d.append("map.family: brody needs a family of at least 3 maps")
        if sc and isinstance(sc.get("count"), int) and sc["count"] < 5:
            d.append("schedule.count: brody needs at least 5 radii")
    if "currents" in analyses:
        cr = raw.get("currents", {}).get("radii")
        if cr is not None:
            if not isinstance(cr, list) or len(cr) < 3 or not all(_num(r) for r in cr):
                d.append("currents.radii: need a list of at least 3 numbers")
            elif exh is not None and not all(exh.r0 < r < exh.R for r in cr):
                d.append(f"currents.radii: radii must lie in (r0, R) = ({exh.r0}, {exh.R})")
        elif sc and isinstance(sc.get("count"), int) and sc["count"] < 3:
            d.append("schedule.count: currents need at least 3 radii")
    if "densityPoints" in analyses:
        dp = raw.get("density_points")
        if not isinstance(dp, dict) or not dp.get("points"):
            d.append("density_points: points are required by densityPoints")
        elif not _num(dp.get("ball", 0.3)) or not dp.get("ball", 0.3) > 0:
            d.append("density_points.ball: must be positive")
        elif m is not None and any(len(p) != 2 * m for p in dp["points"]):
            d.append(f"density_points.points: each point needs {2 * m} numbers (re, im per chart coordinate)")
    if "ddcBounds" in analyses:
        nf = raw.get("ddc_bounds", {}).get("forms", 12)
        if not isinstance(nf, int) or nf < 1:
            d.append("ddc_bounds.forms: must be a positive integer")
        if isinstance(degrees, list) and not any(isinstance(j, int) and j >= 1 for j in degrees):
            d.append("degrees: ddcBounds need some j >= 1")
    return d


def divisors_from(sec: dict, m: int) -> list[DivisorSpec]:
    """Divisors from explicit values, vectors, or a seeded sampler."""
    out: list[DivisorSpec] = []
    for v in sec.get("values", []):
        if m != 1:
            raise ValueError("target values are only defined on P^1; use vectors")
        out.append(DivisorSpec.value(None if v == "inf" else _complex(v)))
    for vec in sec.get("vectors", []):
        a = np.array([_complex(x) for x in vec])
        if a.size != m + 1:
            raise ValueError(f"divisor vector of length {a.size}, expected {m + 1}")
        out.append(DivisorSpec(a))
    if "sampler" in sec:
        n = int(sec.get("count", 10))
        if n < 1:
            raise ValueError("sampler count must be positive")
        if sec["sampler"] == "fibonacci":
            from ..nevanlinna.defects import fibonacci_values

            if m != 1:
                raise ValueError("the fibonacci sampler lives on P^1")
            out += [DivisorSpec.value(w) for w in fibonacci_values(n)]
        elif sec["sampler"] == "fs":
            rng = np.random.default_rng(np.random.SeedSequence(int(sec.get("seed", 0))))
            out += [DivisorSpec(a) for a in fs_sample(m, n, rng)]
        else:
            raise ValueError(f"unknown sampler {sec['sampler']!r}; known: fibonacci, fs")
    return out


@dataclass
class ScenarioConfig:
    """Validated scenario with resolved objects."""

    raw: dict
    base_dir: Path
    seed: int
    analyses: list
    degrees: list
    weight_kind: str
    maps: list
    exh: Any
    radii: np.ndarray
    plan: QuadPlan
    divisors: list = field(default_factory=list)

    @property
    def output(self) -> Path:
        return self.base_dir / self.raw.get("output", "out")

    @property
    def is_family(self) -> bool:
        return "family" in self.raw["map"]


def parse(raw: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    """Validate and resolve a parsed config.

    Raises:
        ConfigError: with the full diagnostics list.
    """
    diags = validate(raw)
    if diags:
        raise ConfigError(diags)
    mp = raw["map"]
    maps = family(mp["family"], mp.get("count", 5)) if "family" in mp else [catalog(mp["id"], mp.get("params", {}))]
    ex = raw.get("exhaustion", {})
    exh = standard_exhaustion(ex.get("id", "logAbs"), ex.get("k", 1), ex.get("r0"))
    divs = divisors_from(raw["divisors"], maps[0].m) if raw.get("divisors") else []
    return ScenarioConfig(raw, Path(base_dir), int(raw.get("seed", 0)), list(raw.get("analyses", ["characteristics"])),
                          sorted(set(raw.get("degrees", [0, 1]))), raw.get("weight_kind", "ddc"), maps, exh,
                          schedule_from(raw["schedule"]), QuadPlan(**raw.get("quad", {})), divs)


def load(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    return parse(load_toml(p), p.parent)
