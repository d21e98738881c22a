import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.maps import catalog, standard_exhaustion
from nevlab.nevanlinna.characteristic import (DegenerateMapError, characteristic, d_mass_ratio, d_mass_ratio_direct,
                                              ddc_mass_ratio, ratio_curve)
from nevlab.nevanlinna.growth import growth_classify
from nevlab.quad import QuadPlan

PLAN = QuadPlan(budget=2**15)


def power_t1(d, r):
    x = np.exp(2 * d * np.asarray(r))
    return d * x / (1 + x)


def power_T1(d, r):
    return 0.5 * np.log1p(np.exp(2 * d * np.asarray(r)))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_power_map_characteristics_closed_form(d):
    mp, exh = catalog("power", {"d": d}), standard_exhaustion("logAbs", 1)
    radii = np.array([0.6, 1.0, 2.0])
    s = characteristic(mp, exh, 1, radii, "ddc", PLAN)
    assert np.allclose(s.t, power_t1(d, radii), rtol=1e-8)
    assert np.allclose(s.T, power_T1(d, radii), rtol=1e-8)
    a = characteristic(mp, exh, 1, radii, "d", PLAN)
    assert np.allclose(a.T, power_T1(d, radii) - power_T1(d, exh.r0), rtol=1e-8)
    s0 = characteristic(mp, exh, 0, radii, "ddc", PLAN)
    assert np.allclose(s0.t, 1.0) and np.allclose(s0.T, radii - exh.r0)
    assert s.check_invariants() == []


def test_identity_c2_characteristics_closed_form():
    mp, exh = catalog("polyk", {"k": 2, "degrees": [1, 1]}), standard_exhaustion("logAbs", 2)
    radii = np.array([1.0, 1.5])
    x = np.exp(2 * radii)
    s1 = characteristic(mp, exh, 1, radii, "ddc", PLAN)
    s2 = characteristic(mp, exh, 2, radii, "ddc", PLAN)
    assert np.allclose(s1.t, x / (1 + x), rtol=1e-10)
    assert np.allclose(s2.t, (x / (1 + x)) ** 2, rtol=1e-10)
    assert np.allclose(s2.T, 0.5 * (np.log1p(x) + 1 / (1 + x) - 1), rtol=1e-10)


def test_ball_exhaustion_disk_cover_mass_grows():
    mp, exh = catalog("diskCover"), standard_exhaustion("ballLog", 1)
    s = characteristic(mp, exh, 1, np.linspace(-1.0, -0.1, 4), "ddc", PLAN)
    assert np.all(np.diff(s.t) > 0) and s.check_invariants() == []


def test_trapezoid_cross_check():
    mp, exh = catalog("power", {"d": 2}), standard_exhaustion("logAbs", 1)
    radii = np.linspace(1.0, 2.0, 41)
    s = characteristic(mp, exh, 1, radii, "ddc", QuadPlan(budget=2**13))
    assert np.allclose(s.T_trap, s.T, rtol=1e-4)


@given(st.floats(min_value=0.6, max_value=3.0), st.floats(min_value=0.05, max_value=1.0))
def test_T_is_monotone_and_t_nonnegative(r, dr):
    mp, exh = catalog("poly", {"coeffs": [0.5, -1, 0, 1]}), standard_exhaustion("logAbs", 1)
    s = characteristic(mp, exh, 1, [r, r + dr], "ddc", QuadPlan(budget=4096))
    assert np.all(s.t >= 0) and s.T[1] >= s.T[0]


def test_mass_ratios_closed_form():
    d = 2
    mp, exh = catalog("power", {"d": d}), standard_exhaustion("logAbs", 1)
    radii = np.array([1.0, 2.0])
    s1 = characteristic(mp, exh, 1, radii, "ddc", PLAN)
    s0 = characteristic(mp, exh, 0, radii, "ddc", PLAN)
    J = ddc_mass_ratio(s1, s0, 2.0)
    assert np.isclose(J.value, 1.0 / power_T1(d, 2.0), rtol=1e-8)
    a1 = characteristic(mp, exh, 1, radii, "d", PLAN)
    a0 = characteristic(mp, exh, 0, radii, "d", PLAN)
    I = d_mass_ratio(a1, a0, 2.0)
    A1 = power_T1(d, 2.0) - power_T1(d, exh.r0)
    assert np.isclose(I.value, (2.0 - exh.r0) * power_t1(d, 2.0) / A1**2, rtol=1e-8)
    direct = d_mass_ratio_direct(mp, exh, 1, 2.0, PLAN)
    assert np.isfinite(direct.value)
    with pytest.raises(ValueError):
        ddc_mass_ratio(a1, a0, 2.0)
    with pytest.raises(ValueError):
        ddc_mass_ratio(s1, s0, 1.5)


def test_constant_map_is_degenerate():
    mp, exh = catalog("constant", {"value": 2.0}), standard_exhaustion("logAbs", 1)
    radii = np.array([1.0, 2.0])
    s1 = characteristic(mp, exh, 1, radii, "ddc", PLAN)
    s0 = characteristic(mp, exh, 0, radii, "ddc", PLAN)
    assert np.all(s1.degenerate())
    with pytest.raises(DegenerateMapError):
        ddc_mass_ratio(s1, s0, 1.0)
    vals, _ = ratio_curve("ddc", s1, s0)
    assert np.all(np.isnan(vals))


def test_schedule_validation():
    with pytest.raises(ValueError):
        characteristic(catalog("exp"), standard_exhaustion("logAbs", 1), 1, [0.1, 1.0])
    with pytest.raises(ValueError):
        characteristic(catalog("exp"), standard_exhaustion("logAbs", 1), 2, [1.0, 2.0])
    with pytest.raises(ValueError):
        characteristic(catalog("exp"), standard_exhaustion("logAbs", 1), 1, [1.0, 2.0], "dd")


def test_growth_orders():
    exh = standard_exhaustion("logAbs", 1)
    radii = np.linspace(2.0, 5.0, 8)
    e = characteristic(catalog("exp"), exh, 1, radii, "ddc", QuadPlan(budget=2**16))
    g = growth_classify(e)
    assert abs(g.order - 1.0) < 0.05
    p = characteristic(catalog("power", {"d": 3}), exh, 1, radii, "ddc", PLAN)
    gp = growth_classify(p, previous=characteristic(catalog("power", {"d": 3}), exh, 0, radii, "ddc", PLAN))
    assert abs(gp.order) < 1e-3 and gp.ratio_diverges is False
    with pytest.raises(ValueError):
        growth_classify(p, mode="weird")
    with pytest.raises(ValueError):
        growth_classify(characteristic(catalog("exp"), exh, 1, radii[:4], "ddc", PLAN))
