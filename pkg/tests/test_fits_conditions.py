import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.maps import catalog, standard_exhaustion
from nevlab.nevanlinna.characteristic import CharacteristicSeries, characteristic
from nevlab.nevanlinna.conditions import (CONDITION_IDS, InsufficientScheduleError, check_condition,
                                          running_min_envelope)
from nevlab.nevanlinna.fits import diverges, limit_fit, tends_to_zero
from nevlab.quad import QuadPlan

X = np.linspace(2.0, 12.0, 12)


@given(st.floats(min_value=-2, max_value=2), st.floats(min_value=0.5, max_value=3),
       st.sampled_from([0.3, 0.8, 1.5]))
def test_limit_fit_recovers_exact_exponential_model(c, a, p):
    xs = (X - X.min()) / (X.max() - X.min())
    y = c + a * np.exp(-p * xs)
    fit = limit_fit(X, y)
    assert abs(fit.limit - c) < 0.05 * (abs(c) + a)


def test_tends_to_zero():
    assert tends_to_zero(X, 1.0 / X)[0]
    assert tends_to_zero(X, np.exp(-X))[0]
    assert not tends_to_zero(X, 1.0 + 1.0 / X)[0]
    assert not tends_to_zero(X, 0.5 + 0.0 * X)[0]


def test_diverges():
    assert diverges(X, np.log(X))[0]
    assert diverges(X, X**2)[0]
    assert not diverges(X, 1.0 - 1.0 / X**2)[0]
    assert not diverges(X, 1.0 - np.exp(-X))[0]
    with pytest.raises(ValueError):
        diverges(X[:3], X[:3])


@given(st.lists(st.floats(min_value=-10, max_value=10), min_size=1, max_size=30))
def test_running_min_envelope_is_nonincreasing_and_below(y):
    y = np.array(y)
    env = running_min_envelope(y)
    assert np.all(np.diff(env) <= 0) and np.all(env <= y + 1e-15)


def synthetic(j, radii, t, T, kind):
    z = np.zeros_like(radii)
    return CharacteristicSeries(j, radii, t, z, T, z, T, kind)


def power_bundle(d, radii, r0=0.5):
    x = np.exp(2 * d * radii)
    t1, T1 = d * x / (1 + x), 0.5 * np.log1p(x)
    A1 = T1 - 0.5 * math.log1p(math.exp(2 * d * r0))
    one = np.ones_like(radii)
    return {("ddc", 1): synthetic(1, radii, t1, T1, "ddc"), ("ddc", 0): synthetic(0, radii, one, radii - r0, "ddc"),
            ("d", 1): synthetic(1, radii, t1, A1, "d"), ("d", 0): synthetic(0, radii, one, radii - r0, "d")}


def test_conditions_on_polynomial_closed_forms():
    radii = np.linspace(1.0, 12.0, 12)
    b = power_bundle(3, radii)
    # t_0 / A_1 ~ 1/(3r) -> 0, while A_0 / A_1 -> 1/3
    assert check_condition("simpledMR", b).holds
    assert not check_condition("alphaMR", b).holds
    assert check_condition("minimaldMR", b).holds  # int dr / r diverges
    assert check_condition("MR1supdelta", b).holds
    for cid in ("logdclosed", "MR2sup", "diskEnergy"):
        res = check_condition(cid, b)
        assert res.id == cid and res.x.size == radii.size
        json_ok = res.to_json()
        assert json_ok["id"] == cid


def test_conditions_need_enough_radii_and_known_ids():
    radii = np.linspace(1.0, 3.0, 5)
    with pytest.raises(InsufficientScheduleError):
        check_condition("simpledMR", power_bundle(2, radii))
    with pytest.raises(ValueError):
        check_condition("nope", power_bundle(2, np.linspace(1, 3, 8)))
    with pytest.raises(ValueError):
        check_condition("scaleCond", power_bundle(2, np.linspace(1, 3, 8)))
    assert len(CONDITION_IDS) == 8


def test_exp_conditions_from_quadrature():
    exh = standard_exhaustion("logAbs", 1)
    radii = np.linspace(2.0, 6.0, 9)
    plan = QuadPlan(budget=2**16)
    mp = catalog("exp")
    b = {(k, j): characteristic(mp, exh, j, radii, k, plan) for k in ("d", "ddc") for j in (0, 1)}
    assert check_condition("simpledMR", b).holds
    assert check_condition("alphaMR", b).holds
    assert check_condition("logdclosed", b).holds
