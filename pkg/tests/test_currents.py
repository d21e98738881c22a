import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.currents import (DiscreteCurrent, brody_detector, build_current, chi_delta, cluster_analysis,
                             d_pairing, ddc_bound_study, ddc_pairing, density_point_ratio,
                             intersection_positivity, moments, pair)
from nevlab.currents.pairings import chi_delta_prime, richardson_linear
from nevlab.forms import ChartPoint, dictionary_forms, make_test_form
from nevlab.maps import DivisorSpec, catalog, family, standard_exhaustion
from nevlab.nevanlinna.characteristic import DegenerateMapError, characteristic
from nevlab.nevanlinna.counting import CountingError
from nevlab.quad import QuadPlan

EXH = standard_exhaustion("logAbs", 1)
PLAN = QuadPlan(budget=2**15)


def test_current_mass_is_T():
    mp = catalog("power", {"d": 2})
    cur = build_current(mp, EXH, 1, 1.5, plan=PLAN)
    assert np.isclose(cur.c_r, 0.5 * math.log1p(math.exp(6.0)), rtol=1e-8)
    assert np.isclose(cur.normalized_mass(), 1.0, rtol=1e-12)
    c0 = build_current(mp, EXH, 0, 1.5, plan=PLAN)
    assert np.isclose(c0.c_r, 1.5 - EXH.r0, rtol=1e-10)  # the point mass at the centre
    d = build_current(mp, EXH, 1, 1.5, weight_kind="d", plan=PLAN)
    assert d.c_r < cur.c_r


def test_current_serialization_round_trip(tmp_path):
    mp = catalog("exp")
    cur = build_current(mp, EXH, 1, 1.0, plan=QuadPlan(budget=4096))
    path = tmp_path / "S.txt"
    cur.to_text(path)
    back = DiscreteCurrent.from_text(path)
    assert back.j == 1 and np.isclose(back.r, 1.0) and back.provenance["map"] == "exp"
    assert np.allclose(np.abs(np.sum(np.conj(back.y) * cur.y, axis=1)), 1.0, atol=1e-12)
    assert np.array_equal(back.w, cur.w)
    tf = make_test_form(1, 1, 5)
    v1 = cur.pair_function(tf.f)[0]
    v2 = back.pair_function(tf.f)[0]
    assert np.isclose(v1, v2, rtol=1e-10)
    bad = tmp_path / "bad.txt"
    bad.write_text("hello\n")
    with pytest.raises(ValueError):
        DiscreteCurrent.from_text(bad)


def test_pair_checks_degrees():
    cur = build_current(catalog("exp"), EXH, 1, 1.0, plan=QuadPlan(budget=4096))
    with pytest.raises(ValueError):
        pair(cur, make_test_form(1, 0, 3))
    with pytest.raises(ValueError):
        pair(cur, make_test_form(2, 1, 3))
    v, e = pair(cur, make_test_form(1, 1, 0), normalized=True)
    assert np.isclose(v, 1.0)


def test_degenerate_current():
    with pytest.raises(DegenerateMapError):
        build_current(catalog("constant", {"value": 1.0}), EXH, 1, 1.0, plan=QuadPlan(budget=4096))


@given(st.integers(min_value=0, max_value=45))
def test_normalized_pairing_bounded_by_sup_norm(index):
    cur = _cached_current()
    tf = make_test_form(2, 2, index)
    v, _ = pair(cur, tf, normalized=True)
    assert abs(v) <= tf.sup_norm * (1 + 1e-9)


_CACHE = {}


def _cached_current():
    if "c" not in _CACHE:
        mp = catalog("polyk", {"k": 2, "degrees": [1, 2]})
        _CACHE["c"] = build_current(mp, standard_exhaustion("logAbs", 2), 2, 1.0, plan=QuadPlan(budget=2**14))
    return _CACHE["c"]


def test_power_cluster_converges_to_fs():
    mp = catalog("power", {"d": 3})
    cs = [build_current(mp, EXH, 1, r, plan=PLAN) for r in (3.0, 4.0, 5.0)]
    rep = cluster_analysis(cs)
    assert rep.fs_decreasing and rep.converging
    # the moments of S_r for z^d differ from FS only through the mass near 0 and infinity
    assert np.allclose(rep.fs_distance, [1 / 36, 1 / 48, 1 / 60], rtol=0.05)
    mv = moments(cs[0])
    assert mv.values[0] == 1.0 and mv.version == "1"
    with pytest.raises(ValueError):
        cluster_analysis(cs[:2])


def test_density_point_ratio_positive_for_surjective_map():
    mp = catalog("power", {"d": 2})
    rep = density_point_ratio(mp, EXH, ChartPoint(0, (0.5 + 0j,)), 0.3, np.linspace(2.0, 4.0, 4), plan=PLAN)
    assert rep.kappa > 0 and np.all(rep.ratio <= 1.0)
    with pytest.raises(ValueError):
        density_point_ratio(mp, EXH, ChartPoint(0, (0.5 + 0j,)), 0.0, [2.0])


@given(st.floats(min_value=-1, max_value=2), st.floats(min_value=1e-3, max_value=1))
def test_chi_delta_properties(s, delta):
    v = float(chi_delta(np.array([s]), delta)[0])
    assert v >= 0 and v <= max(s, 0) + 1e-15
    assert 0 <= chi_delta_prime(np.array([s]), delta)[0] <= 1


def test_richardson_exact_for_quadratic():
    d = [0.1, 0.01, 0.001]
    v = [2 + 3 * x + 5 * x * x for x in d]
    assert np.isclose(richardson_linear(d, v)[0], 2.0)


def test_ddc_pairing_of_constant_vanishes_and_matches_jensen():
    mp = catalog("exp")
    one = lambda Y: np.ones(Y.shape[0])  # noqa: E731
    assert abs(ddc_pairing(mp, EXH, 1, 2.0, one, plan=PLAN).value) < 1e-9
    f = lambda Y: np.abs(Y[:, 0]) ** 2  # noqa: E731
    res = ddc_pairing(mp, EXH, 1, 2.0, f, plan=QuadPlan(budget=2**16))
    assert abs(res.value - res.jensen) < 3e-3 * max(1.0, abs(res.jensen))


def test_ddc_pairing_power_closed_form():
    # f = |Y_0|^2 for z^d: circle average of 1/(1+e^{2dr}) minus f(phi(0)) = 1
    d, r = 2, 1.0
    res = ddc_pairing(catalog("power", {"d": d}), EXH, 1, r, lambda Y: np.abs(Y[:, 0]) ** 2, plan=PLAN)
    assert np.isclose(res.value, 1.0 / (1.0 + math.exp(2 * d * r)) - 1.0, atol=2e-4)
    assert np.isclose(res.jensen, 1.0 / (1.0 + math.exp(2 * d * r)) - 1.0, atol=1e-12)


def test_ddc_pairing_rejects_wrong_degree():
    with pytest.raises(ValueError):
        ddc_pairing(catalog("exp"), EXH, 2, 1.0, lambda Y: Y[:, 0].real)
    with pytest.raises(ValueError):
        ddc_pairing(catalog("exp"), EXH, 1, 1.0, make_test_form(1, 1, 2))


def test_d_pairing_decays_relative_to_mass_for_exp():
    mp = catalog("exp")
    h = make_test_form(1, 0, 3)
    vals = []
    for r in (2.0, 4.0):
        p = d_pairing(mp, EXH, 1, r, h, weight_kind="ddc", plan=QuadPlan(budget=2**16))
        c = characteristic(mp, EXH, 1, [r], "ddc", QuadPlan(budget=2**16)).T[0]
        vals.append(p.value / c)
    assert vals[1] < vals[0]
    with pytest.raises(ValueError):
        d_pairing(mp, EXH, 1, 2.0, h, weight_kind="x")
    assert d_pairing(mp, EXH, 1, 0.4, h, weight_kind="d").value == 0.0


def test_ddc_bound_study_stable_for_power():
    forms = dictionary_forms(1, 0, 4)
    st = ddc_bound_study(catalog("power", {"d": 2}), EXH, 1, forms, np.linspace(1.0, 3.0, 4), PLAN)
    assert st.ratio.shape == (4, 4) and st.stable


def test_intersection_positivity_power_map():
    mp = catalog("power", {"d": 3})
    ic = intersection_positivity(mp, EXH, DivisorSpec.value(2.0), np.linspace(1.0, 3.0, 4), PLAN)
    assert ic.positive
    assert np.allclose(ic.pairing, ic.counting, atol=1e-3)
    assert np.allclose(ic.counting, ic.preimage_sum, atol=1e-9)
    centre = intersection_positivity(mp, EXH, DivisorSpec.value(0.0), np.linspace(1.0, 3.0, 4), PLAN)
    assert centre.meta["centre_on_divisor"] and centre.positive
    assert np.all(np.isnan(centre.pairing)) and np.all(centre.curve() > 0)
    with pytest.raises(CountingError):
        intersection_positivity(catalog("constant", {"value": 2.0}), EXH, DivisorSpec.value(2.0), [1.0, 2.0], PLAN)
    with pytest.raises(ValueError):
        intersection_positivity(mp, EXH, DivisorSpec.point([1, 0, 0]), [1.0, 2.0], PLAN)


def test_brody_detector_shrink_family_bound():
    exh = standard_exhaustion("ballLog", 1)
    c = math.exp(0.4)
    radii = np.linspace(-2.5, -0.9, 8)
    res = brody_detector(family("shrink", 5), exh, c, radii, PLAN)
    rho2 = math.exp(2 * (-0.9 - 0.4))
    assert res.verdict == "volume-bound"
    assert np.isclose(res.bound, rho2 / (1 + rho2), rtol=1e-6)
    with pytest.raises(ValueError):
        brody_detector(family("shrink", 5), exh, c, [-2.0, -1.0, -0.5, -0.3, -0.1], PLAN)
    with pytest.raises(ValueError):
        brody_detector(family("shrink", 2), exh, c, radii, PLAN)


def test_brody_detector_constant_family_is_degenerate():
    exh = standard_exhaustion("ballLog", 1)
    fam = [catalog("constant", {"value": v}) for v in (1.0, 2.0, 3.0)]
    res = brody_detector(fam, exh, 1.5, np.linspace(-2.5, -1.0, 5), PLAN)
    assert res.verdict == "degenerate" and len(res.degenerate) == 3
