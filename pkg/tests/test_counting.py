import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.maps import DivisorSpec, catalog, standard_exhaustion
from nevlab.nevanlinna.characteristic import characteristic
from nevlab.nevanlinna.counting import (CountingError, count_preimages, counting_function, defect_report,
                                        fmt_constant, fmt_residual, preimage_counting_sum, proximity)
from nevlab.quad import QuadPlan

EXH = standard_exhaustion("logAbs", 1)


@given(st.integers(min_value=1, max_value=5), st.floats(min_value=0.2, max_value=20.0),
       st.floats(min_value=-2.0, max_value=2.0))
def test_argument_count_for_power_maps(d, mod, s):
    a = mod * np.exp(0.7j)
    level = math.log(mod) / d
    if abs(s - level) < 1e-3:
        return
    c = count_preimages(catalog("power", {"d": d}), EXH, DivisorSpec.value(a), s)
    assert c.value == (d if s > level else 0) and c.integral and c.distance < 0.1


def test_count_at_infinity_and_zero_on_contour():
    mp = catalog("poly", {"coeffs": [-1, 0, 0, 1]})
    assert count_preimages(mp, EXH, DivisorSpec.value(None), 2.0).value == 0
    c = count_preimages(mp, EXH, DivisorSpec.value(0.0), 0.0)  # roots of z^3 - 1 lie on |z| = 1
    assert c.value == 3 and c.attempts > 1


def test_containment_is_rejected():
    with pytest.raises(CountingError, match="contained"):
        count_preimages(catalog("constant", {"value": 2.0}), EXH, DivisorSpec.value(2.0), 1.0)


def test_counting_function_closed_form():
    # z^d = a: N(r) = d (r - log|a|/d)+ in the ddc case
    d, a = 3, 8.0
    mp = catalog("power", {"d": d})
    radii = np.array([0.5, 1.0, 2.0, 3.0])
    cs = counting_function(mp, EXH, DivisorSpec.value(a), radii)
    assert np.allclose(cs.N, np.maximum(d * radii - math.log(a), 0.0), atol=1e-8)
    assert np.allclose(cs.n, np.where(radii > math.log(2.0), 3, 0))
    assert len(cs.jumps) == 1 and np.isclose(cs.jumps[0][0], math.log(2.0), atol=1e-8)
    for r, N in zip(radii, cs.N):
        assert np.isclose(preimage_counting_sum(mp, EXH, DivisorSpec.value(a), float(r)), N, atol=1e-8)


def test_centre_preimages_carry_log_r_term():
    cs = counting_function(catalog("power", {"d": 2}), EXH, DivisorSpec.value(0.0), [1.0, 2.0])
    assert cs.n0 == 2 and np.allclose(cs.N, [2.0, 4.0])


def test_d_case_counting():
    d, a = 2, 4.0  # jump at log 2 > r0 = 0.5
    cs = counting_function(catalog("power", {"d": d}), EXH, DivisorSpec.value(a), [1.0, 2.0], weight_kind="d")
    assert np.allclose(cs.N, d * (np.array([1.0, 2.0]) - math.log(2.0)), atol=1e-8)


def test_proximity_closed_form():
    # K(Z, infinity) = 1/2 log(1 + |w|^2), so m(inf, r) = 1/2 log(1 + e^{2dr}) for z^d
    d, r = 2, 1.3
    m = proximity(catalog("power", {"d": d}), EXH, DivisorSpec.value(None), r)
    assert np.isclose(m.value, 0.5 * math.log1p(math.exp(2 * d * r)), rtol=1e-10)


def test_first_main_theorem_constant():
    mp = catalog("poly", {"coeffs": [-1, 0, 0, 1]})
    radii = np.linspace(1.0, 3.0, 5)
    T1 = characteristic(mp, EXH, 1, radii, "ddc", QuadPlan(budget=2**16))
    for w in (0.5 + 0.5j, -3.0, None):
        div = DivisorSpec.value(w)
        rep = defect_report(mp, EXH, div, T1, QuadPlan(budget=2**16))
        res = fmt_residual(rep)
        assert np.allclose(res, fmt_constant(mp, div), atol=1e-5)
        assert rep.check_invariants() == []
        assert np.all(rep.delta <= 1.0 + 1e-9)


def test_fmt_constant_oracle():
    # phi(0) = [1 : -1]; K = log(|Z| |a| / |<Z, a>|) with a = (-w, 1)
    mp = catalog("poly", {"coeffs": [-1, 0, 0, 1]})
    w = 2.0
    expected = math.log(math.sqrt(2) * math.sqrt(1 + w * w) / abs(-w - 1))
    assert np.isclose(fmt_constant(mp, DivisorSpec.value(w)), expected, rtol=1e-12)


def test_smoothed_point_count_k2():
    mp = catalog("polyk", {"k": 2, "degrees": [2, 2]})
    exh = standard_exhaustion("logAbs", 2)
    b = np.array([1.0, 1.0 + 0.5j, -0.7 + 0.2j])
    c = count_preimages(mp, exh, DivisorSpec.point(b), math.log(10.0))
    assert c.mode == "smoothedPL" and abs(c.raw - 4.0) < 0.2
    with pytest.raises(CountingError):
        count_preimages(mp, exh, DivisorSpec.point(b), 1.0, mode="argument")


def test_underresolved_characteristic_reports_its_error():
    mp = catalog("poly", {"coeffs": [-1, 0, 0, 1]})
    radii = np.linspace(1.0, 3.0, 5)
    coarse = characteristic(mp, EXH, 1, radii, "ddc", QuadPlan(budget=2**15))
    fine = characteristic(mp, EXH, 1, radii, "ddc", QuadPlan(budget=2**17))
    assert np.all(np.abs(coarse.T - fine.T) <= 3 * coarse.T_err + 1e-9)
