import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.maps import DivisorSpec, catalog, family, hyperplane_kernel, standard_exhaustion
from nevlab.nevanlinna.defects import (DiscreteMeasure, defect_suite, fibonacci_values, fit_constant,
                                       potential_sup, potential_values, proximity_potential, scaled_ratios)
from nevlab.quad import QuadPlan


def test_fibonacci_values_are_fs_equidistributed():
    w = np.array(fibonacci_values(2000))
    y0sq = 1.0 / (1.0 + np.abs(w) ** 2)  # |Y_0|^2 on the unit sphere is uniform on [0, 1]
    assert abs(np.mean(y0sq) - 0.5) < 1e-3
    assert abs(np.mean(y0sq**2) - 1 / 3) < 1e-3
    assert np.all(np.isfinite(w))
    with pytest.raises(ValueError):
        fibonacci_values(0)


def test_discrete_measure_validation():
    d = [DivisorSpec.value(0.0), DivisorSpec.value(1.0)]
    with pytest.raises(ValueError):
        DiscreteMeasure(tuple(d), np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        DiscreteMeasure(tuple(d), np.array([1.0]))
    nu = DiscreteMeasure.uniform(d)
    assert nu.m == 1 and np.allclose(nu.weights, 0.5)


@given(st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False))
def test_potential_is_weighted_kernel_sum(w):
    divs = [DivisorSpec.value(v) for v in (0.0, 1.0 + 1j, None)]
    nu = DiscreteMeasure(tuple(divs), np.array([0.2, 0.3, 0.5]))
    Z = np.array([[1.0, w]])
    expected = sum(c * hyperplane_kernel(Z, d.a)[0] for c, d in zip(nu.weights, divs))
    v = potential_values(nu, Z)[0]
    if math.isfinite(expected):
        assert np.isclose(v, expected, rtol=1e-12, atol=1e-12)
        assert v >= -1e-12


def test_potential_on_divisor_is_flagged():
    nu = DiscreteMeasure.uniform([DivisorSpec.value(2.0)])
    val, on = proximity_potential(nu, np.array([1.0, 2.0]))
    assert on and val == math.inf


def test_potential_sup_proxy():
    nu = DiscreteMeasure.uniform([DivisorSpec.value(v) for v in fibonacci_values(10)])
    ps = potential_sup(nu, seed=4)
    assert ps.samples == 10_000 and ps.sup > 0 and np.isclose(ps.capacity_lower_bound, 1 / ps.sup)
    with pytest.raises(ValueError):
        potential_sup(nu, samples=100)


def test_fit_constant():
    c_tr, c_te, ok = fit_constant(np.array([1.0, 1.1, 0.9, 1.15]))
    assert c_tr == 1.0 and c_te == 1.15 and ok
    assert not fit_constant(np.array([1.0, 1.5]))[2]


def test_defect_suite_power_map():
    mp = catalog("power", {"d": 2})
    exh = standard_exhaustion("logAbs", 1)
    nu = DiscreteMeasure.uniform([DivisorSpec.value(v) for v in fibonacci_values(8)])
    res = defect_suite(mp, exh, nu, np.linspace(1.0, 4.0, 6), QuadPlan(budget=2**15))
    assert res.stable
    # averaged defect is the bounded FMT defect: N_avg = T_1 - m_avg + K_avg
    assert np.all(res.avg_defect <= res.bound() * 1.2 + 1e-12)
    assert np.all(np.diff(res.avg_defect) < 0)
    assert set(res.tails) == {0.2, 0.4}


def test_scaled_ratios_closed_form():
    # z/n on the unit ball: t_0 = 1, t_1(u) = x / (1 + x) with x = e^{2u} / n^2
    exh = standard_exhaustion("ballLog", 1)
    c = 1.5
    radii = np.linspace(-2.0, -0.6, 5)
    sr = scaled_ratios(family("shrink", 3), exh, 1, c, radii, QuadPlan(budget=2**15))
    n = np.arange(1, 4)[:, None]
    x = np.exp(2 * (radii[None, :] - math.log(c))) / n**2
    assert np.allclose(sr.ratio, (1 + x) / x, rtol=1e-8)
    assert np.allclose(sr.volume, x / (1 + x), rtol=1e-8)
    with pytest.raises(ValueError):
        scaled_ratios(family("shrink", 3), exh, 1, 1.0, radii)
