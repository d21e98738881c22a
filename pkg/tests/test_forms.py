import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.forms import (ChartPoint, HermitianForm, dictionary, eval_dict_function, fs_coeff, fs_distance,
                          fs_form_at, fs_moments, fs_pullback_coeff, grad_dict_function, make_test_form,
                          mixed_det, mixed_wedge_density, numeric_ddc, pullback_form, verify_sup_norm,
                          wedge_density)


def random_hermitian(rng, k, psd=False):
    a = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return a @ a.conj().T if psd else 0.5 * (a + a.conj().T)


def permutation_mixed_det(mats):
    """k! D(A_1..A_k) = sum over permutations of det with column i from A_pi(i)."""
    k = mats[0].shape[0]
    total = 0.0
    for perm in itertools.permutations(range(k)):
        m = np.stack([mats[perm[i]][:, i] for i in range(k)], axis=1)
        total += np.linalg.det(m)
    return total


@pytest.mark.parametrize("k", [1, 2, 3])
def test_mixed_det_matches_permutation_expansion(rng, k):
    for _ in range(20):
        mats = [random_hermitian(rng, k) for _ in range(k)]
        got = mixed_det([(a, 1) for a in mats])
        assert np.allclose(got, permutation_mixed_det(mats), rtol=1e-10, atol=1e-12)


def test_mixed_det_diagonal_is_det(rng):
    a = random_hermitian(rng, 3)
    assert np.isclose(mixed_det([(a, 3)]), math.factorial(3) * np.linalg.det(a), rtol=1e-12)


def test_mixed_det_k2_closed_form(rng):
    a, b = random_hermitian(rng, 2), random_hermitian(rng, 2)
    closed = a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]
    assert np.isclose(mixed_det([(a, 1), (b, 1)]), closed, rtol=1e-12)


def test_mixed_det_rejects_bad_multiplicities(rng):
    a = random_hermitian(rng, 2)
    with pytest.raises(ValueError):
        mixed_det([(a, 1)])
    with pytest.raises(ValueError):
        mixed_det([(a, 3)])
    with pytest.raises(ValueError):
        mixed_det([(a, -1), (a, 3)])


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_mixed_det_symmetric_and_multilinear(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_hermitian(rng, 3) for _ in range(3))
    d = random_hermitian(rng, 3)
    base = mixed_det([(a, 1), (b, 1), (c, 1)])
    assert np.isclose(base, mixed_det([(c, 1), (a, 1), (b, 1)]), rtol=1e-9, atol=1e-9)
    lin = mixed_det([(2.0 * a + d, 1), (b, 1), (c, 1)])
    assert np.isclose(lin, 2.0 * base + mixed_det([(d, 1), (b, 1), (c, 1)]), rtol=1e-9, atol=1e-8)


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_mixed_density_of_psd_forms_is_nonnegative(seed):
    rng = np.random.default_rng(seed)
    forms = [HermitianForm(random_hermitian(rng, 3, psd=True), positive=True) for _ in range(3)]
    assert mixed_wedge_density([(f, 1) for f in forms], 3) >= -1e-10


def test_hermitian_form_validation(rng):
    with pytest.raises(ValueError):
        HermitianForm(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        HermitianForm(-np.eye(2), positive=True)
    f = HermitianForm(np.eye(2), positive=True)
    assert (f + f).coeff[0, 0] == 2.0
    assert not f.scaled(-1.0).positive


def test_fs_coeff_at_origin_and_density():
    # omega = dd^c log(1+|w|^2)/2 has coefficient 1/2 at 0 and density 1/(pi (1+|w|^2)^2)
    assert np.allclose(fs_coeff(np.zeros(1)), [[0.5]])
    w = np.array([[0.3 + 0.4j]])
    dens = wedge_density([(fs_coeff(w), 1)])
    assert np.isclose(dens[0], 1.0 / (math.pi * (1 + 0.25) ** 2), rtol=1e-12)


def test_fs_form_matches_numeric_ddc():
    p = ChartPoint(0, np.array([0.4 - 0.2j, 1.1j]))

    def u(z):
        return 0.5 * np.log1p(np.sum(np.abs(z) ** 2, axis=1))

    num = numeric_ddc(u, p.w, h=1e-4)
    assert np.allclose(num.coeff, fs_form_at(p).coeff, atol=1e-7)


def test_numeric_ddc_of_log_norm_is_degenerate_in_radial_direction():
    z = np.array([1.0 + 0.5j, -0.3j])
    f = numeric_ddc(lambda x: 0.5 * np.log(np.sum(np.abs(x) ** 2, axis=1)), z)
    assert np.allclose(f.coeff @ z, 0.0, atol=1e-7)


def test_pullback_of_identity_chart_is_fs():
    w = np.array([0.7 + 0.1j])
    F = np.array([[1.0, w[0]]])
    J = np.array([[[0.0], [1.0]]])
    assert np.allclose(fs_pullback_coeff(F, J)[0], fs_coeff(w), rtol=1e-12)


@given(st.floats(min_value=0.01, max_value=100.0))
def test_pullback_invariant_under_positive_rescaling(s):
    F = np.array([[1.0, 0.3 + 2j, -1j]])
    J = np.array([[[0.0, 0.0], [1.0, 0.5j], [0.2, 1.0]]])
    assert np.allclose(fs_pullback_coeff(s * F, s * J), fs_pullback_coeff(F, J), rtol=1e-10, atol=1e-14)


def test_pullback_form_dimension_check():
    with pytest.raises(ValueError):
        pullback_form(np.ones((3, 1)), HermitianForm(np.eye(2)))


def test_chart_point_round_trip():
    z = np.array([0.2, 3.0 - 1j, 0.5j])
    cp = ChartPoint.from_homogeneous(z)
    assert cp.chart == 1
    h = cp.homogeneous()
    assert np.isclose(fs_distance(h, z), 0.0, atol=1e-7)
    with pytest.raises(ValueError):
        ChartPoint.from_homogeneous(np.zeros(2))


def test_fs_distance_diameter():
    assert np.isclose(fs_distance(np.array([1, 0]), np.array([0, 1])), math.pi / 2)


def test_dictionary_sizes_and_first_entry():
    assert len(dictionary(1)) == 14
    assert len(dictionary(2)) == 46
    Z = np.array([[1.0, 2.0 + 1j]])
    assert eval_dict_function(dictionary(1)[0], Z)[0] == 1.0


@given(st.integers(min_value=0, max_value=13), st.floats(min_value=0.1, max_value=10.0),
       st.floats(min_value=0.0, max_value=6.28))
def test_dictionary_functions_are_projective(index, s, phase):
    Z = np.array([[0.3 - 1j, 1.2 + 0.1j]])
    e = dictionary(1)[index]
    assert np.allclose(eval_dict_function(e, s * np.exp(1j * phase) * Z), eval_dict_function(e, Z), atol=1e-12)


@pytest.mark.parametrize("index", range(1, 14))
def test_dictionary_gradient_by_finite_differences(index):
    e = dictionary(1)[index]
    Z = np.array([0.4 + 0.3j, -0.8 + 0.5j])
    g = grad_dict_function(e, Z)
    h = 1e-6
    for i in range(2):
        dx = np.zeros(2, complex)
        dx[i] = h
        fx = (eval_dict_function(e, Z + dx) - eval_dict_function(e, Z - dx)) / (2 * h)
        fy = (eval_dict_function(e, Z + 1j * dx) - eval_dict_function(e, Z - 1j * dx)) / (2 * h)
        assert np.isclose(g[i], 0.5 * (fx - 1j * fy), atol=1e-7)
    assert abs(np.sum(g * Z)) < 1e-12  # Euler relation for degree-0 functions


def test_sup_norms_are_upper_bounds():
    for i in range(14):
        assert verify_sup_norm(make_test_form(1, 0, i))


def test_fs_moments_oracles():
    mom = fs_moments(1)
    assert np.isclose(mom[0], 1.0)
    # |Y_0|^2 is uniform on [0, 1] under the FS measure of P^1
    labels = [e.label for e in dictionary(1)]
    i = labels.index("re[a=10,b=10]")
    assert np.isclose(mom[i], 0.5, atol=1e-12)
    i = labels.index("re[a=20,b=20]")
    assert np.isclose(mom[i], 1.0 / 3.0, atol=1e-12)
    # cross terms average to zero over phases
    assert np.isclose(mom[labels.index("re[a=10,b=01]")], 0.0, atol=1e-12)
    m2 = fs_moments(2)
    assert np.isclose(m2[0], 1.0) and m2.size == 46
    with pytest.raises(ValueError):
        fs_moments(3)
