import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracspec.fourier import (
    FourierField,
    apply_diff,
    clean_spectrum,
    diff_matrix,
    evaluate_at,
    forward_transform,
    inverse_transform,
)
from fracspec.grid import make_grid, sample_even_extension


def _naive_coeffs(u):
    """Direct O(N^2) DFT on the shifted nodes."""
    n = u.size
    N = n // 2
    s = np.pi * (2 * np.arange(n) + 1) / n
    k = np.arange(-N, N)
    return np.exp(-1j * np.outer(k, s)) @ u / n


def test_single_mode_reproduced():
    N = 8
    s = make_grid(N, 1.0).s_nodes
    for k in (-3, 0, 2, 5):
        u = np.exp(1j * k * s)
        c = forward_transform(u).coeffs
        expected = np.zeros(2 * N, complex)
        expected[k + N] = 1.0
        assert np.allclose(c, expected, atol=1e-14)


@settings(max_examples=40)
@given(st.integers(2, 64).flatmap(
    lambda N: arrays(np.float64, 2 * N, elements=st.floats(-10, 10))))
def test_real_round_trip_and_hermitian(u):
    f = forward_transform(u, clean=False)
    N = u.size // 2
    assert f.is_real
    assert f.coeffs[0] == 0
    assert np.array_equal(f.coeffs[N + 1:], np.conj(f.coeffs[1:N][::-1]))
    # the -N mode is dropped, so only the part without it round-trips
    c = _naive_coeffs(u)
    nyq = c[0] * np.exp(-1j * N * np.pi * (2 * np.arange(2 * N) + 1) / (2 * N))
    assert np.allclose(f.coeffs[1:], c[1:], atol=1e-12)
    assert np.max(np.abs(inverse_transform(f) - (u - nyq.real))) <= 1e-12 * max(1, np.abs(u).max())


def test_even_data_round_trip_exact():
    # evenly extended samples have no -N component, so the round trip is exact
    g = make_grid(64, 1.6)
    u = sample_even_extension(lambda x: 1 / (1 + x**2), g)
    f = forward_transform(u)
    assert abs(_naive_coeffs(u)[0]) < 1e-15
    assert np.max(np.abs(inverse_transform(f) - u)) <= 1e-12


@settings(max_examples=30)
@given(st.integers(2, 32).flatmap(lambda N: st.tuples(
    arrays(np.float64, 2 * N, elements=st.floats(-5, 5)),
    arrays(np.float64, 2 * N, elements=st.floats(-5, 5)))))
def test_complex_round_trip(parts):
    u = parts[0] + 1j * parts[1]
    f = forward_transform(u, clean=False)
    assert not f.is_real
    assert np.allclose(f.coeffs, _naive_coeffs(u), atol=1e-12)
    assert np.max(np.abs(inverse_transform(f) - u)) <= 1e-12


def test_evaluate_at_nodes_and_between():
    g = make_grid(64, 2.0)
    f = forward_transform(sample_even_extension(lambda x: np.exp(-x**2), g))
    assert np.allclose(evaluate_at(f, g.s_nodes).real, inverse_transform(f), atol=1e-13)
    s = 1.0
    assert evaluate_at(f, s).real == pytest.approx(np.exp(-(2.0 / np.tan(s)) ** 2), abs=1e-8)


def test_clean_spectrum_relative_and_absolute():
    c = np.zeros(8, complex)
    c[4], c[5], c[3] = 1.0, 1e-17, 1e-17
    f = FourierField(c, 4, True)
    assert np.count_nonzero(clean_spectrum(f).coeffs) == 1
    # a small-amplitude field survives relative cleaning intact
    c[4], c[5], c[3] = 1e-12, 1e-14, 1e-14
    small = FourierField(c, 4, True)
    assert np.count_nonzero(clean_spectrum(small).coeffs) == 3
    assert np.count_nonzero(clean_spectrum(small, 1e-13, relative=False).coeffs) == 1


def test_field_validation_and_arithmetic():
    with pytest.raises(ValueError):
        FourierField(np.zeros(5), 2)
    a = FourierField.from_modes({1: 1.0, -1: 1.0}, 4)
    assert a.is_real
    b = FourierField.from_modes({1: 1j}, 4)
    assert not b.is_real
    assert not (a + b).is_real
    assert (2 * a).mode(1) == 2.0
    assert not (a * 1j).is_real
    with pytest.raises(ValueError):
        FourierField.from_modes({4: 1.0}, 4)
    with pytest.raises(ValueError):
        a.coeffs[0] = 1.0


@pytest.mark.parametrize("order, deriv", [
    (1, lambda x: -2 * x / (1 + x**2) ** 2),
    (2, lambda x: (6 * x**2 - 2) / (1 + x**2) ** 3),
    (3, lambda x: 24 * x * (1 - x**2) / (1 + x**2) ** 4),
])
def test_derivatives_of_rational_function(order, deriv):
    # 1/(1+x^2) is a finite cosine series in s when L = 1, so the result is exact
    g = make_grid(16, 1.0)
    f = forward_transform(sample_even_extension(lambda x: 1 / (1 + x**2), g))
    d = inverse_transform(apply_diff(f, order, 1.0))[:16]
    assert np.max(np.abs(d - deriv(g.x_nodes))) < 1e-12


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivatives_spectral_accuracy(order):
    L = 3.0
    g = make_grid(128, L)
    f = forward_transform(sample_even_extension(lambda x: 1 / np.cosh(x), g))
    d = inverse_transform(apply_diff(f, order, L))[:128]
    x = g.x_nodes
    t, sech = np.tanh(x), 1 / np.cosh(x)
    exact = {1: -t * sech, 2: (2 * t**2 - 1) * sech, 3: (5 * t - 6 * t**3) * sech}[order]
    assert np.max(np.abs(d - exact)) < 1e-8


@pytest.mark.parametrize("order", [1, 2, 3])
def test_diff_matrix_matches_apply(order):
    rng = np.random.default_rng(order)
    u = rng.standard_normal(24)
    f = forward_transform(u)
    D = diff_matrix(order, 12, 1.7)
    assert np.allclose(D @ f.coeffs, apply_diff(f, order, 1.7).coeffs, atol=1e-13)
    assert D.nnz <= (2 * order + 1) * 24


def test_diff_rejects_order():
    with pytest.raises(ValueError):
        apply_diff(FourierField.zeros(4), 4, 1.0)


def test_derivative_keeps_hermitian():
    rng = np.random.default_rng(0)
    f = forward_transform(rng.standard_normal(32))
    d = apply_diff(f, 3, 2.0)
    N = 16
    assert np.allclose(d.coeffs[N + 1:], np.conj(d.coeffs[1:N][::-1]), atol=1e-14)
    assert d.coeffs[0] == 0
