import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracspec.oracles import (
    FUNCTIONS,
    ToleranceNotReached,
    brute_force_frac,
    get_function,
    hyp1f1,
    regularity_suite,
)

CLOSED = ["v1", "v2", "v3", "v8"]


@pytest.mark.parametrize("fid", sorted(FUNCTIONS))
def test_derivatives_match_finite_differences(fid):
    tf = get_function(fid)
    x = np.linspace(-3, 3, 13) * tf.recommended_L + 0.0123
    h = 1e-5 * tf.recommended_L
    fd1 = (tf.v(x + h) - tf.v(x - h)) / (2 * h)
    fd2 = (tf.dv(x + h) - tf.dv(x - h)) / (2 * h)
    scale1 = max(1.0, np.abs(tf.dv(x)).max())
    scale2 = max(1.0, np.abs(tf.d2v(x)).max())
    assert np.max(np.abs(fd1 - tf.dv(x))) < 1e-6 * scale1
    assert np.max(np.abs(fd2 - tf.d2v(x))) < 1e-6 * scale2


@pytest.mark.parametrize("fid", CLOSED)
@pytest.mark.parametrize("alpha", [0.15, 0.5, 0.85])
def test_closed_form_against_brute_force(fid, alpha):
    tf = get_function(fid)
    for x in (-1.3, 0.0, 0.7, 2.5):
        x = x * tf.recommended_L
        assert tf.exact(x, alpha) == pytest.approx(brute_force_frac(tf.d2v, x, alpha), abs=1e-9)


def test_brute_force_against_mpmath():
    # independent arbitrary-precision evaluation of the same integral for v3
    alpha, x = 0.4, 0.8
    mpmath.mp.dps = 30
    d2 = lambda y: (4 * y**2 - 2) * mpmath.exp(-y**2)
    val = mpmath.quad(lambda r: d2(x - r ** (1 / (1 - alpha))), [0, 1, 2, 4, 8, 16]) / (1 - alpha)
    val /= mpmath.gamma(1 - alpha)
    assert brute_force_frac(get_function("v3").d2v, x, alpha) == pytest.approx(float(val), abs=1e-11)


def test_brute_force_rejects_alpha_one_and_unreachable_tol():
    with pytest.raises(ValueError):
        brute_force_frac(get_function("v1").d2v, 0.0, 1.0)
    with pytest.raises(ToleranceNotReached):
        brute_force_frac(get_function("v4").d2v, 0.0, 0.5, tol=1e-30, limit=5)


@pytest.mark.parametrize("fid", CLOSED)
def test_endpoint_continuity(fid):
    tf = get_function(fid)
    x = np.linspace(-2, 2, 9) * tf.recommended_L
    lo = tf.exact_frac(x, 1e-3)
    hi = tf.exact_frac(x, 1 - 1e-3)
    assert np.max(np.abs(lo - tf.dv(x))) <= 1e-2 * max(1, np.abs(tf.dv(x)).max())
    assert np.max(np.abs(hi - tf.d2v(x))) <= 1e-2 * max(1, np.abs(tf.d2v(x)).max())


@pytest.mark.parametrize("fid", CLOSED)
def test_exact_dispatches_endpoints(fid):
    tf = get_function(fid)
    x = np.array([-1.0, 0.3])
    assert np.array_equal(tf.exact(x, 0), tf.dv(x))
    assert np.array_equal(tf.exact(x, 1.0), tf.d2v(x))


@pytest.mark.parametrize("fid", CLOSED)
def test_decay_at_infinity(fid):
    tf = get_function(fid)
    L = tf.recommended_L
    for alpha in (0.2, 0.7):
        near = abs(tf.exact(3 * L, alpha))
        far = abs(tf.exact(300 * L, alpha))
        assert far < 1e-2 * max(near, 1e-12) or far < 1e-8


def test_no_closed_form_raises():
    tf = get_function("v5")
    assert not tf.has_exact(0.5)
    assert tf.has_exact(0) and tf.has_exact(1)
    with pytest.raises(ValueError):
        tf.exact(0.0, 0.5)


def test_unknown_function():
    with pytest.raises(KeyError, match="unknown"):
        get_function("nope")


def test_regularity_suite():
    suite = regularity_suite()
    assert [f.id for f in suite] == ["v4", "v5", "v6", "v7"]
    assert [f.regularity for f in suite] == [1, 2, 3, 4]
    assert all(math.isinf(FUNCTIONS[f].regularity) for f in CLOSED)


@pytest.mark.parametrize("fid, k", [("v4", 2), ("v5", 3), ("v6", 4), ("v7", 5)])
def test_regularity_jump_at_origin(fid, k):
    # v^(k) jumps at 0 for the C^(k-1) functions; only v'' is available, so
    # check the one-sided slopes of the highest available derivative instead
    tf = get_function(fid)
    h = 1e-6
    if k == 2:
        assert abs(tf.d2v(h) - tf.d2v(-h)) > 1e-3
    else:
        assert abs(tf.d2v(h) - tf.d2v(-h)) < 1e-3


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 3.0), st.floats(0.05, 3.0), st.floats(-200.0, 0.0))
def test_hyp1f1_against_mpmath(a, b, z):
    mpmath.mp.dps = 40
    ref = float(mpmath.hyp1f1(a, b, z))
    assert hyp1f1(a, b, z) == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_hyp1f1_pole_of_gamma_handled():
    # b - a = 0 makes the asymptotic Gamma factor singular; 1F1(a; a; z) = e^z
    assert hyp1f1(1.5, 1.5, -80.0) == pytest.approx(math.exp(-80.0), rel=1e-12)
