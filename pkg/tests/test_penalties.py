import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kiqr.penalties import ScadParams, l1_weights, lla_weights, scad_derivative


def test_scad_params_validation():
    with pytest.raises(ValueError):
        ScadParams(lam=-0.1)
    with pytest.raises(ValueError):
        ScadParams(lam=0.1, a=2.0)


def test_scad_derivative_branches():
    p = ScadParams(lam=0.1, a=3.7)
    assert scad_derivative(0.05, p) == pytest.approx(0.1)
    assert scad_derivative(0.2, p) == pytest.approx(0.17 / 0.27 * 0.1)
    assert scad_derivative(0.5, p) == 0.0
    assert scad_derivative(0.3, ScadParams(lam=0.0)) == 0.0


def test_scad_derivative_rejects_negative():
    with pytest.raises(ValueError):
        scad_derivative(-0.01, ScadParams(lam=0.1))


@given(st.floats(0, 2), st.floats(0.01, 1), st.floats(2.1, 10))
def test_scad_derivative_range_and_endpoints(b, lam, a):
    p = ScadParams(lam=lam, a=a)
    v = scad_derivative(b, p)
    assert 0.0 <= v <= lam
    assert scad_derivative(0.0, p) == lam
    assert scad_derivative(a * lam, p) == 0.0
    assert scad_derivative(a * lam + 1.0, p) == 0.0


def test_scad_derivative_continuous_nonincreasing():
    p = ScadParams(lam=0.1, a=3.7)
    grid = np.linspace(0, 0.6, 20001)
    vals = scad_derivative(grid, p)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.max(np.abs(np.diff(vals))) < 1e-4  # no jumps on a fine grid


def test_lla_weights_cases():
    p = ScadParams(lam=0.1, a=3.7)
    assert np.allclose(lla_weights(np.zeros(5), p), 0.1)
    assert np.allclose(lla_weights(np.array([0.5, -0.7, 1.0]), p), 0.0)
    w = lla_weights(np.array([0.05, 0.2, 0.5]), p)
    assert w == pytest.approx([0.1, 0.17 / 0.27 * 0.1, 0.0])


def test_lla_at_zero_equals_l1():
    p = ScadParams(lam=0.07)
    assert np.array_equal(lla_weights(np.zeros(8), p), l1_weights(8, 0.07))


def test_l1_weights():
    assert np.allclose(l1_weights(3, 0.1), [0.1, 0.1, 0.1])
    assert np.all(l1_weights(4, 0.0) == 0.0)
    with pytest.raises(ValueError):
        l1_weights(3, -0.5)
    # masking semantics: zeroed entries mean unpenalized coordinates
    w = l1_weights(5, 0.2)
    w[[1, 3]] = 0.0
    assert list(w) == [0.2, 0.0, 0.2, 0.0, 0.2]
