import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kiqr.metrics import selection_metrics, x1_selection_rate


def test_perfect_recovery():
    beta = np.array([1.0, 0.0, -0.5, 0.0])
    m = selection_metrics(beta, beta)
    assert (m.tp, m.fp, m.fn) == (2, 0, 0)
    assert m.f1 == 1.0
    assert m.mse == 0.0


def test_f1_formula():
    true = np.zeros(100)
    true[:20] = 1.0
    est = np.zeros(100)
    est[:18] = 1.0          # 18 of the 20 true
    est[50:52] = 0.3        # 2 false
    m = selection_metrics(est, true)
    assert (m.tp, m.fp, m.fn) == (18, 2, 2)
    assert m.f1 == pytest.approx(0.9)


def test_exclusion_rule():
    true = np.array([0.0, 1.0, 1.0])
    est = np.array([2.0, 1.0, 0.0])
    m = selection_metrics(est, true, excluded=(0,))
    assert (m.tp, m.fp, m.fn) == (1, 0, 1)
    # excluded coefficient contributes to nothing, including the mse
    assert m.mse == pytest.approx(np.mean([(1 - 1) ** 2, (0 - 1) ** 2]))


def test_empty_support_conventions():
    z = np.zeros(5)
    m = selection_metrics(z, z)
    assert m.f1 == 1.0 and m.mse == 0.0
    m2 = selection_metrics(np.array([1.0, 0, 0, 0, 0]), z)
    assert m2.f1 == 0.0
    # excluding every index leaves the empty convention
    m3 = selection_metrics(np.ones(3), np.ones(3), excluded=(0, 1, 2))
    assert m3.f1 == 1.0 and m3.mse == 0.0


def test_length_mismatch():
    with pytest.raises(ValueError):
        selection_metrics(np.zeros(3), np.zeros(4))


def test_sign_invariance_of_counts():
    true = np.array([1.0, -1.0, 0.0])
    est = np.array([-2.0, 0.5, 0.0])
    m = selection_metrics(est, true)
    assert (m.tp, m.fp, m.fn) == (2, 0, 0)
    assert m.f1 == 1.0
    assert m.mse > 0.0


@given(st.lists(st.booleans(), min_size=1, max_size=30),
       st.lists(st.booleans(), min_size=1, max_size=30))
def test_f1_bounds(sel, true):
    k = max(len(sel), len(true))
    est = np.zeros(k)
    tru = np.zeros(k)
    est[:len(sel)] = np.array(sel, dtype=float)
    tru[:len(true)] = np.array(true, dtype=float)
    m = selection_metrics(est, tru)
    assert 0.0 <= m.f1 <= 1.0
    if m.f1 == 1.0:
        assert m.fp == 0 and m.fn == 0


class _Fit:
    def __init__(self, support):
        self.support = np.asarray(support, dtype=int)


def test_x1_selection_rate():
    fits = [_Fit([0, 3]), _Fit([1]), _Fit([0])]
    assert x1_selection_rate(fits, 0) == pytest.approx(2 / 3)
    assert x1_selection_rate(fits, 7) == 0.0
    assert x1_selection_rate([_Fit([2])] * 4, 2) == 1.0
    assert x1_selection_rate([_Fit([k]) for k in range(100)], 999) == 0.0
    with pytest.raises(ValueError):
        x1_selection_rate([], 0)


def test_x1_rate_counting():
    fits = [_Fit([0]) for _ in range(67)] + [_Fit([]) for _ in range(33)]
    assert x1_selection_rate(fits, 0) == pytest.approx(0.67)
