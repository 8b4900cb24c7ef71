import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from kiqr.data import Dataset
from kiqr.losses import data_loss, grad_data_loss, huber_quantile_loss
from kiqr.penalties import ScadParams
from kiqr.solver import (FitConfig, PriorKnowledge, coordinate_descent,
                         curvature_bound, fit_kiqr, fit_lasso_qr, fit_oracle,
                         fit_prior_informed, soft_threshold)
from kiqr.tuning import lambda_max


def test_curvature_bound_values():
    X = np.ones((4, 1))
    assert curvature_bound(X, 0.01)[0] == pytest.approx(200.0)
    Xi = np.column_stack([np.ones(100), np.zeros((100, 0))])
    assert curvature_bound(Xi, 0.01)[0] == pytest.approx(200.0)
    rng = np.random.default_rng(0)
    M = rng.standard_normal((30, 4))
    assert curvature_bound(M, 0.02) == pytest.approx(curvature_bound(M, 0.01) / 2)
    M2 = M.copy()
    M2[:, 2] = 0.0
    with pytest.raises(ValueError, match="column 2"):
        curvature_bound(M2, 0.01)


@given(st.floats(-50, 50), st.floats(0, 50))
def test_soft_threshold_identities(z, t):
    assert soft_threshold(z, 0.0) == z
    if abs(z) <= t:
        assert soft_threshold(z, t) == 0.0
    else:
        assert soft_threshold(z, t) == pytest.approx(np.sign(z) * (abs(z) - t))


def test_single_update_matches_hand_formula():
    # one sweep over one free coordinate reproduces the proximal update
    rng = np.random.default_rng(1)
    n = 12
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    beta0 = np.array([0.0, 0.4])
    tau, gamma, w = 0.7, 0.01, 0.15
    fit = coordinate_descent(x[:, None], y, tau=tau, gamma=gamma,
                             weights=np.array([w]), beta_start=beta0,
                             max_sweeps=1, update_mask=[False, True])
    D = 2.0 / (n * gamma) * np.sum(x ** 2)
    g = grad_data_loss(beta0, x[:, None], y, tau, gamma)[1]
    expected = soft_threshold(beta0[1] - g / D, w / D)
    assert fit.beta[1] == pytest.approx(expected, abs=1e-12)


def test_intercept_only_median():
    y = np.array([1.0, 2.0, 9.0])
    fit = coordinate_descent(np.zeros((3, 0)), y, tau=0.5, gamma=1e-4,
                             tol=1e-9, max_sweeps=10 ** 6, record_trace=False)
    # independent oracle: 1-D grid minimization of the smoothed loss
    grid = np.linspace(0.0, 10.0, 100001)
    vals = [np.mean(huber_quantile_loss(y - b, 0.5, 1e-4)) for b in grid]
    b_star = grid[int(np.argmin(vals))]
    assert abs(fit.beta[0] - b_star) < 1e-3
    assert abs(fit.beta[0] - 2.0) < 1e-3


def test_huge_weights_give_intercept_only():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((40, 6))
    y = rng.standard_normal(40)
    fit = coordinate_descent(X, y, tau=0.6, weights=np.full(6, 1e6))
    assert fit.support.size == 0
    assert fit.beta[0] != 0.0


def test_brute_force_small_grid():
    # coarse module-level check; the full-resolution one runs in acceptance
    from conftest import grid_min_surrogate
    rng = np.random.default_rng(3)
    n = 30
    X = rng.standard_normal((n, 2))
    y = 0.8 * X[:, 0] + 0.4 * rng.standard_normal(n)
    w = np.full(2, 0.06)
    fit = coordinate_descent(X, y, tau=0.6, gamma=0.01, weights=w,
                             tol=1e-9, max_sweeps=200000, record_trace=False)
    gm = grid_min_surrogate(X, y, np.zeros(0), False, 0.0, 0.6, 0.01, w,
                            -3.0, 0.05, 121)
    assert fit.objective_trace[-1] <= gm + 1e-3


def test_unpenalized_matches_generic_optimizer():
    rng = np.random.default_rng(4)
    n, d = 60, 4
    X = rng.standard_normal((n, d))
    y = X @ np.array([1.0, -0.5, 0.0, 0.3]) + 0.3 * rng.standard_normal(n)
    tau = 0.7
    fit = fit_lasso_qr(Dataset.from_arrays(X, y), tau=tau, lam=0.0,
                       tol=1e-9, max_sweeps=300000)
    res = minimize(lambda b: data_loss(b, X, y, tau),
                   np.zeros(d + 1),
                   jac=lambda b: grad_data_loss(b, X, y, tau),
                   method="BFGS", options={"gtol": 1e-10, "maxiter": 2000})
    assert data_loss(fit.beta, X, y, tau) <= res.fun + 1e-4
    assert np.max(np.abs(fit.beta - res.x)) < 1e-4


def test_lambda_max_boundary():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((50, 12))
    y = X[:, 0] + 0.5 * rng.standard_normal(50)
    ds = Dataset.from_arrays(X, y)
    lmax = lambda_max(ds, tau=0.7)
    hi = fit_lasso_qr(ds, tau=0.7, lam=1.001 * lmax, tol=1e-9, max_sweeps=200000)
    assert hi.support.size == 0
    lo = fit_lasso_qr(ds, tau=0.7, lam=0.9 * lmax, tol=1e-9, max_sweeps=200000)
    assert lo.support.size >= 1


def test_objective_trace_monotone_and_fixed_point():
    rng = np.random.default_rng(6)
    n, d = 80, 40
    X = rng.standard_normal((n, d))
    y = X[:, :4] @ np.ones(4) + 0.5 * rng.standard_normal(n)
    fit = fit_lasso_qr(Dataset.from_arrays(X, y), tau=0.8, lam=0.05,
                       tol=1e-8, max_sweeps=200000)
    assert np.all(np.diff(fit.objective_trace) <= 1e-10)
    assert fit.converged
    # warm start from the solution is a fixed point
    Xs = (X - X.mean(0)) / X.std(0, ddof=1)
    beta_std = np.concatenate([[fit.beta[0] + X.mean(0) @ fit.beta[1:]],
                               fit.beta[1:] * X.std(0, ddof=1)])
    again = coordinate_descent(Xs, y, tau=0.8, weights=np.full(d, 0.05),
                               beta_start=beta_std, tol=1e-8, max_sweeps=5)
    assert again.converged
    assert again.sweeps_used == 1


def test_permutation_objective_agreement():
    rng = np.random.default_rng(7)
    n, d = 60, 25
    X = rng.standard_normal((n, d))
    y = X[:, :3] @ np.ones(3) + 0.4 * rng.standard_normal(n)
    fit = fit_lasso_qr(Dataset.from_arrays(X, y), tau=0.6, lam=0.07,
                       tol=1e-10, max_sweeps=400000)
    perm = rng.permutation(d)
    fit_p = fit_lasso_qr(Dataset.from_arrays(X[:, perm], y), tau=0.6, lam=0.07,
                         tol=1e-10, max_sweeps=400000)
    assert fit.objective_trace[-1] == pytest.approx(fit_p.objective_trace[-1],
                                                    abs=1e-8)
    assert set(perm[fit_p.support].tolist()) == set(fit.support.tolist())


def test_prior_informed_empty_set_equals_staged_fit():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((50, 10))
    y = X[:, 0] + 0.3 * rng.standard_normal(50)
    ds = Dataset.from_arrays(X, y)
    a = fit_prior_informed(ds, tau=0.5, lam=0.08, prior_set=())
    b = fit_kiqr(ds, FitConfig(tau=0.5, scad=ScadParams(0.08)))
    assert np.array_equal(a.beta, b.beta)


def test_prior_informed_full_set():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((60, 5))
    y = X @ np.array([1.0, 0.5, 0, 0, -1.0]) + 0.2 * rng.standard_normal(60)
    ds = Dataset.from_arrays(X, y)
    fit = fit_prior_informed(ds, tau=0.5, lam=5.0, prior_set=range(5))
    assert fit.support.size == 5  # nothing penalized away
    small = Dataset.from_arrays(X[:4], y[:4])
    with pytest.raises(ValueError, match="underdetermined"):
        fit_prior_informed(small, tau=0.5, lam=1.0, prior_set=range(5))


def test_prior_informed_keeps_strong_prior_set():
    rng = np.random.default_rng(10)
    n, d = 100, 30
    X = rng.standard_normal((n, d))
    y = X[:, :4] @ np.full(4, 2.0) + 0.3 * rng.standard_normal(n)
    ds = Dataset.from_arrays(X, y)
    fit = fit_prior_informed(ds, tau=0.5, lam=0.2, prior_set=(0, 1, 2, 3))
    assert set(fit.support.tolist()) >= {0, 1, 2, 3}


def test_kiqr_zeta_zero_reduction():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((40, 8))
    y = X[:, 0] + 0.3 * rng.standard_normal(40)
    ds = Dataset.from_arrays(X, y)
    lasso = fit_lasso_qr(ds, tau=0.7, lam=0.09)
    one_pass = fit_kiqr(ds, FitConfig(tau=0.7, scad=ScadParams(0.09),
                                      lla_passes=1))
    assert np.array_equal(lasso.beta, one_pass.beta)
    assert lasso.sweeps_used == one_pass.sweeps_used


def test_kiqr_zeta_one_reproduces_prior_predictions():
    rng = np.random.default_rng(12)
    n, d = 60, 5
    X = rng.standard_normal((n, d))
    y = X @ np.array([1.0, 0, 0, 0.5, 0]) + 0.4 * rng.standard_normal(n)
    beta_p = np.concatenate([[0.2], rng.standard_normal(d)])
    prior = PriorKnowledge(prior_coefficients=beta_p)
    cfg = FitConfig(tau=0.5, zeta=1.0, scad=ScadParams(0.05), tol=1e-9,
                    max_sweeps=300000)
    fit = fit_kiqr(Dataset.from_arrays(X, y), cfg, prior)
    yp = beta_p[0] + X @ beta_p[1:]
    gap = np.linalg.norm(fit.predict(X) - yp) / np.sqrt(n)
    assert gap <= 1e-3


def test_kiqr_zeta_one_warns_high_dim():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((10, 20))
    y = rng.standard_normal(10)
    prior = PriorKnowledge(prior_predictions=np.zeros(10))
    cfg = FitConfig(tau=0.5, zeta=1.0, scad=ScadParams(0.05), max_sweeps=200)
    with pytest.warns(UserWarning, match="underdetermined"):
        fit_kiqr(Dataset.from_arrays(X, y), cfg, prior)


def test_prior_knowledge_validation():
    with pytest.raises(ValueError, match="exactly one"):
        PriorKnowledge()
    with pytest.raises(ValueError, match="exactly one"):
        PriorKnowledge(prior_set=[1], prior_predictions=np.zeros(3))


def test_coordinate_descent_contracts():
    X = np.ones((5, 2))
    y = np.ones(5)
    with pytest.raises(ValueError, match="prior predictions"):
        coordinate_descent(X, y, tau=0.5, zeta=0.5)
    with pytest.raises(ValueError, match="prior predictions"):
        coordinate_descent(X, y, tau=0.5, zeta=0.0, prior_predictions=y)
    with pytest.raises(ValueError, match="weights"):
        coordinate_descent(X, y, tau=0.5, weights=np.ones(3))


def test_nonfinite_objective_raises():
    X = np.ones((4, 1))
    y = np.array([np.inf, 1.0, 2.0, 3.0])
    with pytest.raises(FloatingPointError, match="non-finite"):
        coordinate_descent(X, y, tau=0.5, weights=np.zeros(1))


def test_oracle_fit():
    rng = np.random.default_rng(14)
    n, d = 120, 40
    X = rng.standard_normal((n, d))
    true = np.zeros(d)
    true[:5] = 2.0
    y = X @ true + 0.5 * rng.standard_normal(n)
    ds = Dataset.from_arrays(X, y)
    cfg = FitConfig(tau=0.5, scad=ScadParams(0.1), tol=1e-8, max_sweeps=200000)
    oracle = fit_oracle(ds, cfg, support=range(5))
    assert set(oracle.support.tolist()) == set(range(5))
    lasso = fit_lasso_qr(ds, tau=0.5, lam=0.1, tol=1e-8, max_sweeps=200000)
    mse_oracle = np.mean((oracle.beta[1:] - true) ** 2)
    mse_lasso = np.mean((lasso.beta[1:] - true) ** 2)
    assert mse_oracle < mse_lasso
    empty = fit_oracle(ds, cfg, support=())
    assert empty.support.size == 0 and empty.beta[0] != 0.0
    with pytest.raises(ValueError, match="underdetermined"):
        fit_oracle(Dataset.from_arrays(X[:4], y[:4]), cfg, support=range(5))


def test_descent_never_increases_objective_with_prior():
    rng = np.random.default_rng(15)
    n, d = 50, 30
    X = rng.standard_normal((n, d))
    y = X[:, 0] + 0.5 * rng.standard_normal(n)
    yp = X[:, 0]
    fit = coordinate_descent(X, y, tau=0.7, zeta=0.4, prior_predictions=yp,
                             weights=np.full(d, 0.05), max_sweeps=5000)
    assert np.all(np.diff(fit.objective_trace) <= 1e-10)
