"""Scikit-learn estimator wrapping the knowledge-integration quantile fit."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .losses import DEFAULT_GAMMA, check_loss
from .penalties import ScadParams
from .solver import FitConfig, PriorKnowledge, fit_kiqr
from .tuning import TuningGrid, fit_kiqr_tuned


class KIQRRegressor(BaseEstimator, RegressorMixin):
    """Penalized quantile regression with optional prior-knowledge blending.

    Fits the conditional ``tau``-quantile with a smoothed check loss and a
    folded-concave penalty solved by reweighted-L1 coordinate descent.  Prior
    knowledge enters either as a feature set (column indices left unpenalized
    in a first-stage fit), a coefficient vector, or a prediction vector; the
    blend weight ``zeta`` trades the data loss against the prior loss.

    Leave ``lam`` (and optionally ``zeta``) unset to tune them on a grid by
    the information criterion (``tune='qbic'``) or cross-validation
    (``tune='cv'``).

    Parameters
    ----------
    tau : quantile level in (0, 1).
    zeta : prior weight in [0, 1]; None tunes it over ``zeta_grid`` when a
        prior is supplied (fixed at 0 otherwise).
    lam : penalty level; None tunes it on a geometric path.
    gamma : half-width of the smoothing zone of the check loss.
    scad_a : concavity knee of the penalty (> 2).
    prior_set, prior_coefficients, prior_predictions : at most one form of
        prior knowledge.
    lla_passes : total descent passes (the first is the plain L1 fit).
    tune : 'qbic' or 'cv', used when ``lam`` is None.
    random_state : seed for the cross-validation fold assignment.

    Attributes
    ----------
    coef_ : feature coefficients on the original scale.
    intercept_ : model intercept.
    support_ : column indices with nonzero coefficients.
    tuning_ : the tuning table when a grid search ran, else None.
    """

    def __init__(self, tau=0.5, zeta=None, lam=None, gamma=DEFAULT_GAMMA,
                 scad_a=3.7, prior_set=None, prior_coefficients=None,
                 prior_predictions=None, lla_passes=3, tune="qbic",
                 zeta_grid=None, n_lambda=50, lambda_min_ratio=0.01,
                 cv_folds=5, cv_rule="minimum", tol=1e-7, max_sweeps=100000,
                 random_state=0):
        self.tau = tau
        self.zeta = zeta
        self.lam = lam
        self.gamma = gamma
        self.scad_a = scad_a
        self.prior_set = prior_set
        self.prior_coefficients = prior_coefficients
        self.prior_predictions = prior_predictions
        self.lla_passes = lla_passes
        self.tune = tune
        self.zeta_grid = zeta_grid
        self.n_lambda = n_lambda
        self.lambda_min_ratio = lambda_min_ratio
        self.cv_folds = cv_folds
        self.cv_rule = cv_rule
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.random_state = random_state

    def _prior(self):
        given = [v for v in (self.prior_set, self.prior_coefficients,
                             self.prior_predictions) if v is not None]
        if not given:
            return None
        return PriorKnowledge(prior_set=self.prior_set,
                              prior_coefficients=self.prior_coefficients,
                              prior_predictions=self.prior_predictions)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        prior = self._prior()
        self.n_features_in_ = X.shape[1]

        if self.lam is None:
            if self.zeta is not None:
                zetas = (float(self.zeta),)
            elif prior is None:
                zetas = (0.0,)
            elif self.zeta_grid is not None:
                zetas = tuple(float(z) for z in self.zeta_grid)
            else:
                zetas = TuningGrid().zeta_values
            grid = TuningGrid(zeta_values=zetas, n_lambda=self.n_lambda,
                              lambda_min_ratio=self.lambda_min_ratio,
                              folds=self.cv_folds, rule=self.cv_rule)
            fit, tuning, step1 = fit_kiqr_tuned(
                X, tau=self.tau, gamma=self.gamma, prior=prior, grid=grid,
                scad_a=self.scad_a, lla_passes=self.lla_passes, tol=self.tol,
                max_sweeps=self.max_sweeps, criterion=self.tune,
                seed=self.random_state, y=y)
            self.tuning_ = tuning
            self.prior_fit_ = step1
            self.zeta_, self.lam_ = tuning.best_zeta, tuning.best_lambda
        else:
            zeta = 0.0 if self.zeta is None else float(self.zeta)
            config = FitConfig(tau=self.tau, zeta=zeta,
                               scad=ScadParams(lam=float(self.lam), a=self.scad_a),
                               gamma=self.gamma, tol=self.tol,
                               max_sweeps=self.max_sweeps,
                               lla_passes=self.lla_passes)
            fit = fit_kiqr(X, config, prior, y=y)
            self.tuning_ = None
            self.prior_fit_ = None
            self.zeta_, self.lam_ = zeta, float(self.lam)

        self.intercept_ = float(fit.beta[0])
        self.coef_ = fit.beta[1:].copy()
        self.support_ = fit.support.copy()
        self.objective_trace_ = fit.objective_trace
        self.sweeps_ = fit.sweeps_used
        self.converged_ = fit.converged
        self.fit_result_ = fit
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected "
                             f"{self.n_features_in_}")
        return self.intercept_ + X @ self.coef_

    def score(self, X, y):
        """Negative mean check loss (higher is better), the natural
        goodness-of-fit for a quantile model."""
        resid = np.asarray(y, dtype=float) - self.predict(X)
        return -float(np.mean(check_loss(resid, self.tau)))
