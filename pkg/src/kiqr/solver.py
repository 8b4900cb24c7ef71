"""Cyclic coordinate-descent solver and the estimators built on it.

Four fitting routines share one compiled engine: the plain L1-penalized
smoothed quantile regression (the initial estimator), the prior-informed fit
with an unpenalized prior set, the knowledge-integration fit blending the
data loss with a prior-prediction loss, and the restricted-support fit used
as a testing oracle.

All public fits standardize columns internally (constant columns are pinned
at zero) and report coefficients on the original scale; the recorded
objective trace lives on the standardized scale the engine works on.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .data import Dataset, column_standardize
from .losses import DEFAULT_GAMMA
from .penalties import ScadParams, l1_weights, lla_weights


@dataclass(frozen=True)
class FitConfig:
    """Quantile level, prior weight, penalty, smoothing and solver tolerances."""

    tau: float
    zeta: float = 0.0
    scad: ScadParams = field(default_factory=lambda: ScadParams(0.1))
    gamma: float = DEFAULT_GAMMA
    tol: float = 1e-7
    max_sweeps: int = 10000
    lla_passes: int = 3

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {self.tau}")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"prior weight must lie in [0, 1], got {self.zeta}")
        if not self.gamma > 0:
            raise ValueError(f"smoothing half-width must be positive, got {self.gamma}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.lla_passes < 1:
            raise ValueError("lla_passes must be at least 1")


@dataclass(frozen=True)
class PriorKnowledge:
    """External knowledge in exactly one of three forms.

    prior_set : 0-based column indices of features declared important; they
        stay unpenalized while the prior-informed estimator is fitted.
    prior_coefficients : full coefficient vector (intercept first) from an
        earlier study; turned into predictions directly.
    prior_predictions : per-observation predictions from any prior model.
    """

    prior_set: np.ndarray = None
    prior_coefficients: np.ndarray = None
    prior_predictions: np.ndarray = None

    def __post_init__(self):
        given = [v is not None for v in
                 (self.prior_set, self.prior_coefficients, self.prior_predictions)]
        if sum(given) != 1:
            raise ValueError("exactly one of prior_set, prior_coefficients, "
                             "prior_predictions must be provided")
        if self.prior_set is not None:
            object.__setattr__(self, "prior_set",
                               np.unique(np.asarray(self.prior_set, dtype=int)))
        if self.prior_coefficients is not None:
            object.__setattr__(self, "prior_coefficients",
                               np.asarray(self.prior_coefficients, dtype=float))
        if self.prior_predictions is not None:
            object.__setattr__(self, "prior_predictions",
                               np.asarray(self.prior_predictions, dtype=float))


@dataclass
class FitResult:
    """Solver output.

    beta is on the original data scale, intercept first; support holds the
    0-based feature (column) indices with exactly nonzero coefficients.  The
    objective trace records the surrogate objective of the final descent run
    (initial value first, then one entry per sweep) on the standardized scale.
    """

    beta: np.ndarray
    support: np.ndarray
    objective_trace: np.ndarray
    sweeps_used: int
    converged: bool

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return self.beta[0] + X @ self.beta[1:]


def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0), the proximal map of t * |.|."""
    z = np.asarray(z, dtype=float)
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return float(out) if out.ndim == 0 else out


def curvature_bound(X_with_intercept, gamma):
    """Per-coordinate curvature majorizer 2/(n*gamma) * sum_i x_ij^2."""
    X = np.asarray(X_with_intercept, dtype=float)
    if not gamma > 0:
        raise ValueError(f"smoothing half-width must be positive, got {gamma}")
    n = X.shape[0]
    D = (2.0 / (n * gamma)) * np.sum(X * X, axis=0)
    if np.any(D == 0.0):
        j = int(np.flatnonzero(D == 0.0)[0])
        raise ValueError(f"zero curvature for column {j}: all-zero column in the design")
    return D


def _check_status(status, sweeps):
    if status == _engine.STATUS_DRIFT:
        raise RuntimeError("incremental residuals drifted from recomputed values "
                           f"beyond {_engine.RESYNC_TOL} after {sweeps} sweeps")
    if status == _engine.STATUS_NONFINITE:
        raise FloatingPointError("non-finite surrogate objective: data pathology "
                                 "(check for extreme values in X or y)")


def coordinate_descent(X, y, tau, gamma=DEFAULT_GAMMA, zeta=0.0,
                       prior_predictions=None, weights=None, beta_start=None,
                       tol=1e-7, max_sweeps=10000, update_mask=None,
                       record_trace=True):
    """Run the engine on the design exactly as given (no standardization).

    A column of ones is prepended internally; ``weights`` has one entry per
    feature column (the intercept is never penalized) and ``beta_start`` /
    the returned coefficients are length d+1, intercept first.  Coordinates
    with ``update_mask`` False stay at their starting value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be n-by-d and y length n")
    n, d = X.shape
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"prior weight must lie in [0, 1], got {zeta}")
    if (prior_predictions is None) != (zeta == 0.0):
        raise ValueError("prior predictions must be supplied exactly when the "
                         "prior weight is positive")
    if weights is None:
        weights = np.zeros(d)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (d,):
        raise ValueError(f"weights must have length {d}, got {weights.shape}")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and nonnegative")

    Xi = np.asfortranarray(np.column_stack([np.ones(n), X]))
    D = curvature_bound(Xi, gamma)
    return _run_engine(Xi, y, tau, gamma, zeta, prior_predictions, weights, D,
                       beta_start, tol, max_sweeps, update_mask, record_trace)


def _run_engine(Xi, y, tau, gamma, zeta, prior_predictions, weights, D,
                beta_start, tol, max_sweeps, update_mask, record_trace=True):
    """Shared engine invocation on a ready design (intercept column present)."""
    n, p = Xi.shape
    beta = np.zeros(p) if beta_start is None else np.array(beta_start, dtype=float)
    if beta.shape != (p,):
        raise ValueError(f"beta_start must have length {p}, got {beta.shape}")
    if update_mask is None:
        updatable = np.ones(p, dtype=bool)
    else:
        updatable = np.asarray(update_mask, dtype=bool).copy()
        if updatable.shape != (p,):
            raise ValueError(f"update_mask must have length {p}")
    thr = np.empty(p)
    thr[0] = 0.0
    thr[1:] = (1.0 - zeta) * weights
    use_prior = zeta > 0.0
    yp = np.zeros(0) if prior_predictions is None else np.asarray(prior_predictions, dtype=float)
    if use_prior and yp.shape != (n,):
        raise ValueError(f"prior predictions must have length {n}, got {yp.shape}")
    trace = np.empty(int(max_sweeps) + 1 if record_trace else 2)
    sweeps, converged, tlen, status = _engine.run_cd(
        Xi, y, yp, use_prior, float(zeta), float(tau), float(gamma), thr, D,
        beta, updatable, float(tol), int(max_sweeps), trace, bool(record_trace))
    _check_status(status, sweeps)
    support = np.flatnonzero(beta[1:] != 0.0)
    return FitResult(beta=beta, support=support,
                     objective_trace=trace[:tlen].copy(),
                     sweeps_used=int(sweeps), converged=bool(converged))


class _Workspace:
    """Standardized design shared by every fit on the same data."""

    __slots__ = ("Xi", "y", "means", "scales", "constant", "D", "base_mask",
                 "n", "d", "X_orig")

    def __init__(self, X, y, gamma):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be n-by-d and y length n")
        Xs, stz = column_standardize(X)
        self.n, self.d = X.shape
        self.X_orig = X
        self.Xi = np.asfortranarray(np.column_stack([np.ones(self.n), Xs]))
        self.y = np.ascontiguousarray(y)
        self.means, self.scales, self.constant = stz.means, stz.scales, stz.constant
        D = (2.0 / (self.n * gamma)) * np.sum(self.Xi * self.Xi, axis=0)
        # Constant columns are excluded from updates; keep their curvature
        # entry harmless instead of zero.
        D[np.flatnonzero(np.concatenate([[False], self.constant]))] = 1.0
        self.D = D
        self.base_mask = np.concatenate([[True], ~self.constant])

    def to_original(self, beta_std):
        coef = beta_std[1:] / self.scales
        intercept = beta_std[0] - float(self.means @ coef)
        return np.concatenate([[intercept], coef])

    def fit_from_std(self, beta_std, trace, sweeps, converged):
        beta = self.to_original(beta_std)
        support = np.flatnonzero(beta_std[1:] != 0.0)
        return FitResult(beta=beta, support=support, objective_trace=trace,
                         sweeps_used=sweeps, converged=converged)


def _ws_run(ws, tau, gamma, zeta, yp, weights, beta_std, tol, max_sweeps,
            extra_mask=None, record_trace=True):
    """One engine run on the workspace, returning raw standardized output."""
    p = ws.d + 1
    mask = ws.base_mask if extra_mask is None else (ws.base_mask & extra_mask)
    thr = np.empty(p)
    thr[0] = 0.0
    thr[1:] = (1.0 - zeta) * weights
    use_prior = zeta > 0.0
    ypa = np.zeros(0) if yp is None else np.asarray(yp, dtype=float)
    beta = np.zeros(p) if beta_std is None else np.array(beta_std, dtype=float)
    trace = np.empty(int(max_sweeps) + 1 if record_trace else 2)
    sweeps, converged, tlen, status = _engine.run_cd(
        ws.Xi, ws.y, ypa, use_prior, float(zeta), float(tau), float(gamma),
        thr, ws.D, beta, mask, float(tol), int(max_sweeps), trace,
        bool(record_trace))
    _check_status(status, sweeps)
    return beta, trace[:tlen].copy(), int(sweeps), bool(converged)


def _lla_fit(ws, tau, gamma, lam, scad_a, lla_passes, tol, max_sweeps, *,
             zeta=0.0, yp=None, unpenalized=None, beta_std_start=None,
             record_trace=True):
    """Weighted-L1 passes of the folded-concave surrogate.

    Pass 1 is the plain L1 problem (the initial estimator: data loss only,
    every feature penalized at ``lam`` except an explicit unpenalized set);
    each later pass rebuilds the weights from the current coefficients and
    re-solves with the prior term switched on.
    """
    scad = ScadParams(lam=lam, a=scad_a)
    beta_std = beta_std_start
    out = None
    for k in range(1, lla_passes + 1):
        if k == 1:
            w = l1_weights(ws.d, lam)
        else:
            w = lla_weights(beta_std[1:], scad)
        if unpenalized is not None and len(unpenalized):
            w = w.copy()
            w[unpenalized] = 0.0
        zk = 0.0 if k == 1 else zeta
        ypk = None if k == 1 else yp
        beta_std, trace, sweeps, converged = _ws_run(
            ws, tau, gamma, zk, ypk, w, beta_std, tol, max_sweeps,
            record_trace=record_trace)
        out = (beta_std, trace, sweeps, converged)
    return out


def _as_xy(data, y=None):
    if y is None:
        if not isinstance(data, Dataset):
            raise TypeError("pass a Dataset, or supply X and y separately")
        return data.X, data.y
    return np.asarray(data, dtype=float), np.asarray(y, dtype=float)


def fit_lasso_qr(data, tau, lam, gamma=DEFAULT_GAMMA, tol=1e-7,
                 max_sweeps=10000, y=None):
    """L1-penalized smoothed quantile regression from a zero start."""
    X, y = _as_xy(data, y)
    if lam < 0:
        raise ValueError(f"penalty level must be nonnegative, got {lam}")
    ws = _Workspace(X, y, gamma)
    beta_std, trace, sweeps, converged = _ws_run(
        ws, tau, gamma, 0.0, None, l1_weights(ws.d, lam), None, tol, max_sweeps)
    return ws.fit_from_std(beta_std, trace, sweeps, converged)


def fit_prior_informed(data, tau, lam, prior_set, gamma=DEFAULT_GAMMA,
                       scad_a=3.7, lla_passes=3, tol=1e-7, max_sweeps=10000,
                       y=None):
    """Penalized fit in which the prior-set features carry no penalty."""
    X, y = _as_xy(data, y)
    ws = _Workspace(X, y, gamma)
    prior_set = np.unique(np.asarray(prior_set, dtype=int)) if len(np.atleast_1d(prior_set)) \
        else np.empty(0, dtype=int)
    if prior_set.size and (prior_set.min() < 0 or prior_set.max() >= ws.d):
        raise ValueError(f"prior-set index out of range [0, {ws.d})")
    if prior_set.size == ws.d and ws.n <= ws.d:
        raise ValueError("unpenalized fit underdetermined: every feature is in "
                         f"the prior set but n={ws.n} <= d={ws.d}")
    beta_std, trace, sweeps, converged = _lla_fit(
        ws, tau, gamma, lam, scad_a, lla_passes, tol, max_sweeps,
        unpenalized=prior_set)
    return ws.fit_from_std(beta_std, trace, sweeps, converged)


def resolve_prior(prior: PriorKnowledge, data, tau, lam, gamma=DEFAULT_GAMMA,
                  scad_a=3.7, lla_passes=3, tol=1e-7, max_sweeps=10000, y=None):
    """Turn any prior-knowledge form into a per-observation prediction vector.

    A prior set is first fitted (unpenalized on the set) at the given penalty
    level; coefficient vectors are pushed through the design directly.
    """
    X, y = _as_xy(data, y)
    n, d = X.shape
    if prior.prior_predictions is not None:
        yp = prior.prior_predictions
        if yp.shape != (n,):
            raise ValueError(f"prior predictions must have length {n}, got {yp.shape}")
        return yp
    if prior.prior_coefficients is not None:
        bc = prior.prior_coefficients
        if bc.shape != (d + 1,):
            raise ValueError(f"prior coefficients must have length {d + 1}, got {bc.shape}")
        return bc[0] + X @ bc[1:]
    step1 = fit_prior_informed(data, tau, lam, prior.prior_set, gamma=gamma,
                               scad_a=scad_a, lla_passes=lla_passes, tol=tol,
                               max_sweeps=max_sweeps, y=y)
    return step1.predict(X)


def fit_kiqr(data, config: FitConfig, prior: PriorKnowledge = None, y=None):
    """Knowledge-integration fit: initial L1 pass, then reweighted passes
    blending the data loss with the prior-prediction loss at weight zeta."""
    X, y = _as_xy(data, y)
    n, d = X.shape
    if config.zeta > 0.0 and prior is None:
        raise ValueError("a positive prior weight requires prior knowledge")
    yp = None
    if config.zeta > 0.0:
        yp = resolve_prior(prior, X, config.tau, config.scad.lam,
                           gamma=config.gamma, lla_passes=config.lla_passes,
                           scad_a=config.scad.a, tol=config.tol,
                           max_sweeps=config.max_sweeps, y=y)
        if config.zeta == 1.0 and d >= n:
            warnings.warn("prior weight 1 removes the selection penalty; the fit "
                          f"is underdetermined with d={d} >= n={n}", stacklevel=2)
    ws = _Workspace(X, y, config.gamma)
    beta_std, trace, sweeps, converged = _lla_fit(
        ws, config.tau, config.gamma, config.scad.lam, config.scad.a,
        config.lla_passes, config.tol, config.max_sweeps,
        zeta=config.zeta, yp=yp)
    return ws.fit_from_std(beta_std, trace, sweeps, converged)


def fit_oracle(data, config: FitConfig, prior: PriorKnowledge = None,
               support=(), y=None):
    """Unpenalized fit restricted to a given support (testing oracle)."""
    X, y = _as_xy(data, y)
    n, d = X.shape
    support = np.unique(np.asarray(support, dtype=int)) if len(np.atleast_1d(support)) \
        else np.empty(0, dtype=int)
    if support.size and (support.min() < 0 or support.max() >= d):
        raise ValueError(f"support index out of range [0, {d})")
    if support.size >= n:
        raise ValueError(f"underdetermined restricted fit: |support|={support.size} "
                         f">= n={n}")
    yp = None
    if config.zeta > 0.0:
        if prior is None:
            raise ValueError("a positive prior weight requires prior knowledge")
        yp = resolve_prior(prior, X, config.tau, config.scad.lam,
                           gamma=config.gamma, lla_passes=config.lla_passes,
                           scad_a=config.scad.a, tol=config.tol,
                           max_sweeps=config.max_sweeps, y=y)
    ws = _Workspace(X, y, config.gamma)
    mask = np.zeros(d + 1, dtype=bool)
    mask[0] = True
    mask[support + 1] = True
    beta_std, trace, sweeps, converged = _ws_run(
        ws, config.tau, config.gamma, config.zeta, yp, np.zeros(d), None,
        config.tol, config.max_sweeps, extra_mask=mask)
    return ws.fit_from_std(beta_std, trace, sweeps, converged)
