"""Tuning-parameter selection over the (prior weight, penalty level) grid.

Two criteria: a high-dimensional quantile BIC evaluated on the exact check
loss, and K-fold cross-validation with minimum and one-standard-error rules.
Paths are walked from large penalties downward with warm starts; scores of
failed cells are recorded as +inf so they can never be selected.

When the prior is a feature set, its first-stage fit is re-run at every
penalty level of the path (the staged fit uses one penalty level for both
stages), so each grid cell sees the prior predictions belonging to its own
penalty.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from .losses import DEFAULT_GAMMA, check_loss, huber_quantile_grad
from .penalties import l1_weights, lla_weights
from .solver import (FitConfig, FitResult, PriorKnowledge, ScadParams,
                     _as_xy, _lla_fit, _Workspace, _ws_run)

DEFAULT_ZETAS = tuple(round(0.1 * k, 10) for k in range(10))


def _path_budget(beta_start):
    """Descent budget for a path fit, set by the size of its starting support.

    Grid cells are ranked, not reported, so only the competitive sparse
    region needs tight convergence; dense cells get a bounded budget and
    score conservatively (an under-converged cell inflates its own loss
    term, which can only demote it).  The selected cell is always refitted
    at full precision from a zero start.
    """
    active = int(np.count_nonzero(beta_start[1:])) if beta_start is not None else 0
    if active <= 60:
        return 2e-6, 8000
    if active <= 150:
        return 1e-5, 1500
    return 1e-5, 400


def _quantile_start(ws, tau):
    """Intercept-only starting point: the sample quantile of the response."""
    start = np.zeros(ws.d + 1)
    start[0] = float(np.quantile(ws.y, tau))
    return start


@dataclass(frozen=True)
class TuningGrid:
    """Search grid: prior weights, per-weight penalty paths, CV layout.

    ``lambda_values`` may map each prior weight to an explicit descending
    penalty path; when absent, a geometric path of ``n_lambda`` points from
    the data-driven maximum down to ``lambda_min_ratio`` times it is built
    per weight.  ``include_zeta_one`` opt-in adds prior weight 1.0, which is
    safe only when n exceeds d (the penalty vanishes there).
    """

    zeta_values: tuple = DEFAULT_ZETAS
    lambda_values: dict = None
    n_lambda: int = 50
    lambda_min_ratio: float = 0.01
    folds: int = 5
    rule: str = "minimum"
    include_zeta_one: bool = False

    def __post_init__(self):
        zs = tuple(float(z) for z in self.zeta_values)
        if self.include_zeta_one and 1.0 not in zs:
            zs = zs + (1.0,)
        object.__setattr__(self, "zeta_values", zs)
        if not zs:
            raise ValueError("the prior-weight grid is empty")
        if any(not 0.0 <= z <= 1.0 for z in zs):
            raise ValueError("prior weights must lie in [0, 1]")
        if list(zs) != sorted(zs):
            raise ValueError("prior weights must be ascending")
        if self.lambda_values is not None:
            for z, lams in self.lambda_values.items():
                lams = tuple(float(v) for v in lams)
                if not lams:
                    raise ValueError(f"empty penalty path for prior weight {z}")
                if any(v <= 0 for v in lams):
                    raise ValueError("penalty paths must be positive")
                if list(lams) != sorted(lams, reverse=True):
                    raise ValueError("penalty paths must be descending")
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be at least 1")
        if not 0.0 < self.lambda_min_ratio <= 1.0:
            raise ValueError("lambda_min_ratio must lie in (0, 1]")
        if self.folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")
        if self.rule not in ("minimum", "one_se"):
            raise ValueError(f"rule must be 'minimum' or 'one_se', got {self.rule!r}")


@dataclass
class TuningResult:
    """Chosen cell plus the full score table (one row per prior weight)."""

    best_zeta: float
    best_lambda: float
    criterion: str
    score_table: list = field(default_factory=list)


def qbic(data, fit: FitResult, tau, y=None, n_candidates=None):
    """log of the total check loss plus a dimension-aware support penalty.

    The support size excludes the intercept; ``n_candidates`` defaults to the
    number of features in the design (the searched space).
    """
    X, y = _as_xy(data, y)
    n, d = X.shape
    d_eff = int(n_candidates) if n_candidates is not None else d
    if n < 3:
        raise ValueError(f"criterion needs n >= 3, got {n}")
    if d_eff < 2:
        raise ValueError(f"criterion needs at least 2 candidate features, got {d_eff}")
    resid = y - fit.predict(X)
    total = float(np.sum(check_loss(resid, tau)))
    if total <= 0.0:
        warnings.warn("zero check loss (perfect interpolation); criterion is -inf",
                      stacklevel=2)
        return float("-inf")
    nu = int(fit.support.size)
    return math.log(total) + nu * math.log(d_eff) * math.log(math.log(n)) / (2.0 * n)


def _combined_grad_sup(ws, tau, gamma, zeta, yp):
    """Max absolute penalized-coordinate gradient at the intercept-only fit."""
    mask = np.zeros(ws.d + 1, dtype=bool)
    mask[0] = True
    beta_std, _, _, _ = _ws_run(ws, tau, gamma, zeta, yp, np.zeros(ws.d),
                                _quantile_start(ws, tau), 1e-7, 200000,
                                extra_mask=mask, record_trace=False)
    r = ws.y - beta_std[0]
    h = huber_quantile_grad(r, tau, gamma)
    g = -(ws.Xi[:, 1:].T @ ((1.0 - zeta) * h)) / ws.n
    if zeta > 0.0:
        hp = huber_quantile_grad(np.asarray(yp, dtype=float) - beta_std[0], tau, gamma)
        g -= (ws.Xi[:, 1:].T @ (zeta * hp)) / ws.n
    return float(np.max(np.abs(g)))


def lambda_max(data, tau, gamma=DEFAULT_GAMMA, zeta=0.0, prior_predictions=None,
               y=None):
    """Smallest penalty that keeps every feature at zero (grid anchor).

    Computed from stationarity of the surrogate at the intercept-only fit:
    the largest mixed-gradient magnitude divided by (1 - zeta).
    """
    if zeta >= 1.0:
        raise ValueError("the penalty anchor is undefined at prior weight 1 "
                         "(the penalty term vanishes)")
    if (prior_predictions is None) != (zeta == 0.0):
        raise ValueError("prior predictions must be supplied exactly when the "
                         "prior weight is positive")
    X, y = _as_xy(data, y)
    ws = _Workspace(X, y, gamma)
    return _combined_grad_sup(ws, tau, gamma, zeta, prior_predictions) / (1.0 - zeta)


def _lambda_path(ws, tau, gamma, zeta, yp, grid: TuningGrid):
    if grid.lambda_values is not None and zeta in grid.lambda_values:
        return np.asarray(grid.lambda_values[zeta], dtype=float)
    if zeta >= 1.0:
        # The penalty term vanishes at prior weight 1; anchor on the data-only
        # gradient so the path is still well defined.
        lmax = _combined_grad_sup(ws, tau, gamma, 0.0, None)
    else:
        lmax = _combined_grad_sup(ws, tau, gamma, zeta, yp) / (1.0 - zeta)
    lmax = max(lmax, 1e-12)
    if grid.n_lambda == 1:
        return np.array([lmax])
    return np.geomspace(lmax, lmax * grid.lambda_min_ratio, grid.n_lambda)


class _LassoPathCache:
    """Initial-estimator path: plain L1 fits keyed by penalty level.

    Values are materialized in one descending sweep with warm starts, so the
    cached estimate for a given penalty never depends on lookup order.
    """

    def __init__(self, ws, tau, gamma):
        self.ws, self.tau, self.gamma = ws, tau, gamma
        self._beta = {}

    def materialize(self, lams):
        todo = sorted({float(v) for v in lams} - set(self._beta), reverse=True)
        known = sorted(self._beta, reverse=True)
        for lam in todo:
            larger = [v for v in known if v >= lam]
            if larger:
                start = self._beta[min(larger)].copy()
            else:
                start = _quantile_start(self.ws, self.tau)
            tol, cap = _path_budget(start)
            beta, _, _, _ = _ws_run(self.ws, self.tau, self.gamma, 0.0, None,
                                    l1_weights(self.ws.d, lam), start,
                                    tol, cap, record_trace=False)
            self._beta[lam] = beta
            known.append(lam)
            known.sort(reverse=True)

    def get(self, lam):
        return self._beta[float(lam)].copy()


class _PriorPathCache:
    """First-stage (prior-set unpenalized) fits and predictions along a path.

    Each entry is the staged fit's first stage at that penalty level; the
    prediction vector feeds the grid cells sharing the penalty.
    """

    def __init__(self, ws, tau, gamma, prior_set, scad_a, lla_passes):
        self.ws, self.tau, self.gamma = ws, tau, gamma
        self.prior_set = np.unique(np.asarray(prior_set, dtype=int))
        self.scad_a, self.lla_passes = scad_a, lla_passes
        self._beta = {}
        self._pred = {}

    def materialize(self, lams):
        todo = sorted({float(v) for v in lams} - set(self._beta), reverse=True)
        known = sorted(self._beta, reverse=True)
        for lam in todo:
            larger = [v for v in known if v >= lam]
            if larger:
                start = self._beta[min(larger)].copy()
            else:
                start = _quantile_start(self.ws, self.tau)
            tol, cap = _path_budget(start)
            beta, _, _, _ = _lla_fit(self.ws, self.tau, self.gamma, lam,
                                     self.scad_a, self.lla_passes, tol, cap,
                                     unpenalized=self.prior_set,
                                     beta_std_start=start, record_trace=False)
            self._beta[lam] = beta
            self._pred[lam] = self.ws.Xi @ beta
            known.append(lam)
            known.sort(reverse=True)

    def beta(self, lam):
        return self._beta[float(lam)].copy()

    def predictions(self, lam):
        return self._pred[float(lam)]


def _cell_fit(ws, cache, tau, gamma, zeta, yp, lam, scad_a, lla_passes,
              state=None):
    """One tuning cell: cached initial L1 pass, then the reweighted passes.

    The first reweighting takes its weights from the cell's own initial
    estimator but may continue the descent from the neighboring (larger
    penalty) cell's solution, the standard path warm start; later passes
    rebuild the weights from the current coefficients.  A single pass never
    sees the prior term, mirroring the staged fit.
    """
    init = cache.get(lam)
    if lla_passes == 1:
        return init
    scad = ScadParams(lam=lam, a=scad_a)
    beta_std = init if state is None else state
    anchor = init
    for _ in range(lla_passes - 1):
        w = lla_weights(anchor[1:], scad)
        tol, cap = _path_budget(beta_std)
        beta_std, _, _, _ = _ws_run(ws, tau, gamma, zeta, yp, w, beta_std,
                                    tol, cap, record_trace=False)
        anchor = beta_std
    return beta_std


def _score_qbic(ws, beta_std, tau, n_candidates):
    r = ws.y - ws.Xi @ beta_std
    total = float(np.sum(check_loss(r, tau)))
    nu = int(np.count_nonzero(beta_std[1:]))
    if total <= 0.0:
        return float("-inf")
    return math.log(total) + nu * math.log(n_candidates) * \
        math.log(math.log(ws.n)) / (2.0 * ws.n)


def _better(score, lam, zeta, best):
    if best is None:
        return True
    bscore, blam, bzeta = best
    if score != bscore:
        return score < bscore
    if lam != blam:
        return lam > blam
    return zeta < bzeta


class _PriorSource:
    """Per-cell prior predictions: fixed vector, or first-stage fit at the
    cell's own penalty level when the prior is a feature set."""

    def __init__(self, ws, tau, gamma, prior, scad_a, lla_passes):
        self.fixed = None
        self.cache = None
        if prior is None:
            return
        if prior.prior_set is not None:
            self.cache = _PriorPathCache(ws, tau, gamma, prior.prior_set,
                                         scad_a, lla_passes)
        elif prior.prior_coefficients is not None:
            bc = prior.prior_coefficients
            if bc.shape != (ws.d + 1,):
                raise ValueError(f"prior coefficients must have length "
                                 f"{ws.d + 1}, got {bc.shape}")
            self.fixed = bc[0] + ws.X_orig @ bc[1:]
        else:
            yp = prior.prior_predictions
            if yp.shape != (ws.n,):
                raise ValueError(f"prior predictions must have length {ws.n}, "
                                 f"got {yp.shape}")
            self.fixed = np.asarray(yp, dtype=float)

    @property
    def present(self):
        return self.fixed is not None or self.cache is not None

    def anchor(self, lam_anchor):
        """Prediction vector used only to anchor the per-weight penalty grids."""
        if self.fixed is not None:
            return self.fixed
        self.cache.materialize([lam_anchor])
        return self.cache.predictions(lam_anchor)

    def for_cell(self, lam):
        if self.fixed is not None:
            return self.fixed
        self.cache.materialize([lam])
        return self.cache.predictions(lam)


def tune_prior_informed(data, y=None, prior_set=(), tau=0.5, gamma=DEFAULT_GAMMA,
                        n_lambda=50, lambda_min_ratio=0.01, scad_a=3.7,
                        lla_passes=3, tol=1e-7, max_sweeps=10000):
    """Penalty-path search for the prior-informed fit, scored by the criterion.

    Returns the refitted estimator at the chosen penalty and a TuningResult.
    """
    X, y = _as_xy(data, y)
    ws = _Workspace(X, y, gamma)
    prior_set = np.unique(np.asarray(prior_set, dtype=int))
    lams = _lambda_path(ws, tau, gamma, 0.0, None, TuningGrid(
        zeta_values=(0.0,), n_lambda=n_lambda, lambda_min_ratio=lambda_min_ratio))
    cache = _PriorPathCache(ws, tau, gamma, prior_set, scad_a, lla_passes)
    cache.materialize(lams)
    scores = np.full(lams.size, np.inf)
    best = None
    for i, lam in enumerate(lams):
        scores[i] = _score_qbic(ws, cache.beta(lam), tau, ws.d)
        if _better(scores[i], float(lam), 0.0, best):
            best = (scores[i], float(lam), 0.0)
    if best is None:
        raise RuntimeError("every cell of the prior-informed path failed")
    from .solver import fit_prior_informed
    fit = fit_prior_informed(X, tau, best[1], prior_set, gamma=gamma,
                             scad_a=scad_a, lla_passes=lla_passes, tol=tol,
                             max_sweeps=max_sweeps, y=y)
    result = TuningResult(best_zeta=0.0, best_lambda=best[1], criterion="qbic",
                          score_table=[{"zeta": 0.0, "lambdas": lams,
                                        "scores": scores}])
    return fit, result


def tune_qbic(data, grid: TuningGrid = None, tau=0.5, gamma=DEFAULT_GAMMA,
              prior: PriorKnowledge = None, scad_a=3.7, lla_passes=3,
              tol=1e-7, max_sweeps=10000, y=None, _lasso_cache=None):
    """Information-criterion search over every (prior weight, penalty) cell."""
    X, y = _as_xy(data, y)
    grid = grid or TuningGrid()
    if prior is None and any(z > 0 for z in grid.zeta_values):
        raise ValueError("a grid with positive prior weights requires prior "
                         "knowledge")
    ws = _Workspace(X, y, gamma) if _lasso_cache is None else _lasso_cache.ws
    source = _PriorSource(ws, tau, gamma, prior, scad_a, lla_passes)
    anchor_yp = None
    if source.present:
        anchor_yp = source.anchor(
            max(_combined_grad_sup(ws, tau, gamma, 0.0, None), 1e-12))
    cache = _lasso_cache if _lasso_cache is not None else _LassoPathCache(ws, tau, gamma)
    table = []
    best = None
    for zeta in grid.zeta_values:
        if zeta >= 1.0 and ws.d >= ws.n:
            warnings.warn("skipping prior weight 1.0: penalty vanishes and "
                          f"d={ws.d} >= n={ws.n}", stacklevel=2)
            continue
        zyp_anchor = anchor_yp if zeta > 0.0 else None
        lams = _lambda_path(ws, tau, gamma, zeta, zyp_anchor, grid)
        cache.materialize(lams)
        scores = np.full(lams.size, np.inf)
        state = None
        for i, lam in enumerate(lams):
            try:
                zyp = source.for_cell(lam) if zeta > 0.0 else None
                beta_std = _cell_fit(ws, cache, tau, gamma, zeta, zyp, lam,
                                     scad_a, lla_passes, state=state)
            except (FloatingPointError, RuntimeError) as exc:
                warnings.warn(f"fit failed at (zeta={zeta}, lambda={lam}): {exc}",
                              stacklevel=2)
                state = None
                continue
            state = beta_std
            scores[i] = _score_qbic(ws, beta_std, tau, ws.d)
            if _better(scores[i], float(lam), zeta, best):
                best = (scores[i], float(lam), zeta)
        table.append({"zeta": zeta, "lambdas": lams, "scores": scores})
    if best is None:
        raise RuntimeError("every cell of the tuning grid failed")
    return TuningResult(best_zeta=best[2], best_lambda=best[1],
                        criterion="qbic", score_table=table)


def fit_kiqr_tuned(data, tau=0.5, gamma=DEFAULT_GAMMA,
                   prior: PriorKnowledge = None, grid: TuningGrid = None,
                   scad_a=3.7, lla_passes=3, tol=1e-7, max_sweeps=10000,
                   criterion="qbic", seed=0, y=None, _lasso_cache=None):
    """Grid-search the tuning parameters, then refit at the chosen cell.

    Returns the refitted estimator, the tuning table, and (when the prior is
    a feature set) the first-stage fit at the chosen penalty level.
    """
    X, y = _as_xy(data, y)
    grid = grid or TuningGrid()
    if prior is None:
        grid_eff = grid if grid.zeta_values == (0.0,) else TuningGrid(
            zeta_values=(0.0,), lambda_values=grid.lambda_values,
            n_lambda=grid.n_lambda, lambda_min_ratio=grid.lambda_min_ratio,
            folds=grid.folds, rule=grid.rule)
    else:
        grid_eff = grid
    if criterion == "qbic":
        result = tune_qbic(X, grid_eff, tau, gamma, prior, scad_a=scad_a,
                           lla_passes=lla_passes, tol=tol,
                           max_sweeps=max_sweeps, y=y,
                           _lasso_cache=_lasso_cache)
    elif criterion == "cv":
        result = tune_cv(X, grid_eff, tau, gamma, prior, seed=seed,
                         scad_a=scad_a, lla_passes=lla_passes, tol=tol,
                         max_sweeps=max_sweeps, y=y)
    else:
        raise ValueError(f"criterion must be 'qbic' or 'cv', got {criterion!r}")
    from .solver import fit_kiqr, fit_prior_informed
    step1 = None
    refit_prior = prior
    if prior is not None and prior.prior_set is not None:
        step1 = fit_prior_informed(X, tau, result.best_lambda, prior.prior_set,
                                   gamma=gamma, scad_a=scad_a,
                                   lla_passes=lla_passes, tol=tol,
                                   max_sweeps=max_sweeps, y=y)
        refit_prior = PriorKnowledge(prior_predictions=step1.predict(X))
    config = FitConfig(tau=tau, zeta=result.best_zeta,
                       scad=ScadParams(lam=result.best_lambda, a=scad_a),
                       gamma=gamma, tol=tol, max_sweeps=max_sweeps,
                       lla_passes=lla_passes)
    fit = fit_kiqr(X, config, refit_prior if config.zeta > 0 else None, y=y)
    return fit, result, step1


def _fold_ids(seed, n, folds):
    rng = make_rng(seed, n, folds)
    perm = rng.permutation(n)
    ids = np.empty(n, dtype=int)
    for pos, row in enumerate(perm):
        ids[row] = pos % folds
    return ids


def tune_cv(data, grid: TuningGrid = None, tau=0.5, gamma=DEFAULT_GAMMA,
            prior: PriorKnowledge = None, seed=0, scad_a=3.7, lla_passes=3,
            tol=1e-7, max_sweeps=10000, y=None, fold_assignments=None):
    """K-fold cross-validation over the grid, scored by the exact check loss.

    Fold membership depends only on (seed, n, folds).  A prior given as a
    feature set is refitted inside every training fold (at each cell's own
    penalty level), so no held-out information leaks into the prior
    predictions.  The minimum rule picks the lowest mean score; the
    one-standard-error rule picks, per prior weight, the largest penalty
    within one standard error of that weight's minimum.
    """
    X, y = _as_xy(data, y)
    grid = grid or TuningGrid()
    if prior is None and any(z > 0 for z in grid.zeta_values):
        raise ValueError("a grid with positive prior weights requires prior "
                         "knowledge")
    n = X.shape[0]
    folds = grid.folds
    if fold_assignments is not None:
        ids = np.asarray(fold_assignments, dtype=int)
        if ids.shape != (n,):
            raise ValueError(f"fold assignments must have length {n}")
        folds = int(ids.max()) + 1
    else:
        ids = _fold_ids(seed, n, folds)
    for f in range(folds):
        if np.sum(ids != f) < 2:
            raise ValueError(f"training fold {f} has fewer than 2 observations")

    # Paths are anchored on the full data so every fold scores the same cells.
    ws_full = _Workspace(X, y, gamma)
    source_full = _PriorSource(ws_full, tau, gamma, prior, scad_a, lla_passes)
    anchor_yp = None
    if source_full.present:
        anchor_yp = source_full.anchor(
            max(_combined_grad_sup(ws_full, tau, gamma, 0.0, None), 1e-12))
    zetas = [z for z in grid.zeta_values if not (z >= 1.0 and ws_full.d >= ws_full.n)]
    paths = {z: _lambda_path(ws_full, tau, gamma, z,
                             anchor_yp if z > 0 else None, grid)
             for z in zetas}

    fold_scores = {z: np.full((paths[z].size, folds), np.inf) for z in zetas}
    for f in range(folds):
        train = ids != f
        test = ~train
        Xtr, ytr = X[train], y[train]
        Xte, yte = X[test], y[test]
        ws = _Workspace(Xtr, ytr, gamma)
        fold_prior = prior
        if prior is not None and prior.prior_predictions is not None:
            # Fixed prediction vectors are row-aligned with the full data.
            fold_prior = PriorKnowledge(prior_predictions=np.asarray(
                prior.prior_predictions, dtype=float)[train])
        source = _PriorSource(ws, tau, gamma, fold_prior, scad_a, lla_passes)
        cache = _LassoPathCache(ws, tau, gamma)
        for z in zetas:
            lams = paths[z]
            cache.materialize(lams)
            state = None
            for i, lam in enumerate(lams):
                try:
                    zyp = source.for_cell(lam) if z > 0.0 else None
                    beta_std = _cell_fit(ws, cache, tau, gamma, z, zyp, lam,
                                         scad_a, lla_passes, state=state)
                except (FloatingPointError, RuntimeError) as exc:
                    warnings.warn(f"fold {f} fit failed at (zeta={z}, "
                                  f"lambda={lam}): {exc}", stacklevel=2)
                    state = None
                    continue
                state = beta_std
                beta = ws.to_original(beta_std)
                resid = yte - beta[0] - Xte @ beta[1:]
                fold_scores[z][i, f] = float(np.mean(check_loss(resid, tau)))

    table = []
    best = None
    for z in zetas:
        lams = paths[z]
        per_cell = fold_scores[z]
        means = per_cell.mean(axis=1)
        ses = per_cell.std(axis=1, ddof=1) / math.sqrt(folds)
        ok = np.isfinite(means)
        table.append({"zeta": z, "lambdas": lams, "scores": means, "ses": ses})
        if not np.any(ok):
            continue
        if grid.rule == "minimum":
            for i in np.flatnonzero(ok):
                if _better(means[i], float(lams[i]), z, best):
                    best = (means[i], float(lams[i]), z)
        else:
            imin = int(np.flatnonzero(ok)[np.argmin(means[ok])])
            cutoff = means[imin] + ses[imin]
            chosen = None
            for i in range(lams.size):
                if ok[i] and means[i] <= cutoff:
                    chosen = i
                    break
            if chosen is not None and _better(means[chosen], float(lams[chosen]),
                                              z, best):
                best = (means[chosen], float(lams[chosen]), z)
    if best is None:
        raise RuntimeError("every cell of the tuning grid failed")
    return TuningResult(best_zeta=best[2], best_lambda=best[1], criterion="cv",
                        score_table=table)
