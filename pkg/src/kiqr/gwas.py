"""Marginal one-feature-at-a-time association scans.

Two tests are offered per feature: ordinary least squares with a t-test
(the screening workhorse) and smoothed quantile regression with a Wald test
whose variance uses a kernel estimate of the residual density at zero with a
Hall-Sheather bandwidth.  ``gwas_scan`` runs either test across every
non-covariate feature and applies a fixed significance threshold.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._fmt import g17
from ._parallel import parallel_map
from .data import Dataset
from .losses import DEFAULT_GAMMA
from .solver import coordinate_descent

P_FLOOR = 1e-300
GENOME_WIDE_THRESHOLD = 5e-8


@dataclass
class MarginalTestResult:
    feature: int
    estimate: float
    std_error: float
    p_value: float
    degenerate: bool = False


def _floor_p(p):
    return float(min(max(p, P_FLOOR), 1.0))


def _design(ds, feature, covariates):
    covariates = [int(j) for j in covariates]
    feature = int(feature)
    if feature in covariates:
        raise ValueError(f"feature {feature} is itself a covariate")
    cols = [feature] + covariates
    for j in cols:
        if not 0 <= j < ds.d:
            raise ValueError(f"column index {j} out of range [0, {ds.d})")
    if ds.n <= len(covariates) + 2:
        raise ValueError(f"need more than {len(covariates) + 2} observations, have {ds.n}")
    return ds.X[:, cols]


def marginal_ols_pvalue(ds: Dataset, feature, covariates=()):
    """Least-squares fit of y on [1, feature, covariates]; t-test for the feature."""
    Z = _design(ds, feature, covariates)
    n = ds.n
    A = np.column_stack([np.ones(n), Z])
    k = A.shape[1]
    coef, _, rank, _ = np.linalg.lstsq(A, ds.y, rcond=None)
    if rank < k:
        return MarginalTestResult(int(feature), float(coef[1]), float("nan"),
                                  1.0, degenerate=True)
    resid = ds.y - A @ coef
    dof = n - k
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    se = math.sqrt(max(cov[1, 1], 0.0))
    if se == 0.0 or not math.isfinite(se):
        # Perfect (zero-residual) fit: report the floor instead of zero.
        return MarginalTestResult(int(feature), float(coef[1]), se, P_FLOOR)
    t = coef[1] / se
    p = 2.0 * stats.t.sf(abs(t), dof)
    return MarginalTestResult(int(feature), float(coef[1]), se, _floor_p(p))


def _hall_sheather_bandwidth(tau, n):
    z_tau = stats.norm.ppf(tau)
    z_alpha = stats.norm.ppf(0.975)
    h = n ** (-1.0 / 3.0) * z_alpha ** (2.0 / 3.0) * \
        (1.5 * stats.norm.pdf(z_tau) ** 2 / (2.0 * z_tau ** 2 + 1.0)) ** (1.0 / 3.0)
    while tau - h <= 0.0 or tau + h >= 1.0:
        h /= 2.0
    return h


def residual_density_at_zero(resid, tau):
    """Gaussian-kernel density estimate of the residuals at zero.

    The kernel bandwidth maps the Hall-Sheather quantile-space bandwidth to
    the residual scale through the normal quantile function, scaled by a
    robust dispersion estimate.
    """
    resid = np.asarray(resid, dtype=float)
    n = resid.size
    h = _hall_sheather_bandwidth(tau, n)
    iqr = float(np.quantile(resid, 0.75) - np.quantile(resid, 0.25))
    spread = min(float(np.std(resid, ddof=1)), iqr / 1.349) if iqr > 0 \
        else float(np.std(resid, ddof=1))
    b = spread * float(stats.norm.ppf(tau + h) - stats.norm.ppf(tau - h))
    if not b > 0.0 or not math.isfinite(b):
        return 0.0
    return float(np.mean(stats.norm.pdf(resid / b)) / b)


def _covariate_start(ds, covariates, tau, gamma):
    """Unpenalized fit of y on the covariates alone, used as a warm start.

    Lets a scan pay the intercept/covariate descent once instead of once per
    feature."""
    covariates = [int(j) for j in covariates]
    start = np.zeros(len(covariates) + 2)
    start[0] = float(np.quantile(ds.y, tau))
    if covariates:
        base_start = np.zeros(len(covariates) + 1)
        base_start[0] = start[0]
        base = coordinate_descent(ds.X[:, covariates], ds.y, tau=tau,
                                  gamma=gamma, beta_start=base_start,
                                  tol=1e-7, max_sweeps=300000, record_trace=False)
        start[0] = base.beta[0]
        start[2:] = base.beta[1:]
    return start


def marginal_qr_pvalue(ds: Dataset, feature, covariates=(), tau=0.5,
                       gamma=DEFAULT_GAMMA, tol=1e-7, max_sweeps=60000,
                       _start=None):
    """Smoothed quantile fit of y on [1, feature, covariates]; Wald test.

    The asymptotic covariance is tau*(1-tau) * (Z'Z/n)^-1 / (n * f(0)^2) with
    f(0) the estimated residual density at zero.
    """
    Z = _design(ds, feature, covariates)
    n = ds.n
    start = _covariate_start(ds, covariates, tau, gamma) if _start is None         else np.asarray(_start, dtype=float)
    fit = coordinate_descent(Z, ds.y, tau=tau, gamma=gamma,
                             weights=np.zeros(Z.shape[1]), beta_start=start,
                             tol=tol, max_sweeps=max_sweeps, record_trace=False)
    est = float(fit.beta[1])
    resid = ds.y - fit.predict(Z)
    f0 = residual_density_at_zero(resid, tau)
    if f0 < 1e-12:
        return MarginalTestResult(int(feature), est, float("nan"), 1.0,
                                  degenerate=True)
    A = np.column_stack([np.ones(n), Z])
    gram = A.T @ A / n
    try:
        ginv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        return MarginalTestResult(int(feature), est, float("nan"), 1.0,
                                  degenerate=True)
    V = tau * (1.0 - tau) * ginv / (f0 ** 2 * n)
    se = math.sqrt(max(V[1, 1], 0.0))
    if se == 0.0 or not math.isfinite(se):
        return MarginalTestResult(int(feature), est, se, 1.0, degenerate=True)
    z = est / se
    p = 2.0 * stats.norm.sf(abs(z))
    return MarginalTestResult(int(feature), est, se, _floor_p(p))


def gwas_scan(ds: Dataset, covariates=(), method="ols", threshold=GENOME_WIDE_THRESHOLD,
              tau=0.5, gamma=DEFAULT_GAMMA):
    """Run the chosen marginal test over every non-covariate feature.

    Returns the per-feature results (in feature order) and the array of
    feature indices whose p-value falls below the threshold.  A feature whose
    test fails is kept with p-value 1 and the degenerate flag set.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if method not in ("ols", "qr"):
        raise ValueError(f"method must be 'ols' or 'qr', got {method!r}")
    covariates = sorted(set(int(j) for j in covariates))
    features = [j for j in range(ds.d) if j not in covariates]
    qr_start = _covariate_start(ds, covariates, tau, gamma) if method == "qr"         else None

    def run(j):
        try:
            if method == "ols":
                return marginal_ols_pvalue(ds, j, covariates)
            return marginal_qr_pvalue(ds, j, covariates, tau=tau, gamma=gamma,
                                      _start=qr_start)
        except (ValueError, np.linalg.LinAlgError, FloatingPointError,
                RuntimeError) as exc:
            warnings.warn(f"marginal test failed for feature {j}: {exc}",
                          stacklevel=2)
            return MarginalTestResult(int(j), float("nan"), float("nan"), 1.0,
                                      degenerate=True)

    results = parallel_map(run, features)
    selected = np.array([r.feature for r in results if r.p_value < threshold],
                        dtype=int)
    return results, selected


def write_manhattan_csv(path, ds: Dataset, results, highlight=None):
    """Plot-ready per-feature records: name, genomic position, p-value columns.

    ``highlight`` is an optional set of feature indices (e.g. another model's
    selections) marked in an extra column.
    """
    highlight_set = None if highlight is None else {int(j) for j in highlight}
    meta = ds.feature_meta or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["feature", "chromosome", "position", "estimate", "p_value",
                  "neg_log10_p"]
        if highlight_set is not None:
            header.append("selected_by_fit")
        writer.writerow(header)
        for r in results:
            name = ds.feature_names[r.feature]
            chrom, pos = meta.get(name, ("", ""))
            row = [name, chrom, pos,
                   g17(r.estimate) if math.isfinite(r.estimate) else "",
                   g17(r.p_value), g17(-math.log10(r.p_value))]
            if highlight_set is not None:
                row.append(int(r.feature in highlight_set))
            writer.writerow(row)
