"""Selection and estimation metrics for variable-selection benchmarks."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SelectionMetrics:
    tp: int
    fp: int
    fn: int
    f1: float
    mse: float
    excluded: tuple = ()


def _support(coefs, excluded):
    return {int(j) for j in np.flatnonzero(np.asarray(coefs) != 0.0)} - excluded


def selection_metrics(coef_hat, coef_true, excluded=()):
    """Support-recovery counts, F1 and coefficient MSE.

    Both vectors are feature coefficients (no intercept).  Indices in
    ``excluded`` are removed from both supports before counting and from the
    MSE average.  "Selected" means an exactly nonzero stored coefficient; the
    proximal update produces exact zeros, so no magnitude cutoff is applied.
    """
    coef_hat = np.asarray(coef_hat, dtype=float)
    coef_true = np.asarray(coef_true, dtype=float)
    if coef_hat.shape != coef_true.shape:
        raise ValueError(f"coefficient vectors differ in length: "
                         f"{coef_hat.shape} vs {coef_true.shape}")
    excluded = {int(j) for j in excluded}
    sel = _support(coef_hat, excluded)
    true = _support(coef_true, excluded)
    tp = len(sel & true)
    fp = len(sel - true)
    fn = len(true - sel)
    denom = 2 * tp + fp + fn
    if denom > 0:
        f1 = 2.0 * tp / denom
    else:
        f1 = 1.0 if not true and not sel else 0.0
    included = np.array([j for j in range(coef_hat.size) if j not in excluded], dtype=int)
    if included.size:
        mse = float(np.mean((coef_hat[included] - coef_true[included]) ** 2))
    else:
        mse = 0.0
    return SelectionMetrics(tp=tp, fp=fp, fn=fn, f1=f1, mse=mse,
                            excluded=tuple(sorted(excluded)))


def x1_selection_rate(results, index):
    """Fraction of fits whose support contains the given feature index."""
    results = list(results)
    if not results:
        raise ValueError("selection rate of an empty result list is undefined")
    hits = sum(1 for r in results if int(index) in set(int(j) for j in r.support))
    return hits / len(results)
