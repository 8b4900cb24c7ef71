"""Seeded synthetic-data generators and the replication benchmark runner.

Three designs: a dense AR(1) Gaussian design with 20 unit signals, a
heteroscedastic variant whose first feature scales the noise (so it matters
only away from the median), and a genotype-like design with age/sex
covariates and dosage columns drawn in Hardy-Weinberg proportions.

Every generator is a pure function of (design, seed); replicate r of a study
uses stream seed XOR r, so replication is order-independent.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._rng import make_rng
from .data import Dataset
from .gwas import GENOME_WIDE_THRESHOLD, gwas_scan
from .metrics import selection_metrics
from .solver import PriorKnowledge
from .tuning import TuningGrid, fit_kiqr_tuned, tune_prior_informed

SCENARIO_LABELS = ("S1", "S2", "S3", "S4")
METHODS = ("kiqr", "trad_qr", "prior_qr", "gwas_qr")


@dataclass(frozen=True)
class ErrorLaw:
    """Noise law: gaussian with a standard deviation, or Student t with df."""

    kind: str = "normal"
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal", "t"):
            raise ValueError(f"error kind must be 'normal' or 't', got {self.kind!r}")
        if self.param <= 0:
            raise ValueError(f"error parameter must be positive, got {self.param}")

    def draw(self, rng, n):
        if self.kind == "normal":
            return self.param * rng.standard_normal(n)
        return rng.standard_t(self.param, n)


_DEFAULTS = {
    "example1": dict(n=200, d=1500, rho=0.5, error=ErrorLaw("normal", 1.0)),
    "example2": dict(n=200, d=1500, rho=0.5, error=ErrorLaw("normal", 1.0)),
    "mimic": dict(n=250, d=1502, rho=0.0, error=ErrorLaw("normal", 0.6)),
}


@dataclass(frozen=True)
class SimDesign:
    """Synthetic-study shape; omitted fields take the per-kind defaults."""

    kind: str
    n: int = None
    d: int = None
    rho: float = None
    error: ErrorLaw = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _DEFAULTS:
            raise ValueError(f"unknown design kind {self.kind!r}")
        base = _DEFAULTS[self.kind]
        for name in ("n", "d", "rho", "error"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, base[name])
        if self.kind == "mimic" and self.d < 22:
            raise ValueError("the genotype-like design needs at least 22 features")
        if not abs(self.rho) < 1:
            raise ValueError(f"|rho| must be below 1, got {self.rho}")

    def beta_true(self):
        beta = np.zeros(self.d)
        if self.kind == "example2":
            beta[[9, 19, 29, 39, 49]] = 1.0
        else:
            beta[:20] = 1.0
        return beta

    def heteroscedastic_index(self):
        return 0 if self.kind == "example2" else None


def gen_ar1_gaussian(n, d, rho, seed):
    """Rows i.i.d. N(0, S) with S[j,k] = rho^|j-k|, via the exact AR(1) recursion."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    E = rng.standard_normal((n, d))
    if rho == 0.0:
        return E
    Z = np.empty_like(E)
    Z[:, 0] = E[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, d):
        Z[:, j] = rho * Z[:, j - 1] + c * E[:, j]
    return Z


def gen_example1(design: SimDesign, seed):
    """Linear model on the AR(1) design with the first 20 coefficients at 1."""
    if design.kind != "example1":
        raise ValueError(f"design kind must be 'example1', got {design.kind!r}")
    rng = make_rng(seed)
    X = gen_ar1_gaussian(design.n, design.d, design.rho, rng)
    beta = design.beta_true()
    y = X @ beta + design.error.draw(rng, design.n)
    return Dataset.from_arrays(X, y), beta


def gen_example2(design: SimDesign, seed):
    """Heteroscedastic model: the first feature is mapped through the normal
    CDF into (0, 1) and multiplies the noise, leaving the median untouched."""
    if design.kind != "example2":
        raise ValueError(f"design kind must be 'example2', got {design.kind!r}")
    rng = make_rng(seed)
    X = gen_ar1_gaussian(design.n, design.d, design.rho, rng)
    X[:, 0] = special.ndtr(X[:, 0])
    beta = design.beta_true()
    y = X @ beta + X[:, 0] * design.error.draw(rng, design.n)
    return Dataset.from_arrays(X, y), beta, 0


def gen_mimic(design: SimDesign, seed):
    """Genotype-like design: standardized age, binary sex, and dosage SNPs.

    Each SNP column is Binomial(2, MAF) built from two latent allele draws so
    Hardy-Weinberg proportions hold by construction; a positive rho correlates
    the latent alleles across adjacent SNPs through a Gaussian copula.
    """
    if design.kind != "mimic":
        raise ValueError(f"design kind must be 'mimic', got {design.kind!r}")
    rng = make_rng(seed)
    n, m = design.n, design.d - 2
    age = (rng.normal(49.0, 10.0, n) - 49.0) / 10.0
    sex = rng.integers(0, 2, n).astype(float)
    mafs = rng.uniform(0.1, 0.5, m)
    cut = special.ndtri(mafs)
    z1 = gen_ar1_gaussian(n, m, design.rho, rng)
    z2 = gen_ar1_gaussian(n, m, design.rho, rng)
    G = (z1 < cut).astype(float) + (z2 < cut).astype(float)
    X = np.column_stack([age, sex, G])
    beta = design.beta_true()
    y = X @ beta + design.error.draw(rng, n)
    width = max(4, len(str(m)))
    names = ["age", "sex"] + [f"snp{j + 1:0{width}d}" for j in range(m)]
    meta = {names[2 + j]: (1 + j % 22, 1000 * (j // 22 + 1)) for j in range(m)}
    return Dataset(X, y, names, meta), beta


def generate(design: SimDesign, seed):
    """Dispatch to the design's generator; returns (dataset, beta_true)."""
    if design.kind == "example1":
        return gen_example1(design, seed)
    if design.kind == "example2":
        ds, beta, _ = gen_example2(design, seed)
        return ds, beta
    return gen_mimic(design, seed)


@dataclass(frozen=True)
class PriorScenario:
    """Labelled prior feature set of graded quality (S1 best, S4 useless)."""

    label: str
    prior_set: np.ndarray


_SCENARIO_COUNTS = {"S1": (None, 0), "S2": (10, 2), "S3": (5, 15), "S4": (0, 20)}


def make_prior_scenario(label, beta_true, seed, extra_true=()):
    """Build a prior set of the scenario's composition, seeded.

    True members come from the support of ``beta_true`` plus ``extra_true``
    (used for the heteroscedastic feature, which acts like a true predictor
    away from the median); false members are drawn without replacement from
    the remaining zero-coefficient features.
    """
    if label not in _SCENARIO_COUNTS:
        raise ValueError(f"unknown scenario {label!r}")
    beta_true = np.asarray(beta_true, dtype=float)
    true = sorted(set(np.flatnonzero(beta_true != 0.0).tolist())
                  | {int(j) for j in extra_true})
    nulls = sorted(set(range(beta_true.size)) - set(true))
    n_true, n_false = _SCENARIO_COUNTS[label]
    if n_true is None or n_true >= len(true):
        chosen_true = list(true)
    else:
        rng_t = make_rng(seed, SCENARIO_LABELS.index(label), 1)
        chosen_true = sorted(rng_t.choice(true, size=n_true, replace=False).tolist())
    if n_false > len(nulls):
        raise ValueError(f"scenario {label} needs {n_false} zero-coefficient "
                         f"features, only {len(nulls)} available")
    chosen_false = []
    if n_false:
        rng_f = make_rng(seed, SCENARIO_LABELS.index(label), 2)
        chosen_false = sorted(rng_f.choice(nulls, size=n_false, replace=False).tolist())
    return PriorScenario(label, np.array(sorted(chosen_true + chosen_false), dtype=int))


@dataclass
class ReplicateRow:
    replicate: int
    method: str
    scenario: str
    tau: float
    tp: int
    fp: int
    fn: int
    f1: float
    mse: float
    x1_selected: bool
    runtime_ms: float


@dataclass
class ScenarioReport:
    """Per-replicate metric rows plus failure records for a simulation study."""

    design: SimDesign
    taus: tuple
    reps: int
    seed: int
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def aggregate(self):
        """Mean and Monte Carlo standard error per (method, scenario, tau) cell."""
        cells = {}
        for row in self.rows:
            cells.setdefault((row.method, row.scenario, row.tau), []).append(row)
        out = []
        for (method, scenario, tau), rows in sorted(cells.items()):
            entry = {"method": method, "scenario": scenario, "tau": tau,
                     "n_replicates": len(rows), "means": {}, "standard_errors": {}}
            for name in ("tp", "fp", "fn", "f1", "mse", "x1_selected"):
                vals = np.array([float(getattr(r, name)) for r in rows])
                entry["means"][name] = float(vals.mean())
                entry["standard_errors"][name] = (
                    float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0)
            out.append(entry)
        return {"design": self.design.kind, "reps": self.reps, "seed": self.seed,
                "taus": list(self.taus), "n_failures": len(self.failures),
                "cells": out}


def _fit_cell(fn):
    start = time.perf_counter()
    fit = fn()
    return fit, (time.perf_counter() - start) * 1000.0


def _metric_row(replicate, method, scenario, tau, coef_hat, beta_true,
                excluded, support, runtime_ms):
    m = selection_metrics(coef_hat, beta_true, excluded)
    return ReplicateRow(replicate=replicate, method=method, scenario=scenario,
                        tau=tau, tp=m.tp, fp=m.fp, fn=m.fn, f1=m.f1, mse=m.mse,
                        x1_selected=0 in {int(j) for j in support},
                        runtime_ms=runtime_ms)


def _replicate_cells(design, scenario_labels, methods, taus, rep_seed, replicate,
                     grid_opts):
    ds, beta_true = generate(design, rep_seed)
    het = design.heteroscedastic_index()
    excluded = (het,) if het is not None else ()
    extra_true = (het,) if het is not None else ()
    covariates = (0, 1) if design.kind == "mimic" else ()
    scenarios = {lbl: make_prior_scenario(lbl, beta_true, rep_seed, extra_true)
                 for lbl in scenario_labels}
    gamma = grid_opts.get("gamma", 0.01)
    lla_passes = grid_opts.get("lla_passes", 3)
    n_lambda = grid_opts.get("n_lambda", 50)
    ratio = grid_opts.get("lambda_min_ratio", 0.01)
    zetas = grid_opts.get("zeta_values", TuningGrid().zeta_values)
    threshold = grid_opts.get("gwas_threshold", GENOME_WIDE_THRESHOLD)
    tol = grid_opts.get("tol", 1e-7)
    # Final (reported) fits need their cold initial pass to converge; the
    # sweep budget is generous because only a handful of refits happen per
    # replicate.
    max_sweeps = grid_opts.get("max_sweeps", 200000)

    rows, failures = [], []
    from .tuning import _LassoPathCache
    from .solver import _Workspace

    def guard(method, scenario, tau, fn):
        try:
            fn()
        except Exception as exc:  # recorded, excluded from means
            failures.append({"replicate": replicate, "method": method,
                             "scenario": scenario, "tau": tau, "error": str(exc)})

    for tau in taus:
        shared_cache = _LassoPathCache(_Workspace(ds.X, ds.y, gamma), tau, gamma)
        if "trad_qr" in methods:
            def run_trad(tau=tau, shared_cache=shared_cache):
                grid = TuningGrid(zeta_values=(0.0,), n_lambda=n_lambda,
                                  lambda_min_ratio=ratio)
                (fit, _, _), ms = _fit_cell(lambda: fit_kiqr_tuned(
                    ds, tau=tau, gamma=gamma, prior=None, grid=grid,
                    lla_passes=lla_passes, tol=tol, max_sweeps=max_sweeps,
                    _lasso_cache=shared_cache))
                rows.append(_metric_row(replicate, "trad_qr", "none", tau,
                                        fit.beta[1:], beta_true, excluded,
                                        fit.support, ms))
            guard("trad_qr", "none", tau, run_trad)

        if "gwas_qr" in methods:
            def run_gwas(tau=tau):
                start = time.perf_counter()
                results, selected = gwas_scan(ds, covariates=covariates,
                                              method="qr", threshold=threshold,
                                              tau=tau, gamma=gamma)
                ms = (time.perf_counter() - start) * 1000.0
                coef = np.zeros(ds.d)
                for r in results:
                    if r.feature in set(selected.tolist()):
                        coef[r.feature] = r.estimate
                rows.append(_metric_row(replicate, "gwas_qr", "none", tau,
                                        coef, beta_true, excluded, selected, ms))
            guard("gwas_qr", "none", tau, run_gwas)

        for lbl in scenario_labels:
            prior_set = scenarios[lbl].prior_set
            if "prior_qr" in methods:
                def run_prior(tau=tau, prior_set=prior_set, lbl=lbl):
                    (fit, _), ms = _fit_cell(lambda: tune_prior_informed(
                        ds, prior_set=prior_set, tau=tau, gamma=gamma,
                        n_lambda=n_lambda, lambda_min_ratio=ratio,
                        lla_passes=lla_passes, tol=tol, max_sweeps=max_sweeps))
                    rows.append(_metric_row(replicate, "prior_qr", lbl, tau,
                                            fit.beta[1:], beta_true, excluded,
                                            fit.support, ms))
                guard("prior_qr", lbl, tau, run_prior)
            if "kiqr" in methods:
                def run_kiqr(tau=tau, prior_set=prior_set, lbl=lbl,
                             shared_cache=shared_cache):
                    prior = PriorKnowledge(prior_set=prior_set)
                    grid = TuningGrid(zeta_values=zetas, n_lambda=n_lambda,
                                      lambda_min_ratio=ratio)
                    (fit, _, _), ms = _fit_cell(lambda: fit_kiqr_tuned(
                        ds, tau=tau, gamma=gamma, prior=prior, grid=grid,
                        lla_passes=lla_passes, tol=tol, max_sweeps=max_sweeps,
                        _lasso_cache=shared_cache))
                    rows.append(_metric_row(replicate, "kiqr", lbl, tau,
                                            fit.beta[1:], beta_true, excluded,
                                            fit.support, ms))
                guard("kiqr", lbl, tau, run_kiqr)
    return rows, failures


def run_replications(design: SimDesign, scenarios=SCENARIO_LABELS,
                     methods=METHODS, taus=(0.5, 0.8), reps=20, seed=None,
                     **grid_opts):
    """Replicated benchmark: regenerate, fit every requested cell, score.

    Replicate r draws from stream ``seed ^ r``; rows are assembled in
    replicate order so the report does not depend on the parallelism degree.
    Failed cells are recorded and excluded from the aggregate means.
    """
    from ._parallel import parallel_map

    if reps < 1:
        raise ValueError(f"reps must be at least 1, got {reps}")
    seed = design.seed if seed is None else int(seed)
    scenarios = tuple(scenarios)
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; valid: {', '.join(METHODS)}")
    for s in scenarios:
        if s not in SCENARIO_LABELS:
            raise ValueError(f"unknown scenario {s!r}; valid: {', '.join(SCENARIO_LABELS)}")

    def one(replicate):
        return _replicate_cells(design, scenarios, methods, taus,
                                seed ^ replicate, replicate, grid_opts)

    report = ScenarioReport(design=design, taus=tuple(taus), reps=reps, seed=seed)
    for rows, failures in parallel_map(one, range(reps)):
        report.rows.extend(rows)
        report.failures.extend(failures)
    return report
