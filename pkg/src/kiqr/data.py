"""Data containers, CSV ingestion, standardization, and genotype quality control.

The Dataset is immutable after construction: arrays are frozen so concurrent
fits can share it safely.  CSV is the only interchange format; genotype files
use the same layout with integer dosage cells.
"""

import csv
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def _frozen(a, dtype=float):
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass
class Dataset:
    """Dense design matrix with response and feature labels.

    feature_meta optionally maps a feature name to ``(chromosome, position)``
    for genomic output.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: list
    feature_meta: dict = None

    def __post_init__(self):
        self.X = _frozen(self.X)
        self.y = _frozen(self.y)
        self.feature_names = list(self.feature_names)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must equal the number of rows of X")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length must equal the number of columns of X")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite entries")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y contains non-finite entries")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, X, y, feature_names=None, feature_meta=None):
        X = np.asarray(X, dtype=float)
        if feature_names is None:
            width = max(4, len(str(X.shape[1])))
            feature_names = [f"x{j + 1:0{width}d}" for j in range(X.shape[1])]
        return cls(X, y, feature_names, feature_meta)


@dataclass
class Standardization:
    """Column means/scales recorded for back-transformation of coefficients."""

    means: np.ndarray
    scales: np.ndarray
    constant: np.ndarray
    applied: bool = True


def column_standardize(X):
    """Center every column; rescale non-constant ones to sample sd 1 (ddof=1).

    Constant columns keep scale 1 (centered to exactly zero) and are flagged
    so the solver can pin their coefficients.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 observations")
    means = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    constant = sd == 0.0
    scales = np.where(constant, 1.0, sd)
    Xs = (X - means) / scales
    return Xs, Standardization(means=means, scales=scales, constant=constant)


def standardize(ds: Dataset):
    """Standardized copy of the dataset plus the transformation record."""
    Xs, stz = column_standardize(ds.X)
    return Dataset(Xs, ds.y, ds.feature_names, ds.feature_meta), stz


def unstandardize(ds: Dataset, stz: Standardization):
    """Invert :func:`standardize`."""
    X = ds.X * stz.scales + stz.means
    return Dataset(X, ds.y, ds.feature_names, ds.feature_meta)


def _parse_cell(text, line_no, column):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(
            f"non-numeric cell {text!r} at line {line_no}, column {column!r}") from None
    if not math.isfinite(value):
        raise ValueError(
            f"non-finite cell {text!r} at line {line_no}, column {column!r}")
    return value


def _read_numeric_csv(path):
    """Parse a headered numeric CSV into (column names, n-by-k float matrix)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        seen = set()
        for name in header:
            if name in seen:
                raise ValueError(f"{path}: duplicate header column {name!r}")
            seen.add(name)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}")
            rows.append([_parse_cell(cell.strip(), line_no, header[k])
                         for k, cell in enumerate(row)])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def load_csv(path, response_column):
    """Load a dense dataset; the named column becomes the response."""
    header, M = _read_numeric_csv(path)
    if response_column not in header:
        raise ValueError(f"{path}: response column {response_column!r} not found "
                         f"(columns: {', '.join(header)})")
    ridx = header.index(response_column)
    keep = [k for k in range(len(header)) if k != ridx]
    names = [header[k] for k in keep]
    return Dataset(M[:, keep], M[:, ridx], names)


@dataclass
class GenotypeMatrix:
    """Minor-allele dosage matrix with entries restricted to {0, 1, 2}."""

    G: np.ndarray
    snp_ids: list
    feature_meta: dict = None

    def __post_init__(self):
        self.G = _frozen(self.G)
        self.snp_ids = list(self.snp_ids)
        if self.G.ndim != 2:
            raise ValueError("G must be a 2-D matrix")
        if len(self.snp_ids) != self.G.shape[1]:
            raise ValueError("snp_ids length must equal the number of columns of G")
        _validate_dosage(self.G)

    @property
    def n(self):
        return self.G.shape[0]

    @property
    def m(self):
        return self.G.shape[1]


def _validate_dosage(g):
    g = np.asarray(g, dtype=float)
    bad = ~((g == 0.0) | (g == 1.0) | (g == 2.0))
    if np.any(bad):
        where = np.argwhere(bad)[0]
        raise ValueError(f"dosage entries must be 0, 1 or 2; found "
                         f"{g[tuple(where)]!r} at position {tuple(int(v) for v in where)}")
    return g


def load_genotype_csv(path, meta_path=None):
    """Load a dosage CSV (all columns are SNPs) plus an optional metadata sidecar."""
    header, M = _read_numeric_csv(path)
    meta = load_feature_meta(meta_path) if meta_path else None
    return GenotypeMatrix(M, header, meta)


def load_feature_meta(path):
    """Read a ``snp_id,chromosome,position`` sidecar into a name -> (chr, pos) map."""
    header, M = _read_numeric_csv_meta(path)
    return {name: (int(chrom), int(pos)) for name, chrom, pos in M}


def _read_numeric_csv_meta(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        header = [h.strip() for h in header]
        expected = ["snp_id", "chromosome", "position"]
        if header != expected:
            raise ValueError(f"{path}: metadata header must be {','.join(expected)}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: line {line_no} has {len(row)} cells, expected 3")
            rows.append((row[0].strip(),
                         _parse_cell(row[1].strip(), line_no, "chromosome"),
                         _parse_cell(row[2].strip(), line_no, "position")))
    return header, rows


def minor_allele_frequency(g):
    """Minor allele frequency of a dosage vector: min(p, 1 - p), p = sum(g) / (2n)."""
    g = _validate_dosage(g)
    if g.size == 0:
        raise ValueError("dosage vector is empty")
    p = float(np.sum(g)) / (2.0 * g.size)
    return min(p, 1.0 - p)


def hwe_pvalue(g):
    """Chi-square (1 df) goodness-of-fit p-value against Hardy-Weinberg counts.

    Observed genotype counts are compared with ``n(1-p)^2, 2np(1-p), np^2`` at
    the sample allele frequency; classes with zero expectation contribute
    nothing to the statistic.
    """
    g = _validate_dosage(g)
    n = g.size
    if n == 0:
        raise ValueError("dosage vector is empty")
    counts = np.array([np.sum(g == 0.0), np.sum(g == 1.0), np.sum(g == 2.0)], dtype=float)
    p = float(np.sum(g)) / (2.0 * n)
    expected = np.array([n * (1.0 - p) ** 2, 2.0 * n * p * (1.0 - p), n * p ** 2])
    mask = expected > 0.0
    stat = float(np.sum((counts[mask] - expected[mask]) ** 2 / expected[mask]))
    return float(stats.chi2.sf(stat, df=1))


def qc_filter(gm: GenotypeMatrix, maf_min, hwe_p_min):
    """Keep SNPs with MAF >= maf_min and HWE p-value >= hwe_p_min, in order."""
    if not 0.0 <= maf_min <= 0.5:
        raise ValueError(f"maf_min must lie in [0, 0.5], got {maf_min}")
    if not 0.0 <= hwe_p_min <= 1.0:
        raise ValueError(f"hwe_p_min must lie in [0, 1], got {hwe_p_min}")
    keep = [j for j in range(gm.m)
            if minor_allele_frequency(gm.G[:, j]) >= maf_min
            and hwe_pvalue(gm.G[:, j]) >= hwe_p_min]
    ids = [gm.snp_ids[j] for j in keep]
    meta = None
    if gm.feature_meta is not None:
        meta = {k: gm.feature_meta[k] for k in ids if k in gm.feature_meta}
    return GenotypeMatrix(gm.G[:, keep], ids, meta)


def marginal_screen(ds: Dataset, covariate_indices, k):
    """Indices of the k features with the smallest marginal-regression p-value.

    Each candidate is tested by least squares adjusting for the covariate
    columns (which are never screened themselves); ties break toward the
    lower column index.  Returns indices in rank order, best first.
    """
    from .gwas import marginal_ols_pvalue

    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    covariates = sorted(set(int(j) for j in covariate_indices))
    for j in covariates:
        if not 0 <= j < ds.d:
            raise ValueError(f"covariate index {j} out of range")
    candidates = np.array([j for j in range(ds.d) if j not in covariates], dtype=int)
    if k > candidates.size:
        warnings.warn(f"screening asked for top {k} of {candidates.size} features; "
                      "keeping all", stacklevel=2)
        k = candidates.size
    pvals = np.array([marginal_ols_pvalue(ds, j, covariates).p_value
                      for j in candidates])
    order = np.lexsort((candidates, pvals))
    return candidates[order[:k]]
