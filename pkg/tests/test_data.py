import math

import numpy as np
import pytest

from kiqr.data import (Dataset, GenotypeMatrix, hwe_pvalue, load_csv,
                       load_genotype_csv, marginal_screen,
                       minor_allele_frequency, qc_filter, standardize,
                       unstandardize)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_csv_basic(tmp_path):
    path = _write(tmp_path, "y,a,b\n1,2,3\n4,5,6\n7,8,9\n")
    ds = load_csv(path, "y")
    assert ds.n == 3 and ds.d == 2
    assert ds.feature_names == ["a", "b"]
    assert np.allclose(ds.y, [1, 4, 7])
    assert np.allclose(ds.X, [[2, 3], [5, 6], [8, 9]])


def test_load_csv_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(str(tmp_path / "missing.csv"), "y")
    p = _write(tmp_path, "y,a\n1,NaN\n")
    with pytest.raises(ValueError, match="line 2.*'a'"):
        load_csv(p, "y")
    p = _write(tmp_path, "y,a\n1,oops\n", "b.csv")
    with pytest.raises(ValueError, match="non-numeric.*line 2"):
        load_csv(p, "y")
    p = _write(tmp_path, "y,a\n1,2\n", "c.csv")
    with pytest.raises(ValueError, match="response column 'z'"):
        load_csv(p, "z")
    p = _write(tmp_path, "y,a,a\n1,2,3\n", "d.csv")
    with pytest.raises(ValueError, match="duplicate header"):
        load_csv(p, "y")
    p = _write(tmp_path, "y,a\n1,2\n3\n", "e.csv")
    with pytest.raises(ValueError, match="line 3"):
        load_csv(p, "y")


def test_dataset_invariants():
    with pytest.raises(ValueError, match="non-finite"):
        Dataset(np.array([[np.inf]]), np.array([1.0]), ["a"])
    with pytest.raises(ValueError, match="unique"):
        Dataset(np.ones((2, 2)), np.ones(2), ["a", "a"])
    ds = Dataset.from_arrays(np.ones((2, 2)), np.ones(2))
    assert not ds.X.flags.writeable


def test_standardize_column():
    ds = Dataset.from_arrays(np.array([[1.0], [2.0], [3.0]]), np.zeros(3))
    out, stz = standardize(ds)
    assert out.X[:, 0] == pytest.approx([-1.0, 0.0, 1.0])
    assert stz.means[0] == pytest.approx(2.0)
    assert stz.scales[0] == pytest.approx(1.0)
    assert not stz.constant[0]


def test_standardize_constant_column():
    ds = Dataset.from_arrays(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]),
                             np.zeros(3))
    out, stz = standardize(ds)
    assert np.allclose(out.X[:, 0], 0.0)
    assert stz.scales[0] == 1.0
    assert stz.constant[0] and not stz.constant[1]


def test_standardize_roundtrip():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 6)) * rng.uniform(0.5, 8, 6) + rng.uniform(-3, 3, 6)
    X[:, 2] = 7.25
    ds = Dataset.from_arrays(X, rng.standard_normal(20))
    out, stz = standardize(ds)
    back = unstandardize(out, stz)
    assert np.max(np.abs(back.X - ds.X)) < 1e-12 * max(1.0, np.max(np.abs(ds.X)))


def test_standardize_needs_two_rows():
    ds = Dataset.from_arrays(np.ones((1, 2)), np.ones(1))
    with pytest.raises(ValueError):
        standardize(ds)


def test_minor_allele_frequency():
    assert minor_allele_frequency(np.array([0, 1, 2, 2, 1, 0, 0, 1.0])) \
        == pytest.approx(7 / 16)
    assert minor_allele_frequency(np.zeros(5)) == 0.0
    assert minor_allele_frequency(np.full(5, 2.0)) == 0.0
    with pytest.raises(ValueError):
        minor_allele_frequency(np.array([0.0, 3.0]))


def test_hwe_exact_equilibrium():
    g = np.concatenate([np.zeros(160), np.ones(480), np.full(360, 2.0)])
    assert hwe_pvalue(g) == pytest.approx(1.0)


def test_hwe_extreme_disequilibrium():
    g = np.concatenate([np.zeros(300), np.ones(200), np.full(500, 2.0)])
    # hand statistic: p = 0.6, expected (160, 480, 360)
    stat = (300 - 160) ** 2 / 160 + (200 - 480) ** 2 / 480 + (500 - 360) ** 2 / 360
    assert stat == pytest.approx(340.2778, abs=1e-3)
    # independent survival value for 1 df via the error function
    p_oracle = math.erfc(math.sqrt(stat / 2))
    p = hwe_pvalue(g)
    assert p < 1e-10
    assert p == pytest.approx(p_oracle, rel=1e-8)


def test_hwe_degenerate_and_swap_invariance():
    assert 0.0 <= hwe_pvalue(np.array([1.0])) <= 1.0
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = rng.integers(0, 3, 40).astype(float)
        assert hwe_pvalue(g) == pytest.approx(hwe_pvalue(2.0 - g), abs=1e-12)


def test_qc_filter():
    rng = np.random.default_rng(7)
    G = rng.integers(0, 3, (100, 50)).astype(float)
    G[:, 7] = 0.0  # monomorphic SNP
    gm = GenotypeMatrix(G, [f"s{j}" for j in range(50)])
    # thresholds at zero keep everything
    assert qc_filter(gm, 0.0, 0.0).m == 50
    out = qc_filter(gm, 0.1, 0.0)
    assert "s7" not in out.snp_ids
    # brute-force per-column agreement
    out2 = qc_filter(gm, 0.1, 0.001)
    expect = [f"s{j}" for j in range(50)
              if minor_allele_frequency(G[:, j]) >= 0.1
              and hwe_pvalue(G[:, j]) >= 0.001]
    assert out2.snp_ids == expect
    with pytest.raises(ValueError):
        qc_filter(gm, 0.7, 0.0)


def test_qc_filter_column_order_independent():
    rng = np.random.default_rng(8)
    G = rng.integers(0, 3, (60, 12)).astype(float)
    gm = GenotypeMatrix(G, [f"s{j}" for j in range(12)])
    kept = set(qc_filter(gm, 0.1, 0.01).snp_ids)
    perm = rng.permutation(12)
    gmp = GenotypeMatrix(G[:, perm], [f"s{j}" for j in perm])
    assert set(qc_filter(gmp, 0.1, 0.01).snp_ids) == kept


def test_genotype_validation():
    with pytest.raises(ValueError, match="dosage"):
        GenotypeMatrix(np.array([[0.5]]), ["s"])


def test_load_genotype_csv(tmp_path):
    p = _write(tmp_path, "s1,s2\n0,2\n1,1\n2,0\n")
    gm = load_genotype_csv(p)
    assert gm.n == 3 and gm.m == 2
    meta = _write(tmp_path, "snp_id,chromosome,position\ns1,1,100\ns2,2,250\n",
                  "meta.csv")
    gm2 = load_genotype_csv(p, meta)
    assert gm2.feature_meta["s2"] == (2, 250)


def test_marginal_screen_identity_and_ranking():
    rng = np.random.default_rng(2)
    n, d = 120, 8
    X = rng.standard_normal((n, d))
    y = X[:, 3] + 0.05 * rng.standard_normal(n)
    ds = Dataset.from_arrays(X, y)
    assert set(marginal_screen(ds, (), d).tolist()) == set(range(d))
    top = marginal_screen(ds, (), 3)
    assert top[0] == 3
    # independent p-value ranking oracle
    from scipy import stats
    pvals = [stats.linregress(X[:, j], y).pvalue for j in range(d)]
    assert top[0] == int(np.argmin(pvals))


def test_marginal_screen_tie_break_and_warning():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((50, 4))
    X[:, 2] = X[:, 0]  # byte-identical duplicate
    y = X[:, 0] + 0.1 * rng.standard_normal(50)
    ds = Dataset.from_arrays(X, y)
    top = marginal_screen(ds, (), 2)
    assert list(top) == [0, 2]
    with pytest.warns(UserWarning, match="keeping all"):
        out = marginal_screen(ds, (), 99)
    assert out.size == 4


def test_marginal_screen_deterministic_with_covariates():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((80, 10))
    y = X[:, 1] + 0.5 * X[:, 0] + 0.2 * rng.standard_normal(80)
    ds = Dataset.from_arrays(X, y)
    a = marginal_screen(ds, (0,), 4)
    b = marginal_screen(ds, (0,), 4)
    assert np.array_equal(a, b)
    assert 0 not in a
