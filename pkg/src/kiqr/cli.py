"""Command-line surface: fit, simulate, gwas, qc, and report subcommands.

Every command writes its outputs plus a ``manifest.json`` capturing the
resolved configuration, seed, and input digests; re-running with the same
manifest configuration reproduces the data outputs byte for byte (wall-clock
and measured runtimes are the only volatile fields).  Numeric output carries
17 significant digits.  ``KIQR_THREADS`` caps parallelism (0 = auto).
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from ._fmt import g17
from .data import Dataset, GenotypeMatrix, hwe_pvalue, load_csv, \
    minor_allele_frequency, _read_numeric_csv
from .gwas import GENOME_WIDE_THRESHOLD, gwas_scan, marginal_ols_pvalue, \
    write_manhattan_csv
from .penalties import ScadParams
from .simulate import METHODS, SCENARIO_LABELS, ErrorLaw, ReplicateRow, \
    ScenarioReport, SimDesign, run_replications
from .solver import FitConfig, PriorKnowledge, fit_kiqr
from .tuning import TuningGrid, fit_kiqr_tuned

_METHOD_ALIASES = {"kiqr": "kiqr", "trad": "trad_qr", "trad_qr": "trad_qr",
                   "prior": "prior_qr", "prior_qr": "prior_qr",
                   "gwas": "gwas_qr", "gwas_qr": "gwas_qr"}

REPLICATE_COLUMNS = ("replicate", "method", "scenario", "tau", "tp", "fp",
                     "fn", "f1", "mse", "x1_selected", "runtime_ms")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(command, config, seed, inputs, started):
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "input_digests": {str(p): _sha256(p) for p in inputs if p},
        "artifact_version": __version__,
        "wall_clock_utc": datetime.now(timezone.utc).isoformat(),
        "elapsed_ms": (time.perf_counter() - started) * 1000.0,
    }


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_defaults(argv):
    """Pre-scan for --config and turn its entries into parser defaults."""
    if "--config" not in argv:
        return {}
    path = argv[argv.index("--config") + 1]
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
        entries = blob.get("config", blob)
    else:
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}: line {line_no} is not key=value")
                key, value = line.split("=", 1)
                entries[key.strip()] = value.strip()
    return {str(k).replace("-", "_"): v for k, v in entries.items()}


def _resolved_config(args, skip=("func", "config")):
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        out[key] = value
    return out


def _parse_floats(text):
    return tuple(float(v) for v in str(text).split(",") if v != "")


def _names_to_indices(ds, names, what):
    index = {name: j for j, name in enumerate(ds.feature_names)}
    out = []
    for name in names:
        if name not in index:
            raise ValueError(f"unknown {what} feature {name!r}")
        out.append(index[name])
    return out


def _read_prior_set(path, ds):
    with open(path, encoding="utf-8") as fh:
        names = [line.strip() for line in fh if line.strip()]
    return np.array(_names_to_indices(ds, names, "prior-set"), dtype=int)


def _read_prior_coefs(path, ds):
    header, rows = None, []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["feature", "beta_original_scale"]:
            raise ValueError(f"{path}: expected header feature,beta_original_scale")
        for row in reader:
            if row:
                rows.append((row[0].strip(), float(row[1])))
    beta = np.zeros(ds.d + 1)
    index = {name: j for j, name in enumerate(ds.feature_names)}
    for name, value in rows:
        if name == "(intercept)":
            beta[0] = value
        elif name in index:
            beta[index[name] + 1] = value
        else:
            raise ValueError(f"unknown prior-coefficient feature {name!r}")
    return beta


def _table_to_json(result):
    table = []
    for row in result.score_table:
        entry = {"zeta": row["zeta"],
                 "lambdas": [float(v) for v in row["lambdas"]],
                 "scores": [float(v) for v in row["scores"]]}
        if "ses" in row:
            entry["ses"] = [float(v) for v in row["ses"]]
        table.append(entry)
    return table


def cmd_fit(args):
    started = time.perf_counter()
    ds = load_csv(args.data, args.response)
    if args.prior_set and args.prior_coefs:
        raise ValueError("--prior-set and --prior-coefs are mutually exclusive")
    prior = None
    if args.prior_set:
        prior = PriorKnowledge(prior_set=_read_prior_set(args.prior_set, ds))
    elif args.prior_coefs:
        prior = PriorKnowledge(prior_coefficients=_read_prior_coefs(args.prior_coefs, ds))

    tuning_json = None
    if args.lam is None:
        if args.zeta is not None:
            zetas = (float(args.zeta),)
        elif prior is None:
            zetas = (0.0,)
        elif args.zeta_grid:
            zetas = _parse_floats(args.zeta_grid)
        else:
            zetas = TuningGrid().zeta_values
        grid = TuningGrid(zeta_values=zetas, n_lambda=args.n_lambda,
                          lambda_min_ratio=args.lambda_min_ratio,
                          folds=args.folds, rule=args.cv_rule)
        fit, tuning, _ = fit_kiqr_tuned(ds, tau=args.tau, gamma=args.gamma,
                                        prior=prior, grid=grid,
                                        scad_a=args.scad_a,
                                        lla_passes=args.lla_passes,
                                        tol=args.tol, max_sweeps=args.max_sweeps,
                                        criterion=args.tune, seed=args.seed)
        zeta_used, lam_used = tuning.best_zeta, tuning.best_lambda
        tuning_json = {"criterion": tuning.criterion, "best_zeta": zeta_used,
                       "best_lambda": lam_used, "table": _table_to_json(tuning)}
    else:
        zeta_used = float(args.zeta) if args.zeta is not None else 0.0
        config = FitConfig(tau=args.tau, zeta=zeta_used,
                           scad=ScadParams(lam=float(args.lam), a=args.scad_a),
                           gamma=args.gamma, tol=args.tol,
                           max_sweeps=args.max_sweeps,
                           lla_passes=args.lla_passes)
        fit = fit_kiqr(ds, config, prior)
        lam_used = float(args.lam)

    os.makedirs(args.out, exist_ok=True)
    coef_path = os.path.join(args.out, "coefficients.csv")
    with open(coef_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "beta_original_scale"])
        writer.writerow(["(intercept)", g17(fit.beta[0])])
        for j, name in enumerate(ds.feature_names):
            writer.writerow([name, g17(fit.beta[j + 1])])

    inputs = [args.data, args.prior_set, args.prior_coefs, args.config]
    manifest = _manifest("fit", _resolved_config(args), args.seed, inputs, started)
    _write_json(os.path.join(args.out, "fit.json"), {
        "tau": args.tau, "zeta": zeta_used, "lambda": lam_used,
        "gamma": args.gamma,
        "support_indices": [int(j) for j in fit.support],
        "support_features": [ds.feature_names[j] for j in fit.support],
        "converged": fit.converged, "sweeps_used": fit.sweeps_used,
        "objective_trace": [float(v) for v in fit.objective_trace],
        "tuning": tuning_json,
        "manifest": manifest,
    })
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def _write_replicates_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATE_COLUMNS)
        for r in rows:
            writer.writerow([r.replicate, r.method, r.scenario, g17(r.tau),
                             r.tp, r.fp, r.fn, g17(r.f1), g17(r.mse),
                             int(r.x1_selected), g17(r.runtime_ms)])


def cmd_simulate(args):
    started = time.perf_counter()
    kind = {"1": "example1", "2": "example2", "mimic": "mimic"}.get(args.example)
    if kind is None:
        raise ValueError(f"--example must be 1, 2 or mimic, got {args.example!r}")
    methods = tuple(dict.fromkeys(_METHOD_ALIASES[m.strip()]
                                  for m in args.methods.split(",") if m.strip()))
    scenarios = tuple(s.strip() for s in args.scenarios.split(",") if s.strip())
    error = ErrorLaw(args.error, args.error_param) if args.error else None
    design = SimDesign(kind=kind, n=args.n, d=args.d, rho=args.rho,
                       error=error, seed=args.seed)
    zetas = _parse_floats(args.zeta_grid) if args.zeta_grid \
        else TuningGrid().zeta_values
    report = run_replications(design, scenarios=scenarios, methods=methods,
                              taus=_parse_floats(args.taus), reps=args.reps,
                              seed=args.seed, gamma=args.gamma,
                              lla_passes=args.lla_passes,
                              n_lambda=args.n_lambda,
                              lambda_min_ratio=args.lambda_min_ratio,
                              zeta_values=zetas,
                              gwas_threshold=args.gwas_threshold)
    os.makedirs(args.out, exist_ok=True)
    _write_replicates_csv(os.path.join(args.out, "replicates.csv"), report.rows)
    _write_json(os.path.join(args.out, "aggregate.json"), report.aggregate())
    manifest = _manifest("simulate", _resolved_config(args), args.seed,
                         [args.config], started)
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    if report.failures:
        print(f"{len(report.failures)} cell(s) failed; see aggregate.json",
              file=sys.stderr)
    return 0


def cmd_gwas(args):
    started = time.perf_counter()
    ds = load_csv(args.data, args.response)
    covariates = []
    if args.covariates:
        covariates = _names_to_indices(
            ds, [c.strip() for c in args.covariates.split(",") if c.strip()],
            "covariate")
    highlight = None
    if args.highlight:
        with open(args.highlight, encoding="utf-8") as fh:
            fitblob = json.load(fh)
        highlight = _names_to_indices(ds, fitblob["support_features"], "highlight")
    results, selected = gwas_scan(ds, covariates=covariates, method=args.method,
                                  threshold=args.threshold, tau=args.tau,
                                  gamma=args.gamma)
    os.makedirs(args.out, exist_ok=True)
    write_manhattan_csv(os.path.join(args.out, "manhattan.csv"), ds, results,
                        highlight=highlight)
    manifest = _manifest("gwas", _resolved_config(args), args.seed,
                         [args.data, args.highlight, args.config], started)
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(f"{selected.size} feature(s) below threshold {g17(args.threshold)}",
          file=sys.stderr)
    return 0


def cmd_qc(args):
    started = time.perf_counter()
    header, M = _read_numeric_csv(args.genotypes)
    special = []
    if args.response:
        if args.response not in header:
            raise ValueError(f"response column {args.response!r} not found")
        special.append(args.response)
    covariate_names = [c.strip() for c in (args.covariates or "").split(",")
                       if c.strip()]
    for name in covariate_names:
        if name not in header:
            raise ValueError(f"covariate column {name!r} not found")
        special.append(name)
    snp_names = [h for h in header if h not in special]
    snp_cols = {h: header.index(h) for h in header}
    G = M[:, [snp_cols[s] for s in snp_names]]
    gm = GenotypeMatrix(G, snp_names)

    maf = np.array([minor_allele_frequency(G[:, j]) for j in range(gm.m)])
    hwe = np.array([hwe_pvalue(G[:, j]) for j in range(gm.m)])
    qc_pass = (maf >= args.maf_min) & (hwe >= args.hwe_p)

    screen_p = {}
    kept = {name: bool(ok) for name, ok in zip(snp_names, qc_pass)}
    if args.top_k is not None:
        if not args.response:
            raise ValueError("--top-k screening needs --response")
        passed = [s for s, ok in zip(snp_names, qc_pass) if ok]
        cols = covariate_names + passed
        sub = Dataset(M[:, [snp_cols[c] for c in cols]],
                      M[:, snp_cols[args.response]], cols)
        cov_idx = list(range(len(covariate_names)))
        for rank, j in enumerate(range(len(covariate_names), sub.d)):
            res = marginal_ols_pvalue(sub, j, cov_idx)
            screen_p[cols[j]] = res.p_value
        import warnings as _warnings
        from .data import marginal_screen
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            top = marginal_screen(sub, cov_idx, args.top_k)
        top_names = {cols[j] for j in top}
        if args.top_k > len(passed):
            print(f"--top-k {args.top_k} exceeds the {len(passed)} SNPs passing "
                  "QC; keeping all", file=sys.stderr)
        kept = {name: (name in top_names) for name in snp_names}

    os.makedirs(args.out, exist_ok=True)
    kept_names = [s for s in snp_names if kept[s]]
    out_cols = special + kept_names
    with open(os.path.join(args.out, "retained.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(out_cols)
        for i in range(M.shape[0]):
            writer.writerow([g17(M[i, snp_cols[c]]) for c in out_cols])
    with open(os.path.join(args.out, "qc_summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snp", "maf", "hwe_p", "screen_p", "kept"])
        for j, name in enumerate(snp_names):
            writer.writerow([name, g17(maf[j]), g17(hwe[j]),
                             g17(screen_p[name]) if name in screen_p else "",
                             int(kept[name])])
    manifest = _manifest("qc", _resolved_config(args), args.seed,
                         [args.genotypes, args.config], started)
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def read_replicates_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(REPLICATE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            rows.append(ReplicateRow(
                replicate=int(rec["replicate"]), method=rec["method"],
                scenario=rec["scenario"], tau=float(rec["tau"]),
                tp=int(rec["tp"]), fp=int(rec["fp"]), fn=int(rec["fn"]),
                f1=float(rec["f1"]), mse=float(rec["mse"]),
                x1_selected=bool(int(rec["x1_selected"])),
                runtime_ms=float(rec["runtime_ms"])))
    return rows


def cmd_report(args):
    started = time.perf_counter()
    rows = read_replicates_csv(args.replicates)
    taus = tuple(sorted({r.tau for r in rows}))
    reps = len({r.replicate for r in rows})
    design = SimDesign(kind="example1")  # shape only; kind is not persisted
    report = ScenarioReport(design=design, taus=taus, reps=reps,
                            seed=args.seed, rows=rows)
    agg = report.aggregate()
    agg["design"] = "from-file"
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "aggregate.json"), agg)
    with open(os.path.join(args.out, "f1_summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "scenario", "tau", "mean_f1", "se_f1",
                         "n_replicates"])
        for cell in agg["cells"]:
            writer.writerow([cell["method"], cell["scenario"], g17(cell["tau"]),
                             g17(cell["means"]["f1"]),
                             g17(cell["standard_errors"]["f1"]),
                             cell["n_replicates"]])
    manifest = _manifest("report", _resolved_config(args), args.seed,
                         [args.replicates, args.config], started)
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def _add_common(p):
    p.add_argument("--config", help="key=value defaults file or a manifest.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kiqr",
        description="Knowledge-integration penalized quantile regression")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fit", help="fit the model on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--prior-set", help="file with one feature name per line")
    p.add_argument("--prior-coefs", help="CSV feature,beta_original_scale")
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--tune", choices=("qbic", "cv"), default="qbic")
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--scad-a", type=float, default=3.7)
    p.add_argument("--lla-passes", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-sweeps", type=int, default=200000)
    p.add_argument("--n-lambda", type=int, default=50)
    p.add_argument("--lambda-min-ratio", type=float, default=0.01)
    p.add_argument("--zeta-grid", help="comma-separated prior weights")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--cv-rule", choices=("minimum", "one_se"), default="minimum")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run a replicated benchmark study")
    p.add_argument("--example", required=True, help="1, 2, or mimic")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--taus", default="0.5,0.8")
    p.add_argument("--scenarios", default=",".join(SCENARIO_LABELS))
    p.add_argument("--methods", default="kiqr,trad,prior,gwas")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--error", choices=("normal", "t"), default=None)
    p.add_argument("--error-param", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--lla-passes", type=int, default=3)
    p.add_argument("--n-lambda", type=int, default=50)
    p.add_argument("--lambda-min-ratio", type=float, default=0.01)
    p.add_argument("--zeta-grid", help="comma-separated prior weights")
    p.add_argument("--gwas-threshold", type=float, default=GENOME_WIDE_THRESHOLD)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gwas", help="marginal association scan")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", help="comma-separated feature names")
    p.add_argument("--method", choices=("ols", "qr"), default="ols")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=GENOME_WIDE_THRESHOLD)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--highlight", help="fit.json whose support to mark")
    _add_common(p)
    p.set_defaults(func=cmd_gwas)

    p = sub.add_parser("qc", help="genotype quality control and screening")
    p.add_argument("--genotypes", required=True)
    p.add_argument("--response")
    p.add_argument("--covariates", help="comma-separated column names")
    p.add_argument("--maf-min", type=float, default=0.1)
    p.add_argument("--hwe-p", type=float, default=0.001)
    p.add_argument("--top-k", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_qc)

    p = sub.add_parser("report", help="aggregate a replicates.csv")
    p.add_argument("--replicates", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        defaults = _load_config_defaults(argv)
        if defaults:
            for action in parser._subparsers._group_actions:
                for sp in action.choices.values():
                    coerced = {}
                    for a in sp._actions:
                        if a.dest in defaults:
                            value = defaults[a.dest]
                            if a.type is not None and isinstance(value, str):
                                value = a.type(value)
                            coerced[a.dest] = value
                    if coerced:
                        sp.set_defaults(**coerced)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
