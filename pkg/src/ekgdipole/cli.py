"""Command-line entry point: ``ekgdipole {synth,mask,fit,eval}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 internal error.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data, evaluation, inference, ppca, synth
from .config import ConfigError, RunConfig, load_run_config, load_synth_spec, to_dict
from .errors import EkgDipoleError, RecordSetMismatch
from .priors import default_electrode_priors

log = logging.getLogger("ekgdipole")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
MODELS = ("dipole", "ppca3", "ppca6")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# synth

def _truth_json(truth):
    return {k: np.asarray(v).tolist() if not np.isscalar(v) else v
            for k, v in vars(truth).items()}


def cmd_synth(args):
    try:
        specs, ids = load_synth_spec(args.spec)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for spec, rid in zip(specs, ids):
        record, truth = synth.generate(spec, rid)
        data.write_record(record, out / f"{rid}.csv")
        payload = {"kind": type(spec).__name__, "spec": to_dict(spec), "truth": _truth_json(truth)}
        (out / f"{rid}.groundtruth.json").write_text(json.dumps(payload) + "\n", encoding="utf-8")
        log.info("wrote %s", rid)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mask

def cmd_mask(args):
    cfg = _config(args)
    scheme = cfg.ptb if args.scheme == "ptb" else cfg.ed
    if args.seed is not None:
        scheme = type(scheme)(**{**asdict(scheme), "seed": args.seed})
    record = data.read_record(args.input)
    masked = data.apply_mask_scheme(record, scheme)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    data.write_record(masked, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def _fit_one(path, model, cfg, out):
    """Fit and impute one record; returns (record_id, error message or None)."""
    try:
        record = data.read_record(path)
        rid = record.record_id
        if model == "dipole":
            priors = default_electrode_priors(cfg.priors)
            result = inference.fit(record, priors, cfg.fit)
            imputed = inference.impute(result, record)
            diag = {
                "record_id": rid, "model": model,
                "log_joint": result.log_joint,
                "iterations": result.iterations,
                "converged": bool(result.converged),
                "grad_inf_norm": result.grad_inf_norm,
                "restart_log_joints": result.restart_log_joints,
                "layout": result.layout.positions.tolist(),
                "locations": result.locations.tolist(),
                "moments": result.moments.tolist(),
            }
        else:
            K = int(model[len("ppca"):])
            result = ppca.ppca_fit(record, K, cfg.ppca)
            imputed = ppca.ppca_impute(result, record)
            m = result.model
            diag = {
                "record_id": rid, "model": model, "K": K,
                "log_likelihood_trace": [float(v) for v in result.log_likelihood_trace],
                "iterations": result.iterations,
                "converged": bool(result.converged),
                "noise_variance": float(m.noise_variance),
                "factors": m.factors.tolist(),
                "mean": m.mean.tolist(),
            }
        filled = data.full_record(imputed, record.sample_rate_hz, rid)
        data.write_record(filled, out / f"{rid}.{model}.imputed.csv")
        (out / f"{rid}.{model}.json").write_text(json.dumps(diag) + "\n", encoding="utf-8")
        return path.name, None
    except (EkgDipoleError, ValueError, OSError) as exc:
        return path.name, f"{type(exc).__name__}: {exc}"


def cmd_fit(args):
    cfg = _config(args)
    src = Path(args.input)
    if src.is_dir():
        paths = data.list_record_files(src)
    elif src.is_file():
        paths = [src]
    else:
        raise UsageError(f"--in {src} does not exist")
    if not paths:
        raise UsageError(f"no record files under {src}")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.jobs == 1 or len(paths) == 1:
        results = [_fit_one(p, args.model, cfg, out) for p in paths]
    else:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(paths))) as pool:
            results = list(pool.map(_fit_one, paths, [args.model] * len(paths),
                                    [cfg] * len(paths), [out] * len(paths)))
    failures = [(name, err) for name, err in results if err]
    for name, err in failures:
        log.error("%s: %s", name, err)
    log.info("%s: %d fitted, %d failed", args.model, len(results) - len(failures), len(failures))
    return EXIT_DATA if len(failures) == len(results) else EXIT_OK


# ---------------------------------------------------------------------------
# eval

IMPUTED_SUFFIX = ".imputed.csv"


def _imputed_files(dirs):
    """Map model -> {record_id: path} from ``<record_id>.<model>.imputed.csv`` files."""
    found = {}
    for d in dirs:
        d = Path(d)
        if not d.is_dir():
            raise UsageError(f"--imputed {d} is not a directory")
        for p in sorted(d.iterdir()):
            if not p.name.endswith(IMPUTED_SUFFIX):
                continue
            stem = p.name[:-len(IMPUTED_SUFFIX)]
            if "." not in stem:
                continue
            rid, model = stem.rsplit(".", 1)
            found.setdefault(model, {})[rid] = p
    return found


def cmd_eval(args):
    if args.bootstrap < 1:
        raise UsageError("--bootstrap must be at least 1")
    truth_dir = Path(args.truth)
    if not truth_dir.is_dir():
        raise UsageError(f"--truth {truth_dir} is not a directory")
    files = _imputed_files(args.imputed)
    if not files:
        raise UsageError("no *.imputed.csv files found")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    from .plots import plot_median_distributions, plot_reconstruction

    truths = {}
    reports = []
    for model in sorted(files):
        report = evaluation.EvalReport(model)
        for rid in sorted(files[model]):
            if rid not in truths:
                truth_path = truth_dir / f"{rid}.csv"
                if not truth_path.exists():
                    raise RecordSetMismatch(f"no truth record {truth_path}")
                truths[rid] = data.read_record(truth_path)
            truth = truths[rid]
            imputed = data.read_record(files[model][rid]).samples
            if imputed.shape != truth.samples.shape:
                raise RecordSetMismatch(f"{files[model][rid]} does not match {rid}")
            pooled, per_lead = evaluation.holdout_rmse(truth, imputed)
            report.add(rid, pooled, per_lead)
            if not args.no_plots:
                plot_reconstruction(truth, imputed, out / f"{rid}.{model}.svg", model)
        reports.append(report)

    comparison = evaluation.compare_models(reports, args.bootstrap, args.seed)
    (out / "report.csv").write_text(evaluation.report_csv(reports), encoding="utf-8")
    (out / "summary.csv").write_text(comparison.summary_csv(), encoding="utf-8")
    (out / "pairwise.csv").write_text(comparison.pairwise_csv(), encoding="utf-8")
    table = comparison.table()
    (out / "comparison.txt").write_text(table, encoding="utf-8")
    if not args.no_plots:
        plot_median_distributions(comparison, out / "median_rmse.svg")
    sys.stdout.write(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring

def _config(args):
    try:
        return load_run_config(args.config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _defaults_epilog():
    return ("default run config (JSON; every key optional, unknown keys rejected):\n"
            + json.dumps(to_dict(RunConfig()), indent=2))


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="ekgdipole", description="Moving-dipole EKG model: synthesize, mask, fit, evaluate.",
        epilog=_defaults_epilog(), formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic records")
    p.add_argument("--spec", required=True, help="synth spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mask", help="apply a ptb or ed mask scheme to one record",
                       epilog=_defaults_epilog(), formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--scheme", choices=("ptb", "ed"), required=True)
    p.add_argument("--config", help="run config JSON (mask parameters under 'ptb'/'ed')")
    p.add_argument("--seed", type=int, help="override the scheme seed from the config")
    p.add_argument("--out", required=True, help="output record path")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("fit", help="fit a model to records and impute unobserved entries",
                       epilog=_defaults_epilog(), formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="record file or directory")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1, help="concurrent record fits (default 1)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="held-out RMSE, bootstrap summaries and plots")
    p.add_argument("--truth", required=True, help="directory of masked records")
    p.add_argument("--imputed", required=True, nargs="+", help="directories of imputed CSVs")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EkgDipoleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
