"""Compare the dipole model with PPCA over a small synthetic suite.

Generates a handful of records, masks them with both hold-out schemes, fits
all three models and summarizes per-record held-out RMSE with 1,000-sample
bootstrap medians. Writes ``compare_<scheme>.svg``.

This is the library-level version of the command-line pipeline::

    ekgdipole synth --spec spec.json --out raw/
    ekgdipole mask  --in raw/x.csv --scheme ed --out ed/x.csv
    ekgdipole fit   --in ed/ --model dipole --config run.json --out fits/
    ekgdipole eval  --truth ed/ --imputed fits/ --bootstrap 1000 --seed 0 --out eval/

    python demos/04_compare_models.py [n_records]
"""

import sys
from pathlib import Path

from ekgdipole.data import EdLayout, PtbHoldout, apply_mask_scheme
from ekgdipole.evaluation import EvalReport, compare_models, holdout_rmse
from ekgdipole.inference import FitConfig, fit, impute
from ekgdipole.plots import plot_median_distributions
from ekgdipole.ppca import ppca_fit, ppca_impute
from ekgdipole.synth import DipoleLoop, generate

n_records = int(sys.argv[1]) if len(sys.argv) > 1 else 5
config = FitConfig(n_restarts=1, max_outer_iterations=2, lbfgs_max_iters=100,
                   joint_lm_iters=30, d_min=0.02)
records = [generate(DipoleLoop(seed=i), record_id=f"rec{i:02d}")[0] for i in range(n_records)]

for name, scheme in (("ptb", PtbHoldout), ("ed", EdLayout)):
    reports = {m: EvalReport(m) for m in ("dipole", "ppca3", "ppca6")}
    for i, rec in enumerate(records):
        masked = apply_mask_scheme(rec, scheme(seed=i))
        filled = {"dipole": impute(fit(masked, config=config), masked)}
        for K in (3, 6):
            filled[f"ppca{K}"] = ppca_impute(ppca_fit(masked, K), masked)
        for model, values in filled.items():
            reports[model].add(rec.record_id, *holdout_rmse(masked, values))
        print(f"{name} {rec.record_id}: " + ", ".join(
            f"{m} {reports[m].per_record_rmse[rec.record_id]:.3f}" for m in reports))
    comparison = compare_models(reports.values(), n_bootstrap=1000, seed=0)
    print(f"\n{name} mask\n" + comparison.table())
    out = Path(__file__).with_name(f"compare_{name}.svg")
    plot_median_distributions(comparison, out)
    print(f"wrote {out}\n")
