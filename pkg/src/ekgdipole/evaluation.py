"""Held-out reconstruction error and bootstrap comparison of models."""

import csv
import io
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import EmptyInput, NoHeldOutData, RecordSetMismatch
from .geometry import LEADS

REPORT_HEADER = ("record_id", "model", "lead", "rmse_mv")
SUMMARY_HEADER = ("model", "median_rmse_mv", "ci_lo_2.5", "ci_hi_97.5")
PAIRWISE_HEADER = ("model_a", "model_b", "median_diff_mv", "ci_lo_2.5", "ci_hi_97.5")


@dataclass
class EvalReport:
    model_label: str
    per_record_rmse: dict = field(default_factory=dict)
    per_lead_rmse: dict = field(default_factory=dict)   # (record_id, lead) -> mV

    def add(self, record_id, pooled, per_lead):
        self.per_record_rmse[record_id] = pooled
        for lead, value in per_lead.items():
            self.per_lead_rmse[(record_id, lead)] = value

    def values(self):
        """Pooled per-record RMSEs ordered by record id."""
        return np.array([self.per_record_rmse[k] for k in sorted(self.per_record_rmse)])


@dataclass
class BootstrapSummary:
    median_rmse_samples: np.ndarray
    n_bootstrap: int
    seed: int

    def interval(self, lo=2.5, hi=97.5):
        return tuple(np.percentile(self.median_rmse_samples, [lo, hi]))


def holdout_rmse(truth, imputed):
    """RMSE over the held-out entries of ``truth``.

    Returns
    -------
    pooled : float
        RMSE over every held-out entry of the record.
    per_lead : dict
        Lead name to RMSE, for leads with at least one held-out entry.
    """
    held = truth.held_out
    if not held.any():
        raise NoHeldOutData(f"record {truth.record_id} has no held-out entries")
    imputed = np.asarray(imputed, dtype=float)
    diff = np.where(held, imputed - np.where(held, truth.samples, 0.0), 0.0)
    sq = diff * diff
    pooled = float(np.sqrt(sq.sum() / held.sum()))
    counts = held.sum(axis=0)
    per_lead = {LEADS[j]: float(np.sqrt(sq[:, j].sum() / counts[j]))
                for j in range(len(LEADS)) if counts[j]}
    return pooled, per_lead


def _resample_indices(n, n_bootstrap, seed):
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=(n_bootstrap, n))


def bootstrap_median(per_record_rmse, n_bootstrap=1000, seed=0):
    """Medians of ``n_bootstrap`` resamples (with replacement) of the input.

    The input is sorted first, so the result does not depend on its order.
    """
    values = np.sort(np.asarray(list(per_record_rmse), dtype=float))
    if values.size == 0:
        raise EmptyInput("no RMSE values to resample")
    if n_bootstrap < 1:
        raise ValueError("n_bootstrap must be at least 1")
    idx = _resample_indices(values.size, n_bootstrap, seed)
    return BootstrapSummary(np.median(values[idx], axis=1), n_bootstrap, seed)


@dataclass
class Comparison:
    summaries: dict            # model -> BootstrapSummary
    point_medians: dict        # model -> median of the per-record RMSEs
    pairwise: list             # (a, b, median diff, lo, hi)

    def summary_rows(self):
        for model, summ in self.summaries.items():
            lo, hi = summ.interval()
            yield model, self.point_medians[model], lo, hi

    def summary_csv(self):
        return _csv(SUMMARY_HEADER, ([m, _f(v), _f(lo), _f(hi)]
                                     for m, v, lo, hi in self.summary_rows()))

    def pairwise_csv(self):
        return _csv(PAIRWISE_HEADER, ([a, b, _f(d), _f(lo), _f(hi)]
                                      for a, b, d, lo, hi in self.pairwise))

    def table(self):
        lines = [f"{'model':<12} {'median RMSE (mV)':>17} {'2.5%':>10} {'97.5%':>10}"]
        for m, v, lo, hi in self.summary_rows():
            lines.append(f"{m:<12} {v:>17.6f} {lo:>10.6f} {hi:>10.6f}")
        if self.pairwise:
            lines.append("")
            lines.append(f"{'difference':<26} {'median':>10} {'2.5%':>10} {'97.5%':>10}")
            for a, b, d, lo, hi in self.pairwise:
                lines.append(f"{a + ' - ' + b:<26} {d:>10.6f} {lo:>10.6f} {hi:>10.6f}")
        return "\n".join(lines) + "\n"


def _f(v):
    return f"{v:.6f}"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def compare_models(reports, n_bootstrap=1000, seed=0):
    """Bootstrap summaries per model and paired differences between models.

    All models are resampled with the same record indices, so differences
    are paired by record.
    """
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports to compare")
    ids = sorted(reports[0].per_record_rmse)
    for r in reports[1:]:
        if sorted(r.per_record_rmse) != ids:
            raise RecordSetMismatch(
                f"{r.model_label} covers a different record set than {reports[0].model_label}")
    if not ids:
        raise EmptyInput("reports hold no records")
    idx = _resample_indices(len(ids), n_bootstrap, seed)
    aligned = {r.model_label: r.values() for r in reports}
    boot = {m: np.median(v[idx], axis=1) for m, v in aligned.items()}
    summaries = {m: BootstrapSummary(b, n_bootstrap, seed) for m, b in boot.items()}
    points = {m: float(np.median(v)) for m, v in aligned.items()}
    pairwise = []
    for a, b in combinations(aligned, 2):
        d = boot[a] - boot[b]
        lo, hi = np.percentile(d, [2.5, 97.5])
        pairwise.append((a, b, float(np.median(d)), float(lo), float(hi)))
    return Comparison(summaries, points, pairwise)


def report_rows(reports):
    """Rows of the per-record report CSV, pooled (``ALL``) then per lead."""
    for r in reports:
        for rid in sorted(r.per_record_rmse):
            yield rid, r.model_label, "ALL", _f(r.per_record_rmse[rid])
            for lead in LEADS:
                if (rid, lead) in r.per_lead_rmse:
                    yield rid, r.model_label, lead, _f(r.per_lead_rmse[(rid, lead)])


def report_csv(reports):
    return _csv(REPORT_HEADER, report_rows(reports))
