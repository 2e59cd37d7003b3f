"""EKG records, CSV ingestion and hold-out mask schemes.

A record stores a (T, 12) sample array in millivolts alongside a mask of the
same shape. Mask codes are ``OBSERVED`` (used for fitting), ``HELD_OUT``
(ground truth kept for scoring) and ``MISSING`` (no value; stored as NaN).

CSV layout::

    time_s,I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6

Empty cells are unavailable. ``write_record`` adds ``<path>.mask.csv``
(tokens O/H/M) whenever some entry is not observed, and ``<path>.truth.csv``
with the held-out ground truth whenever some entry is held out.
"""

import csv
import os
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, InsufficientLength, NonUniformSampling,
                     ParseError, UnknownLeadHeader)
from .geometry import LEADS, N_LEADS


class Mask(IntEnum):
    OBSERVED = 0
    HELD_OUT = 1
    MISSING = 2


MASK_TOKENS = {Mask.OBSERVED: "O", Mask.HELD_OUT: "H", Mask.MISSING: "M"}
TOKEN_MASK = {v: k for k, v in MASK_TOKENS.items()}
HEADER = ("time_s",) + LEADS
DECIMALS = 6


@dataclass
class EkgRecord:
    samples: np.ndarray
    mask: np.ndarray
    sample_rate_hz: float
    record_id: str = "record"

    def __post_init__(self):
        self.samples = np.array(self.samples, dtype=float)
        if self.mask is None:
            self.mask = np.where(np.isnan(self.samples), Mask.MISSING, Mask.OBSERVED)
        self.mask = np.array(self.mask, dtype=np.int8)
        if self.samples.ndim != 2 or self.samples.shape[1] != N_LEADS:
            raise DimensionMismatch(f"samples must be (T, {N_LEADS}), got {self.samples.shape}")
        if self.mask.shape != self.samples.shape:
            raise DimensionMismatch("mask and samples shapes differ")
        if not np.isin(self.mask, list(Mask)).all():
            raise ValueError("mask holds unknown codes")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")
        avail = self.mask != Mask.MISSING
        if not np.all(np.isfinite(self.samples[avail])):
            raise ValueError("non-missing samples must be finite")
        self.samples[~avail] = np.nan

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def duration_s(self):
        return self.n_samples / self.sample_rate_hz

    @property
    def observed(self):
        return self.mask == Mask.OBSERVED

    @property
    def held_out(self):
        return self.mask == Mask.HELD_OUT

    def observed_values(self):
        """Samples with every non-observed entry zeroed (for masked algebra)."""
        return np.where(self.observed, self.samples, 0.0)

    def with_mask(self, mask):
        return replace(self, samples=self.samples.copy(), mask=mask)


def full_record(samples, sample_rate_hz, record_id="record"):
    samples = np.asarray(samples, dtype=float)
    return EkgRecord(samples, np.zeros(samples.shape, np.int8), sample_rate_hz, record_id)


# ---------------------------------------------------------------------------
# CSV I/O

def _fmt(v):
    s = f"{v:.{DECIMALS}f}"
    return "0.000000" if s == "-0.000000" else s


def _sidecar(path, kind):
    return Path(f"{path}.{kind}.csv")


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_record(record, path):
    """Write a record as CSV plus mask/truth sidecars when needed."""
    path = Path(path)
    t = np.arange(record.n_samples) / record.sample_rate_hz
    obs = record.observed
    rows = ([_fmt(ti)] + [_fmt(v) if o else "" for v, o in zip(row, orow)]
            for ti, row, orow in zip(t, record.samples, obs))
    _write_rows(path, HEADER, rows)

    mask_path, truth_path = _sidecar(path, "mask"), _sidecar(path, "truth")
    if obs.all():
        for p in (mask_path, truth_path):
            if p.exists():
                p.unlink()
        return
    _write_rows(mask_path, LEADS,
                ([MASK_TOKENS[Mask(m)] for m in mrow] for mrow in record.mask))
    held = record.held_out
    if held.any():
        rows = ([_fmt(v) if h else "" for v, h in zip(row, hrow)]
                for row, hrow in zip(record.samples, held))
        _write_rows(truth_path, LEADS, rows)
    elif truth_path.exists():
        truth_path.unlink()


def _read_table(path, expected_header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header) != tuple(expected_header):
            unknown = [h for h in header if h not in expected_header]
            raise UnknownLeadHeader(
                f"{path}: header {header!r} does not match {list(expected_header)!r}"
                + (f" (unknown: {unknown})" if unknown else ""))
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ParseError(f"{path}:{lineno}: expected {len(expected_header)} cells, got {len(row)}")
            rows.append(row)
    return rows


def _parse_cells(rows, path):
    out = np.full((len(rows), len(rows[0]) if rows else 0), np.nan)
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell:
                try:
                    out[i, j] = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{i + 2}: bad number {cell!r}") from None
    return out


def _infer_rate(t, path):
    if len(t) < 2:
        raise ParseError(f"{path}: need at least two samples to infer the sample rate")
    if np.isnan(t).any():
        raise ParseError(f"{path}: empty time_s cell")
    dt = t[1] - t[0]
    if not dt > 0:
        raise NonUniformSampling(f"{path}: time_s is not increasing")
    # the time column is written with a fixed number of decimals
    slack = 1e-6 * dt + 1.5 * 10.0 ** -DECIMALS
    steps = np.diff(t)
    if np.max(np.abs(steps - dt)) > slack:
        raise NonUniformSampling(f"{path}: time steps deviate from {dt:g} s")
    span = t[-1] - t[0]
    return (len(t) - 1) / span


def read_record(path, record_id=None):
    """Read a record written by ``write_record`` (or any conforming CSV)."""
    path = Path(path)
    table = _parse_cells(_read_table(path, HEADER), path)
    if table.shape[0] == 0:
        raise ParseError(f"{path}: no samples")
    rate = _infer_rate(table[:, 0], path)
    samples = table[:, 1:]
    mask = np.where(np.isnan(samples), Mask.MISSING, Mask.OBSERVED).astype(np.int8)

    mask_path = _sidecar(path, "mask")
    if mask_path.exists():
        tokens = _read_table(mask_path, LEADS)
        if len(tokens) != samples.shape[0]:
            raise ParseError(f"{mask_path}: row count differs from {path}")
        try:
            side = np.array([[TOKEN_MASK[c.strip()] for c in row] for row in tokens], np.int8)
        except KeyError as exc:
            raise ParseError(f"{mask_path}: unknown mask token {exc}") from None
        if np.any((side == Mask.OBSERVED) != (mask == Mask.OBSERVED)):
            raise ParseError(f"{mask_path}: observed cells disagree with {path}")
        mask = side
    truth_path = _sidecar(path, "truth")
    held = mask == Mask.HELD_OUT
    if truth_path.exists():
        truth = _parse_cells(_read_table(truth_path, LEADS), truth_path)
        if truth.shape != samples.shape:
            raise ParseError(f"{truth_path}: shape differs from {path}")
        if np.isnan(truth[held]).any():
            raise ParseError(f"{truth_path}: held-out cells lack ground truth")
        samples = np.where(held, truth, samples)
    elif held.any():
        raise ParseError(f"{path}: held-out cells but no {truth_path.name}")
    if record_id is None:
        record_id = path.name[:-4] if path.name.endswith(".csv") else path.name
    return EkgRecord(samples, mask, rate, record_id)


# ---------------------------------------------------------------------------
# Mask schemes

@dataclass(frozen=True)
class PtbHoldout:
    """Seeded contiguous hold-out windows on a (mostly) complete record."""

    holdout_fraction: float = 0.1
    window_seconds: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.holdout_fraction <= 0.5:
            raise ValueError("holdout_fraction must lie in (0, 0.5]")
        if not self.window_seconds > 0:
            raise ValueError("window_seconds must be positive")


ED_CHUNKS = {
    "I": 0, "II": 0, "III": 0,
    "aVR": 1, "aVL": 1, "aVF": 1,
    "V1": 2, "V2": 2, "V3": 2,
    "V4": 3, "V5": 3, "V6": 3,
}


@dataclass(frozen=True)
class EdLayout:
    """Clinical report layout: long leads in full, one short chunk for the rest.

    ``chunks`` assigns each lead the index of its segment; segment k covers
    ``[k * segment_seconds, (k + 1) * segment_seconds)``. Hold-out windows are
    then drawn inside what remains observed.
    """

    segment_seconds: float = 2.5
    long_leads: tuple = ("II", "V1", "V5")
    chunks: dict = field(default_factory=lambda: dict(ED_CHUNKS))
    holdout_fraction: float = 0.1
    window_seconds: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.holdout_fraction <= 0.5:
            raise ValueError("holdout_fraction must lie in (0, 0.5]")
        if not (self.window_seconds > 0 and self.segment_seconds > 0):
            raise ValueError("window and segment lengths must be positive")
        unknown = set(self.long_leads) - set(LEADS)
        if unknown:
            raise ValueError(f"unknown long leads {sorted(unknown)}")


def _runs(flags):
    """(start, stop) pairs of the True runs of a 1-d boolean array."""
    padded = np.concatenate([[False], flags, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def _place_holdout(mask, n_window, fraction, rng):
    """Hold out windows per lead, spreading them so leads rarely overlap in time.

    Each lead loses ``round(fraction * n_observed)`` samples. Windows have
    ``n_window`` samples except a final shorter one that makes the count
    exact. Start positions are drawn uniformly among those whose window
    collides with the fewest already held-out entries of other leads.
    """
    mask = mask.copy()
    n_t = mask.shape[0]
    load = np.zeros(n_t, dtype=np.int64)
    for lead in rng.permutation(mask.shape[1]):
        obs = mask[:, lead] == Mask.OBSERVED
        remaining = int(round(fraction * obs.sum()))
        while remaining > 0:
            width = min(n_window, remaining)
            starts, costs = [], []
            csum = np.concatenate([[0], np.cumsum(load)])
            for a, b in _runs(mask[:, lead] == Mask.OBSERVED):
                if b - a < width:
                    continue
                s = np.arange(a, b - width + 1)
                starts.append(s)
                costs.append(csum[s + width] - csum[s])
            if not starts:
                # fragmented: fall back to the longest observed run
                a, b = max(_runs(mask[:, lead] == Mask.OBSERVED), key=lambda r: r[1] - r[0])
                width = b - a
                starts, costs = [np.array([a])], [np.array([0])]
            starts, costs = np.concatenate(starts), np.concatenate(costs)
            best = starts[costs == costs.min()]
            s0 = int(best[rng.integers(best.size)])
            mask[s0:s0 + width, lead] = Mask.HELD_OUT
            load[s0:s0 + width] += 1
            remaining -= width
    return mask


def apply_mask_scheme(record, scheme):
    """Return a copy of ``record`` with a new mask drawn from ``scheme``.

    Ground truth of held-out entries is kept; missing entries never become
    observed.
    """
    rate = record.sample_rate_hz
    rng = np.random.default_rng(scheme.seed)
    mask = record.mask.copy()
    if isinstance(scheme, EdLayout):
        seg = int(np.floor(scheme.segment_seconds * rate))
        n_chunks = max(scheme.chunks.values()) + 1
        if record.n_samples < n_chunks * seg:
            raise InsufficientLength(
                f"record has {record.n_samples} samples; layout needs {n_chunks * seg}")
        for j, lead in enumerate(LEADS):
            if lead in scheme.long_leads:
                continue
            start = int(np.floor(scheme.chunks[lead] * scheme.segment_seconds * rate))
            keep = np.zeros(record.n_samples, bool)
            keep[start:start + seg] = True
            mask[~keep, j] = Mask.MISSING
    elif not isinstance(scheme, PtbHoldout):
        raise TypeError(f"unknown mask scheme {scheme!r}")
    n_window = max(1, int(round(scheme.window_seconds * rate)))
    mask = _place_holdout(mask, n_window, scheme.holdout_fraction, rng)
    samples = record.samples.copy()
    return EkgRecord(samples, mask, rate, record.record_id)


def list_record_files(directory):
    """Data CSVs in ``directory`` (sidecars and outputs excluded), sorted."""
    out = []
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".csv"):
            continue
        if name.endswith((".mask.csv", ".truth.csv", ".imputed.csv")):
            continue
        out.append(Path(directory) / name)
    return out
