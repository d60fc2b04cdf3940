"""Aggregation with confidence intervals and CSV persistence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .experiment import ExperimentRecord, record_sort_key

__all__ = [
    "AggregateRow",
    "aggregate",
    "write_csv",
    "read_records",
    "read_aggregates",
    "RECORD_HEADER",
    "AGGREGATE_HEADER",
]

Z95 = 1.96

RECORD_HEADER = [
    "kernel_family", "alpha", "lambda", "nu_or_eta", "estimator", "radius_policy",
    "radius_value", "trial", "N", "rel_error", "nnz_fraction", "seed",
]
AGGREGATE_HEADER = [
    "kernel_family", "alpha", "lambda", "nu_or_eta", "estimator", "radius_policy", "N",
    "mean_rel_error", "ci_low", "ci_high", "trials_used", "mean_radius", "mean_nnz_fraction",
]


@dataclass(frozen=True)
class AggregateRow:
    kernel_family: str
    alpha: float
    lambda_: float
    nu_or_eta: float | None
    estimator: str
    radius_policy: str
    N: int
    mean_rel_error: float
    ci_low: float
    ci_high: float
    trials_used: int
    mean_radius: float
    mean_nnz_fraction: float


def aggregate(records: Iterable[ExperimentRecord]) -> list[AggregateRow]:
    """Mean and normal-approximation 95% interval per group of trials.

    Intervals are ``mean +- 1.96 s / sqrt(T)`` with the ``T - 1`` standard
    deviation, clipped below at zero. Single-trial groups give a point.
    """
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for r in sorted(records, key=record_sort_key):
        key = (r.kernel_family, r.alpha, r.lambda_, r.nu_or_eta, r.estimator, r.radius_policy, r.N)
        groups.setdefault(key, []).append(r)
    rows = []
    for key, rs in groups.items():
        errs = np.array([r.rel_error for r in rs])
        T = len(rs)
        if np.all(errs == errs[0]):
            # exact point interval; np.mean of repeated values can be off by an ulp
            mean, half = float(errs[0]), 0.0
        else:
            mean = float(np.mean(errs))
            half = Z95 * float(np.std(errs, ddof=1)) / math.sqrt(T)
        rows.append(
            AggregateRow(
                *key,
                mean_rel_error=mean,
                ci_low=max(0.0, mean - half),
                ci_high=mean + half,
                trials_used=T,
                mean_radius=float(np.mean([r.radius_value for r in rs])),
                mean_nnz_fraction=float(np.mean([r.nnz_fraction for r in rs])),
            )
        )
    rows.sort(key=lambda a: (a.lambda_, a.estimator, a.kernel_family, a.alpha, a.radius_policy))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row_values(obj) -> list[str]:
    return [_fmt(getattr(obj, f.name)) for f in fields(obj)]


def write_csv(rows: Sequence, path) -> Path:
    """Write records or aggregate rows as RFC 4180 CSV.

    The header is chosen from the row type; an empty list writes the record
    header only.
    """
    path = Path(path)
    header = AGGREGATE_HEADER if rows and isinstance(rows[0], AggregateRow) else RECORD_HEADER
    if rows and not isinstance(rows[0], AggregateRow):
        rows = sorted(rows, key=record_sort_key)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(header)
            for r in rows:
                writer.writerow(_row_values(r))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def _opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


def _read(path, header: list[str]) -> list[dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ValueError(f"{path}: unexpected header {got}")
        return [dict(zip(header, row)) for row in reader]


def read_records(path) -> list[ExperimentRecord]:
    return [
        ExperimentRecord(
            kernel_family=d["kernel_family"],
            alpha=float(d["alpha"]),
            lambda_=float(d["lambda"]),
            nu_or_eta=_opt_float(d["nu_or_eta"]),
            estimator=d["estimator"],
            radius_policy=d["radius_policy"],
            radius_value=float(d["radius_value"]),
            trial=int(d["trial"]),
            N=int(d["N"]),
            rel_error=float(d["rel_error"]),
            nnz_fraction=float(d["nnz_fraction"]),
            seed=int(d["seed"]),
        )
        for d in _read(path, RECORD_HEADER)
    ]


def read_aggregates(path) -> list[AggregateRow]:
    return [
        AggregateRow(
            kernel_family=d["kernel_family"],
            alpha=float(d["alpha"]),
            lambda_=float(d["lambda"]),
            nu_or_eta=_opt_float(d["nu_or_eta"]),
            estimator=d["estimator"],
            radius_policy=d["radius_policy"],
            N=int(d["N"]),
            mean_rel_error=float(d["mean_rel_error"]),
            ci_low=float(d["ci_low"]),
            ci_high=float(d["ci_high"]),
            trials_used=int(d["trials_used"]),
            mean_radius=float(d["mean_radius"]),
            mean_nnz_fraction=float(d["mean_nnz_fraction"]),
        )
        for d in _read(path, AGGREGATE_HEADER)
    ]


def sniff_kind(path) -> str:
    """``"records"`` or ``"aggregates"`` depending on the CSV header."""
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == RECORD_HEADER:
        return "records"
    if header == AGGREGATE_HEADER:
        return "aggregates"
    raise ValueError(f"{path}: not a covop results file")
