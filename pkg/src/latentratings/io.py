"""Dataset and report file formats.

Ratings come in two CSV shapes:

* long: one row per rating round, columns ``call_id, round, rating`` plus
  optional ``difficulty``, ``treatment``, and any number of covariate
  columns (all non-reserved columns are covariates). Covariates and
  treatment must be constant within a call; per-round difficulty values are
  averaged into one score per call.
* wide: one row per call, columns ``call_id, k, n`` plus the same optional
  columns.

Truth files have columns ``call_id, d_true, theta_true`` and optionally
``eps0_c, eps1_c``. Reports are JSON/CSV with floats rounded to six
significant digits and stable field order, so identical runs produce
identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import FitReport, PerCallPosterior, SummaryStats
from .data import CallRecord, RatingDataset
from .simulate import SimTruth

RESERVED_LONG = ("call_id", "round", "rating", "difficulty", "treatment")
RESERVED_WIDE = ("call_id", "k", "n", "difficulty", "treatment")


class IngestError(ValueError):
    """Malformed input data; message carries the offending row when known."""


def fmt(x: float) -> str:
    """Render a float with six significant digits (report convention)."""
    if x != x:
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def round6(x: float) -> float:
    return float(fmt(x)) if math.isfinite(x) else x


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise IngestError(f"row {row}: column {col!r} is not a number: {text!r}") from None


def _parse_binary(text: str, row: int, col: str) -> int:
    v = text.strip()
    if v not in ("0", "1"):
        raise IngestError(f"row {row}: column {col!r} must be 0 or 1, got {text!r}")
    return int(v)


def detect_format(path: str | Path) -> str:
    """Return ``"long"`` or ``"wide"`` from the header columns."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise IngestError(f"{path}: empty file")
    cols = set(header)
    if {"call_id", "round", "rating"} <= cols:
        return "long"
    if {"call_id", "k", "n"} <= cols:
        return "wide"
    raise IngestError(
        f"{path}: header matches neither long (call_id, round, rating) "
        f"nor wide (call_id, k, n) format"
    )


def ingest(path: str | Path, fmt_name: str = "auto") -> RatingDataset:
    """Read and validate a ratings CSV in long or wide format."""
    if fmt_name == "auto":
        fmt_name = detect_format(path)
    if fmt_name == "long":
        return _ingest_long(path)
    if fmt_name == "wide":
        return _ingest_wide(path)
    raise IngestError(f"unknown format {fmt_name!r}")


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, dict]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        rows = [(i, row) for i, row in enumerate(reader, start=2)]
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return list(reader.fieldnames), rows


def _covariate_columns(header: list[str], reserved: tuple[str, ...]) -> list[str]:
    return [c for c in header if c not in reserved]


def _ingest_long(path: str | Path) -> RatingDataset:
    header, rows = _read_rows(path)
    for required in ("call_id", "round", "rating"):
        if required not in header:
            raise IngestError(f"{path}: missing column {required!r}")
    cov_names = _covariate_columns(header, RESERVED_LONG)
    has_difficulty = "difficulty" in header
    has_treatment = "treatment" in header

    per_call: dict[str, dict] = {}
    order: list[str] = []
    for line, row in rows:
        cid = row["call_id"]
        rating = _parse_binary(row["rating"], line, "rating")
        rnd = int(_parse_float(row["round"], line, "round"))
        cov = tuple(_parse_float(row[c], line, c) for c in cov_names)
        trt = _parse_binary(row["treatment"], line, "treatment") if has_treatment else 0
        diff = _parse_float(row["difficulty"], line, "difficulty") if has_difficulty else None
        if cid not in per_call:
            per_call[cid] = {"rounds": [], "cov": cov, "trt": trt, "diffs": [], "line": line}
            order.append(cid)
        entry = per_call[cid]
        if entry["cov"] != cov:
            raise IngestError(
                f"row {line}: call {cid!r} has inconsistent covariates across rounds"
            )
        if entry["trt"] != trt:
            raise IngestError(
                f"row {line}: call {cid!r} has inconsistent treatment across rounds"
            )
        entry["rounds"].append((rnd, rating))
        if diff is not None:
            entry["diffs"].append(diff)

    records = []
    for cid in order:
        e = per_call[cid]
        rounds = tuple(r for _, r in sorted(e["rounds"], key=lambda t: t[0]))
        records.append(
            CallRecord(
                call_id=cid,
                n_ratings=len(rounds),
                k_positive=sum(rounds),
                covariates=e["cov"],
                treatment=e["trt"],
                difficulty=(sum(e["diffs"]) / len(e["diffs"]) if e["diffs"] else None),
                rounds=rounds,
            )
        )
    return RatingDataset(tuple(records), tuple(cov_names), has_difficulty)


def _ingest_wide(path: str | Path) -> RatingDataset:
    header, rows = _read_rows(path)
    for required in ("call_id", "k", "n"):
        if required not in header:
            raise IngestError(f"{path}: missing column {required!r}")
    cov_names = _covariate_columns(header, RESERVED_WIDE)
    has_difficulty = "difficulty" in header
    has_treatment = "treatment" in header
    records = []
    for line, row in rows:
        n = int(_parse_float(row["n"], line, "n"))
        k = int(_parse_float(row["k"], line, "k"))
        if not 0 <= k <= n:
            raise IngestError(f"row {line}: k={k} outside [0, n={n}]")
        records.append(
            CallRecord(
                call_id=row["call_id"],
                n_ratings=n,
                k_positive=k,
                covariates=tuple(_parse_float(row[c], line, c) for c in cov_names),
                treatment=(
                    _parse_binary(row["treatment"], line, "treatment")
                    if has_treatment
                    else 0
                ),
                difficulty=(
                    _parse_float(row["difficulty"], line, "difficulty")
                    if has_difficulty
                    else None
                ),
            )
        )
    return RatingDataset(tuple(records), tuple(cov_names), has_difficulty)


def export_long(dataset: RatingDataset, path: str | Path) -> None:
    """Write a long-format ratings CSV (requires per-round data)."""
    if not dataset.has_rounds:
        raise ValueError("dataset has no per-round ratings; use export_wide")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["call_id", "round", "rating", *dataset.covariate_names, "treatment"]
        if dataset.has_difficulty:
            header.append("difficulty")
        writer.writerow(header)
        for r in dataset.records:
            for i, rating in enumerate(r.rounds, start=1):
                row = [r.call_id, i, rating]
                row.extend(repr(c) for c in r.covariates)
                row.append(r.treatment)
                if dataset.has_difficulty:
                    row.append(repr(r.difficulty))
                writer.writerow(row)


def export_wide(dataset: RatingDataset, path: str | Path) -> None:
    """Write a wide-format ratings CSV (one row per call)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["call_id", "k", "n", *dataset.covariate_names, "treatment"]
        if dataset.has_difficulty:
            header.append("difficulty")
        writer.writerow(header)
        for r in dataset.records:
            row = [r.call_id, r.k_positive, r.n_ratings]
            row.extend(repr(c) for c in r.covariates)
            row.append(r.treatment)
            if dataset.has_difficulty:
                row.append(repr(r.difficulty))
            writer.writerow(row)


def write_truth(truth: SimTruth, dataset: RatingDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["call_id", "d_true", "theta_true"]
        if truth.per_call_error_rates is not None:
            header += ["eps0_c", "eps1_c"]
        writer.writerow(header)
        for i, r in enumerate(dataset.records):
            row = [r.call_id, truth.latent_states[i], repr(truth.theta_values[i])]
            if truth.per_call_error_rates is not None:
                e0, e1 = truth.per_call_error_rates[i]
                row += [repr(e0), repr(e1)]
            writer.writerow(row)


def read_truth(path: str | Path) -> dict[str, dict]:
    """Truth rows keyed by call id."""
    header, rows = _read_rows(path)
    for required in ("call_id", "d_true"):
        if required not in header:
            raise IngestError(f"{path}: missing column {required!r}")
    out = {}
    for line, row in rows:
        out[row["call_id"]] = {
            "d_true": _parse_binary(row["d_true"], line, "d_true"),
            "theta_true": (
                _parse_float(row["theta_true"], line, "theta_true")
                if "theta_true" in row and row["theta_true"]
                else None
            ),
        }
    return out


def _summary_dict(s: SummaryStats) -> dict:
    return {
        "mean": round6(s.mean),
        "sd": round6(s.sd),
        "q2.5": round6(s.q2_5),
        "median": round6(s.median),
        "q97.5": round6(s.q97_5),
    }


def report_payload(report: FitReport) -> dict:
    """JSON-ready dict for a fit report, stable field order."""
    diag = report.diagnostics
    return {
        "model": report.model_kind,
        "params": {k: _summary_dict(v) for k, v in report.param_summaries.items()},
        "ate": _summary_dict(report.ate) if report.ate is not None else None,
        "diagnostics": {
            "split_rhat": [round6(r) for r in diag.split_rhat],
            "ess_bulk": [round6(e) for e in diag.ess_bulk],
            "converged": diag.converged,
            "rhat_threshold": diag.rhat_threshold,
            "ess_threshold": diag.ess_threshold,
        },
        "manifest": report.manifest,
    }


def write_report_json(report: FitReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(report_payload(report), fh, indent=2)
        fh.write("\n")


def write_per_call_csv(per_call: PerCallPosterior, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["call_id", "post_mean", "post_lo95", "post_hi95"])
        for cid, m, lo, hi in zip(per_call.call_ids, per_call.mean, per_call.lo95, per_call.hi95):
            writer.writerow([cid, fmt(m), fmt(lo), fmt(hi)])


def write_draws_csv(draws, param_names: list[str], path: str | Path) -> None:
    """Raw constrained draws, one row per (chain, iteration)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "iter", *param_names])
        for c in range(draws.n_chains):
            for i in range(draws.n_samples):
                writer.writerow([c, i, *(repr(v) for v in draws.draws[c, i])])


def write_comparison_csv(rows: list[dict], path: str | Path) -> None:
    """One row per method: method, corr, fpr, fnr, tau, eta."""
    if not rows:
        raise ValueError("no methods to compare")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "corr", "fpr", "fnr", "tau", "eta"])
        for row in rows:
            writer.writerow(
                [
                    row["method"],
                    *(
                        fmt(row[key]) if row.get(key) is not None else ""
                        for key in ("corr", "fpr", "fnr", "tau", "eta")
                    ),
                ]
            )


def write_json(payload: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_param_draws_csv(columns: dict[str, np.ndarray], path: str | Path) -> None:
    """Plot-ready draw columns (posterior histogram source data)."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(len(arrays[0])):
            writer.writerow([fmt(a[i]) for a in arrays])


def write_per_call_by_state_csv(
    per_call: PerCallPosterior, d_true: dict[str, int], path: str | Path
) -> None:
    """Per-call posterior means alongside the true state (plot-ready)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["call_id", "d_true", "post_mean"])
        for cid, m in zip(per_call.call_ids, per_call.mean):
            writer.writerow([cid, d_true[cid], fmt(m)])
