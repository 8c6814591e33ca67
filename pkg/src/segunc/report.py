"""JSON and CSV serialization of case results and comparison reports.

Numbers in CSV use 9 significant digits so that reruns diff byte-for-byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

import numpy as np

from .evaluate import CaseGeometry, EvalConfig
from .result import MetricResult, orientation_of
from .stats import ComparisonReport

CASE_SCHEMA = "segunc.case/1"
COMPARISON_SCHEMA = "segunc.comparison/1"
MANIFEST_SCHEMA = "segunc.manifest/1"


def _plain(x: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return None if math.isnan(x) else x
    return x


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), indent=2, ensure_ascii=False) + "\n"


def metric_entries(results: dict[str, MetricResult], failures: dict[str, str], diagnostics: bool = True) -> list[dict]:
    entries = []
    for name, res in results.items():
        entry = {
            "name": name,
            "value": res.value,
            "orientation": res.orientation.value,
            "status": "ok",
            "params": res.params,
        }
        if diagnostics and res.details:
            entry["details"] = res.details
        entries.append(entry)
    for name, reason in failures.items():
        entries.append({
            "name": name,
            "value": None,
            "orientation": orientation_of(name).value,
            "status": "degenerate",
            "reason": reason,
        })
    return entries


def case_document(
    case_id: str,
    geom: CaseGeometry,
    maps: dict[str, tuple[dict, dict]],
    config: EvalConfig,
    inputs: dict | None = None,
    diagnostics: bool = True,
) -> dict:
    """Per-case JSON document; ``maps`` is ``{key: (results, failures)}``."""
    return {
        "schema": CASE_SCHEMA,
        "case_id": case_id,
        "inputs": inputs or {},
        "params": config.as_params(),
        "geometry": {
            "dims": list(geom.err.meta.dims),
            "spacing": list(geom.err.meta.spacing),
            "error_voxels": geom.err.count(),
            "hd95_mm": geom.hd95,
            "radius_mm": geom.radius,
            "problems": geom.problems,
        },
        "maps": {
            key: {"metrics": metric_entries(res, fail, diagnostics)}
            for key, (res, fail) in maps.items()
        },
    }


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".9g")


def comparison_csv(report: ComparisonReport) -> str:
    focus = report.focus
    header = [
        "metric", "orientation", "accuracy_pct", "cohens_d", "mean_diff_pct",
        "wins", "losses", "ties", "mean_clean", "mean_noisy", "significance",
    ] + [f"p_holm_vs_{f}" for f in focus]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in report.rows:
        line = [
            row.name,
            row.orientation.value,
            _fmt(100.0 * row.accuracy),
            _fmt(row.cohens_d),
            _fmt(row.mean_diff_pct),
            row.wins,
            row.losses,
            row.ties,
            _fmt(row.mean_clean),
            _fmt(row.mean_noisy),
            row.annotation,
        ]
        for f in focus:
            line.append("" if row.name in focus else _fmt(report.adjusted(f, row.name)))
        w.writerow(line)
    return buf.getvalue()


def comparison_document(
    report: ComparisonReport,
    case_values: dict[str, dict[str, dict[str, float]]],
    meta: dict | None = None,
) -> dict:
    return {
        "schema": COMPARISON_SCHEMA,
        **(meta or {}),
        "cases": report.case_ids,
        "metrics": [
            {
                "name": r.name,
                "orientation": r.orientation.value,
                "accuracy": r.accuracy,
                "wins": r.wins,
                "losses": r.losses,
                "ties": r.ties,
                "cohens_d": r.cohens_d,
                "cohens_d_status": r.d_status,
                "mean_diff_pct": r.mean_diff_pct,
                "mean_diff_excluded": r.mean_diff_excluded,
                "mean_clean": r.mean_clean,
                "mean_noisy": r.mean_noisy,
                "significance": r.annotation,
            }
            for r in report.rows
        ],
        "cochran_q": {"statistic": report.cochran_q, "p": report.cochran_p, "dof": len(report.metrics) - 1},
        "mcnemar_p": {a: {b: report.pairwise(a, b) for b in report.metrics} for a in report.metrics},
        "holm": [
            {"focus": f, "other": t, "p_adjusted": p, "p_raw": report.pairwise(f, t)}
            for (f, t), p in zip(report.holm_pairs, report.holm_p)
        ],
        "win_flags": {cid: dict(zip(report.metrics, map(bool, flags))) for cid, flags in zip(report.case_ids, report.win_flags)},
        "case_values": {cid: case_values[cid] for cid in report.case_ids},
        "notes": report.notes,
    }
