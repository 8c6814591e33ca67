"""Clean-versus-noisy comparison protocol.

For every metric and case the clean map *wins* when the metric prefers it
strictly (exact ties are losses).  Per-metric summaries are discrimination
accuracy, paired Cohen's d and the mean relative improvement over the noisy
map; significance is assessed with Cochran's Q across metrics and pairwise
exact McNemar tests with Holm's step-down correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaincc

from .errors import (
    AllDegenerate,
    DegenerateMatrix,
    EmptySample,
    InconsistentCases,
    ZeroVariance,
)
from .result import ORIENTATIONS, SPATIAL_METRICS, Orientation, metric_sort_key, orientation_of

__all__ = [
    "ORIENTATIONS",
    "PairedSample",
    "ComparisonReport",
    "MetricSummary",
    "discrimination_accuracy",
    "cohens_d_paired",
    "mean_relative_difference",
    "mcnemar_exact",
    "cochran_q",
    "holm_adjust",
    "build_comparison_report",
]

DEGENERATE_NOISY = 1e-12
SIGNIFICANCE = 0.05
WEAK_ACCURACY = 0.70


@dataclass(frozen=True)
class PairedSample:
    clean: np.ndarray
    noisy: np.ndarray

    def __post_init__(self):
        clean = np.asarray(self.clean, dtype=np.float64)
        noisy = np.asarray(self.noisy, dtype=np.float64)
        if clean.shape != noisy.shape or clean.ndim != 1:
            raise InconsistentCases(f"paired sample shapes differ: {clean.shape} vs {noisy.shape}")
        if not (np.all(np.isfinite(clean)) and np.all(np.isfinite(noisy))):
            raise InconsistentCases("paired sample contains non-finite values")
        object.__setattr__(self, "clean", clean)
        object.__setattr__(self, "noisy", noisy)

    def __len__(self):
        return self.clean.size

    def improvement(self, o: Orientation) -> np.ndarray:
        """Per-case difference oriented so that positive favours the clean map."""
        if o is Orientation.HIGHER:
            return self.clean - self.noisy
        return self.noisy - self.clean


def discrimination_accuracy(s: PairedSample, o: Orientation) -> tuple[float, np.ndarray]:
    if len(s) == 0:
        raise EmptySample("no cases")
    wins = s.improvement(o) > 0
    return float(wins.mean()), wins


def cohens_d_paired(s: PairedSample, o: Orientation) -> float:
    """``mean(delta) / sd(delta)`` with the n-1 denominator."""
    if len(s) < 2:
        raise EmptySample("Cohen's d needs at least two cases")
    delta = s.improvement(o)
    sd = float(np.std(delta, ddof=1))
    if sd == 0.0:
        raise ZeroVariance("paired differences have zero variance")
    return float(np.mean(delta)) / sd


def mean_relative_difference(s: PairedSample, o: Orientation) -> tuple[float, int]:
    """Mean oriented change relative to ``|noisy|``, in percent.

    Cases with ``|noisy| < 1e-12`` are skipped; their count is returned
    alongside the percentage.
    """
    ok = np.abs(s.noisy) >= DEGENERATE_NOISY
    if not ok.any():
        raise AllDegenerate("every noisy value is zero")
    rel = s.improvement(o)[ok] / np.abs(s.noisy[ok])
    return float(rel.mean() * 100.0), int(np.count_nonzero(~ok))


def mcnemar_exact(b: int, c: int) -> float:
    """Two-sided exact McNemar test on discordant counts ``b`` and ``c``."""
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, k) for k in range(min(b, c) + 1))
    # exact rational arithmetic until the final division
    return min(1.0, 2 * tail / 2**n)


def chi2_sf(x: float, dof: int) -> float:
    """Chi-square survival function via the regularized upper incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(gammaincc(dof / 2.0, x / 2.0))


def cochran_q(success: np.ndarray) -> tuple[float, float]:
    """Cochran's Q for a cases x metrics binary matrix; returns ``(Q, p)``."""
    x = np.asarray(success)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise DegenerateMatrix(f"need at least 2 cases and 2 metrics, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise DegenerateMatrix("success matrix must be binary")
    x = x.astype(np.int64)
    k = x.shape[1]
    cols = x.sum(axis=0)
    rows = x.sum(axis=1)
    denom = k * rows.sum() - np.sum(rows**2)
    if denom == 0:
        return 0.0, 1.0
    numer = k * (k - 1) * np.sum((cols - cols.mean()) ** 2)
    q = float(numer / denom)
    return q, chi2_sf(q, k - 1)


def holm_adjust(p: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, in the input order."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        return []
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = (m - np.arange(m)) * p[order]
    adj_sorted = np.minimum(np.maximum.accumulate(scaled), 1.0)
    out = np.empty(m)
    out[order] = adj_sorted
    return out.tolist()


@dataclass
class MetricSummary:
    name: str
    orientation: Orientation
    accuracy: float
    wins: int
    losses: int
    ties: int
    cohens_d: float | None
    d_status: str
    mean_diff_pct: float | None
    mean_diff_excluded: int
    mean_clean: float
    mean_noisy: float
    annotation: str = ""


@dataclass
class ComparisonReport:
    metrics: list[str]
    case_ids: list[str]
    rows: list[MetricSummary]
    win_flags: np.ndarray
    cochran_q: float | None
    cochran_p: float | None
    mcnemar_p: np.ndarray
    focus: list[str]
    holm_pairs: list[tuple[str, str]]
    holm_p: list[float]
    notes: dict = field(default_factory=dict)

    def row(self, name: str) -> MetricSummary:
        return self.rows[self.metrics.index(name)]

    def pairwise(self, a: str, b: str) -> float:
        return float(self.mcnemar_p[self.metrics.index(a), self.metrics.index(b)])

    def adjusted(self, focus: str, other: str) -> float:
        return self.holm_p[self.holm_pairs.index((focus, other))]


def _pairwise_mcnemar(wins: np.ndarray) -> np.ndarray:
    k = wins.shape[1]
    p = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            b = int(np.count_nonzero(wins[:, i] & ~wins[:, j]))
            c = int(np.count_nonzero(~wins[:, i] & wins[:, j]))
            p[i, j] = p[j, i] = mcnemar_exact(b, c)
    return p


def build_comparison_report(
    case_reports: Mapping[str, Mapping[str, Mapping[str, float]]],
    focus: Sequence[str] = SPATIAL_METRICS,
) -> ComparisonReport:
    """Assemble the per-metric comparison table.

    Parameters
    ----------
    case_reports : mapping
        ``{case_id: {"clean": {metric: value}, "noisy": {metric: value}}}``.
        Every case must report the same metric set for both maps.
    focus : sequence of str
        Metrics tested against all remaining ("traditional") metrics; one
        Holm family covers every focus-vs-traditional McNemar test.

    Notes
    -----
    A focus metric is annotated ``"§"`` when it significantly outperforms
    (Holm-adjusted p <= 0.05 and more wins) every traditional metric, and
    ``"†"`` when it does so against every traditional metric whose accuracy
    is at most 70%.
    """
    case_ids = sorted(case_reports)
    if len(case_ids) < 2:
        raise InconsistentCases("comparison needs at least two cases")
    metrics = None
    for cid in case_ids:
        rep = case_reports[cid]
        try:
            clean_keys, noisy_keys = list(rep["clean"]), list(rep["noisy"])
        except KeyError:
            raise InconsistentCases(f"case {cid}: needs 'clean' and 'noisy' entries") from None
        if set(clean_keys) != set(noisy_keys):
            raise InconsistentCases(f"case {cid}: clean and noisy metric sets differ")
        if metrics is None:
            metrics = sorted(clean_keys, key=metric_sort_key)
        elif set(metrics) != set(clean_keys):
            raise InconsistentCases(f"case {cid}: metric set differs from case {case_ids[0]}")

    rows, flag_cols = [], []
    for name in metrics:
        o = orientation_of(name)
        s = PairedSample(
            [case_reports[c]["clean"][name] for c in case_ids],
            [case_reports[c]["noisy"][name] for c in case_ids],
        )
        acc, wins = discrimination_accuracy(s, o)
        delta = s.improvement(o)
        try:
            d, d_status = cohens_d_paired(s, o), "ok"
        except ZeroVariance:
            d, d_status = None, "zero_variance"
        try:
            md, excluded = mean_relative_difference(s, o)
        except AllDegenerate:
            md, excluded = None, len(s)
        rows.append(MetricSummary(
            name=name,
            orientation=o,
            accuracy=acc,
            wins=int(wins.sum()),
            losses=int(np.count_nonzero(delta < 0)),
            ties=int(np.count_nonzero(delta == 0)),
            cohens_d=d,
            d_status=d_status,
            mean_diff_pct=md,
            mean_diff_excluded=excluded,
            mean_clean=float(s.clean.mean()),
            mean_noisy=float(s.noisy.mean()),
        ))
        flag_cols.append(wins)

    wins = np.column_stack(flag_cols)
    # Cochran's Q compares at least two metrics
    q, q_p = cochran_q(wins.astype(np.int64)) if len(metrics) > 1 else (None, None)
    p_matrix = _pairwise_mcnemar(wins)

    focus = [f for f in focus if f in metrics]
    traditional = [m for m in metrics if m not in focus]
    pairs = [(f, t) for f in focus for t in traditional]
    adjusted = holm_adjust([p_matrix[metrics.index(f), metrics.index(t)] for f, t in pairs])

    def beats(f: str, t: str) -> bool:
        i, j = metrics.index(f), metrics.index(t)
        more = np.count_nonzero(wins[:, i] & ~wins[:, j]) > np.count_nonzero(~wins[:, i] & wins[:, j])
        return more and adjusted[pairs.index((f, t))] <= SIGNIFICANCE

    for f in focus:
        row = rows[metrics.index(f)]
        weak = [t for t in traditional if rows[metrics.index(t)].accuracy <= WEAK_ACCURACY]
        if traditional and all(beats(f, t) for t in traditional):
            row.annotation = "§"
        elif weak and all(beats(f, t) for t in weak):
            row.annotation = "†"

    return ComparisonReport(
        metrics=list(metrics),
        case_ids=case_ids,
        rows=rows,
        win_flags=wins,
        cochran_q=q,
        cochran_p=q_p,
        mcnemar_p=p_matrix,
        focus=focus,
        holm_pairs=pairs,
        holm_p=adjusted,
        notes={
            "ties": "count as losses",
            "mcnemar": "exact binomial, two-sided",
            "holm_family": "focus x traditional pairs",
            "significance": SIGNIFICANCE,
            "weak_accuracy": WEAK_ACCURACY,
        },
    )
