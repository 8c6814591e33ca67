"""Voxel-wise baseline metrics.

Each voxel is treated as an independent prediction: the uncertainty value is
a score for the binary event "the segmentation is wrong here".  Thresholded
metrics call a voxel *uncertain* when ``u >= tau`` and *certain* otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import (
    InputError,
    InvalidWindow,
    NoCorrectVoxels,
    NoIncorrectVoxels,
    NoPositives,
    SingleClass,
)
from .grid import BinaryGrid, UncertaintyGrid, check_compatible
from .result import MetricResult, pavpu_name


@dataclass(frozen=True)
class ThresholdSpec:
    """How to binarize uncertainty.

    method : "mean" (per-case mean of u), "fixed" (use ``value``) or "otsu".
    patch_accuracy : minimum voxel accuracy for a PAvPU patch to count as
        accurate.
    """

    method: str = "mean"
    value: float | None = None
    patch_accuracy: float = 0.5

    def __post_init__(self):
        if self.method not in ("mean", "fixed", "otsu"):
            raise InputError(f"unknown threshold method {self.method!r}")
        if self.method == "fixed" and (self.value is None or not 0.0 <= self.value <= 1.0):
            raise InputError(f"fixed threshold must lie in [0, 1], got {self.value}")
        if not 0.0 < self.patch_accuracy <= 1.0:
            raise InputError(f"patch accuracy threshold must lie in (0, 1], got {self.patch_accuracy}")

    def resolve(self, u: np.ndarray) -> float:
        if self.method == "fixed":
            return float(self.value)
        if self.method == "mean":
            return float(u.mean())
        return otsu_threshold(u)

    def describe(self) -> str:
        return f"fixed({self.value})" if self.method == "fixed" else self.method


@dataclass(frozen=True)
class BinningSpec:
    n_bins: int = 15

    def __post_init__(self):
        if self.n_bins < 1:
            raise InputError(f"need at least one bin, got {self.n_bins}")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_bins + 1)

    def assign(self, x: np.ndarray) -> np.ndarray:
        """Equal-width bin index; the closed right edge 1.0 joins the last bin."""
        idx = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)


def otsu_threshold(u: np.ndarray, nbins: int = 256) -> float:
    hist, edges = np.histogram(u, bins=nbins, range=(0.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist).astype(np.float64)
    w1 = w0[-1] - w0
    m0 = np.cumsum(hist * centers)
    mu0 = np.divide(m0, w0, out=np.zeros_like(m0), where=w0 > 0)
    mu1 = np.divide(m0[-1] - m0, w1, out=np.zeros_like(m0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    # threshold is the upper edge of the last bin of the lower class
    return float(edges[int(np.argmax(between[:-1])) + 1])


def _flat(u: UncertaintyGrid, err: BinaryGrid) -> tuple[np.ndarray, np.ndarray]:
    check_compatible(u, err)
    return u.flat(), err.flat()


def _binned_gaps(score, target, bins: BinningSpec):
    idx = bins.assign(score)
    n = np.bincount(idx, minlength=bins.n_bins)
    s = np.bincount(idx, weights=score, minlength=bins.n_bins)
    t = np.bincount(idx, weights=target, minlength=bins.n_bins)
    keep = n > 0
    gaps = np.abs(s[keep] - t[keep]) / n[keep]
    return gaps, n[keep]


def calibration_errors(u: UncertaintyGrid, err: BinaryGrid, bins: BinningSpec | None = None) -> dict[str, MetricResult]:
    """ECE, MCE and UCE.

    ECE and MCE bin voxels by confidence ``1 - u`` and compare it with the
    voxel accuracy ``1 - err``; UCE bins by ``u`` and compares it with the
    error rate directly.  The per-bin gap is the same quantity in both
    spaces, so ECE and UCE differ only through voxels lying exactly on a bin
    edge.
    """
    bins = BinningSpec() if bins is None else bins
    uf, ef = _flat(u, err)
    ef = ef.astype(np.float64)
    n = uf.size

    gaps, counts = _binned_gaps(1.0 - uf, 1.0 - ef, bins)
    ece = float(np.sum(counts * gaps) / n)
    mce = float(gaps.max())
    ugaps, ucounts = _binned_gaps(uf, ef, bins)
    uce = float(np.sum(ucounts * ugaps) / n)
    params = {"bins": bins.n_bins}
    return {
        "ECE": MetricResult("ECE", ece, params),
        "MCE": MetricResult("MCE", mce, params),
        "UCE": MetricResult("UCE", uce, params),
    }


def auc_roc(u: UncertaintyGrid, err: BinaryGrid) -> MetricResult:
    """Mann-Whitney AUC of ``u`` as a detector of erroneous voxels (midranks for ties)."""
    uf, ef = _flat(u, err)
    n_pos = int(np.count_nonzero(ef))
    n_neg = ef.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC-ROC needs both correct and erroneous voxels")
    ranks = rankdata(uf)
    value = (ranks[ef].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return MetricResult("AUC-ROC", value)


def auc_pr(u: UncertaintyGrid, err: BinaryGrid) -> MetricResult:
    """Step-wise area under the precision-recall curve (average precision).

    Thresholds run over the distinct values of ``u`` in descending order;
    each recall increment is weighted by the precision at that threshold.
    """
    uf, ef = _flat(u, err)
    n_pos = int(np.count_nonzero(ef))
    if n_pos == 0:
        raise NoPositives("AUC-PR needs at least one erroneous voxel")
    order = np.argsort(-uf, kind="stable")
    s = uf[order]
    tp = np.cumsum(ef[order], dtype=np.int64)
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = tp[last]
    precision = tp / (last + 1.0)
    recall = tp / n_pos
    value = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return MetricResult("AUC-PR", value)


def _confusion(uncertain: np.ndarray, accurate: np.ndarray) -> dict[str, int]:
    return {
        "n_ac": int(np.count_nonzero(accurate & ~uncertain)),
        "n_au": int(np.count_nonzero(accurate & uncertain)),
        "n_ic": int(np.count_nonzero(~accurate & ~uncertain)),
        "n_iu": int(np.count_nonzero(~accurate & uncertain)),
    }


def avu(u: UncertaintyGrid, err: BinaryGrid, thr: ThresholdSpec | None = None) -> MetricResult:
    """Accuracy versus uncertainty: share of accurate-certain plus inaccurate-uncertain voxels."""
    thr = ThresholdSpec() if thr is None else thr
    uf, ef = _flat(u, err)
    tau = thr.resolve(uf)
    c = _confusion(uf >= tau, ~ef)
    value = (c["n_ac"] + c["n_iu"]) / uf.size
    return MetricResult("AvU", value, {"threshold": thr.describe(), "tau": tau}, details=c)


def _patch_sums(x: np.ndarray, window: int) -> np.ndarray:
    pads = [(0, (-n) % window) for n in x.shape]
    p = np.pad(x, pads)
    a, b, c = (n // window for n in p.shape)
    return p.reshape(a, window, b, window, c, window).sum(axis=(1, 3, 5))


def pavpu(u: UncertaintyGrid, err: BinaryGrid, window: int, thr: ThresholdSpec | None = None) -> MetricResult:
    """Patch accuracy versus patch uncertainty on non-overlapping cubic tiles.

    Border tiles are kept with their actual voxel count.  Tiles need no
    centre voxel, so even widths are accepted too.  The uncertainty
    threshold is resolved on the voxel values, as for AvU, so ``window=1``
    reproduces AvU exactly.
    """
    thr = ThresholdSpec() if thr is None else thr
    if isinstance(window, bool) or int(window) != window or window < 1:
        raise InvalidWindow(f"window must be a positive integer, got {window}")
    window = int(window)
    check_compatible(u, err)
    tau = thr.resolve(u.flat())
    counts = _patch_sums(np.ones(u.shape, dtype=np.int64), window)
    u_mean = _patch_sums(u.values, window) / counts
    acc = 1.0 - _patch_sums(err.values.astype(np.int64), window) / counts
    c = _confusion(u_mean >= tau, acc >= thr.patch_accuracy)
    value = (c["n_ac"] + c["n_iu"]) / counts.size
    return MetricResult(
        pavpu_name(window),
        value,
        {"window": window, "threshold": thr.describe(), "tau": tau, "patch_accuracy": thr.patch_accuracy},
        details={**c, "patches": int(counts.size)},
    )


def aurc(u: UncertaintyGrid, err: BinaryGrid) -> MetricResult:
    """Area under the risk-coverage curve.

    Voxels are admitted most-confident first (stable order on ties); the
    risk after ``k`` admissions is their error rate, and AURC averages it
    over ``k = 1..N``.
    """
    uf, ef = _flat(u, err)
    order = np.argsort(uf, kind="stable")
    k = np.arange(1, uf.size + 1)
    risk = np.cumsum(ef[order], dtype=np.int64) / k
    return MetricResult("AURC", float(risk.mean()))


def au_arc(u: UncertaintyGrid, err: BinaryGrid) -> MetricResult:
    """Area under the accuracy-rejection curve.

    The ``k`` most uncertain voxels (stable order on ties) are rejected for
    ``k = 0..N-1`` and the accuracy of the kept voxels is averaged.
    """
    uf, ef = _flat(u, err)
    order = np.argsort(-uf, kind="stable")
    e = ef[order]
    # kept set after rejecting k voxels is e[k:]
    kept_err = np.cumsum(e[::-1], dtype=np.int64)[::-1]
    kept = np.arange(uf.size, 0, -1)
    accuracy = 1.0 - kept_err / kept
    return MetricResult("AU-ARC", float(accuracy.mean()))


def voxel_accuracy(u: UncertaintyGrid, err: BinaryGrid, thr: ThresholdSpec | None = None) -> MetricResult:
    thr = ThresholdSpec() if thr is None else thr
    uf, ef = _flat(u, err)
    tau = thr.resolve(uf)
    value = float(np.mean((uf >= tau) == ef))
    return MetricResult("VOXEL_ACC", value, {"threshold": thr.describe(), "tau": tau})


def _ratio_setup(u, err, thr):
    thr = ThresholdSpec() if thr is None else thr
    uf, ef = _flat(u, err)
    tau = thr.resolve(uf)
    c = _confusion(uf >= tau, ~ef)
    params = {"threshold": thr.describe(), "tau": tau, "definition": "conditional-ratio"}
    return c, params


def correct_certain_ratio(u: UncertaintyGrid, err: BinaryGrid, thr: ThresholdSpec | None = None) -> MetricResult:
    """n(correct and certain) / n(correct)."""
    c, params = _ratio_setup(u, err, thr)
    n_correct = c["n_ac"] + c["n_au"]
    if n_correct == 0:
        raise NoCorrectVoxels("CCR undefined without correct voxels")
    return MetricResult("CCR", c["n_ac"] / n_correct, params, details=c)


def uncertain_incorrect_ratio(u: UncertaintyGrid, err: BinaryGrid, thr: ThresholdSpec | None = None) -> MetricResult:
    """n(incorrect and uncertain) / n(incorrect)."""
    c, params = _ratio_setup(u, err, thr)
    n_incorrect = c["n_ic"] + c["n_iu"]
    if n_incorrect == 0:
        raise NoIncorrectVoxels("UIR undefined without incorrect voxels")
    return MetricResult("UIR", c["n_iu"] / n_incorrect, params, details=c)


def certainty_ratios(u: UncertaintyGrid, err: BinaryGrid, thr: ThresholdSpec | None = None) -> dict[str, MetricResult]:
    return {
        "CCR": correct_certain_ratio(u, err, thr),
        "UIR": uncertain_incorrect_ratio(u, err, thr),
    }
