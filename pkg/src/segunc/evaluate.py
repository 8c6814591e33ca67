"""Per-case evaluation: derive the shared geometry once, then score any
number of uncertainty maps against it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import spatial, voxelwise
from .errors import DegenerateInput, InputError
from .geometry import (
    BandField,
    BandSpec,
    SmoothingSpec,
    band_partition,
    distance_field,
    gaussian_smooth,
    hd95,
    region_within,
    surface,
)
from .grid import (
    BinaryGrid,
    LabelGrid,
    ScalarGrid,
    UncertaintyGrid,
    check_compatible,
    error_map,
    foreground_mask,
)
from .result import MetricResult, metric_sort_key, pavpu_name
from .voxelwise import BinningSpec, ThresholdSpec


@dataclass(frozen=True)
class EvalConfig:
    """Metric parameters.  ``radius_mm=None`` uses the per-case HD95."""

    radius_mm: float | None = None
    bands: BandSpec = field(default_factory=BandSpec)
    delta: float = 1.0
    smoothing: SmoothingSpec = field(default_factory=SmoothingSpec)
    bins: BinningSpec = field(default_factory=BinningSpec)
    threshold: ThresholdSpec = field(default_factory=ThresholdSpec)
    windows: tuple[int, ...] = (5, 11)
    baece_crop_margin: int | None = None

    def metric_names(self) -> list[str]:
        names = ["SPACE", "BUC", "BA-ECE", "ECE", "MCE", "UCE", "VOXEL_ACC", "AUC-PR", "AUC-ROC", "AvU"]
        names += [pavpu_name(w) for w in self.windows]
        names += ["AURC", "AU-ARC", "CCR", "UIR"]
        return sorted(names, key=metric_sort_key)

    def as_params(self) -> dict:
        return {
            "radius": "hd95" if self.radius_mm is None else self.radius_mm,
            "band_edges": list(self.bands.edges),
            "band_delta": self.delta,
            "sigma": self.smoothing.sigma,
            "sigma_unit": self.smoothing.unit,
            "truncation": self.smoothing.truncation,
            "bins": self.bins.n_bins,
            "threshold": self.threshold.describe(),
            "patch_accuracy": self.threshold.patch_accuracy,
            "windows": list(self.windows),
            "baece_crop_margin": self.baece_crop_margin,
        }


def select_metrics(requested: Iterable[str] | None, config: EvalConfig) -> list[str]:
    """Resolve user metric names case-insensitively (``space``, ``pavpu_5``)."""
    available = config.metric_names()
    if requested is None:
        return available
    lookup = {n.upper(): n for n in available}
    out = []
    for name in requested:
        key = name.strip().upper()
        if not key:
            continue
        if key not in lookup:
            raise InputError(f"unknown metric {name!r}; choose from {', '.join(available)}")
        out.append(lookup[key])
    return sorted(set(out), key=metric_sort_key)


@dataclass
class CaseGeometry:
    err: BinaryGrid
    gt_surface: BinaryGrid
    pred_surface: BinaryGrid
    dist_gt: ScalarGrid | None
    dist_pred: ScalarGrid | None
    hd95: float | None
    radius: float | None
    region: BinaryGrid | None
    bands: BandField | None
    smoothed_err: ScalarGrid
    problems: dict[str, str] = field(default_factory=dict)


def _default_classes(gt: LabelGrid, pred: LabelGrid) -> list[int]:
    top = max(int(gt.values.max()), int(pred.values.max()), 1)
    return list(range(1, top + 1))


def _crop_domain(gt_fg: BinaryGrid, pred_fg: BinaryGrid, margin: int) -> BinaryGrid:
    both = gt_fg.values | pred_fg.values
    dom = np.zeros_like(both)
    if both.any():
        idx = np.nonzero(both)
        sl = tuple(
            slice(max(int(i.min()) - margin, 0), int(i.max()) + margin + 1) for i in idx
        )
        dom[sl] = True
    return BinaryGrid(dom, meta=gt_fg.meta)


def prepare_case(
    gt: LabelGrid,
    pred: LabelGrid,
    classes: Sequence[int] | None = None,
    config: EvalConfig | None = None,
) -> CaseGeometry:
    """Error map, surfaces, distance fields, BUC region and BA-ECE bands.

    BUC's region is built around the predicted boundary, BA-ECE's bands
    around the ground-truth boundary.  Failures that make a spatial metric
    undefined are collected in ``problems`` instead of raised.
    """
    config = EvalConfig() if config is None else config
    meta = check_compatible(gt, pred)
    classes = _default_classes(gt, pred) if classes is None else list(classes)
    n_classes = max(gt.n_classes, pred.n_classes)
    gt_fg = foreground_mask(LabelGrid(gt.values, n_classes=n_classes, meta=meta), classes)
    pred_fg = foreground_mask(LabelGrid(pred.values, n_classes=n_classes, meta=meta), classes)
    err = error_map(pred, gt)
    gt_surf, pred_surf = surface(gt_fg), surface(pred_fg)
    problems = {}

    dist_gt = distance_field(gt_surf) if gt_surf.values.any() else None
    dist_pred = distance_field(pred_surf) if pred_surf.values.any() else None
    if dist_gt is None:
        problems["BA-ECE"] = "ground-truth surface is empty"
    if dist_pred is None:
        problems["BUC"] = "predicted surface is empty"

    h = None
    if dist_gt is not None and dist_pred is not None:
        h = hd95(pred_surf, gt_surf, dist_a=dist_pred, dist_b=dist_gt)
    radius = config.radius_mm
    if radius is None:
        radius = h
        if h is None and "BUC" not in problems:
            problems["BUC"] = "hd95 radius undefined (ground-truth surface is empty)"

    region = None
    if dist_pred is not None and radius is not None:
        region = region_within(pred_surf, radius, dist=dist_pred)

    bands = None
    if dist_gt is not None:
        domain = None
        if config.baece_crop_margin is not None:
            domain = _crop_domain(gt_fg, pred_fg, config.baece_crop_margin)
        bands = band_partition(dist_gt, config.bands, domain, config.delta)

    smoothed_err = gaussian_smooth(ScalarGrid(err.values, meta=meta), config.smoothing)
    return CaseGeometry(err, gt_surf, pred_surf, dist_gt, dist_pred, h, radius, region, bands, smoothed_err, problems)


def evaluate_map(
    geom: CaseGeometry,
    u: UncertaintyGrid,
    config: EvalConfig | None = None,
    metrics: Sequence[str] | None = None,
) -> tuple[dict[str, MetricResult], dict[str, str]]:
    """Score one uncertainty map.

    Returns ``(results, failures)``; a metric whose input is degenerate
    (e.g. no erroneous voxel for AUC-ROC) appears in ``failures`` with the
    reason instead of in ``results``.
    """
    config = EvalConfig() if config is None else config
    check_compatible(u, geom.err)
    wanted = set(config.metric_names() if metrics is None else metrics)
    err = geom.err
    results: dict[str, MetricResult] = {}
    failures: dict[str, str] = {}

    def run(names, fn):
        names = [n for n in names if n in wanted]
        if not names:
            return
        try:
            out = fn()
        except DegenerateInput as exc:
            for n in names:
                failures[n] = f"{type(exc).__name__}: {exc}"
            return
        if isinstance(out, MetricResult):
            out = {out.name: out}
        for n in names:
            results[n] = out[n]

    def need(name, value):
        if value is None:
            raise DegenerateInput(geom.problems.get(name, "undefined"))
        return value

    run(["SPACE"], lambda: spatial.space(u, err, config.smoothing, smoothed_err=geom.smoothed_err))
    run(["BUC"], lambda: _with_radius(spatial.buc(u, need("BUC", geom.region)), geom))
    run(["BA-ECE"], lambda: spatial.ba_ece(u, err, need("BA-ECE", geom.bands)))
    run(["ECE", "MCE", "UCE"], lambda: voxelwise.calibration_errors(u, err, config.bins))
    run(["VOXEL_ACC"], lambda: voxelwise.voxel_accuracy(u, err, config.threshold))
    run(["AUC-PR"], lambda: voxelwise.auc_pr(u, err))
    run(["AUC-ROC"], lambda: voxelwise.auc_roc(u, err))
    run(["AvU"], lambda: voxelwise.avu(u, err, config.threshold))
    for w in config.windows:
        run([pavpu_name(w)], lambda w=w: voxelwise.pavpu(u, err, w, config.threshold))
    run(["AURC"], lambda: voxelwise.aurc(u, err))
    run(["AU-ARC"], lambda: voxelwise.au_arc(u, err))
    run(["CCR"], lambda: voxelwise.correct_certain_ratio(u, err, config.threshold))
    run(["UIR"], lambda: voxelwise.uncertain_incorrect_ratio(u, err, config.threshold))
    order = {n: i for i, n in enumerate(sorted(wanted, key=metric_sort_key))}
    results = dict(sorted(results.items(), key=lambda kv: order[kv[0]]))
    failures = dict(sorted(failures.items(), key=lambda kv: order[kv[0]]))
    return results, failures


def _with_radius(res: MetricResult, geom: CaseGeometry) -> MetricResult:
    params = {**res.params, "radius_mm": geom.radius, "hd95_mm": geom.hd95}
    return MetricResult(res.name, res.value, params, res.details)
