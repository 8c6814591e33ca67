"""Spatially-aware uncertainty metrics: BUC, BA-ECE and SPACE."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateRegion, EmptyBands, GeometryMismatch
from .geometry import SENTINEL, BandField, SmoothingSpec, gaussian_smooth
from .grid import BinaryGrid, ScalarGrid, UncertaintyGrid, check_compatible
from .result import MetricResult


def buc(u: UncertaintyGrid, region: BinaryGrid) -> MetricResult:
    """Boundary uncertainty concentration.

    Ratio ``mu_in / (mu_in + mu_out)`` of the mean uncertainty inside the
    boundary region to the sum of the inside and outside means.  A map that
    is zero everywhere has no concentration signal and scores 0.5.
    """
    check_compatible(u, region)
    r = region.values
    n_in = int(np.count_nonzero(r))
    if n_in == 0 or n_in == r.size:
        raise DegenerateRegion(f"boundary region covers {n_in} of {r.size} voxels")
    mu_in = float(u.values[r].mean())
    mu_out = float(u.values[~r].mean())
    total = mu_in + mu_out
    value = 0.5 if total == 0.0 else mu_in / total
    return MetricResult(
        "BUC",
        value,
        params={"region_voxels": n_in, "zero_mass": total == 0.0},
        details={"mean_inside": mu_in, "mean_outside": mu_out},
    )


def ba_ece(u: UncertaintyGrid, err: BinaryGrid, bands: BandField) -> MetricResult:
    """Boundary-aware calibration error over ground-truth distance bands.

    ``sum_i w_i * |mean_u(b_i) - mean_err(b_i)|`` over the non-empty bands.
    The per-band table is returned in ``details["bands"]``.
    """
    check_compatible(u, err)
    idx = bands.band_index
    if idx.shape != u.shape:
        raise GeometryMismatch("band field shape does not match the uncertainty grid")
    inside = idx != SENTINEL
    k = bands.n_bands
    counts = np.bincount(idx[inside], minlength=k)
    if not counts.any():
        raise EmptyBands("every distance band is empty")
    u_sum = np.bincount(idx[inside], weights=u.values[inside], minlength=k)
    e_sum = np.bincount(idx[inside], weights=err.values[inside].astype(np.float64), minlength=k)

    table = []
    value = 0.0
    for i in range(k):
        if counts[i] == 0:
            table.append({"band": i, "lower": bands.spec.edges[i], "upper": bands.spec.edges[i + 1],
                          "count": 0, "weight": 0.0, "mean_u": None, "mean_err": None})
            continue
        mu = u_sum[i] / counts[i]
        me = e_sum[i] / counts[i]
        value += bands.weights[i] * abs(mu - me)
        table.append({
            "band": i,
            "lower": bands.spec.edges[i],
            "upper": bands.spec.edges[i + 1],
            "count": int(counts[i]),
            "mean_distance": float(bands.mean_distance[i]),
            "weight": float(bands.weights[i]),
            "mean_u": float(mu),
            "mean_err": float(me),
        })
    return MetricResult(
        "BA-ECE",
        value,
        params={"edges": list(bands.spec.edges), "delta": bands.delta},
        details={"bands": table},
    )


def space(
    u: UncertaintyGrid,
    err: BinaryGrid | ScalarGrid,
    spec: SmoothingSpec | None = None,
    *,
    smoothed_err: ScalarGrid | None = None,
) -> MetricResult:
    """Spatially-aware calibration error.

    Mean absolute difference between the Gaussian-smoothed uncertainty and
    the Gaussian-smoothed error map, averaged over the whole grid.
    ``smoothed_err`` may be supplied when several maps share one error map.
    """
    spec = SmoothingSpec() if spec is None else spec
    check_compatible(u, err)
    if smoothed_err is None:
        e = err if isinstance(err, ScalarGrid) else ScalarGrid(err.values, meta=err.meta)
        smoothed_err = gaussian_smooth(e, spec)
    su = gaussian_smooth(u, spec)
    value = float(np.mean(np.abs(su.values - smoothed_err.values)))
    return MetricResult(
        "SPACE",
        value,
        params={"sigma": spec.sigma, "unit": spec.unit, "truncation": spec.truncation},
    )
