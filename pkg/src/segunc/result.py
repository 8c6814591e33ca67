"""Metric result record and the orientation registry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Orientation(str, Enum):
    HIGHER = "higher_better"
    LOWER = "lower_better"


ORIENTATIONS: dict[str, Orientation] = {
    "SPACE": Orientation.LOWER,
    "BUC": Orientation.HIGHER,
    "BA-ECE": Orientation.LOWER,
    "ECE": Orientation.LOWER,
    "MCE": Orientation.LOWER,
    "UCE": Orientation.LOWER,
    "AUC-ROC": Orientation.HIGHER,
    "AUC-PR": Orientation.HIGHER,
    "AvU": Orientation.HIGHER,
    "AURC": Orientation.LOWER,
    "AU-ARC": Orientation.HIGHER,
    "VOXEL_ACC": Orientation.HIGHER,
    "CCR": Orientation.HIGHER,
    "UIR": Orientation.HIGHER,
}

SPATIAL_METRICS = ("SPACE", "BUC", "BA-ECE")

# report order: spatial metrics first, then the voxel-wise battery
METRIC_ORDER = (
    "SPACE", "BUC", "BA-ECE", "ECE", "MCE", "UCE", "VOXEL_ACC", "AUC-PR", "AUC-ROC",
    "AvU", "PAvPU", "AURC", "AU-ARC", "CCR", "UIR",
)


def metric_sort_key(name: str) -> tuple:
    if name.startswith("PAvPU_"):
        return (METRIC_ORDER.index("PAvPU"), int(name.split("_", 1)[1]), name)
    if name in METRIC_ORDER:
        return (METRIC_ORDER.index(name), 0, name)
    return (len(METRIC_ORDER), 0, name)


def pavpu_name(window: int) -> str:
    return f"PAvPU_{window}"


def orientation_of(name: str) -> Orientation:
    if name.startswith("PAvPU_"):
        return Orientation.HIGHER
    try:
        return ORIENTATIONS[name]
    except KeyError:
        raise KeyError(f"no orientation registered for metric {name!r}") from None


@dataclass(frozen=True)
class MetricResult:
    name: str
    value: float
    params: dict[str, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.name}: non-finite metric value {self.value}")
        object.__setattr__(self, "value", float(self.value))

    @property
    def orientation(self) -> Orientation:
        return orientation_of(self.name)
