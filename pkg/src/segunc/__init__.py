"""Spatially-aware evaluation of volumetric segmentation uncertainty maps."""

from .errors import SegUncError
from .evaluate import EvalConfig, evaluate_map, prepare_case
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
    GridMeta,
    LabelGrid,
    ScalarGrid,
    UncertaintyGrid,
    error_map,
    foreground_mask,
    normalize_uncertainty,
)
from .phantom import PhantomCase, PhantomConfig, make_phantom, make_suite, scattered_preset
from .result import MetricResult, Orientation
from .spatial import ba_ece, buc, space
from .stats import build_comparison_report

__version__ = "0.1.0"
