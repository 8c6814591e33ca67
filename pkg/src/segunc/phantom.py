"""Seeded synthetic cases with a boundary-shaped ("clean") and a diffuse
("noisy") uncertainty map.

Ground truth is a randomly oriented ellipsoid.  The prediction moves its
boundary radially by a smooth random angular field, so segmentation errors
sit in a shell around the ground-truth surface.  The clean map decays with
the distance to the predicted boundary; the noisy map is uniform noise
rescaled to the clean map's mean so that only spatial structure separates
the two.

The ``"scattered"`` preset instead flips voxels uniformly at random across
the volume (no boundary displacement), which is the situation where a
boundary-shaped map should *not* be preferred.

Per-case streams come from ``numpy.random.SeedSequence([seed, index])``,
so a case depends only on the master seed and its own index.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigInvalid
from .geometry import distance_field, surface
from .grid import BinaryGrid, LabelGrid, UncertaintyGrid

PRESETS = ("boundary", "scattered")
MEAN_MATCH_TOL = 1e-3


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    semi_axes: tuple[float, float] = (12.0, 22.0)
    # decay of the clean band is matched to the error-shell thickness (~amplitude / 4)
    amplitude: float = 6.0
    decay_mm: float = 1.5
    noise_floor: float = 0.05
    mean_matching: bool = True
    seed: int = 20240501
    preset: str = "boundary"
    scatter_rate: float = 0.03

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        if len(self.dims) != 3 or len(self.spacing) != 3 or len(self.semi_axes) != 2:
            raise ConfigInvalid("dims and spacing need 3 entries, semi_axes needs (low, high)")
        if any(s <= 0 for s in self.spacing):
            raise ConfigInvalid(f"spacing must be positive: {self.spacing}")
        lo, hi = self.semi_axes
        if not 0 < lo <= hi:
            raise ConfigInvalid(f"semi-axis range must satisfy 0 < low <= high: {self.semi_axes}")
        if self.amplitude < 0:
            raise ConfigInvalid("amplitude must be >= 0")
        if self.amplitude >= lo:
            raise ConfigInvalid("amplitude must be smaller than the smallest semi-axis")
        # bounding sphere of the deformed shape plus a 2-voxel margin on each side
        if 2 * (hi + self.amplitude + 2) > min(self.dims) - 1:
            raise ConfigInvalid(f"semi-axes up to {hi} (+ amplitude) do not fit in {self.dims} with a 2-voxel margin")
        if self.decay_mm <= 0:
            raise ConfigInvalid("decay scale must be > 0")
        if not 0 <= self.noise_floor < 1:
            raise ConfigInvalid("noise floor must lie in [0, 1)")
        if self.preset not in PRESETS:
            raise ConfigInvalid(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if not 0 <= self.scatter_rate <= 1:
            raise ConfigInvalid("scatter rate must lie in [0, 1]")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown phantom config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def scattered_preset(**overrides) -> PhantomConfig:
    """Errors scattered uniformly through the volume instead of along the boundary."""
    return PhantomConfig(**{"preset": "scattered", "amplitude": 0.0, **overrides})


@dataclass(frozen=True)
class PhantomCase:
    index: int
    gt: LabelGrid
    pred: LabelGrid
    clean_u: UncertaintyGrid
    noisy_u: UncertaintyGrid
    config: PhantomConfig = field(repr=False)

    @property
    def case_id(self) -> str:
        return f"case_{self.index:03d}"

    @property
    def seed(self) -> int:
        return self.config.seed


def case_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _monomials(n: np.ndarray, degree: int = 3) -> np.ndarray:
    """All monomials of the unit-vector components with degree 1..``degree``."""
    x, y, z = n
    terms = []
    for total in range(1, degree + 1):
        for i in range(total + 1):
            for j in range(total - i + 1):
                k = total - i - j
                terms.append(x**i * y**j * z**k)
    return np.stack(terms)


def _fibonacci_sphere(n: int = 2000) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def make_phantom(cfg: PhantomConfig, case_index: int) -> PhantomCase:
    """Generate one case; identical ``(cfg, case_index)`` give identical volumes."""
    rng = case_rng(cfg.seed, case_index)
    dims = np.array(cfg.dims)
    lo, hi = cfg.semi_axes

    semi = rng.uniform(lo, hi, size=3)
    rot = Rotation.random(random_state=rng).as_matrix()
    bound = hi + cfg.amplitude + 2
    center = rng.uniform(bound, dims - 1 - bound)

    # smooth angular displacement field, scaled so max |displacement| = amplitude
    coeffs = rng.standard_normal(19) / np.repeat([1.0, 2.0, 3.0], [3, 6, 10])
    probe = coeffs @ _monomials(_fibonacci_sphere())
    scale = cfg.amplitude / np.abs(probe).max() if np.abs(probe).max() > 0 else 0.0

    grid = np.indices(cfg.dims, dtype=np.float64)
    rel = grid - center[:, None, None, None]
    radius = np.sqrt(np.sum(rel**2, axis=0))
    local = np.einsum("ji,j...->i...", rot, rel) / semi[:, None, None, None]
    r = np.sqrt(np.sum(local**2, axis=0))
    gt_mask = r <= 1.0

    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(radius > 0, rel / radius, 0.0)
    shift = scale * np.tensordot(coeffs, _monomials(direction), axes=1)
    # inside the displaced boundary: radius <= radius / r + shift  (multiplied through by r >= 0)
    shape_mask = radius * (r - 1.0) <= shift * r

    pred_mask = shape_mask.copy()
    if cfg.preset == "scattered":
        flips = rng.random(cfg.dims) < cfg.scatter_rate
        pred_mask ^= flips

    shape_surface = surface(BinaryGrid(shape_mask, cfg.spacing))
    d_pred = distance_field(shape_surface).values
    clean = np.exp(-(d_pred**2) / (2 * cfg.decay_mm**2)) + cfg.noise_floor * rng.random(cfg.dims)
    clean = np.clip(clean, 0.0, 1.0).astype(np.float32).astype(np.float64)

    raw = rng.random(cfg.dims)
    if cfg.mean_matching:
        noisy = raw * (clean.mean() / raw.mean())
        noisy = np.clip(noisy, 0.0, 1.0).astype(np.float32).astype(np.float64)
        if abs(noisy.mean() - clean.mean()) > MEAN_MATCH_TOL:
            raise ConfigInvalid("clean map mean too high to mean-match uniform noise inside [0, 1]")
    else:
        noisy = raw.astype(np.float32).astype(np.float64)

    sp = cfg.spacing
    return PhantomCase(
        index=int(case_index),
        gt=LabelGrid(gt_mask.astype(np.uint8), sp),
        pred=LabelGrid(pred_mask.astype(np.uint8), sp),
        clean_u=UncertaintyGrid(clean, sp),
        noisy_u=UncertaintyGrid(noisy, sp),
        config=cfg,
    )


def make_suite(cfg: PhantomConfig, n_cases: int, start: int = 0) -> list[PhantomCase]:
    if n_cases < 1:
        raise ConfigInvalid("suite needs at least one case")
    return [make_phantom(cfg, i) for i in range(start, start + n_cases)]
