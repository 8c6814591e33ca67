import numpy as np
import pytest

from oracles import dense_gaussian_smooth
from segunc.errors import DegenerateRegion, EmptyBands, GeometryMismatch
from segunc.geometry import SENTINEL, BandSpec, SmoothingSpec, band_partition, gaussian_smooth
from segunc.grid import BinaryGrid, ScalarGrid, UncertaintyGrid
from segunc.spatial import ba_ece, buc, space


def line(values):
    return np.asarray(values).reshape(-1, 1, 1)


def test_buc_worked_example():
    u = UncertaintyGrid(line([0.8, 0.6, 0.1, 0.3]))
    region = BinaryGrid(line([True, True, False, False]))
    res = buc(u, region)
    # mean inside 0.7, outside 0.2
    assert res.value == pytest.approx(0.7 / 0.9, abs=1e-15)
    assert res.details == pytest.approx({"mean_inside": 0.7, "mean_outside": 0.2})


def test_buc_zero_mass_and_degenerate_regions():
    region = BinaryGrid(line([True, False]))
    assert buc(UncertaintyGrid(line([0.0, 0.0])), region).value == 0.5
    with pytest.raises(DegenerateRegion):
        buc(UncertaintyGrid(line([0.1, 0.2])), BinaryGrid(line([True, True])))
    with pytest.raises(DegenerateRegion):
        buc(UncertaintyGrid(line([0.1, 0.2])), BinaryGrid(line([False, False])))


def bands_for(dist, edges=(0.0, 1.0, 2.0, np.inf), delta=1.0):
    return band_partition(ScalarGrid(line(dist)), BandSpec(edges), delta=delta)


def test_ba_ece_worked_example():
    bf = bands_for([0.0, 0.0, 1.5, 1.5])
    u = UncertaintyGrid(line([0.5, 0.5, 0.0, 0.4]))
    err = BinaryGrid(line([True, False, False, False]))
    # band 0: |0.5 - 0.5| = 0; band 1: |0.2 - 0| = 0.2, weight (1/2.5)/(1 + 1/2.5) = 2/7
    res = ba_ece(u, err, bf)
    assert res.value == pytest.approx(0.2 * 2 / 7, abs=1e-15)
    table = res.details["bands"]
    assert [b["count"] for b in table] == [2, 2, 0]
    assert table[2]["mean_u"] is None


def test_ba_ece_empty_bands_and_mismatch():
    bf = band_partition(ScalarGrid(line([5.0, 6.0])), BandSpec((0.0, 1.0)))
    assert np.all(bf.band_index == SENTINEL)
    with pytest.raises(EmptyBands):
        ba_ece(UncertaintyGrid(line([0.1, 0.2])), BinaryGrid(line([True, False])), bf)
    other = bands_for([0.0, 1.0, 2.0])
    with pytest.raises(GeometryMismatch):
        ba_ece(UncertaintyGrid(line([0.1, 0.2])), BinaryGrid(line([True, False])), other)


def test_space_zero_when_maps_agree():
    e = np.zeros((6, 6, 6), dtype=bool)
    e[2:4, 2:4, 2:4] = True
    assert space(UncertaintyGrid(e.astype(float)), BinaryGrid(e)).value == pytest.approx(0.0, abs=1e-15)


def test_space_matches_dense_oracle():
    rng = np.random.default_rng(5)
    u = rng.random((8, 8, 8))
    e = rng.random((8, 8, 8)) < 0.2
    expected = np.mean(np.abs(dense_gaussian_smooth(u, 1.2) - dense_gaussian_smooth(e.astype(float), 1.2)))
    got = space(UncertaintyGrid(u), BinaryGrid(e), SmoothingSpec(1.2)).value
    assert got == pytest.approx(expected, abs=1e-12)


def test_space_accepts_precomputed_smoothed_error():
    rng = np.random.default_rng(6)
    u = UncertaintyGrid(rng.random((5, 5, 5)))
    e = BinaryGrid(rng.random((5, 5, 5)) < 0.3)
    pre = gaussian_smooth(ScalarGrid(e.values), SmoothingSpec())
    assert space(u, e, smoothed_err=pre).value == space(u, e).value


def test_space_is_symmetric_in_error_complement():
    # swapping u -> 1-u and err -> not err leaves |Gu - Ge| unchanged
    rng = np.random.default_rng(8)
    u = rng.random((6, 6, 6))
    e = rng.random((6, 6, 6)) < 0.5
    a = space(UncertaintyGrid(u), BinaryGrid(e)).value
    b = space(UncertaintyGrid(1.0 - u), BinaryGrid(~e)).value
    assert a == pytest.approx(b, abs=1e-12)


def random_case(seed, shape=(7, 6, 5)):
    rng = np.random.default_rng(seed)
    return rng.random(shape), rng.random(shape) < 0.3, rng.random(shape) < 0.4


@pytest.mark.parametrize("seed", range(5))
def test_buc_scale_invariance_and_mass_shift(seed):
    u, _, r = random_case(seed)
    region = BinaryGrid(r)
    base = buc(UncertaintyGrid(u), region).value
    assert buc(UncertaintyGrid(0.37 * u), region).value == pytest.approx(base, abs=1e-12)
    # move mass from one outside voxel to one inside voxel, same total
    out_idx, in_idx = np.argwhere(~r)[0], np.argwhere(r)[0]
    moved = u.copy()
    amount = min(moved[tuple(out_idx)], 1.0 - moved[tuple(in_idx)]) / 2
    moved[tuple(out_idx)] -= amount
    moved[tuple(in_idx)] += amount
    assert buc(UncertaintyGrid(moved), region).value > base


@pytest.mark.parametrize("seed", range(5))
def test_ba_ece_bounded_by_worst_band(seed):
    u, e, _ = random_case(seed)
    d = ScalarGrid(np.random.default_rng(seed + 50).uniform(0, 10, u.shape))
    res = ba_ece(UncertaintyGrid(u), BinaryGrid(e), band_partition(d))
    gaps = [abs(b["mean_u"] - b["mean_err"]) for b in res.details["bands"] if b["count"]]
    assert 0.0 <= res.value <= max(gaps) + 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_space_symmetry_and_mean_bound(seed):
    u, e, _ = random_case(seed)
    a = space(UncertaintyGrid(u), ScalarGrid(e.astype(float))).value
    b = space(UncertaintyGrid(e.astype(float)), ScalarGrid(u)).value
    assert a == pytest.approx(b, abs=1e-15)
    assert a >= abs(u.mean() - e.mean()) - 1e-5
    assert 0.0 <= a <= 1.0
