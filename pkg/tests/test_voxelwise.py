import itertools
from fractions import Fraction

import numpy as np
import pytest

from oracles import auc_pairs, average_precision_enum, binned_calibration
from segunc.errors import InvalidWindow, NoCorrectVoxels, NoIncorrectVoxels, NoPositives, SingleClass
from segunc.grid import BinaryGrid, UncertaintyGrid
from segunc.voxelwise import (
    BinningSpec,
    ThresholdSpec,
    au_arc,
    auc_pr,
    auc_roc,
    aurc,
    avu,
    calibration_errors,
    certainty_ratios,
    otsu_threshold,
    pavpu,
    voxel_accuracy,
)


def pair(u, e):
    return UncertaintyGrid(np.asarray(u, float).reshape(-1, 1, 1)), BinaryGrid(np.asarray(e, bool).reshape(-1, 1, 1))


def test_auc_roc_worked_example():
    assert auc_roc(*pair([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0])).value == 0.75


def test_auc_roc_ties_use_midranks():
    assert auc_roc(*pair([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])).value == 0.5


def test_aurc_and_au_arc_worked_example():
    u, e = pair([0.1, 0.2, 0.3, 0.4], [0, 0, 1, 1])
    assert aurc(u, e).value == pytest.approx(5 / 24, abs=1e-15)
    assert au_arc(u, e).value == pytest.approx(19 / 24, abs=1e-15)


def test_certainty_ratios_worked_example():
    u, e = pair([0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9, 0.1], [0, 0, 0, 0, 1, 1, 1, 1])
    r = certainty_ratios(u, e)
    assert r["CCR"].value == 0.75
    assert r["UIR"].value == 0.75
    assert r["CCR"].params["tau"] == 0.5


def test_ratio_degenerate_cases():
    u, e = pair([0.2, 0.4], [1, 1])
    with pytest.raises(NoCorrectVoxels):
        certainty_ratios(u, e)
    u, e = pair([0.2, 0.4], [0, 0])
    with pytest.raises(NoIncorrectVoxels):
        certainty_ratios(u, e)


def test_auc_requires_both_classes():
    with pytest.raises(SingleClass):
        auc_roc(*pair([0.1, 0.2], [0, 0]))
    with pytest.raises(NoPositives):
        auc_pr(*pair([0.1, 0.2], [0, 0]))


def test_avu_and_voxel_accuracy_example():
    u, e = pair([0.9, 0.8, 0.1, 0.2], [1, 0, 0, 0])
    # tau = 0.5: accurate-certain 2, inaccurate-uncertain 1
    res = avu(u, e)
    assert res.value == 0.75
    assert res.details == {"n_ac": 2, "n_au": 1, "n_ic": 0, "n_iu": 1}
    assert voxel_accuracy(u, e).value == 0.75


def test_fixed_threshold():
    u, e = pair([0.9, 0.8, 0.1, 0.2], [1, 0, 0, 0])
    assert avu(u, e, ThresholdSpec("fixed", 0.85)).value == 1.0


def test_otsu_splits_bimodal_values():
    u = np.r_[np.full(50, 0.1), np.full(50, 0.9)]
    t = otsu_threshold(u)
    assert 0.1 < t <= 0.9


def test_pavpu_four_by_four_window_two():
    uv = np.array([[0.9, 0.8, 0.9, 0.7],
                   [0.7, 0.6, 0.8, 0.9],
                   [0.3, 0.9, 0.0, 0.2],
                   [0.1, 0.2, 0.9, 0.9]])[:, :, None]
    ev = np.array([[1, 1, 0, 0],
                   [1, 0, 0, 0],
                   [0, 0, 0, 1],
                   [0, 0, 1, 1]], dtype=bool)[:, :, None]
    tau = uv.mean()
    assert tau == pytest.approx(0.6125)
    good = 0
    for i, j in itertools.product(range(2), range(2)):
        pu = uv[2 * i:2 * i + 2, 2 * j:2 * j + 2].mean()
        pa = 1 - ev[2 * i:2 * i + 2, 2 * j:2 * j + 2].mean()
        good += (pa >= 0.5 and pu < tau) or (pa < 0.5 and pu >= tau)
    res = pavpu(UncertaintyGrid(uv), BinaryGrid(ev), 2)
    assert res.details["patches"] == 4
    assert res.value == good / 4 == 0.5


def test_pavpu_rejects_bad_windows():
    u, e = pair([0.1, 0.2], [0, 1])
    for w in (0, -3, 1.5):
        with pytest.raises(InvalidWindow):
            pavpu(u, e, w)


def test_pavpu_partial_border_tiles_brute_force():
    rng = np.random.default_rng(4)
    uv = rng.random((7, 4, 3))
    ev = rng.random((7, 4, 3)) < 0.3
    w = 3
    tau = uv.ravel(order="F").mean()
    good, tiles = 0, 0
    for i in range(0, 7, w):
        for j in range(0, 4, w):
            for k in range(0, 3, w):
                pu = uv[i:i + w, j:j + w, k:k + w].mean()
                pa = 1 - ev[i:i + w, j:j + w, k:k + w].mean()
                good += (pa >= 0.5 and pu < tau) or (pa < 0.5 and pu >= tau)
                tiles += 1
    res = pavpu(UncertaintyGrid(uv), BinaryGrid(ev), w)
    assert res.details["patches"] == tiles == 6
    assert res.value == pytest.approx(good / tiles, abs=1e-15)


def test_pavpu_window_one_equals_avu():
    rng = np.random.default_rng(9)
    u, e = UncertaintyGrid(rng.random((5, 6, 7))), BinaryGrid(rng.random((5, 6, 7)) < 0.2)
    assert pavpu(u, e, 1).value == avu(u, e).value


@pytest.mark.parametrize("n", range(2, 9))
def test_small_n_against_oracles(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(20):
        scores = rng.integers(0, 4, n) / 4.0
        labels = rng.random(n) < 0.5
        labels[0], labels[1] = True, False
        u, e = pair(scores, labels)
        assert Fraction(auc_roc(u, e).value).limit_denominator(1000) == auc_pairs(scores, labels)
        assert auc_pr(u, e).value == pytest.approx(average_precision_enum(list(scores), list(labels)), abs=1e-12)


@pytest.mark.parametrize("n", range(2, 9))
def test_rank_metrics_invariant_under_voxel_permutation(n):
    rng = np.random.default_rng(200 + n)
    scores = rng.permutation(n) / n
    labels = rng.random(n) < 0.5
    labels[0], labels[1] = True, False
    base = [f(*pair(scores, labels)).value for f in (auc_roc, auc_pr, aurc, au_arc)]
    for perm in itertools.islice(itertools.permutations(range(n)), 50):
        p = list(perm)
        got = [f(*pair(scores[p], labels[p])).value for f in (auc_roc, auc_pr, aurc, au_arc)]
        assert got == pytest.approx(base, abs=1e-12)


def test_aurc_direct_definition_without_ties():
    rng = np.random.default_rng(31)
    scores = rng.permutation(8) / 8
    labels = rng.random(8) < 0.4
    order = np.argsort(scores)
    risks = [labels[order[:k]].mean() for k in range(1, 9)]
    assert aurc(*pair(scores, labels)).value == pytest.approx(np.mean(risks), abs=1e-15)
    rev = np.argsort(-scores)
    accs = [1 - labels[rev[k:]].mean() for k in range(8)]
    assert au_arc(*pair(scores, labels)).value == pytest.approx(np.mean(accs), abs=1e-15)


def test_calibration_errors_match_binned_oracle():
    rng = np.random.default_rng(41)
    uv = rng.random(200)
    ev = rng.random(200) < uv
    res = calibration_errors(*pair(uv, ev), BinningSpec(10))
    conf_ece, conf_mce = binned_calibration(list(1 - uv), list(1.0 - ev), 10)
    u_ece, _ = binned_calibration(list(uv), list(ev.astype(float)), 10)
    assert res["ECE"].value == pytest.approx(conf_ece, abs=1e-12)
    assert res["MCE"].value == pytest.approx(conf_mce, abs=1e-12)
    assert res["UCE"].value == pytest.approx(u_ece, abs=1e-12)


def test_perfect_calibration_gives_zero_ece():
    u, e = pair([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1])
    assert calibration_errors(u, e)["ECE"].value == 0.0


def test_binning_edges():
    b = BinningSpec(4)
    assert b.assign(np.array([0.0, 0.25, 0.999, 1.0])).tolist() == [0, 1, 3, 3]


def test_auc_roc_complement_and_monotone_transform():
    rng = np.random.default_rng(51)
    uv = np.round(rng.random(60), 1)
    ev = rng.random(60) < 0.4
    a = auc_roc(*pair(uv, ev)).value
    assert a + auc_roc(*pair(1 - uv, ev)).value == pytest.approx(1.0, abs=1e-12)
    assert auc_roc(*pair(uv**3, ev)).value == pytest.approx(a, abs=1e-12)


@pytest.mark.parametrize("n", [5, 6, 7])
def test_perfect_ordering_is_optimal_over_all_permutations(n):
    rng = np.random.default_rng(300 + n)
    labels = rng.random(n) < 0.5
    labels[0], labels[1] = True, False
    values = np.arange(n) / n
    aurcs, arcs = [], []
    for perm in itertools.permutations(range(n)):
        u, e = pair(values[list(perm)], labels)
        aurcs.append(aurc(u, e).value)
        arcs.append(au_arc(u, e).value)
    # perfect ordering: every erroneous voxel more uncertain than every correct one
    ideal = np.empty(n)
    ideal[np.argsort(labels, kind="stable")] = values
    u, e = pair(ideal, labels)
    assert aurc(u, e).value == pytest.approx(min(aurcs), abs=1e-15)
    assert au_arc(u, e).value == pytest.approx(max(arcs), abs=1e-15)


def test_ece_mce_bounded():
    rng = np.random.default_rng(61)
    for _ in range(20):
        res = calibration_errors(*pair(rng.random(100), rng.random(100) < 0.3))
        assert 0.0 <= res["ECE"].value <= res["MCE"].value <= 1.0
