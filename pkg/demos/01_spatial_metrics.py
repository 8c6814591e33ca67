"""Score one phantom case with the three spatial metrics.

A phantom has a ground-truth ellipsoid, a prediction whose boundary is
pushed in and out by a smooth random field, and two uncertainty maps with
the same mean: one concentrated on the predicted boundary ("clean") and one
that is plain noise ("noisy").  The spatial metrics should prefer the clean
map because that is where the errors are.

    python demos/01_spatial_metrics.py [case_index]
"""

import sys

from segunc import EvalConfig, PhantomConfig, evaluate_map, make_phantom, prepare_case

index = int(sys.argv[1]) if len(sys.argv) > 1 else 0
case = make_phantom(PhantomConfig(), index)
config = EvalConfig()

# Everything that depends only on (gt, pred) is computed once and shared by both maps.
geom = prepare_case(case.gt, case.pred, config=config)
print(f"{case.case_id}: {geom.err.count()} error voxels, HD95 {geom.hd95:.2f} mm (used as BUC radius)")
print(f"mean u: clean {case.clean_u.values.mean():.4f}, noisy {case.noisy_u.values.mean():.4f}\n")

results = {}
for key, u in (("clean", case.clean_u), ("noisy", case.noisy_u)):
    res, _ = evaluate_map(geom, u, config, ["SPACE", "BUC", "BA-ECE"])
    results[key] = res

print(f"{'metric':8s} {'clean':>8s} {'noisy':>8s}  better")
for name in ("SPACE", "BUC", "BA-ECE"):
    c, n = results["clean"][name], results["noisy"][name]
    higher = c.orientation.value == "higher_better"
    winner = "clean" if (c.value > n.value) == higher and c.value != n.value else "noisy"
    print(f"{name:8s} {c.value:8.4f} {n.value:8.4f}  {winner}")

# BA-ECE keeps the per-band calibration table: near the boundary the clean map
# should track the error rate, the noisy map should not.
print("\nBA-ECE bands (distance to the true boundary)")
print(f"{'band mm':>10s} {'voxels':>7s} {'weight':>7s} {'err':>6s} {'u clean':>8s} {'u noisy':>8s}")
for bc, bn in zip(results["clean"]["BA-ECE"].details["bands"], results["noisy"]["BA-ECE"].details["bands"]):
    if not bc["count"]:
        continue
    span = f"{bc['lower']:g}-{bc['upper']:g}"
    print(f"{span:>10s} {bc['count']:7d} {bc['weight']:7.3f} {bc['mean_err']:6.3f} {bc['mean_u']:8.3f} {bn['mean_u']:8.3f}")
