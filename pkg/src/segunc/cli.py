"""Command-line interface.

    segunc compute --gt G --pred P --unc U [--out report.json]
    segunc compare --manifest cases.json --clean-key clean --noisy-key noisy --out table.csv
    segunc synth   --n 50 --out dir/ [--config cfg.json]
    segunc report  --json comparison.json --out table.csv

Exit codes: 0 ok, 2 input error, 3 geometry mismatch, 4 degenerate metric input.
``SEGUNC_THREADS`` caps the number of cases evaluated concurrently.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import DegenerateInput, InputError, SegUncError
from .evaluate import EvalConfig, evaluate_map, prepare_case, select_metrics
from .formats import load_volume, save_volume
from .geometry import BandSpec, SmoothingSpec
from .grid import UncertaintyGrid, normalize_uncertainty
from .phantom import PhantomConfig, make_phantom
from .report import (
    MANIFEST_SCHEMA,
    case_document,
    comparison_csv,
    comparison_document,
    dumps,
)
from .stats import build_comparison_report
from .voxelwise import BinningSpec, ThresholdSpec

log = logging.getLogger("segunc")

EXIT_OK = 0


def _floats(text: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok:
            out.append(math.inf if tok in ("inf", "+inf") else float(tok))
    return out


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_metric_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("metric parameters")
    g.add_argument("--metrics", help="comma-separated subset, e.g. space,buc,ba-ece")
    radius = g.add_mutually_exclusive_group()
    radius.add_argument("--radius-mm", type=float, help="fixed BUC boundary-region radius in mm")
    radius.add_argument("--radius-hd95", action="store_true", help="per-case HD95 radius (default)")
    g.add_argument("--bands", default="0,1,2,4,8,inf", help="BA-ECE band edges in mm (default: %(default)s)")
    g.add_argument("--band-delta", type=float, default=1.0, help="BA-ECE weight regularizer in mm")
    g.add_argument("--sigma", type=float, default=2.0, help="SPACE Gaussian sigma (default: %(default)s)")
    g.add_argument("--sigma-unit", choices=("voxels", "mm"), default="voxels")
    g.add_argument("--bins", type=int, default=15, help="ECE/MCE/UCE bin count")
    g.add_argument("--threshold", default="mean", help="uncertainty threshold: mean, otsu or a number in [0,1]")
    g.add_argument("--windows", default="5,11", help="PAvPU window sizes")
    g.add_argument("--classes", help="foreground labels (default: every non-zero label)")
    g.add_argument("--normalize", choices=("identity", "clamp", "minmax"), default="identity",
                   help="how raw uncertainty files are mapped to [0,1]")
    g.add_argument("--baece-crop", type=int, metavar="MARGIN",
                   help="restrict BA-ECE to the GT/pred bounding box dilated by MARGIN voxels")
    g.add_argument("--no-diagnostics", action="store_true", help="omit per-band tables and confusion counts")


def _config_from_args(args) -> EvalConfig:
    thr = args.threshold.strip().lower()
    if thr in ("mean", "otsu"):
        threshold = ThresholdSpec(thr)
    else:
        try:
            threshold = ThresholdSpec("fixed", float(thr))
        except ValueError:
            raise InputError(f"bad --threshold {args.threshold!r}") from None
    try:
        return EvalConfig(
            radius_mm=args.radius_mm,
            bands=BandSpec(tuple(_floats(args.bands))),
            delta=args.band_delta,
            smoothing=SmoothingSpec(args.sigma, args.sigma_unit),
            bins=BinningSpec(args.bins),
            threshold=threshold,
            windows=tuple(_ints(args.windows)),
            baece_crop_margin=args.baece_crop,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load_map(path, method: str) -> UncertaintyGrid:
    return normalize_uncertainty(load_volume(path, "scalar"), method)


def _evaluate_case(gt_path, pred_path, map_paths: dict, config, metrics, classes, normalize):
    gt = load_volume(gt_path, "labels")
    pred = load_volume(pred_path, "labels")
    geom = prepare_case(gt, pred, classes, config)
    out = {}
    for key, path in map_paths.items():
        out[key] = evaluate_map(geom, _load_map(path, normalize), config, metrics)
    return geom, out


def cmd_compute(args) -> int:
    config = _config_from_args(args)
    metrics = select_metrics(args.metrics.split(",") if args.metrics else None, config)
    classes = _ints(args.classes) if args.classes else None
    geom, maps = _evaluate_case(args.gt, args.pred, {"unc": args.unc}, config, metrics, classes, args.normalize)
    doc = case_document(
        args.case_id,
        geom,
        maps,
        config,
        inputs={"gt": str(args.gt), "pred": str(args.pred), "unc": str(args.unc)},
        diagnostics=not args.no_diagnostics,
    )
    text = dumps(doc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    failures = maps["unc"][1]
    if failures:
        for name, reason in failures.items():
            log.warning("%s: %s", name, reason)
        return DegenerateInput.exit_code
    return EXIT_OK


def _read_manifest(path: Path) -> list[dict]:
    if not path.is_file():
        raise InputError(f"no such manifest: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    cases = doc.get("cases") if isinstance(doc, dict) else None
    if not isinstance(cases, list):
        raise InputError(f"{path}: manifest needs a 'cases' list")
    ids = [c.get("id") for c in cases]
    if any(not isinstance(i, str) for i in ids) or len(set(ids)) != len(ids):
        raise InputError(f"{path}: every case needs a unique string 'id'")
    return cases


def thread_count() -> int:
    raw = os.environ.get("SEGUNC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"SEGUNC_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


def cmd_compare(args) -> int:
    config = _config_from_args(args)
    metrics = select_metrics(args.metrics.split(",") if args.metrics else None, config)
    manifest = Path(args.manifest)
    cases = _read_manifest(manifest)
    if len(cases) < 2:
        raise InputError("compare needs at least two cases")
    base = manifest.parent

    def run(case):
        cid = case["id"]
        try:
            maps = case.get("maps", {})
            missing = [k for k in (args.clean_key, args.noisy_key) if k not in maps]
            if missing:
                raise InputError(f"no map(s) {missing} in manifest entry")
            params = case.get("params", {})
            cfg = config
            if "radius_mm" in params:
                cfg = dataclasses.replace(config, radius_mm=float(params["radius_mm"]))
            classes = params.get("classes")
            _, out = _evaluate_case(
                base / case["gt"],
                base / case["pred"],
                {"clean": base / maps[args.clean_key], "noisy": base / maps[args.noisy_key]},
                cfg,
                metrics,
                classes,
                args.normalize,
            )
        except SegUncError as exc:
            exc.args = (f"case {cid}: {exc}",)
            raise
        except (KeyError, TypeError) as exc:
            raise InputError(f"case {cid}: malformed manifest entry ({exc})") from None
        for key, (_, failures) in out.items():
            if failures:
                name, reason = next(iter(failures.items()))
                raise DegenerateInput(f"case {cid}: {key} map: {name}: {reason}")
        return cid, {key: {n: r.value for n, r in res.items()} for key, (res, _) in out.items()}

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        values = dict(pool.map(run, cases))

    report = build_comparison_report(values)
    out = Path(args.out)
    out.write_text(comparison_csv(report))
    json_path = Path(args.json) if args.json else out.with_suffix(".json")
    meta = {
        "manifest": manifest.name,
        "clean_key": args.clean_key,
        "noisy_key": args.noisy_key,
        "params": config.as_params(),
    }
    try:
        seed = json.loads(manifest.read_text()).get("seed")
    except (OSError, json.JSONDecodeError):
        seed = None
    if seed is not None:
        meta["seed"] = seed
    json_path.write_text(dumps(comparison_document(report, values, meta)))
    for row in report.rows:
        log.info("%-10s accuracy %6.2f%%", row.name, 100 * row.accuracy)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg_dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"no such config: {path}")
        try:
            cfg_dict = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    if args.preset is not None:
        cfg_dict["preset"] = args.preset
        if args.preset == "scattered":
            cfg_dict.setdefault("amplitude", 0.0)
    try:
        cfg = PhantomConfig.from_dict(cfg_dict)
    except TypeError as exc:
        raise InputError(f"bad phantom config: {exc}") from None
    if args.n < 1:
        raise InputError("--n must be at least 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = {"nii.gz": ".nii.gz", "nii": ".nii", "npy": ".npy"}[args.format]

    entries = []
    for i in range(args.n):
        case = make_phantom(cfg, i)
        files = {}
        for key, grid in (("gt", case.gt), ("pred", case.pred), ("clean", case.clean_u), ("noisy", case.noisy_u)):
            name = f"{case.case_id}_{key}{ext}"
            save_volume(out / name, grid)
            files[key] = name
        entries.append({
            "id": case.case_id,
            "index": case.index,
            "gt": files["gt"],
            "pred": files["pred"],
            "maps": {"clean": files["clean"], "noisy": files["noisy"]},
        })
    manifest = {"schema": MANIFEST_SCHEMA, "seed": cfg.seed, "config": cfg.to_dict(), "cases": entries}
    (out / "manifest.json").write_text(dumps(manifest))
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.json)
    if not path.is_file():
        raise InputError(f"no such report: {path}")
    try:
        case_values = json.loads(path.read_text())["case_values"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a comparison report ({exc})") from None
    report = build_comparison_report(case_values)
    text = comparison_csv(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segunc", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="score one uncertainty map")
    p.add_argument("--gt", required=True, help="ground-truth label volume")
    p.add_argument("--pred", required=True, help="predicted label volume")
    p.add_argument("--unc", required=True, help="uncertainty volume")
    p.add_argument("--case-id", default="case")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    _add_metric_options(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("compare", help="clean-vs-noisy comparison over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--clean-key", default="clean")
    p.add_argument("--noisy-key", default="noisy")
    p.add_argument("--out", required=True, help="CSV table path")
    p.add_argument("--json", help="full JSON report (default: next to the CSV)")
    _add_metric_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write a seeded phantom suite and its manifest")
    p.add_argument("--config", help="phantom config JSON")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--preset", choices=("boundary", "scattered"))
    p.add_argument("--format", choices=("nii.gz", "nii", "npy"), default="nii.gz")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render the CSV table from a comparison JSON")
    p.add_argument("--json", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except SegUncError as exc:
        print(f"segunc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"segunc: error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
