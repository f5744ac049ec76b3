"""The ``toothseg`` command line.

Subcommands: synth, segment, inpaint, eval-masks, eval-keypoints, serve,
fixture. Exit codes: 0 success, 1 user error (bad flags, bad inputs),
2 internal error. Reports are always written to files with stable key
order and floats at six significant digits, so identical inputs yield
byte-identical outputs; the eval subcommands also render a PNG figure
next to the report unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__, classical, imaging, metrics, pipeline, synth
from .errors import ToothsegError
from .keypoints import (
    HeatmapBundle,
    MatchResult,
    load_keypoints_json,
    match_keypoints,
    threshold_sweep,
)

VIEW_CHOICES = ("lower", "front", "upper")


class _UserError(Exception):
    """Raised for anything that maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        raise _UserError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# deterministic serialization


def _round6(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: _round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round6(v) for v in value]
    return value


def _write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(_round6(doc), indent=2) + "\n")


def _write_csv(rows: list[list], header: list[str], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])


def _load_config(path: str | None) -> pipeline.PipelineConfig:
    if path is None:
        return pipeline.PipelineConfig()
    try:
        return pipeline.load_pipeline_config(path)
    except (json.JSONDecodeError, ToothsegError, OSError) as exc:
        raise _UserError(f"config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    views = tuple(v.strip() for v in args.views.split(",") if v.strip())
    for view in views:
        if view not in VIEW_CHOICES:
            raise _UserError(f"unknown view {view!r} (choose from {', '.join(VIEW_CHOICES)})")
    if not views:
        raise _UserError("--views must name at least one view")
    cfg = synth.SynthConfig(view=views[0], size=args.size, seed=args.seed)
    manifest = synth.generate_dataset(cfg, args.count, args.out, views=views, jobs=args.jobs)
    print(f"wrote {len(manifest)} scenes to {args.out}")
    return 0


def _load_bundle(args, width: int, height: int) -> HeatmapBundle:
    heat = imaging.load_scalar_map(args.heatmap)
    off_x = imaging.load_scalar_map(args.offsets[0])
    off_y = imaging.load_scalar_map(args.offsets[1])
    bundle = HeatmapBundle(heat, off_x, off_y, args.stride)
    if bundle.input_width != width or bundle.input_height != height:
        raise _UserError(
            f"heatmap {heat.shape[1]}x{heat.shape[0]} at stride {args.stride} does not "
            f"cover the {width}x{height} image"
        )
    return bundle


def _dump_debug(artifacts: pipeline.StageArtifacts, debug_dir: Path) -> None:
    debug_dir.mkdir(parents=True, exist_ok=True)
    stages = [
        ("01_fused", artifacts.fused, "scalar"),
        ("02_otsu", artifacts.otsu_mask, "mask"),
        ("03_closed", artifacts.closed, "mask"),
        ("04_crf", artifacts.crf_mask, "mask"),
        ("05_distance", artifacts.distance, "scalar"),
        ("06_boosted", artifacts.boosted, "scalar"),
        ("07_markers", artifacts.markers, "labels"),
        ("08_labels", artifacts.labels, "labels"),
    ]
    for name, data, kind in stages:
        if data is None:
            continue
        if kind == "scalar":
            imaging.save_scalar_map(data, debug_dir / f"{name}.fmap")
            imaging.save_scalar_map(data, debug_dir / f"{name}.png")
        elif kind == "mask":
            imaging.save_mask(data, debug_dir / f"{name}.png")
            imaging.write_fmap(data.astype(np.float32)[None], debug_dir / f"{name}.fmap")
        else:
            imaging.write_fmap(data.astype(np.float32)[None], debug_dir / f"{name}.fmap")
            top = max(int(data.max()), 1)
            scaled = (data.astype(np.float64) * (255.0 / top)).round().astype(np.uint8)
            imaging.save_image(np.repeat(scaled[:, :, None], 3, axis=2), debug_dir / f"{name}.png")


def _cmd_segment(args) -> int:
    cfg = _load_config(args.config)
    if args.inpaint:
        cfg = dataclasses.replace(cfg, inpaint=True)
    img = imaging.load_image(args.image)
    h, w = img.shape[:2]

    if args.method == "ours":
        if not args.features:
            raise _UserError("--features is required for method 'ours'")
        if not args.heatmap or not args.offsets:
            raise _UserError("--heatmap and --offsets are required for method 'ours'")
        stacks = [imaging.read_fmap(p) for p in args.features]
        bundle = _load_bundle(args, w, h)
        result = pipeline.segment_ours(img, stacks, bundle, cfg)
    elif args.method == "otsu":
        result = pipeline.segment_otsu_baseline(img, cfg)
    else:
        result = pipeline.segment_hsv_baseline(img, cfg)

    out_path = Path(args.out) if args.out else Path(args.image).with_name(Path(args.image).stem + "_pred.png")
    imaging.save_mask(result.mask, out_path)
    if args.labels:
        labels = result.labels if result.labels is not None else np.zeros((h, w), dtype=np.int32)
        top = max(int(labels.max()), 1)
        scaled = (labels.astype(np.float64) * (255.0 / top)).round().astype(np.uint8)
        imaging.save_image(np.repeat(scaled[:, :, None], 3, axis=2), Path(args.labels))
    if args.debug_dir:
        _dump_debug(result.artifacts, Path(args.debug_dir))
    status = "empty" if result.empty else f"{int(result.mask.sum())} px foreground"
    print(f"{args.method}: {status}, label_count={result.label_count} -> {out_path}")
    return 0


def _cmd_inpaint(args) -> int:
    cfg = _load_config(args.config)
    img = imaging.load_image(args.image)
    spots = classical.detect_bright_spots(img, cfg.inpaint_cfg)
    restored = classical.inpaint(img, spots, cfg.inpaint_cfg)
    imaging.save_image(restored, args.out)
    print(f"inpainted {int(spots.sum())} px -> {args.out}")
    return 0


def _cmd_eval_masks(args) -> int:
    manifest = metrics.load_manifest(args.manifest)
    report = metrics.evaluate_dirs(args.pred, args.gt, manifest)
    report_path = Path(args.report)
    _write_json(metrics.report_to_dict(report), report_path)

    csv_rows = [
        [r.image_id, r.view, r.score.iou, r.score.precision, r.score.recall, r.score.f1]
        for r in report.per_image
        if r.score is not None
    ]
    _write_csv(csv_rows, ["image_id", "view", "iou", "precision", "recall", "f1"], report_path.with_suffix(".csv"))
    if not args.no_figures and report.per_view:
        from . import plots

        plots.plot_view_scores(report, report_path.with_name(report_path.stem + "_views.png"))
    print(f"evaluated {len(report.per_image)} masks, overall IoU {report.overall.iou:.4f} -> {report_path}")
    return 0


def _cmd_eval_keypoints(args) -> int:
    pred = load_keypoints_json(args.pred)
    gt = load_keypoints_json(args.gt)
    image_ids = list(gt)
    image_ids += [i for i in pred if i not in gt]

    pooled_pairs: list[tuple[int, int, float]] = []
    pooled_up = 0
    pooled_ug = 0
    per_image = []
    for image_id in image_ids:
        match = match_keypoints(pred.get(image_id, []), gt.get(image_id, []))
        entry = {
            "image_id": image_id,
            "pairs": len(match.pairs),
            "unmatched_pred": len(match.unmatched_pred),
            "unmatched_gt": len(match.unmatched_gt),
        }
        if match.pairs:
            dists = match.distances
            entry["mean_px"] = float(np.mean(dists))
            entry["median_px"] = float(np.median(dists))
        per_image.append(entry)
        pooled_pairs.extend(match.pairs)
        pooled_up += len(match.unmatched_pred)
        pooled_ug += len(match.unmatched_gt)

    pooled = MatchResult(
        [(0, 0, d) for _, _, d in pooled_pairs],
        list(range(pooled_up)),
        list(range(pooled_ug)),
    )
    sweep = threshold_sweep(pooled, args.t_max)
    distances = pooled.distances
    doc = {
        "num_images": len(image_ids),
        "num_pairs": len(distances),
        "unmatched_pred": pooled_up,
        "unmatched_gt": pooled_ug,
        "mean_px": float(np.mean(distances)) if distances else None,
        "median_px": float(np.median(distances)) if distances else None,
        "per_image": per_image,
        "sweep": {
            "thresholds": sweep.thresholds,
            "precision": sweep.precision,
            "recall": sweep.recall,
            "f1": sweep.f1,
        },
    }
    report_path = Path(args.report)
    _write_json(doc, report_path)
    _write_csv(
        [
            [t, p, r, f]
            for t, p, r, f in zip(sweep.thresholds, sweep.precision, sweep.recall, sweep.f1)
        ],
        ["threshold", "precision", "recall", "f1"],
        report_path.with_suffix(".csv"),
    )
    if not args.no_figures:
        from . import plots

        plots.plot_threshold_sweep(sweep, report_path.with_name(report_path.stem + "_sweep.png"))
    mean_text = f"{doc['mean_px']:.3f}" if doc["mean_px"] is not None else "n/a"
    print(f"matched {len(distances)} pairs, mean {mean_text} px -> {report_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, _load_config(args.config), ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_fixture(args) -> int:
    from .service import build_demo_data_dir

    sequences = build_demo_data_dir(args.out, seed=args.seed, size=args.size)
    print(f"wrote {len(sequences)} sequences to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toothseg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"toothseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, required=True, help="scenes per view")
    p.add_argument("--seed", type=int, default=0, help="dataset seed (default 0)")
    p.add_argument("--views", default="lower", help="comma-separated views (default lower)")
    p.add_argument("--size", type=int, default=512, help="scene size in px (default 512)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads (default: logical CPUs)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("segment", help="segment one image")
    p.add_argument("--image", required=True)
    p.add_argument("--method", required=True, choices=("ours", "otsu", "hsv"))
    p.add_argument("--features", nargs="+", help="FMAP feature stacks (method ours)")
    p.add_argument("--heatmap", help="FMAP keypoint heatmap (method ours)")
    p.add_argument("--offsets", nargs=2, metavar=("OX", "OY"), help="FMAP offset maps (method ours)")
    p.add_argument("--stride", type=int, default=4, help="heatmap stride (default 4)")
    p.add_argument("--inpaint", action="store_true", help="inpaint specular spots first")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", help="output mask PNG (default <image>_pred.png)")
    p.add_argument("--labels", help="also write the instance label map PNG")
    p.add_argument("--debug-dir", help="dump per-stage PNG + FMAP artifacts")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("inpaint", help="remove bright spots from an image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="pipeline config JSON (inpaint_cfg section)")
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("eval-masks", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted masks")
    p.add_argument("--gt", required=True, help="directory of ground-truth masks")
    p.add_argument("--manifest", required=True, help="manifest JSON (image_id -> view)")
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=_cmd_eval_masks)

    p = sub.add_parser("eval-keypoints", help="match and score keypoint predictions")
    p.add_argument("--pred", required=True, help="predicted keypoints JSON")
    p.add_argument("--gt", required=True, help="ground-truth keypoints JSON")
    p.add_argument("--t-max", type=int, default=29, help="largest distance threshold (default 29)")
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=_cmd_eval_keypoints)

    p = sub.add_parser("serve", help="run the annotation / segmentation HTTP service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--ui-dir", help="static frontend build to serve at /")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("fixture", help="build a demo service data directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=_cmd_fixture)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UserError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ToothsegError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
