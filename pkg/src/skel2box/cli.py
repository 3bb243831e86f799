"""Command-line front door for the annotation pipeline.

Subcommands: calibrate, synthesize, histogram, prune, distance-limit,
convert, evaluate, plan-batches, plan-finetune. Every run prints a one-line
JSON summary on stdout and writes output files atomically (temp file plus
rename), so a failed run never leaves a partial file behind.

Exit codes: 0 success, 1 usage error, 2 data error (parse or validation
failures, reported on stderr with file and record locations).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Optional, Sequence

from . import calibration, evaluation, formats, geometry, sanitize, training_plan
from .errors import InvalidConfig, MixedVideos, Skel2BoxError

DEFAULT_IMAGE_W = 1920.0
DEFAULT_IMAGE_H = 1080.0

_CONFIG_FIELDS = (
    "image_w",
    "image_h",
    "joints_per_skeleton",
    "alpha",
    "distance_limit_m",
    "score_floor",
    "iou_thr",
)


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    """Numeric knobs shared across subcommands.

    Resolution order: command-line flag, then JSON config file, then the
    defaults below.
    """

    image_w: float = DEFAULT_IMAGE_W
    image_h: float = DEFAULT_IMAGE_H
    joints_per_skeleton: int = formats.DEFAULT_JOINTS_PER_SKELETON
    alpha: Optional[float] = None
    distance_limit_m: float = sanitize.DEFAULT_DISTANCE_LIMIT_M
    score_floor: float = evaluation.DEFAULT_SCORE_FLOOR
    iou_thr: float = evaluation.DEFAULT_IOU_THRESHOLD

    def validate(self) -> "PipelineConfig":
        if self.image_w <= 0 or self.image_h <= 0:
            raise InvalidConfig("image dimensions must be positive")
        if self.joints_per_skeleton <= 0:
            raise InvalidConfig("joints_per_skeleton must be positive")
        if self.alpha is not None and self.alpha <= 0:
            raise InvalidConfig("alpha must be positive")
        if self.distance_limit_m <= 0:
            raise InvalidConfig("distance_limit_m must be positive")
        if not 0 <= self.score_floor < 1:
            raise InvalidConfig("score_floor must lie in [0, 1)")
        if not 0 < self.iou_thr <= 1:
            raise InvalidConfig("iou_thr must lie in (0, 1]")
        return self


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting the process."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{message}\n{self.format_usage()}".rstrip())


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            doc = json.loads(_read_text(config_path))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidConfig(f"{config_path}: config file must hold a JSON object")
        unknown = sorted(set(doc) - set(_CONFIG_FIELDS))
        if unknown:
            raise InvalidConfig(f"{config_path}: unknown config keys {unknown}")
        values.update(doc)
    for field in _CONFIG_FIELDS:
        flag_value = getattr(args, field, None)
        if flag_value is not None:
            values[field] = flag_value
    try:
        config = PipelineConfig(**values)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc
    return config.validate()


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_atomic(path: str, text: str) -> None:
    target = Path(path)
    if not text.endswith("\n"):
        text += "\n"
    fd, tmp_name = tempfile.mkstemp(dir=str(target.parent) or ".", prefix=target.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp_name, str(target))
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


@contextmanager
def _reading(path: str):
    """Prefix data errors with the file they came from."""
    try:
        yield
    except Skel2BoxError as exc:
        exc.args = (f"{path}: {exc}",)
        raise


def _resolve_alpha(args: argparse.Namespace, config: PipelineConfig) -> float:
    if getattr(args, "alpha", None) is not None:
        return args.alpha
    alpha_file = getattr(args, "alpha_file", None)
    if alpha_file:
        with _reading(alpha_file):
            return calibration.CalibrationResult.from_json(_read_text(alpha_file)).alpha
    if config.alpha is not None:
        return config.alpha
    raise _UsageError("an alpha value is required (--alpha, --alpha-file, or config file)")


def _load_coco(path: str) -> formats.CocoGroundTruth:
    with _reading(path):
        return formats.parse_coco_gt(_read_text(path))


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_calibrate(args: argparse.Namespace, config: PipelineConfig) -> dict:
    with _reading(args.samples):
        samples = calibration.load_calibration_samples(_read_text(args.samples))
        result = calibration.fit_alpha(samples)
    if args.out:
        _write_atomic(args.out, result.to_json())
    return {
        "command": "calibrate",
        "alpha": result.alpha,
        "n_samples": result.n_samples,
        "rmse_px": result.rmse_px,
        "max_abs_residual_px": result.max_abs_residual_px,
        "out": args.out,
    }


def _cmd_synthesize(args: argparse.Namespace, config: PipelineConfig) -> dict:
    alpha = _resolve_alpha(args, config)
    video_id = args.video_id or Path(args.jta).stem
    with _reading(args.jta):
        skeletons = formats.parse_jta(
            _read_text(args.jta), video_id, config.joints_per_skeleton
        )
    result = geometry.synthesize_annotations(
        skeletons,
        alpha=alpha,
        image_w=config.image_w,
        image_h=config.image_h,
        clamp=not args.no_clamp,
    )
    frame_counts: dict[str, int] = {}
    for skeleton in skeletons:
        frame_counts[skeleton.video_id] = max(
            frame_counts.get(skeleton.video_id, 0), skeleton.frame_id
        )
    manifest = formats.DatasetManifest(
        dataset_id=args.dataset_id or video_id,
        image_w=config.image_w,
        image_h=config.image_h,
        videos=tuple(sorted(frame_counts.items())),
        alpha_used=alpha,
    )
    _write_atomic(args.out_coco, formats.emit_coco(result.annotations, manifest))
    if args.out_mot:
        _write_atomic(args.out_mot, formats.emit_mot(result.annotations))
    return {
        "command": "synthesize",
        "video_id": video_id,
        "alpha": alpha,
        "n_annotations": len(result.annotations),
        "n_skipped": result.skipped_count,
        "out_coco": args.out_coco,
        "out_mot": args.out_mot,
    }


def _cmd_histogram(args: argparse.Namespace, config: PipelineConfig) -> dict:
    gt = _load_coco(args.gt)
    with _reading(args.gt):
        hist = sanitize.distance_histogram(gt.annotations, bin_width_m=args.bin_width)
    _write_atomic(args.out, hist.to_csv())
    return {
        "command": "histogram",
        "n_annotations": len(gt.annotations),
        "bin_width_m": args.bin_width,
        "n_bins": len(hist.counts),
        "out": args.out,
    }


def _cmd_prune(args: argparse.Namespace, config: PipelineConfig) -> dict:
    gt = _load_coco(args.gt)
    kept, pruned = sanitize.prune_by_distance(
        gt.annotations, limit_m=config.distance_limit_m
    )
    manifest = dataclasses.replace(gt.manifest, distance_limit_m=config.distance_limit_m)
    _write_atomic(args.out, formats.emit_coco(kept, manifest))
    return {
        "command": "prune",
        "distance_limit_m": config.distance_limit_m,
        "kept": len(kept),
        "pruned": pruned,
        "out": args.out,
    }


def _cmd_distance_limit(args: argparse.Namespace, config: PipelineConfig) -> dict:
    gt = _load_coco(args.gt)
    with _reading(args.gt):
        limit = sanitize.derive_distance_limit(
            gt.annotations,
            h_min_px=args.h_min,
            bin_width_m=args.bin_width,
            min_bin_count=args.min_bin_count,
        )
    if args.out:
        _write_atomic(args.out, json.dumps({"distance_limit_m": limit}))
    return {
        "command": "distance-limit",
        "h_min_px": args.h_min,
        "distance_limit_m": limit,
        "out": args.out,
    }


def _cmd_convert(args: argparse.Namespace, config: PipelineConfig) -> dict:
    skipped = 0
    if args.from_fmt == "coco":
        gt = _load_coco(args.infile)
        annotations = list(gt.annotations)
        manifest = gt.manifest
    else:
        if not args.video_id:
            raise _UsageError("--video-id is required when converting from MOT input")
        with _reading(args.infile):
            annotations, skipped = formats.parse_mot_gt(_read_text(args.infile), args.video_id)
        manifest = formats.manifest_for_annotations(
            annotations,
            dataset_id=args.dataset_id or args.video_id,
            image_w=config.image_w,
            image_h=config.image_h,
        )
    if args.to_fmt == "coco":
        _write_atomic(args.out, formats.emit_coco(annotations, manifest))
    else:
        videos = sorted({a.video_id for a in annotations})
        if len(videos) > 1:
            if not args.video_id:
                raise MixedVideos(
                    f"{args.infile}: holds videos {videos}; pick one with --video-id"
                )
            annotations = [a for a in annotations if a.video_id == args.video_id]
        _write_atomic(args.out, formats.emit_mot(annotations))
    return {
        "command": "convert",
        "from": args.from_fmt,
        "to": args.to_fmt,
        "n_annotations": len(annotations),
        "n_skipped": skipped,
        "out": args.out,
    }


def _cmd_evaluate(args: argparse.Namespace, config: PipelineConfig) -> dict:
    gt = _load_coco(args.gt)
    if args.det_format == "mot_det" and not args.video_id:
        raise _UsageError("--video-id is required with --det-format mot_det")
    with _reading(args.det):
        detections = formats.parse_detections(
            _read_text(args.det),
            args.det_format,
            video_id=args.video_id,
            frame_of_image=gt.frame_by_image_id(),
        )
    report = evaluation.evaluate(
        detections,
        gt.annotations,
        iou_thr=config.iou_thr,
        score_floor=config.score_floor,
        frames=[(ref.video_id, ref.frame_id) for ref in gt.images],
    )
    if args.out:
        _write_atomic(args.out, report.to_json())
    return {
        "command": "evaluate",
        "ap_allpoint": report.ap_allpoint,
        "ap_101point": report.ap_101point,
        "n_gt": report.n_gt,
        "n_det": report.n_det,
        "out": args.out,
    }


def _cmd_plan_batches(args: argparse.Namespace, config: PipelineConfig) -> dict:
    mix = training_plan.MixConfig(
        n_synthetic=args.n_synthetic,
        n_real=args.n_real,
        batch_size=args.batch_size,
        ratio=args.ratio,
        seed=args.seed,
        epochs=args.epochs,
    )
    plan = training_plan.plan_mixed_batches(mix)
    _write_atomic(args.out, training_plan.serialize_plan(plan))
    return {
        "command": "plan-batches",
        "epochs": mix.epochs,
        "batches_per_epoch": len(plan.epochs[0]) if plan.epochs else 0,
        "batch_size": mix.batch_size,
        "ratio": list(mix.ratio),
        "out": args.out,
    }


def _cmd_plan_finetune(args: argparse.Namespace, config: PipelineConfig) -> dict:
    plan = training_plan.plan_finetune(args.phase1_epochs, args.phase2_epochs)
    _write_atomic(args.out, training_plan.serialize_plan(plan))
    return {
        "command": "plan-finetune",
        "phase1_epochs": plan.phase1.epochs,
        "phase2_epochs": plan.phase2.epochs,
        "out": args.out,
    }


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _ratio(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"ratio must look like '2,1', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with PipelineConfig overrides")
    common.add_argument("--image-w", dest="image_w", type=float)
    common.add_argument("--image-h", dest="image_h", type=float)
    common.add_argument("--joints-per-skeleton", dest="joints_per_skeleton", type=int)
    common.add_argument("--alpha", dest="alpha", type=float)
    common.add_argument("--distance-limit", dest="distance_limit_m", type=float)
    common.add_argument("--score-floor", dest="score_floor", type=float)
    common.add_argument("--iou-thr", dest="iou_thr", type=float)

    parser = _Parser(prog="skel2box", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="fit alpha from height samples")
    p.add_argument("--samples", required=True, help="CSV of h_s_px,z_m,h_true_px rows")
    p.add_argument("--out", help="where to write the calibration JSON")
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("synthesize", parents=[common], help="skeletons to detection boxes")
    p.add_argument("--jta", required=True, help="JTA-style JSON joint dump")
    p.add_argument("--video-id", help="video id (default: input file stem)")
    p.add_argument("--alpha-file", help="calibration JSON produced by 'calibrate'")
    p.add_argument("--dataset-id", help="dataset id stored in the output manifest")
    p.add_argument("--out-coco", required=True, help="COCO ground-truth output path")
    p.add_argument("--out-mot", help="optional MOT ground-truth output path")
    p.add_argument("--no-clamp", action="store_true", help="keep boxes beyond image borders")
    p.set_defaults(handler=_cmd_synthesize)

    p = sub.add_parser("histogram", parents=[common], help="distance histogram CSV")
    p.add_argument("--gt", required=True, help="COCO ground-truth input")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--bin-width", type=float, default=1.0)
    p.set_defaults(handler=_cmd_histogram)

    p = sub.add_parser("prune", parents=[common], help="drop annotations beyond a distance")
    p.add_argument("--gt", required=True, help="COCO ground-truth input")
    p.add_argument("--out", required=True, help="pruned COCO output path")
    p.set_defaults(handler=_cmd_prune)

    p = sub.add_parser(
        "distance-limit", parents=[common], help="derive a distance limit from box heights"
    )
    p.add_argument("--gt", required=True, help="COCO ground-truth input")
    p.add_argument("--h-min", type=float, required=True, help="minimum usable box height (px)")
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--min-bin-count", type=int, default=10)
    p.add_argument("--out", help="optional JSON output path")
    p.set_defaults(handler=_cmd_distance_limit)

    p = sub.add_parser("convert", parents=[common], help="convert between COCO and MOT")
    p.add_argument("--in", dest="infile", required=True, help="input annotation file")
    p.add_argument("--from", dest="from_fmt", required=True, choices=["coco", "mot"])
    p.add_argument("--to", dest="to_fmt", required=True, choices=["coco", "mot"])
    p.add_argument("--out", required=True)
    p.add_argument("--video-id", help="video id for MOT input, or selector for MOT output")
    p.add_argument("--dataset-id", help="dataset id for COCO output built from MOT input")
    p.set_defaults(handler=_cmd_convert)

    p = sub.add_parser("evaluate", parents=[common], help="score detections against GT")
    p.add_argument("--gt", required=True, help="COCO ground-truth input")
    p.add_argument("--det", required=True, help="detection file")
    p.add_argument(
        "--det-format", choices=["coco_results", "mot_det"], default="coco_results"
    )
    p.add_argument("--video-id", help="video id; required for --det-format mot_det")
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("plan-batches", parents=[common], help="mixed-batch training plan")
    p.add_argument("--n-synthetic", type=int, required=True)
    p.add_argument("--n-real", type=int, required=True)
    p.add_argument("--batch-size", type=int, required=True)
    p.add_argument("--ratio", type=_ratio, default=training_plan.DEFAULT_RATIO)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_plan_batches)

    p = sub.add_parser("plan-finetune", parents=[common], help="two-phase fine-tune plan")
    p.add_argument("--phase1-epochs", type=int, required=True)
    p.add_argument("--phase2-epochs", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_plan_finetune)

    return parser


def _check_thread_env() -> None:
    raw = os.environ.get("SKEL2BOX_THREADS")
    if raw is None:
        return
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        raise InvalidConfig(f"SKEL2BOX_THREADS must be a positive integer, got {raw!r}")


def run(argv: Sequence[str]) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
        _check_thread_env()
        config = _resolve_config(args)
        summary = args.handler(args, config)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (Skel2BoxError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary))
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
