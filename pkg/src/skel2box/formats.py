"""Annotation file formats: JTA-style skeleton dumps, COCO JSON, MOT CSV.

All emitters are deterministic: records are written in canonical order
(video, frame, pedestrian / descending score) with shortest round-trip
number formatting, so identical inputs produce byte-identical files.

The emitted COCO documents are standard COCO detection ground truth plus
two extension keys per annotation, ``pedestrian_id`` and ``distance_m``,
which COCO tooling ignores but which let this package round-trip identity
and distance information. ``distance_m`` is omitted when unknown; parsing
a document without it yields an infinite distance, i.e. "never pruned".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import (
    IncompleteSkeleton,
    InvalidScore,
    JoinError,
    MixedVideos,
    ParseError,
    UnknownVideo,
)
from .geometry import AnnotatedBox, BBox, Joint, SkeletonInstance, sort_key

DEFAULT_JOINTS_PER_SKELETON = 22
PEDESTRIAN_CATEGORY_ID = 1

# One JTA record: [frame, pedestrian, joint, x2d, y2d, x3d, y3d, z3d, occluded, self_occluded]
_JTA_ARITY = 10

# Confidence clamping slack: values this far outside [0, 1] are treated as
# float noise, anything worse is an error.
_SCORE_SLACK = 1e-9


@dataclass(frozen=True)
class Detection:
    """One detector proposal: box plus confidence score in [0, 1]."""

    video_id: str
    frame_id: int
    box: BBox
    score: float


@dataclass(frozen=True)
class DatasetManifest:
    """Provenance record emitted alongside ground truth."""

    dataset_id: str
    image_w: float
    image_h: float
    videos: tuple[tuple[str, int], ...]
    alpha_used: Optional[float] = None
    distance_limit_m: Optional[float] = None


@dataclass(frozen=True)
class FrameRef:
    """One COCO image entry resolved to (video, frame)."""

    image_id: int
    video_id: str
    frame_id: int


@dataclass(frozen=True)
class CocoGroundTruth:
    """Parsed COCO ground truth: annotations, manifest, and the frame table."""

    annotations: tuple[AnnotatedBox, ...]
    manifest: DatasetManifest
    images: tuple[FrameRef, ...]

    def frame_by_image_id(self) -> dict[int, tuple[str, int]]:
        return {ref.image_id: (ref.video_id, ref.frame_id) for ref in self.images}

    def image_id_by_frame(self) -> dict[tuple[str, int], int]:
        return {(ref.video_id, ref.frame_id): ref.image_id for ref in self.images}


def _jsnum(value: float) -> Any:
    """Integral floats emit as JSON ints so re-emission is byte-stable."""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def _csvnum(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def _require_int(value: Any, what: str, location: str) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ParseError(f"{what} must be an integer, got {value!r}", location=location)


def _require_finite(value: Any, what: str, location: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ParseError(f"{what} must be a finite number, got {value!r}", location=location)
    return float(value)


def _clamp_score(value: float, location: str) -> float:
    if -_SCORE_SLACK <= value <= 1.0 + _SCORE_SLACK:
        return min(max(value, 0.0), 1.0)
    raise InvalidScore(f"score {value!r} outside [0, 1]", location=location)


# ---------------------------------------------------------------------------
# JTA skeleton dumps
# ---------------------------------------------------------------------------

def parse_jta(
    source: str,
    video_id: str,
    joints_per_skeleton: int = DEFAULT_JOINTS_PER_SKELETON,
) -> list[SkeletonInstance]:
    """Parse a JTA-style dump: a JSON array of per-joint records.

    Records are grouped by (frame, pedestrian) into skeletons with joints
    ordered by joint id; output is sorted by (frame, pedestrian), so record
    order in the file does not matter.

    Raises:
        ParseError: malformed JSON, wrong record arity, or bad field values.
        IncompleteSkeleton: a pedestrian's records do not cover exactly the
            joint ids 0..joints_per_skeleton-1.
    """
    try:
        records = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ParseError("expected a top-level JSON array of joint records")

    grouped: dict[tuple[int, int], list[Joint]] = {}
    for idx, rec in enumerate(records):
        loc = f"record {idx}"
        if not isinstance(rec, list) or len(rec) != _JTA_ARITY:
            raise ParseError(
                f"expected an array of {_JTA_ARITY} fields, got {rec!r}", location=loc
            )
        frame_id = _require_int(rec[0], "frame_id", loc)
        pedestrian_id = _require_int(rec[1], "pedestrian_id", loc)
        joint_id = _require_int(rec[2], "joint_id", loc)
        if frame_id < 0 or pedestrian_id < 0 or joint_id < 0:
            raise ParseError("frame, pedestrian and joint ids must be non-negative", location=loc)
        coords = [_require_finite(rec[i], f"field {i}", loc) for i in range(3, 8)]
        occluded = _require_int(rec[8], "occluded", loc)
        self_occluded = _require_int(rec[9], "self_occluded", loc)
        if occluded not in (0, 1) or self_occluded not in (0, 1):
            raise ParseError("occlusion flags must be 0 or 1", location=loc)
        grouped.setdefault((frame_id, pedestrian_id), []).append(
            Joint(
                joint_id=joint_id,
                x_px=coords[0],
                y_px=coords[1],
                x3d_m=coords[2],
                y3d_m=coords[3],
                z3d_m=coords[4],
                occluded=bool(occluded),
                self_occluded=bool(self_occluded),
            )
        )

    skeletons: list[SkeletonInstance] = []
    for (frame_id, pedestrian_id) in sorted(grouped):
        joints = grouped[(frame_id, pedestrian_id)]
        if len(joints) != joints_per_skeleton:
            raise IncompleteSkeleton(
                f"expected {joints_per_skeleton} joints, got {len(joints)}",
                frame_id=frame_id,
                pedestrian_id=pedestrian_id,
            )
        joints.sort(key=lambda j: j.joint_id)
        if [j.joint_id for j in joints] != list(range(joints_per_skeleton)):
            raise IncompleteSkeleton(
                f"joint ids do not cover 0..{joints_per_skeleton - 1}",
                frame_id=frame_id,
                pedestrian_id=pedestrian_id,
            )
        skeletons.append(
            SkeletonInstance(
                video_id=video_id,
                frame_id=frame_id,
                pedestrian_id=pedestrian_id,
                joints=tuple(joints),
            )
        )
    return skeletons


# ---------------------------------------------------------------------------
# COCO ground truth
# ---------------------------------------------------------------------------

def coco_file_name(video_id: str, frame_id: int) -> str:
    return f"{video_id}/{frame_id:06d}.jpg"


def emit_coco(annotations: Sequence[AnnotatedBox], manifest: DatasetManifest) -> str:
    """Serialize annotations as a COCO detection ground-truth document.

    Images cover every frame of every video in the manifest (frames are
    1-based); image and annotation ids are assigned sequentially from 1 in
    (video, frame[, pedestrian]) order, so the output is deterministic.

    Raises:
        UnknownVideo: an annotation's video/frame is not in the manifest.
    """
    frame_counts = dict(manifest.videos)
    images = []
    image_ids: dict[tuple[str, int], int] = {}
    for video_id in sorted(frame_counts):
        for frame_id in range(1, frame_counts[video_id] + 1):
            image_id = len(images) + 1
            image_ids[(video_id, frame_id)] = image_id
            images.append(
                {
                    "id": image_id,
                    "width": _jsnum(manifest.image_w),
                    "height": _jsnum(manifest.image_h),
                    "file_name": coco_file_name(video_id, frame_id),
                }
            )

    coco_annotations = []
    for ann in sorted(annotations, key=sort_key):
        key = (ann.video_id, ann.frame_id)
        if key not in image_ids:
            raise UnknownVideo(
                f"annotation ({ann.video_id}, {ann.frame_id}, {ann.pedestrian_id}) "
                "is outside the manifest"
            )
        entry: dict[str, Any] = {
            "id": len(coco_annotations) + 1,
            "image_id": image_ids[key],
            "category_id": PEDESTRIAN_CATEGORY_ID,
            "bbox": [_jsnum(v) for v in (ann.box.x, ann.box.y, ann.box.w, ann.box.h)],
            "area": _jsnum(ann.box.w * ann.box.h),
            "iscrowd": 0,
            "pedestrian_id": ann.pedestrian_id,
        }
        if math.isfinite(ann.distance_m):
            entry["distance_m"] = _jsnum(ann.distance_m)
        coco_annotations.append(entry)

    info: dict[str, Any] = {
        "dataset_id": manifest.dataset_id,
        "image_w": _jsnum(manifest.image_w),
        "image_h": _jsnum(manifest.image_h),
        "videos": [[video_id, count] for video_id, count in manifest.videos],
    }
    if manifest.alpha_used is not None:
        info["alpha_used"] = _jsnum(manifest.alpha_used)
    if manifest.distance_limit_m is not None:
        info["distance_limit_m"] = _jsnum(manifest.distance_limit_m)

    doc = {
        "info": info,
        "images": images,
        "annotations": coco_annotations,
        "categories": [{"id": PEDESTRIAN_CATEGORY_ID, "name": "pedestrian"}],
    }
    return json.dumps(doc, separators=(",", ":"))


def _parse_file_name(file_name: str, location: str) -> tuple[str, int]:
    head, _, tail = file_name.rpartition("/")
    stem = tail.rsplit(".", 1)[0]
    if not stem.isdigit():
        raise ParseError(
            f"cannot extract a frame number from file_name {file_name!r}", location=location
        )
    return head, int(stem)


def parse_coco_gt(source: str) -> CocoGroundTruth:
    """Parse a COCO ground-truth document (ours or foreign).

    Frames are recovered from image ``file_name`` entries of the form
    ``<video>/<frame>.jpg``. Annotations missing the ``pedestrian_id`` /
    ``distance_m`` extension keys fall back to the COCO annotation id and
    an infinite distance respectively.
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise ParseError("expected a COCO document with 'images' and 'annotations'")

    images: list[FrameRef] = []
    frame_of: dict[int, tuple[str, int]] = {}
    for idx, img in enumerate(doc["images"]):
        loc = f"image {idx}"
        image_id = _require_int(img.get("id"), "image id", loc)
        video_id, frame_id = _parse_file_name(str(img.get("file_name", "")), loc)
        if image_id in frame_of:
            raise ParseError(f"duplicate image id {image_id}", location=loc)
        frame_of[image_id] = (video_id, frame_id)
        images.append(FrameRef(image_id=image_id, video_id=video_id, frame_id=frame_id))
    images.sort(key=lambda ref: (ref.video_id, ref.frame_id))

    annotations: list[AnnotatedBox] = []
    for idx, ann in enumerate(doc["annotations"]):
        loc = f"annotation {idx}"
        image_id = _require_int(ann.get("image_id"), "image_id", loc)
        if image_id not in frame_of:
            raise ParseError(f"annotation references unknown image id {image_id}", location=loc)
        video_id, frame_id = frame_of[image_id]
        bbox = ann.get("bbox")
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise ParseError(f"bbox must be [x, y, w, h], got {bbox!r}", location=loc)
        x, y, w, h = (_require_finite(v, "bbox field", loc) for v in bbox)
        if w <= 0 or h <= 0:
            raise ParseError(f"bbox must have positive extent, got {bbox!r}", location=loc)
        pedestrian_id = _require_int(
            ann.get("pedestrian_id", ann.get("id", idx + 1)), "pedestrian_id", loc
        )
        if "distance_m" in ann:
            distance = _require_finite(ann["distance_m"], "distance_m", loc)
            if distance <= 0:
                raise ParseError(f"distance_m must be positive, got {distance!r}", location=loc)
        else:
            distance = math.inf
        box = BBox(x, y, w, h)
        annotations.append(
            AnnotatedBox(
                video_id=video_id,
                frame_id=frame_id,
                pedestrian_id=pedestrian_id,
                box=box,
                distance_m=distance,
                skeleton_box=box,
            )
        )
    annotations.sort(key=sort_key)

    info = doc.get("info") or {}
    if isinstance(info, dict) and "videos" in info:
        manifest = DatasetManifest(
            dataset_id=str(info.get("dataset_id", "")),
            image_w=float(info.get("image_w", 0)),
            image_h=float(info.get("image_h", 0)),
            videos=tuple((str(v), int(n)) for v, n in info["videos"]),
            alpha_used=(
                float(info["alpha_used"]) if info.get("alpha_used") is not None else None
            ),
            distance_limit_m=(
                float(info["distance_limit_m"])
                if info.get("distance_limit_m") is not None
                else None
            ),
        )
    else:
        # Foreign document: reconstruct what the images table supports.
        counts: dict[str, int] = {}
        for ref in images:
            counts[ref.video_id] = max(counts.get(ref.video_id, 0), ref.frame_id)
        first = doc["images"][0] if doc["images"] else {}
        manifest = DatasetManifest(
            dataset_id=str(info.get("dataset_id", "")) if isinstance(info, dict) else "",
            image_w=float(first.get("width", 0)),
            image_h=float(first.get("height", 0)),
            videos=tuple(sorted(counts.items())),
        )

    return CocoGroundTruth(
        annotations=tuple(annotations), manifest=manifest, images=tuple(images)
    )


# ---------------------------------------------------------------------------
# MOT ground truth
# ---------------------------------------------------------------------------

def emit_mot(annotations: Sequence[AnnotatedBox]) -> str:
    """Serialize annotations as MOT ground-truth CSV (single video per file).

    Rows are ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,class,visibility``
    with conf = class = visibility = 1, sorted by (frame, id).

    Raises:
        MixedVideos: annotations span more than one video.
    """
    videos = {a.video_id for a in annotations}
    if len(videos) > 1:
        raise MixedVideos(f"MOT files hold one video, got {sorted(videos)}")
    lines = []
    for a in sorted(annotations, key=lambda a: (a.frame_id, a.pedestrian_id)):
        fields = [
            str(a.frame_id),
            str(a.pedestrian_id),
            _csvnum(a.box.x),
            _csvnum(a.box.y),
            _csvnum(a.box.w),
            _csvnum(a.box.h),
            "1",
            "1",
            "1",
        ]
        lines.append(",".join(fields))
    return "".join(line + "\n" for line in lines)


def parse_mot_gt(source: str, video_id: str) -> tuple[list[AnnotatedBox], int]:
    """Parse MOT ground-truth CSV for one video.

    Only class-1 (pedestrian) rows become annotations; rows of other classes
    are counted and reported, never silently dropped. MOT files carry no
    camera distance, so parsed annotations get an infinite distance.

    Returns:
        (annotations sorted by (frame, id), skipped non-pedestrian row count)
    """
    annotations: list[AnnotatedBox] = []
    skipped = 0
    for line_no, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        loc = f"line {line_no}"
        fields = line.split(",")
        if len(fields) != 9:
            raise ParseError(f"expected 9 fields, got {len(fields)}", location=loc)
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", location=loc) from exc
        frame_id = _require_int(values[0], "frame", loc)
        pedestrian_id = _require_int(values[1], "id", loc)
        class_id = _require_int(values[7], "class", loc)
        if class_id != PEDESTRIAN_CATEGORY_ID:
            skipped += 1
            continue
        x, y, w, h = values[2:6]
        if w <= 0 or h <= 0:
            raise ParseError(f"box must have positive extent, got {fields[2:6]}", location=loc)
        box = BBox(x, y, w, h)
        annotations.append(
            AnnotatedBox(
                video_id=video_id,
                frame_id=frame_id,
                pedestrian_id=pedestrian_id,
                box=box,
                distance_m=math.inf,
                skeleton_box=box,
            )
        )
    annotations.sort(key=lambda a: (a.frame_id, a.pedestrian_id))
    return annotations, skipped


# ---------------------------------------------------------------------------
# Detections
# ---------------------------------------------------------------------------

def parse_detections(
    source: str,
    fmt: str,
    *,
    video_id: Optional[str] = None,
    frame_of_image: Optional[Mapping[int, tuple[str, int]]] = None,
) -> list[Detection]:
    """Parse detector output in ``coco_results`` or ``mot_det`` format.

    ``coco_results`` needs ``frame_of_image`` (image id -> (video, frame),
    from the ground-truth document) to resolve frames; ``mot_det`` needs the
    ``video_id`` the file belongs to. All records are returned regardless of
    score; the confidence floor is an evaluation concern. Output is sorted
    by (video, frame, descending score).

    Raises:
        ParseError: malformed records.
        InvalidScore: a score outside [0, 1] beyond clamping slack.
        JoinError: a coco_results record references an unknown image id.
    """
    if fmt == "coco_results":
        if frame_of_image is None:
            raise ParseError("coco_results parsing needs an image-id index from the ground truth")
        detections = _parse_coco_results(source, frame_of_image)
    elif fmt == "mot_det":
        if video_id is None:
            raise ParseError("mot_det parsing needs the video id")
        detections = _parse_mot_det(source, video_id)
    else:
        raise ParseError(f"unknown detection format {fmt!r}")
    detections.sort(key=lambda d: (d.video_id, d.frame_id, -d.score))
    return detections


def _parse_coco_results(
    source: str, frame_of_image: Mapping[int, tuple[str, int]]
) -> list[Detection]:
    try:
        records = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ParseError("expected a top-level JSON array of detection records")
    detections = []
    for idx, rec in enumerate(records):
        loc = f"record {idx}"
        if not isinstance(rec, dict):
            raise ParseError(f"expected an object, got {rec!r}", location=loc)
        image_id = _require_int(rec.get("image_id"), "image_id", loc)
        if image_id not in frame_of_image:
            raise JoinError(f"detection references unknown image id {image_id} ({loc})")
        category = _require_int(rec.get("category_id", PEDESTRIAN_CATEGORY_ID), "category_id", loc)
        if category != PEDESTRIAN_CATEGORY_ID:
            continue
        bbox = rec.get("bbox")
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise ParseError(f"bbox must be [x, y, w, h], got {bbox!r}", location=loc)
        x, y, w, h = (_require_finite(v, "bbox field", loc) for v in bbox)
        if w <= 0 or h <= 0:
            raise ParseError(f"bbox must have positive extent, got {bbox!r}", location=loc)
        score = _clamp_score(_require_finite(rec.get("score"), "score", loc), loc)
        video_id, frame_id = frame_of_image[image_id]
        detections.append(
            Detection(video_id=video_id, frame_id=frame_id, box=BBox(x, y, w, h), score=score)
        )
    return detections


def _parse_mot_det(source: str, video_id: str) -> list[Detection]:
    detections = []
    for line_no, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        loc = f"line {line_no}"
        fields = line.split(",")
        if not 7 <= len(fields) <= 10:
            raise ParseError(f"expected 7-10 fields, got {len(fields)}", location=loc)
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", location=loc) from exc
        frame_id = _require_int(values[0], "frame", loc)
        x, y, w, h = values[2:6]
        if not all(math.isfinite(v) for v in (x, y, w, h)):
            raise ParseError("box fields must be finite", location=loc)
        if w <= 0 or h <= 0:
            raise ParseError(f"box must have positive extent, got {fields[2:6]}", location=loc)
        score = _clamp_score(values[6], loc)
        detections.append(
            Detection(video_id=video_id, frame_id=frame_id, box=BBox(x, y, w, h), score=score)
        )
    return detections


def emit_detections(
    detections: Sequence[Detection],
    fmt: str,
    *,
    image_id_of_frame: Optional[Mapping[tuple[str, int], int]] = None,
) -> str:
    """Serialize detections in ``coco_results`` or ``mot_det`` format.

    Output order matches what :func:`parse_detections` produces, so
    emit/parse pairs are identity and re-emission is byte-identical.
    """
    ordered = sorted(detections, key=lambda d: (d.video_id, d.frame_id, -d.score))
    if fmt == "coco_results":
        if image_id_of_frame is None:
            raise ParseError("coco_results emission needs an image-id index")
        records = []
        for det in ordered:
            key = (det.video_id, det.frame_id)
            if key not in image_id_of_frame:
                raise JoinError(f"detection frame {key} is not in the image index")
            records.append(
                {
                    "image_id": image_id_of_frame[key],
                    "category_id": PEDESTRIAN_CATEGORY_ID,
                    "bbox": [
                        _jsnum(v) for v in (det.box.x, det.box.y, det.box.w, det.box.h)
                    ],
                    "score": _jsnum(det.score),
                }
            )
        return json.dumps(records, separators=(",", ":"))
    if fmt == "mot_det":
        videos = {d.video_id for d in ordered}
        if len(videos) > 1:
            raise MixedVideos(f"MOT files hold one video, got {sorted(videos)}")
        lines = []
        for det in ordered:
            fields = [
                str(det.frame_id),
                "-1",
                _csvnum(det.box.x),
                _csvnum(det.box.y),
                _csvnum(det.box.w),
                _csvnum(det.box.h),
                _csvnum(det.score),
                "-1",
                "-1",
                "-1",
            ]
            lines.append(",".join(fields))
        return "".join(line + "\n" for line in lines)
    raise ParseError(f"unknown detection format {fmt!r}")


def manifest_for_annotations(
    annotations: Iterable[AnnotatedBox],
    dataset_id: str,
    image_w: float,
    image_h: float,
    alpha_used: Optional[float] = None,
    distance_limit_m: Optional[float] = None,
) -> DatasetManifest:
    """Build a manifest covering every frame referenced by the annotations."""
    counts: dict[str, int] = {}
    for a in annotations:
        counts[a.video_id] = max(counts.get(a.video_id, 0), a.frame_id)
    return DatasetManifest(
        dataset_id=dataset_id,
        image_w=image_w,
        image_h=image_h,
        videos=tuple(sorted(counts.items())),
        alpha_used=alpha_used,
        distance_limit_m=distance_limit_m,
    )
