"""Detection scoring: IoU matching, precision-recall curves, average precision.

Protocol: one IoU threshold (0.5), a strict confidence floor (scores must
exceed 0.05), greedy score-ordered matching, and AP under two interpolation
schemes. "allpoint" integrates the precision envelope exactly over recall;
"101point" averages the envelope sampled at recall 0, 0.01, ..., 1.00.

All sums go through math.fsum, so results are bitwise reproducible and
independent of accumulation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import InvalidArgument, JoinError
from .formats import Detection, _jsnum
from .geometry import AnnotatedBox, BBox

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_SCORE_FLOOR = 0.05


@dataclass(frozen=True)
class MatchOutcome:
    """Result of matching one detection within its frame."""

    detection_index: int
    matched_gt: Optional[int] = None
    iou_at_match: Optional[float] = None

    @property
    def is_tp(self) -> bool:
        return self.matched_gt is not None


@dataclass(frozen=True)
class PRCurve:
    """Precision-recall points at descending score thresholds.

    Each point is (score_threshold, precision, recall); recall is
    non-decreasing along the list.
    """

    points: tuple[tuple[float, float, float], ...]
    n_gt: int


@dataclass(frozen=True)
class EvalReport:
    ap_allpoint: float
    ap_101point: float
    n_gt: int
    n_det: int
    pr: PRCurve

    def to_json(self) -> str:
        doc = {
            "ap_allpoint": _jsnum(self.ap_allpoint),
            "ap_101point": _jsnum(self.ap_101point),
            "n_gt": self.n_gt,
            "n_det": self.n_det,
            "pr": [[_jsnum(t), _jsnum(p), _jsnum(r)] for t, p, r in self.pr.points],
        }
        return json.dumps(doc, separators=(",", ":"))


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        raise InvalidArgument("iou needs boxes with positive area")
    inter_w = min(a.x2, b.x2) - max(a.x, b.x)
    inter_h = min(a.y2, b.y2) - max(a.y, b.y)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    return inter / (a.area + b.area - inter)


def match_frame(
    detections: Sequence[Detection],
    gts: Sequence[BBox],
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
) -> list[MatchOutcome]:
    """Greedily match one frame's detections against its ground-truth boxes.

    Detections are processed in descending score, ties broken by input
    order. Each detection takes the still-unmatched ground truth with the
    highest IoU, provided that IoU reaches ``iou_thr``; lower-index ground
    truth wins IoU ties. Outcomes are returned in detection input order.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    matched_gt: set[int] = set()
    outcomes: list[Optional[MatchOutcome]] = [None] * len(detections)
    for det_index in order:
        best_gt = None
        best_iou = 0.0
        for gt_index, gt_box in enumerate(gts):
            if gt_index in matched_gt:
                continue
            overlap = iou(detections[det_index].box, gt_box)
            if overlap >= iou_thr and overlap > best_iou:
                best_gt = gt_index
                best_iou = overlap
        if best_gt is not None:
            matched_gt.add(best_gt)
            outcomes[det_index] = MatchOutcome(det_index, best_gt, best_iou)
        else:
            outcomes[det_index] = MatchOutcome(det_index)
    return [o for o in outcomes if o is not None]


def pr_curve(
    scored_outcomes: Sequence[tuple[float, MatchOutcome]],
    n_gt: int,
    score_floor: float = DEFAULT_SCORE_FLOOR,
) -> PRCurve:
    """Pool per-frame outcomes into one precision-recall curve.

    Outcomes whose score does not exceed ``score_floor`` are discarded (the
    floor is strict). One point is emitted per distinct score, at the end of
    its run, so ties collapse into a single threshold.
    """
    if n_gt < 0:
        raise InvalidArgument("n_gt must be non-negative")
    if n_gt == 0:
        return PRCurve(points=(), n_gt=0)
    kept = [(score, outcome) for score, outcome in scored_outcomes if score > score_floor]
    kept.sort(key=lambda pair: -pair[0])
    points = []
    tp = 0
    fp = 0
    for i, (score, outcome) in enumerate(kept):
        if outcome.is_tp:
            tp += 1
        else:
            fp += 1
        is_run_end = i + 1 == len(kept) or kept[i + 1][0] != score
        if is_run_end:
            points.append((score, tp / (tp + fp), tp / n_gt))
    return PRCurve(points=tuple(points), n_gt=n_gt)


def _envelope(pr: PRCurve) -> list[tuple[float, float]]:
    """(recall, max precision at recall >= this one) per curve point."""
    env: list[tuple[float, float]] = []
    running_max = 0.0
    for _, precision, recall in reversed(pr.points):
        running_max = max(running_max, precision)
        env.append((recall, running_max))
    env.reverse()
    return env


def average_precision(pr: PRCurve, scheme: str = "allpoint") -> float:
    """Area under the interpolated precision-recall curve.

    ``allpoint`` integrates the precision envelope exactly over recall;
    ``101point`` samples the envelope at recall 0, 0.01, ..., 1.00 and
    averages. An empty curve scores 0.
    """
    if scheme not in ("allpoint", "101point"):
        raise InvalidArgument(f"unknown AP scheme {scheme!r}")
    if not pr.points:
        return 0.0
    env = _envelope(pr)
    if scheme == "allpoint":
        terms = []
        prev_recall = 0.0
        for recall, precision in env:
            terms.append((recall - prev_recall) * precision)
            prev_recall = recall
        return math.fsum(terms)
    samples = []
    for i in range(101):
        r = i / 100
        at_or_beyond = [p for rec, p in env if rec >= r]
        samples.append(max(at_or_beyond) if at_or_beyond else 0.0)
    return math.fsum(samples) / 101


def evaluate(
    detections: Sequence[Detection],
    ground_truth: Sequence[AnnotatedBox],
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_floor: float = DEFAULT_SCORE_FLOOR,
    frames: Optional[Iterable[tuple[str, int]]] = None,
) -> EvalReport:
    """Score detections against ground truth over all frames.

    ``frames`` is the set of known (video, frame) pairs; it defaults to the
    frames carrying ground truth. Detections on frames outside that set
    raise JoinError; frames with ground truth but no detections still count
    toward n_gt. n_det counts all input detections, before the score floor.
    """
    gt_by_frame: dict[tuple[str, int], list[BBox]] = {}
    if frames is not None:
        for key in frames:
            gt_by_frame.setdefault(key, [])
    for ann in ground_truth:
        gt_by_frame.setdefault((ann.video_id, ann.frame_id), []).append(ann.box)

    det_by_frame: dict[tuple[str, int], list[Detection]] = {}
    for det in detections:
        key = (det.video_id, det.frame_id)
        if key not in gt_by_frame:
            raise JoinError(
                f"detection on ({det.video_id}, {det.frame_id}) has no ground-truth frame"
            )
        det_by_frame.setdefault(key, []).append(det)

    scored: list[tuple[float, MatchOutcome]] = []
    for key in sorted(det_by_frame):
        frame_dets = det_by_frame[key]
        outcomes = match_frame(frame_dets, gt_by_frame[key], iou_thr)
        scored.extend((frame_dets[o.detection_index].score, o) for o in outcomes)

    n_gt = len(ground_truth)
    pr = pr_curve(scored, n_gt, score_floor)
    return EvalReport(
        ap_allpoint=average_precision(pr, "allpoint"),
        ap_101point=average_precision(pr, "101point"),
        n_gt=n_gt,
        n_det=len(detections),
        pr=pr,
    )
