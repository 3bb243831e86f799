"""Distance-aware synthesis of full-body boxes from skeleton joints.

A skeleton's joints always lie under the skin surface, so the minimum box
enclosing them undersizes the pedestrian. The full-body ("mesh") box is
derived by padding the skeleton box height with ``alpha / z`` pixels, where
``z`` is the pedestrian's distance from the camera and ``alpha`` is a
camera-dependent constant (see :mod:`skel2box.calibration` for how it is
fitted), then scaling the width so the aspect ratio is unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import DegenerateSkeleton, InvalidArgument, NonPositiveDistance


@dataclass(frozen=True)
class Joint:
    """One skeleton joint: screen position plus camera-space position."""

    joint_id: int
    x_px: float
    y_px: float
    x3d_m: float
    y3d_m: float
    z3d_m: float
    occluded: bool = False
    self_occluded: bool = False


@dataclass(frozen=True)
class SkeletonInstance:
    """One pedestrian in one frame, identified by (video, frame, pedestrian)."""

    video_id: str
    frame_id: int
    pedestrian_id: int
    joints: tuple[Joint, ...]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner (x, y) plus width and height, in pixels."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h


@dataclass(frozen=True)
class AnnotatedBox:
    """Synthesized ground truth for one pedestrian in one frame.

    ``box`` is the padded full-body box (clamped to the image unless clamping
    was disabled); ``skeleton_box`` is the pre-padding joint hull kept for
    diagnostics; ``distance_m`` is the pedestrian-camera distance used for
    the padding and later for distance-based pruning.
    """

    video_id: str
    frame_id: int
    pedestrian_id: int
    box: BBox
    distance_m: float
    skeleton_box: BBox


@dataclass(frozen=True)
class SynthesisResult:
    """Annotations produced by :func:`synthesize_annotations` plus the skip count."""

    annotations: tuple[AnnotatedBox, ...]
    skipped_count: int


def skeleton_enclosing_box(skeleton: SkeletonInstance) -> BBox:
    """Minimum axis-aligned box enclosing all joint screen positions.

    Occluded joints are included: excluding them would shrink boxes for
    partially hidden pedestrians.

    Raises:
        DegenerateSkeleton: the hull has zero width or zero height.
    """
    xs = [j.x_px for j in skeleton.joints]
    ys = [j.y_px for j in skeleton.joints]
    if not xs:
        raise DegenerateSkeleton(
            f"skeleton ({skeleton.video_id}, {skeleton.frame_id}, "
            f"{skeleton.pedestrian_id}) has no joints"
        )
    x1, x2 = min(xs), max(xs)
    y1, y2 = min(ys), max(ys)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        raise DegenerateSkeleton(
            f"skeleton ({skeleton.video_id}, {skeleton.frame_id}, "
            f"{skeleton.pedestrian_id}) collapses to a zero-extent hull"
        )
    return BBox(x1, y1, x2 - x1, y2 - y1)


def camera_distance(skeleton: SkeletonInstance) -> float:
    """Distance of the pedestrian's center of mass from the camera.

    The center of mass is the unweighted mean of the joints' camera-space
    positions; the distance is its Euclidean norm.

    Raises:
        NonPositiveDistance: the norm is zero, negative, or not finite.
    """
    n = len(skeleton.joints)
    mx = math.fsum(j.x3d_m for j in skeleton.joints) / n
    my = math.fsum(j.y3d_m for j in skeleton.joints) / n
    mz = math.fsum(j.z3d_m for j in skeleton.joints) / n
    dist = math.hypot(mx, my, mz)
    if not math.isfinite(dist) or dist <= 0:
        raise NonPositiveDistance(
            f"skeleton ({skeleton.video_id}, {skeleton.frame_id}, "
            f"{skeleton.pedestrian_id}) has center-of-mass distance {dist!r}"
        )
    return dist


def pad_box(skeleton_box: BBox, z: float, alpha: float) -> BBox:
    """Grow a skeleton box into a full-body box.

    The height gains ``alpha / z`` pixels; the width is rescaled so the
    aspect ratio is preserved. Growth is symmetric about the box center,
    which keeps the box centered on the body.
    """
    if not (math.isfinite(z) and z > 0):
        raise InvalidArgument(f"distance must be finite and positive, got {z!r}")
    if not (math.isfinite(skeleton_box.h) and skeleton_box.h > 0) or skeleton_box.w <= 0:
        raise InvalidArgument(f"skeleton box must have positive extent, got {skeleton_box}")
    if not (math.isfinite(alpha) and alpha >= 0):
        raise InvalidArgument(f"alpha must be finite and non-negative, got {alpha!r}")

    pad = alpha / z
    h_m = skeleton_box.h + pad
    if h_m == skeleton_box.h:
        # Padding vanished (alpha == 0 or z huge): exact identity.
        return skeleton_box
    w_m = h_m * (skeleton_box.w / skeleton_box.h)
    dx = (w_m - skeleton_box.w) / 2.0
    dy = (h_m - skeleton_box.h) / 2.0
    return BBox(skeleton_box.x - dx, skeleton_box.y - dy, w_m, h_m)


def clamp_to_image(box: BBox, image_w: float, image_h: float) -> Optional[BBox]:
    """Intersect a box with the image rectangle [0, image_w] x [0, image_h].

    Returns None when the intersection has zero area.
    """
    if image_w <= 0 or image_h <= 0:
        raise InvalidArgument(f"image dimensions must be positive, got {image_w}x{image_h}")
    if box.x >= 0 and box.y >= 0 and box.x2 <= image_w and box.y2 <= image_h:
        return box
    x1 = max(box.x, 0.0)
    y1 = max(box.y, 0.0)
    x2 = min(box.x2, float(image_w))
    y2 = min(box.y2, float(image_h))
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return None
    return BBox(x1, y1, x2 - x1, y2 - y1)


def synthesize_annotations(
    skeletons: Iterable[SkeletonInstance],
    alpha: float,
    image_w: float,
    image_h: float,
    clamp: bool = True,
) -> SynthesisResult:
    """Run the full box-synthesis pipeline over a batch of skeletons.

    Each skeleton goes through enclosing box -> camera distance -> padding ->
    (optional) clamping. Degenerate skeletons, non-positive distances, and
    boxes that fall entirely outside the image are skipped and counted
    rather than aborting the batch: large synthetic dumps contain edge cases
    and batch jobs must complete.

    Output is sorted by (video_id, frame_id, pedestrian_id), so the result
    is independent of input order.
    """
    if not (math.isfinite(alpha) and alpha >= 0):
        raise InvalidArgument(f"alpha must be finite and non-negative, got {alpha!r}")
    if clamp and (image_w <= 0 or image_h <= 0):
        raise InvalidArgument(f"image dimensions must be positive, got {image_w}x{image_h}")

    kept: list[AnnotatedBox] = []
    skipped = 0
    for skeleton in skeletons:
        try:
            skeleton_box = skeleton_enclosing_box(skeleton)
            z = camera_distance(skeleton)
        except (DegenerateSkeleton, NonPositiveDistance):
            skipped += 1
            continue
        box = pad_box(skeleton_box, z, alpha)
        if clamp:
            clipped = clamp_to_image(box, image_w, image_h)
            if clipped is None:
                skipped += 1
                continue
            box = clipped
        kept.append(
            AnnotatedBox(
                video_id=skeleton.video_id,
                frame_id=skeleton.frame_id,
                pedestrian_id=skeleton.pedestrian_id,
                box=box,
                distance_m=z,
                skeleton_box=skeleton_box,
            )
        )
    kept.sort(key=lambda a: (a.video_id, a.frame_id, a.pedestrian_id))
    return SynthesisResult(annotations=tuple(kept), skipped_count=skipped)


def sort_key(annotation: AnnotatedBox) -> tuple[str, int, int]:
    """Canonical dataset ordering used by all emitters."""
    return (annotation.video_id, annotation.frame_id, annotation.pedestrian_id)


def validate_skeleton(skeleton: SkeletonInstance, joints_per_skeleton: int) -> None:
    """Check the joint-count and joint-id invariants for one skeleton."""
    if len(skeleton.joints) != joints_per_skeleton:
        raise InvalidArgument(
            f"skeleton ({skeleton.video_id}, {skeleton.frame_id}, "
            f"{skeleton.pedestrian_id}) has {len(skeleton.joints)} joints, "
            f"expected {joints_per_skeleton}"
        )
    ids = sorted(j.joint_id for j in skeleton.joints)
    if ids != list(range(joints_per_skeleton)):
        raise InvalidArgument(
            f"skeleton ({skeleton.video_id}, {skeleton.frame_id}, "
            f"{skeleton.pedestrian_id}) joint ids are not 0..{joints_per_skeleton - 1}"
        )
