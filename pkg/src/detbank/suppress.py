"""Per-frame detection images: threshold, per-category greedy NMS, and
cross-scale pooling.

Suppression runs once at the configured score floor (the lowest statistic
threshold by default); per-threshold statistics later re-filter the
surviving set, so the detection sets are nested across thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import BankConfig, BoundingBox, DetectionRecord, FrameDetections


@dataclass(slots=True)
class SuppressedFrame:
    """Detections surviving thresholding and NMS, scale erased."""

    frame_index: int
    detections: list[DetectionRecord]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    if iw <= 0.0:
        return 0.0
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter
    return inter / union


def nms_keep_indices(
    x1: Sequence[float],
    y1: Sequence[float],
    x2: Sequence[float],
    y2: Sequence[float],
    scores: Sequence[float],
    iou_thresh: float,
) -> list[int]:
    """Indices kept by greedy NMS over parallel coordinate/score sequences.

    Candidates are ranked by descending score, ties broken by ascending
    input index; a kept box removes later candidates whose IoU with it
    exceeds ``iou_thresh``.  Indices come back in kept (rank) order.
    """
    n = len(scores)
    if n == 0:
        return []
    if n <= 48:
        # typical per-frame pools are small; pairwise scan beats array setup
        order = sorted(range(n), key=lambda i: (-scores[i], i))
        keep: list[int] = []
        for i in order:
            ax1 = x1[i]
            ay1 = y1[i]
            ax2 = x2[i]
            ay2 = y2[i]
            area_a = (ax2 - ax1) * (ay2 - ay1)
            ok = True
            for j in keep:
                iw = min(x2[j], ax2) - max(x1[j], ax1)
                if iw <= 0.0:
                    continue
                ih = min(y2[j], ay2) - max(y1[j], ay1)
                if ih <= 0.0:
                    continue
                inter = iw * ih
                union = (x2[j] - x1[j]) * (y2[j] - y1[j]) + area_a - inter
                if inter / union > iou_thresh:
                    ok = False
                    break
            if ok:
                keep.append(i)
        return keep
    ax1 = np.asarray(x1)
    ay1 = np.asarray(y1)
    ax2 = np.asarray(x2)
    ay2 = np.asarray(y2)
    s = np.asarray(scores)
    areas = (ax2 - ax1) * (ay2 - ay1)
    order = np.argsort(-s, kind="stable")  # stable: ties keep input order
    keep = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        if order.size == 1:
            break
        rest = order[1:]
        iw = np.minimum(ax2[i], ax2[rest]) - np.maximum(ax1[i], ax1[rest])
        ih = np.minimum(ay2[i], ay2[rest]) - np.maximum(ay1[i], ay1[rest])
        inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
        overlap = inter / (areas[rest] + areas[i] - inter)
        order = rest[overlap <= iou_thresh]
    return keep


def greedy_nms(dets: Sequence[DetectionRecord], iou_thresh: float) -> list[DetectionRecord]:
    """Greedy non-maximum suppression over one category's detections.

    Record-level wrapper of :func:`nms_keep_indices`; output preserves the
    kept order and is a subset of the input.
    """
    if not dets:
        return []
    if len({d.category for d in dets}) > 1:
        raise ValueError("greedy_nms expects detections of a single category")
    x1 = []
    y1 = []
    x2 = []
    y2 = []
    scores = []
    for d in dets:
        b = d.box
        x1.append(b.x1)
        y1.append(b.y1)
        x2.append(b.x2)
        y2.append(b.y2)
        scores.append(b.score)
    return [dets[i] for i in nms_keep_indices(x1, y1, x2, y2, scores, iou_thresh)]


def build_detection_image(frame: FrameDetections, config: BankConfig) -> SuppressedFrame:
    """Threshold at the suppression floor, pool scales, and run per-category
    NMS; survivors are concatenated in category-list order with the scale
    field erased."""
    floor = config.suppression_floor
    by_category: dict[str, list[DetectionRecord]] = {c: [] for c in config.categories}
    for det in frame.detections:
        pool = by_category.get(det.category)
        if pool is None:
            raise ValueError(
                f"frame {frame.frame_index}: category {det.category!r} not in configured set"
            )
        if det.box.score >= floor:
            pool.append(det)
    survivors: list[DetectionRecord] = []
    for category in config.categories:
        pool = by_category[category]
        if not pool:
            continue
        for det in greedy_nms(pool, config.nms_iou):
            survivors.append(det if det.scale is None else replace(det, scale=None))
    return SuppressedFrame(frame.frame_index, survivors)
