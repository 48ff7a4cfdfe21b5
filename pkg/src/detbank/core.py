"""Domain types and ingestion for detection streams.

The pipeline consumes object detections as a neutral line-delimited text
format (UTF-8, one record per line, tab-separated fields):

    video_id  frame_index  frame_width  frame_height  category  x1 y1 x2 y2 score [scale]

Coordinates are pixels; ``scale`` is an optional nonnegative integer naming
the detector pyramid scale a box came from.  Lines starting with ``#`` are
comments.  A keyframe that produced no detections is declared with the
four-field form

    video_id  frame_index  frame_width  frame_height

so that empty keyframes still count toward a video's frame total (mean
pooling divides by the full keyframe count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(slots=True)
class BoundingBox:
    """One scored box.  Coordinates are pixels on ingestion and lie in
    [0,1] after :func:`normalize_coordinates`."""

    x1: float
    y1: float
    x2: float
    y2: float
    score: float

    def __post_init__(self) -> None:
        # hot path: millions of boxes flow through here, keep checks flat
        if not (
            math.isfinite(self.x1)
            and math.isfinite(self.y1)
            and math.isfinite(self.x2)
            and math.isfinite(self.y2)
            and math.isfinite(self.score)
        ):
            raise ValueError(f"box fields must be finite, got {self}")
        if not self.x1 < self.x2:
            raise ValueError(f"x1 < x2 required, got x1={self.x1} x2={self.x2}")
        if not self.y1 < self.y2:
            raise ValueError(f"y1 < y2 required, got y1={self.y1} y2={self.y2}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(slots=True)
class DetectionRecord:
    """One detection of one category in one keyframe."""

    category: str
    box: BoundingBox
    scale: int | None = None

    def __post_init__(self) -> None:
        if self.scale is not None and self.scale < 0:
            raise ValueError(f"scale must be nonnegative, got {self.scale}")


@dataclass(slots=True)
class FrameDetections:
    """All detections of one keyframe, in input order."""

    frame_index: int
    width: float
    height: float
    detections: list[DetectionRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be nonnegative, got {self.frame_index}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError(
                f"frame dimensions must be positive, got {self.width}x{self.height}"
            )


@dataclass(slots=True)
class VideoDetections:
    """Frames of one video, sorted strictly ascending by frame index."""

    video_id: str
    frames: list[FrameDetections]
    label: int | None = None

    def __post_init__(self) -> None:
        if not self.video_id or any(ch.isspace() for ch in self.video_id):
            raise ValueError(f"video_id must be nonempty without whitespace, got {self.video_id!r}")
        if not self.frames:
            raise ValueError(f"video {self.video_id!r} has no frames")
        indices = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"video {self.video_id!r}: frames not strictly ascending")

    @property
    def num_frames(self) -> int:
        return len(self.frames)


_POOLING_MODES = ("mean", "max", "both")
CANONICAL_STATISTICS = ("sum", "count", "binary")


@dataclass(slots=True)
class BankConfig:
    """Fixes the feature layout: category universe, threshold set, pyramid
    levels, NMS overlap, pooling mode, and which per-cell statistics are
    computed (score sum, detection count, presence bit)."""

    categories: Sequence[str]
    thresholds: Sequence[float] = (-1.1, -0.9, -0.7, -0.5)
    pyramid_levels: Sequence[int] = (1, 2, 4)
    nms_iou: float = 0.5
    pooling: str = "mean"
    statistics: Sequence[str] = CANONICAL_STATISTICS
    min_score: float | None = None

    def __post_init__(self) -> None:
        self.categories = tuple(self.categories)
        if not self.categories:
            raise ValueError("categories must be nonempty")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("categories must be duplicate-free")
        self.thresholds = tuple(float(t) for t in self.thresholds)
        if not self.thresholds:
            raise ValueError("thresholds must be nonempty")
        for t in self.thresholds:
            _require_finite("threshold", t)
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError(f"thresholds must be strictly ascending, got {self.thresholds}")
        self.pyramid_levels = tuple(int(n) for n in self.pyramid_levels)
        if not self.pyramid_levels or any(n < 1 for n in self.pyramid_levels):
            raise ValueError(f"pyramid levels must be >= 1, got {self.pyramid_levels}")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError(f"nms_iou must be in (0, 1], got {self.nms_iou}")
        if self.pooling not in _POOLING_MODES:
            raise ValueError(f"pooling must be one of {_POOLING_MODES}, got {self.pooling!r}")
        stats = tuple(self.statistics)
        unknown = [s for s in stats if s not in CANONICAL_STATISTICS]
        if unknown:
            raise ValueError(f"unknown statistics {unknown}; choose from {CANONICAL_STATISTICS}")
        if not stats:
            raise ValueError("statistics must be nonempty")
        # canonical (sum, count, binary) order regardless of how they were given
        self.statistics = tuple(s for s in CANONICAL_STATISTICS if s in stats)
        if self.min_score is not None:
            _require_finite("min_score", self.min_score)

    @property
    def num_categories(self) -> int:
        return len(self.categories)

    @property
    def num_thresholds(self) -> int:
        return len(self.thresholds)

    @property
    def num_statistics(self) -> int:
        return len(self.statistics)

    @property
    def suppression_floor(self) -> float:
        """Score floor applied before NMS; defaults to the lowest threshold."""
        return self.min_score if self.min_score is not None else min(self.thresholds)

    def category_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.categories)}


# --------------------------------------------------------------------------
# Stream parsing
# --------------------------------------------------------------------------


class StreamFormatError(ValueError):
    """Malformed detection-stream input; message carries the line number."""


def parse_detection_line(
    line: str, lineno: int, catset: frozenset[str] | None = None
) -> tuple[str, int, float, float, DetectionRecord | None]:
    """Parse one stream line into (video_id, frame_index, width, height, record).

    The record is ``None`` for the four-field empty-frame form.  Raises
    :class:`StreamFormatError` naming ``lineno`` on any malformed field.
    """
    parts = line.split("\t")
    n = len(parts)
    if n not in (4, 10, 11):
        raise StreamFormatError(
            f"line {lineno}: expected 4, 10, or 11 tab-separated fields, got {n}"
        )
    try:
        video_id = parts[0]
        frame_index = int(parts[1])
        width = float(parts[2])
        height = float(parts[3])
        if frame_index < 0:
            raise ValueError(f"frame_index must be nonnegative, got {frame_index}")
        if not (width > 0 and height > 0):
            raise ValueError(f"frame dimensions must be positive, got {width}x{height}")
        if n == 4:
            return video_id, frame_index, width, height, None
        category = parts[4]
        if catset is not None and category not in catset:
            raise ValueError(f"unknown category {category!r}")
        box = BoundingBox(
            float(parts[5]), float(parts[6]), float(parts[7]), float(parts[8]), float(parts[9])
        )
        scale = int(parts[10]) if n == 11 else None
        record = DetectionRecord(category, box, scale)
    except StreamFormatError:
        raise
    except ValueError as exc:
        raise StreamFormatError(f"line {lineno}: {exc}") from None
    return video_id, frame_index, width, height, record


class _FrameBuilder:
    __slots__ = ("width", "height", "detections")

    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self.detections: list[DetectionRecord] = []


def iter_stream_lines(data: bytes | str) -> Iterable[tuple[int, str]]:
    """Yield (lineno, content) for non-comment, non-blank lines."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] == "#":
            continue
        yield lineno, line


def parse_detection_stream(
    data: bytes | str, config: BankConfig | None = None
) -> list[VideoDetections]:
    """Parse a detection stream into one :class:`VideoDetections` per video.

    Videos may interleave arbitrarily in the input; output is sorted by
    video id, frames sorted ascending, detections kept in file order within
    each frame.  Duplicate identical records are kept.  When ``config`` is
    given, categories are validated against its universe.
    """
    catset = frozenset(config.categories) if config is not None else None
    videos: dict[str, dict[int, _FrameBuilder]] = {}
    for lineno, line in iter_stream_lines(data):
        video_id, frame_index, width, height, record = parse_detection_line(
            line, lineno, catset
        )
        frames = videos.setdefault(video_id, {})
        builder = frames.get(frame_index)
        if builder is None:
            if not video_id or any(ch.isspace() for ch in video_id):
                raise StreamFormatError(
                    f"line {lineno}: video_id must be nonempty without whitespace"
                )
            builder = frames[frame_index] = _FrameBuilder(width, height)
        elif builder.width != width or builder.height != height:
            raise StreamFormatError(
                f"line {lineno}: conflicting dimensions for video {video_id!r} "
                f"frame {frame_index}: {builder.width}x{builder.height} vs {width}x{height}"
            )
        if record is not None:
            builder.detections.append(record)
    result = []
    for video_id in sorted(videos):
        frames = [
            FrameDetections(idx, fb.width, fb.height, fb.detections)
            for idx, fb in sorted(videos[video_id].items())
        ]
        result.append(VideoDetections(video_id, frames))
    return result


def _fmt(v: float) -> str:
    return format(v, ".17g")


def serialize_detection_stream(videos: Iterable[VideoDetections]) -> str:
    """Inverse of :func:`parse_detection_stream` (round-trip exact)."""
    lines = []
    for video in videos:
        for frame in video.frames:
            prefix = f"{video.video_id}\t{frame.frame_index}\t{_fmt(frame.width)}\t{_fmt(frame.height)}"
            if not frame.detections:
                lines.append(prefix)
            for det in frame.detections:
                b = det.box
                line = (
                    f"{prefix}\t{det.category}\t{_fmt(b.x1)}\t{_fmt(b.y1)}"
                    f"\t{_fmt(b.x2)}\t{_fmt(b.y2)}\t{_fmt(b.score)}"
                )
                if det.scale is not None:
                    line += f"\t{det.scale}"
                lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# Coordinate normalization
# --------------------------------------------------------------------------


@dataclass(slots=True)
class NormalizationStats:
    """Counts boxes dropped during normalization (warnings, not errors)."""

    dropped_outside: int = 0
    dropped_degenerate: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_outside + self.dropped_degenerate


def normalize_coordinates(
    frame: FrameDetections, stats: NormalizationStats | None = None
) -> FrameDetections:
    """Rescale pixel boxes into the unit square and clip.

    Boxes entirely outside the image, or with zero area after clipping, are
    dropped and counted in ``stats``.  Idempotent: frames with unit
    dimensions pass through by division by one.
    """
    w = frame.width
    h = frame.height
    kept: list[DetectionRecord] = []
    for det in frame.detections:
        b = det.box
        x1 = b.x1 / w
        y1 = b.y1 / h
        x2 = b.x2 / w
        y2 = b.y2 / h
        cx1 = 0.0 if x1 < 0.0 else (1.0 if x1 > 1.0 else x1)
        cy1 = 0.0 if y1 < 0.0 else (1.0 if y1 > 1.0 else y1)
        cx2 = 0.0 if x2 < 0.0 else (1.0 if x2 > 1.0 else x2)
        cy2 = 0.0 if y2 < 0.0 else (1.0 if y2 > 1.0 else y2)
        if cx2 <= cx1 or cy2 <= cy1:
            if stats is not None:
                if x2 <= 0.0 or x1 >= 1.0 or y2 <= 0.0 or y1 >= 1.0:
                    stats.dropped_outside += 1
                else:
                    stats.dropped_degenerate += 1
            continue
        if cx1 == b.x1 and cy1 == b.y1 and cx2 == b.x2 and cy2 == b.y2:
            kept.append(det)
        else:
            kept.append(
                DetectionRecord(det.category, BoundingBox(cx1, cy1, cx2, cy2, b.score), det.scale)
            )
    return FrameDetections(frame.frame_index, 1.0, 1.0, kept)


def normalize_video(
    video: VideoDetections, stats: NormalizationStats | None = None
) -> VideoDetections:
    return replace(video, frames=[normalize_coordinates(f, stats) for f in video.frames])


# --------------------------------------------------------------------------
# Label sidecar files (video_id <TAB> label)
# --------------------------------------------------------------------------


def parse_labels(data: bytes | str) -> dict[str, int]:
    """Parse a ``video_id<TAB>label`` sidecar file."""
    labels: dict[str, int] = {}
    for lineno, line in iter_stream_lines(data):
        parts = line.split("\t")
        if len(parts) != 2:
            raise StreamFormatError(f"line {lineno}: expected 'video_id<TAB>label'")
        video_id, token = parts
        if video_id in labels:
            raise StreamFormatError(f"line {lineno}: duplicate label for video {video_id!r}")
        try:
            labels[video_id] = int(token)
        except ValueError:
            raise StreamFormatError(f"line {lineno}: label must be an integer, got {token!r}") from None
    return labels


def serialize_labels(labels: Iterable[tuple[str, int]]) -> str:
    return "".join(f"{vid}\t{label}\n" for vid, label in labels)


def apply_labels(
    videos: Iterable[VideoDetections], labels: Mapping[str, int]
) -> list[VideoDetections]:
    """Attach labels by video id; videos without a mapping keep ``None``."""
    return [replace(v, label=labels.get(v.video_id, v.label)) for v in videos]
