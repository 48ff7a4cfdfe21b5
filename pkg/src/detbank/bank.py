"""Per-keyframe detection statistics and video-level pooled features.

For every (category, pyramid cell, threshold) a keyframe contributes up to
three statistics: the sum of scores of detections whose center falls in the
cell and whose score clears the threshold, the count of such detections,
and a presence bit.  Per-video features are the elementwise mean and/or max
of the keyframe tensors; mean divides by the full keyframe count, so the
presence bit pools to an empirical detection probability.

Feature vectors are stored sparsely (exact zeros omitted) with flat index

    ((category * R + region) * T + threshold) * S + statistic

and, under ``both`` pooling, the mean block first and the max block second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Iterable, Sequence

import numpy as np

from .core import BankConfig, NormalizationStats, VideoDetections, normalize_coordinates
from .pyramid import Region, enumerate_regions, level_table, locate_cells
from .suppress import SuppressedFrame, build_detection_image

_HEADER_PREFIX = "#DB v1"
_POOLING_TOKENS = ("mean", "max", "both", "none")


@dataclass(frozen=True)
class FeatureLayout:
    """Dimensions and index layout of a feature vector.

    ``none`` pooling marks vectors without bank structure (e.g. fused
    feature files); ``dim`` is always authoritative.
    """

    dim: int
    num_categories: int = 0
    num_regions: int = 0
    num_thresholds: int = 0
    num_statistics: int = 0
    pooling: str = "none"
    categories: tuple[str, ...] | None = None
    thresholds: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.dim < 0:
            raise ValueError(f"dimension must be nonnegative, got {self.dim}")
        if self.pooling not in _POOLING_TOKENS:
            raise ValueError(f"pooling must be one of {_POOLING_TOKENS}, got {self.pooling!r}")

    @property
    def block_dim(self) -> int:
        """Entries per pooling block (C*R*T*S)."""
        return (
            self.num_categories
            * self.num_regions
            * self.num_thresholds
            * self.num_statistics
        )

    @classmethod
    def from_config(cls, config: BankConfig, num_regions: int, pooling: str | None = None) -> "FeatureLayout":
        mode = config.pooling if pooling is None else pooling
        block = config.num_categories * num_regions * config.num_thresholds * config.num_statistics
        return cls(
            dim=block * (2 if mode == "both" else 1),
            num_categories=config.num_categories,
            num_regions=num_regions,
            num_thresholds=config.num_thresholds,
            num_statistics=config.num_statistics,
            pooling=mode,
            categories=tuple(config.categories),
            thresholds=tuple(config.thresholds),
        )

    def header_line(self) -> str:
        return (
            f"{_HEADER_PREFIX} dim={self.dim} C={self.num_categories} R={self.num_regions} "
            f"T={self.num_thresholds} S={self.num_statistics} pooling={self.pooling}"
        )

    @classmethod
    def parse_header(cls, line: str) -> "FeatureLayout":
        parts = line.strip().split()
        if parts[:2] != ["#DB", "v1"] or len(parts) != 8:
            raise ValueError(f"bad feature header: {line.strip()!r}")
        fields = {}
        for i, (key, kind) in enumerate(
            (("dim", int), ("C", int), ("R", int), ("T", int), ("S", int), ("pooling", str))
        ):
            token = parts[2 + i]
            if not token.startswith(key + "="):
                raise ValueError(f"bad feature header field {token!r}, expected {key}=...")
            try:
                fields[key] = kind(token[len(key) + 1 :])
            except ValueError:
                raise ValueError(f"bad feature header field {token!r}") from None
        return cls(
            dim=fields["dim"],
            num_categories=fields["C"],
            num_regions=fields["R"],
            num_thresholds=fields["T"],
            num_statistics=fields["S"],
            pooling=fields["pooling"],
        )


@dataclass(slots=True, eq=False)
class StatTensor:
    """Dense per-keyframe statistics indexed (category, region, threshold,
    statistic); statistic order is (sum, count, binary) filtered to the
    enabled subset."""

    frame_index: int
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass(slots=True)
class FeatureVector:
    """Sparse pooled feature for one video."""

    layout: FeatureLayout
    values: dict[int, float]
    video_id: str = "-"
    label: int | None = None

    def __post_init__(self) -> None:
        dim = self.layout.dim
        for idx, val in self.values.items():
            if not 0 <= idx < dim:
                raise ValueError(f"index {idx} out of range for dimension {dim}")
            if val == 0.0:
                raise ValueError(f"stored values must be nonzero (index {idx})")

    @property
    def dim(self) -> int:
        return self.layout.dim


@lru_cache(maxsize=32)
def _cached_regions(levels: tuple[int, ...]) -> tuple[Region, ...]:
    return tuple(enumerate_regions(levels))


def accumulate_cell_statistics(
    cats: np.ndarray,
    cx: np.ndarray,
    cy: np.ndarray,
    scores: np.ndarray,
    table: Sequence[tuple[int, int]],
    num_regions: int,
    config: BankConfig,
) -> np.ndarray:
    """Shared accumulation core over parallel detection arrays.

    Each detection contributes its score (sum) and one count at every
    threshold its score clears, in the cell of each pyramid level that
    contains its center; the presence bit is the count's sign.
    Accumulation runs in detection order per coordinate, so results are
    reproducible bit for bit.  Returns the dense (C, R, T, S) tensor.
    """
    C = config.num_categories
    R = num_regions
    T = config.num_thresholds
    want_sum = "sum" in config.statistics
    flat_size = C * R * T
    P = len(scores)
    total = 0
    if P:
        thresholds = np.asarray(config.thresholds)
        # number of thresholds each score clears (thresholds ascending)
        hi = np.searchsorted(thresholds, scores, side="right")
        # flat cell index per (detection, level), detection-major
        cell = np.empty((P, len(table)), dtype=np.int64)
        for li, (offset, n) in enumerate(table):
            cell[:, li] = offset + locate_cells(cy, n) * n + locate_cells(cx, n)
        base = ((cats[:, None] * R + cell) * T).ravel()
        reps = np.repeat(hi, len(table))
        total = int(reps.sum())
    if total == 0:
        counts = np.zeros(flat_size)
        sums = np.zeros(flat_size) if want_sum else None
    else:
        starts = np.concatenate(([0], np.cumsum(reps)[:-1]))
        offsets = np.arange(total) - np.repeat(starts, reps)
        idx = np.repeat(base, reps) + offsets
        counts = np.bincount(idx, minlength=flat_size).astype(np.float64)
        if want_sum:
            weights = np.repeat(np.repeat(scores, len(table)), reps)
            sums = np.bincount(idx, weights=weights, minlength=flat_size)
        else:
            sums = None
    slots = []
    if want_sum:
        slots.append(sums)
    if "count" in config.statistics:
        slots.append(counts)
    if "binary" in config.statistics:
        slots.append((counts > 0).astype(np.float64))
    return np.stack(slots, axis=-1).reshape(C, R, T, config.num_statistics)


def frame_statistics(
    frame: SuppressedFrame, regions: Sequence[Region], config: BankConfig
) -> StatTensor:
    """Accumulate the per-cell statistics of one suppressed keyframe.

    Record-level wrapper of :func:`accumulate_cell_statistics`; cells with
    no detections hold exact zeros.
    """
    table = level_table(regions)
    dets = frame.detections
    P = len(dets)
    cat_index = config.category_index()
    cats = np.empty(P, dtype=np.int64)
    cx = np.empty(P)
    cy = np.empty(P)
    scores = np.empty(P)
    try:
        for i, d in enumerate(dets):
            cats[i] = cat_index[d.category]
            b = d.box
            cx[i] = (b.x1 + b.x2) * 0.5
            cy[i] = (b.y1 + b.y2) * 0.5
            scores[i] = b.score
    except KeyError as exc:
        raise ValueError(
            f"frame {frame.frame_index}: category {exc.args[0]!r} not in configured set"
        ) from None
    values = accumulate_cell_statistics(cats, cx, cy, scores, table, len(regions), config)
    return StatTensor(frame.frame_index, values)


def pool_video(
    tensors: Sequence[StatTensor], mode: str, layout: FeatureLayout | None = None
) -> FeatureVector:
    """Elementwise mean or max of keyframe tensors, stored sparsely.

    Mean sums in frame-index order before dividing by the keyframe count
    (including all-zero frames), so results are independent of input order.
    """
    if not tensors:
        raise ValueError("empty video")
    if mode not in ("mean", "max"):
        raise ValueError(f"pooling mode must be 'mean' or 'max', got {mode!r}")
    shape = tensors[0].values.shape
    if any(t.values.shape != shape for t in tensors):
        raise ValueError("layout mismatch: keyframe tensors differ in shape")
    ordered = sorted(tensors, key=lambda t: t.frame_index)
    acc = ordered[0].values.copy()
    if mode == "mean":
        for t in ordered[1:]:
            acc += t.values
        acc /= len(ordered)
    else:
        for t in ordered[1:]:
            np.maximum(acc, t.values, out=acc)
    if layout is None:
        C, R, T, S = shape
        layout = FeatureLayout(
            dim=C * R * T * S,
            num_categories=C,
            num_regions=R,
            num_thresholds=T,
            num_statistics=S,
            pooling=mode,
        )
    elif layout.pooling != mode or layout.dim != int(np.prod(shape)):
        raise ValueError("layout mismatch: layout does not describe these tensors")
    flat = acc.ravel()
    nonzero = np.flatnonzero(flat)
    values = dict(zip(nonzero.tolist(), flat[nonzero].tolist()))
    return FeatureVector(layout, values)


def assemble_feature(
    video: VideoDetections,
    config: BankConfig,
    norm_stats: "NormalizationStats | None" = None,
) -> FeatureVector:
    """Full per-video pipeline: normalize, suppress, per-frame statistics,
    pooling.  Under ``both`` pooling the mean block precedes the max block."""
    regions = _cached_regions(tuple(config.pyramid_levels))
    tensors = []
    for frame in video.frames:
        suppressed = build_detection_image(normalize_coordinates(frame, norm_stats), config)
        tensors.append(frame_statistics(suppressed, regions, config))
    if config.pooling == "both":
        mean_layout = FeatureLayout.from_config(config, len(regions), pooling="mean")
        mean_vec = pool_video(tensors, "mean", mean_layout)
        max_vec = pool_video(tensors, "max", FeatureLayout.from_config(config, len(regions), pooling="max"))
        block = mean_layout.dim
        merged = dict(mean_vec.values)
        merged.update({idx + block: val for idx, val in max_vec.values.items()})
        layout = FeatureLayout.from_config(config, len(regions))
        return FeatureVector(layout, merged, video.video_id, video.label)
    layout = FeatureLayout.from_config(config, len(regions))
    pooled = pool_video(tensors, config.pooling, layout)
    pooled.video_id = video.video_id
    pooled.label = video.label
    return pooled


def sparsity(f: FeatureVector) -> float:
    """Fraction of entries that are nonzero (1.0 for a dense vector)."""
    if f.dim == 0:
        raise ValueError("sparsity undefined for zero-dimensional vectors")
    return len(f.values) / f.dim


# --------------------------------------------------------------------------
# Feature file format
# --------------------------------------------------------------------------
#
# Header:   #DB v1 dim=<D> C=<C> R=<R> T=<T> S=<S> pooling=<mode>
# Payload:  one line per video: `video_id label idx:val idx:val ...` with
# ascending indices; label is `-` when absent.  Floats carry 17 significant
# digits, so round-trips are exact.


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _payload_line(f: FeatureVector) -> str:
    label = "-" if f.label is None else str(f.label)
    pairs = " ".join("%d:%.17g" % pair for pair in sorted(f.values.items()))
    return f"{f.video_id} {label} {pairs}".rstrip()


def _parse_payload_line(line: str, lineno: int, layout: FeatureLayout) -> FeatureVector:
    tokens = line.split()
    if len(tokens) < 2:
        raise ValueError(f"line {lineno}: expected 'video_id label idx:val ...'")
    video_id = tokens[0]
    if tokens[1] == "-":
        label = None
    else:
        try:
            label = int(tokens[1])
        except ValueError:
            raise ValueError(
                f"line {lineno}, field 2: label must be an integer or '-', got {tokens[1]!r}"
            ) from None
    values: dict[int, float] = {}
    prev = -1
    for fieldno, token in enumerate(tokens[2:], start=3):
        idx_str, sep, val_str = token.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}, field {fieldno}: expected idx:val, got {token!r}")
        try:
            idx = int(idx_str)
            val = float(val_str)
        except ValueError:
            raise ValueError(
                f"line {lineno}, field {fieldno}: malformed idx:val pair {token!r}"
            ) from None
        if idx >= layout.dim or idx < 0:
            raise ValueError(
                f"line {lineno}, field {fieldno}: index {idx} out of range for dim {layout.dim}"
            )
        if idx <= prev:
            raise ValueError(f"line {lineno}, field {fieldno}: indices must be ascending")
        prev = idx
        if val != 0.0:
            values[idx] = val
    return FeatureVector(layout, values, video_id, label)


def write_feature_file(
    out: IO[str], layout: FeatureLayout, features: Iterable[FeatureVector]
) -> int:
    out.write(layout.header_line() + "\n")
    count = 0
    for f in features:
        if f.dim != layout.dim:
            raise ValueError(
                f"feature for video {f.video_id!r} has dim {f.dim}, file declares {layout.dim}"
            )
        out.write(_payload_line(f) + "\n")
        count += 1
    return count


def read_feature_file(data: bytes | str) -> tuple[FeatureLayout, list[FeatureVector]]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise ValueError("line 1: missing feature header")
    layout = FeatureLayout.parse_header(lines[0])
    features = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        features.append(_parse_payload_line(line, lineno, layout))
    return layout, features


def serialize_feature(f: FeatureVector) -> bytes:
    """Single-vector serialization: header plus one payload line."""
    return (f.layout.header_line() + "\n" + _payload_line(f) + "\n").encode("utf-8")


def deserialize_feature(data: bytes | str) -> FeatureVector:
    layout, features = read_feature_file(data)
    if len(features) != 1:
        raise ValueError(f"expected exactly one feature line, got {len(features)}")
    return features[0]
