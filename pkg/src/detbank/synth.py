"""Seeded synthetic detection corpora with planted class structure.

Each class plants per-category detection rates, spatial placement (which
pyramid cells a category concentrates in), and score distributions.  Two
built-in corpora cover the claims the harness tests:

* ``spatial``: 15 classes with identical whole-image rates and score
  distributions, differing only in which 4x4 cells their marker categories
  occupy.  Whole-image features carry no class signal; pyramid features do.
* ``threshold``: 8 classes whose score distributions straddle the default
  threshold set with rates tuned so single-threshold score sums are matched
  in expectation; multi-threshold count statistics separate the classes.

Generation is deterministic: video ``v`` of the class at position ``p`` in
the spec draws from ``default_rng([seed, p, v])``, so videos may be
generated concurrently with reproducible output.

Spec files are YAML::

    seed: 0
    videos_per_class: 40
    frames_per_video: 10
    frame_width: 640
    frame_height: 480
    categories: [marker, clutter]
    classes:
      - label: 1
        detections:
          marker:  {rate: 2.5, score_mean: -0.7, score_std: 0.15,
                    grid: 4, cells: [[0, 0]], weights: [1.0]}
          clutter: {rate: 1.0, score_mean: -0.85, score_std: 0.1}

``grid``/``cells``/``weights`` are optional; omitting them places centers
uniformly over the whole image, and omitting ``weights`` spreads them
uniformly over the listed cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import yaml


@dataclass(slots=True)
class Placement:
    """Distribution over grid cells where a category's box centers land."""

    grid: int = 1
    cells: list[tuple[int, int]] = field(default_factory=lambda: [(0, 0)])
    weights: list[float] | None = None

    def __post_init__(self) -> None:
        if self.grid < 1:
            raise ValueError(f"grid must be >= 1, got {self.grid}")
        if not self.cells:
            raise ValueError("placement needs at least one cell")
        for row, col in self.cells:
            if not (0 <= row < self.grid and 0 <= col < self.grid):
                raise ValueError(f"cell ({row}, {col}) outside {self.grid}x{self.grid} grid")
        if self.weights is None:
            self.weights = [1.0 / len(self.cells)] * len(self.cells)
        if len(self.weights) != len(self.cells):
            raise ValueError("weights and cells must have equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("placement weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"placement weights must sum to 1, got {sum(self.weights)}")


@dataclass(slots=True)
class CategoryModel:
    """Per-frame Poisson rate and score distribution for one category."""

    rate: float
    score_mean: float
    score_std: float
    placement: Placement = field(default_factory=Placement)

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError(f"rate must be nonnegative, got {self.rate}")
        if self.score_std < 0:
            raise ValueError(f"score_std must be nonnegative, got {self.score_std}")


@dataclass(slots=True)
class ClassModel:
    label: int
    categories: dict[str, CategoryModel]


@dataclass(slots=True)
class SynthSpec:
    categories: list[str]
    classes: list[ClassModel]
    videos_per_class: int
    frames_per_video: int
    frame_width: int = 640
    frame_height: int = 480
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.categories or len(set(self.categories)) != len(self.categories):
            raise ValueError("spec categories must be nonempty and duplicate-free")
        if not self.classes:
            raise ValueError("spec needs at least one class")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate class labels: {labels}")
        if self.videos_per_class < 1 or self.frames_per_video < 1:
            raise ValueError("videos_per_class and frames_per_video must be positive")
        if self.frame_width < 1 or self.frame_height < 1:
            raise ValueError("frame dimensions must be positive")
        catset = set(self.categories)
        for cls in self.classes:
            for name in cls.categories:
                if name not in catset:
                    raise ValueError(
                        f"class {cls.label} uses category {name!r} not in spec categories"
                    )


def _video_id(label: int, video_idx: int) -> str:
    return f"c{label:04d}_v{video_idx:04d}"


def video_labels(spec: SynthSpec) -> list[tuple[str, int]]:
    """(video_id, label) pairs in generation order."""
    return [
        (_video_id(cls.label, v), cls.label)
        for cls in spec.classes
        for v in range(spec.videos_per_class)
    ]


def _emit_video(spec: SynthSpec, class_pos: int, video_idx: int, out: list[str]) -> None:
    cls = spec.classes[class_pos]
    rng = np.random.default_rng([spec.seed, class_pos, video_idx])
    vid = _video_id(cls.label, video_idx)
    W = spec.frame_width
    H = spec.frame_height
    for k in range(spec.frames_per_video):
        emitted = 0
        for name in spec.categories:
            model = cls.categories.get(name)
            if model is None or model.rate == 0.0:
                continue
            count = int(rng.poisson(model.rate))
            if count == 0:
                continue
            place = model.placement
            cumw = np.cumsum(place.weights)
            n = place.grid
            for _ in range(count):
                cell = min(int(np.searchsorted(cumw, rng.random(), side="right")), len(place.cells) - 1)
                row, col = place.cells[cell]
                cx = rng.uniform(col / n, (col + 1) / n)
                cy = rng.uniform(row / n, (row + 1) / n)
                hw = max(min(rng.uniform(0.01, 0.08), cx, 1.0 - cx), 1e-6)
                hh = max(min(rng.uniform(0.01, 0.08), cy, 1.0 - cy), 1e-6)
                score = rng.normal(model.score_mean, model.score_std)
                out.append(
                    f"{vid}\t{k}\t{W}\t{H}\t{name}"
                    f"\t{(cx - hw) * W:.4f}\t{(cy - hh) * H:.4f}"
                    f"\t{(cx + hw) * W:.4f}\t{(cy + hh) * H:.4f}\t{score:.6f}"
                )
                emitted += 1
        if emitted == 0:
            out.append(f"{vid}\t{k}\t{W}\t{H}")


def generate(spec: SynthSpec) -> str:
    """Render the detection stream for a spec; byte-identical under a seed."""
    lines: list[str] = []
    for class_pos in range(len(spec.classes)):
        for video_idx in range(spec.videos_per_class):
            _emit_video(spec, class_pos, video_idx, lines)
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# Built-in corpora
# --------------------------------------------------------------------------


def spatial_spec(
    seed: int = 0, videos_per_class: int = 40, frames_per_video: int = 10
) -> SynthSpec:
    """15 classes separable only through pyramid cells.

    Every class has the same marker rates and score distributions; class j
    parks ``marker_a`` in 4x4 cell j and ``marker_b`` five cells further,
    with a uniform ``crowd`` category as shared clutter.
    """
    classes = []
    for j in range(15):
        cell_a = divmod(j, 4)
        cell_b = divmod((j + 5) % 16, 4)
        classes.append(
            ClassModel(
                label=j + 1,
                categories={
                    "marker_a": CategoryModel(
                        2.5, -0.70, 0.15, Placement(4, [cell_a])
                    ),
                    "marker_b": CategoryModel(
                        1.5, -0.80, 0.15, Placement(4, [cell_b])
                    ),
                    "crowd": CategoryModel(2.0, -0.75, 0.20),
                },
            )
        )
    return SynthSpec(
        categories=["marker_a", "marker_b", "crowd"],
        classes=classes,
        videos_per_class=videos_per_class,
        frames_per_video=frames_per_video,
        seed=seed,
    )


def threshold_spec(
    seed: int = 0, videos_per_class: int = 40, frames_per_video: int = 10
) -> SynthSpec:
    """8 classes separable through score levels, not score sums.

    Probe score means sweep across the default threshold set while rates
    are tuned so the expected single-threshold score sum is the same for
    every class; two probes sweep in opposite directions.
    """
    classes = []
    for j in range(8):
        mu_lo = -0.98 + 0.055 * j
        mu_hi = -0.98 + 0.055 * (7 - j)
        classes.append(
            ClassModel(
                label=j + 1,
                categories={
                    "probe_lo": CategoryModel(3.6 / abs(mu_lo), mu_lo, 0.05),
                    "probe_hi": CategoryModel(3.6 / abs(mu_hi), mu_hi, 0.05),
                    "clutter": CategoryModel(1.0, -0.85, 0.10),
                },
            )
        )
    return SynthSpec(
        categories=["probe_lo", "probe_hi", "clutter"],
        classes=classes,
        videos_per_class=videos_per_class,
        frames_per_video=frames_per_video,
        seed=seed,
    )


BUILTIN_SPECS = {"spatial": spatial_spec, "threshold": threshold_spec}


# --------------------------------------------------------------------------
# YAML spec files
# --------------------------------------------------------------------------


def load_spec(data: bytes | str) -> SynthSpec:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ValueError("spec file must be a YAML mapping")
    try:
        classes = []
        for entry in doc["classes"]:
            categories = {}
            for name, cm in entry["detections"].items():
                placement = Placement(
                    grid=int(cm.get("grid", 1)),
                    cells=[tuple(c) for c in cm.get("cells", [(0, 0)])],
                    weights=list(cm["weights"]) if "weights" in cm else None,
                )
                categories[name] = CategoryModel(
                    rate=float(cm["rate"]),
                    score_mean=float(cm["score_mean"]),
                    score_std=float(cm["score_std"]),
                    placement=placement,
                )
            classes.append(ClassModel(label=int(entry["label"]), categories=categories))
        return SynthSpec(
            categories=list(doc["categories"]),
            classes=classes,
            videos_per_class=int(doc["videos_per_class"]),
            frames_per_video=int(doc["frames_per_video"]),
            frame_width=int(doc.get("frame_width", 640)),
            frame_height=int(doc.get("frame_height", 480)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad spec file: missing or malformed key ({exc!r})") from None


def dump_spec(spec: SynthSpec) -> str:
    doc = {
        "seed": spec.seed,
        "videos_per_class": spec.videos_per_class,
        "frames_per_video": spec.frames_per_video,
        "frame_width": spec.frame_width,
        "frame_height": spec.frame_height,
        "categories": list(spec.categories),
        "classes": [
            {
                "label": cls.label,
                "detections": {
                    name: {
                        "rate": cm.rate,
                        "score_mean": cm.score_mean,
                        "score_std": cm.score_std,
                        "grid": cm.placement.grid,
                        "cells": [list(c) for c in cm.placement.cells],
                        "weights": list(cm.placement.weights or []),
                    }
                    for name, cm in cls.categories.items()
                },
            }
            for cls in spec.classes
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)
