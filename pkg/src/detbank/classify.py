"""Forced-choice event classification: corpus splitting, one-vs-rest linear
max-margin training, accuracy, DET curves, and feature fusion.

The trainer is a deterministic in-repo hinge-loss SGD (Pegasos-style
schedule with an unregularized bias), so identical data, regularization,
and seed reproduce bit-identical models.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .bank import FeatureLayout, FeatureVector

_MODEL_HEADER_PREFIX = "#DBMODEL v1"
DEFAULT_REG_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass(slots=True)
class LabeledFeatureSet:
    """Parallel lists of feature vectors and event labels."""

    layout: FeatureLayout
    features: list[FeatureVector]
    labels: list[int]

    def __post_init__(self) -> None:
        if len(self.features) != len(self.labels):
            raise ValueError(
                f"{len(self.features)} features but {len(self.labels)} labels"
            )
        for f in self.features:
            if f.dim != self.layout.dim:
                raise ValueError(
                    f"video {f.video_id!r} has dim {f.dim}, set declares {self.layout.dim}"
                )

    def __len__(self) -> int:
        return len(self.features)

    @property
    def video_ids(self) -> list[str]:
        return [f.video_id for f in self.features]

    @classmethod
    def from_features(
        cls, layout: FeatureLayout, features: Sequence[FeatureVector]
    ) -> "LabeledFeatureSet":
        labels = []
        for f in features:
            if f.label is None:
                raise ValueError(f"video {f.video_id!r} has no label")
            labels.append(f.label)
        return cls(layout, list(features), labels)


def split_corpus(
    corpus: LabeledFeatureSet,
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[LabeledFeatureSet, LabeledFeatureSet, LabeledFeatureSet]:
    """Deterministic stratified train/validation/test split.

    Sizes are floor-based per class with the remainder assigned to test.
    Classes with fewer than 3 members are placed wholly in training (with a
    warning), since they cannot appear in every split.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios)})")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, label in enumerate(corpus.labels):
        by_class.setdefault(label, []).append(i)
    train_idx: list[int] = []
    val_idx: list[int] = []
    test_idx: list[int] = []
    for label in sorted(by_class):
        members = by_class[label]
        perm = [members[j] for j in rng.permutation(len(members))]
        n = len(perm)
        if n < 3:
            warnings.warn(
                f"class {label} has only {n} member(s); placing all in training",
                stacklevel=2,
            )
            train_idx.extend(perm)
            continue
        # epsilon guards against n*ratio landing an ulp below an integer
        n_train = int(n * ratios[0] + 1e-9)
        n_val = int(n * ratios[1] + 1e-9)
        train_idx.extend(perm[:n_train])
        val_idx.extend(perm[n_train : n_train + n_val])
        test_idx.extend(perm[n_train + n_val :])
    return (
        _subset(corpus, train_idx),
        _subset(corpus, val_idx),
        _subset(corpus, test_idx),
    )


def _subset(corpus: LabeledFeatureSet, indices: Sequence[int]) -> LabeledFeatureSet:
    return LabeledFeatureSet(
        corpus.layout,
        [corpus.features[i] for i in indices],
        [corpus.labels[i] for i in indices],
    )


@dataclass(slots=True, eq=False)
class LinearOvrModel:
    """One weight vector and bias per class, classes sorted ascending."""

    classes: tuple[int, ...]
    weights: np.ndarray  # (num_classes, dim)
    biases: np.ndarray  # (num_classes,)
    reg: float
    seed: int
    epochs: int

    def __post_init__(self) -> None:
        if self.weights.shape[0] != len(self.classes) or self.biases.shape[0] != len(self.classes):
            raise ValueError("one weight vector and bias per class required")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("model weights must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision_values(self, f: FeatureVector) -> np.ndarray:
        if f.dim != self.dim:
            raise ValueError(f"feature dim {f.dim} does not match model dim {self.dim}")
        if not f.values:
            return self.biases.copy()
        idx = np.fromiter(f.values.keys(), dtype=np.int64, count=len(f.values))
        vals = np.fromiter(f.values.values(), dtype=np.float64, count=len(f.values))
        return self.weights[:, idx] @ vals + self.biases


def _sparse_rows(
    lset: LabeledFeatureSet,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    idx_rows = []
    val_rows = []
    for f in lset.features:
        idx = np.fromiter(f.values.keys(), dtype=np.int64, count=len(f.values))
        vals = np.fromiter(f.values.values(), dtype=np.float64, count=len(f.values))
        order = np.argsort(idx)
        idx_rows.append(idx[order])
        val_rows.append(vals[order])
    return idx_rows, val_rows


def train_ovr_linear(
    train: LabeledFeatureSet,
    reg: float,
    seed: int,
    epochs: int = 60,
    scale: str = "none",
) -> LinearOvrModel:
    """Train one-vs-rest L2-regularized hinge-loss classifiers.

    Per class, SGD visits the training set for a fixed number of epochs in
    a seeded shuffle (re-drawn per epoch from a per-class generator, so
    classes may train concurrently without changing results).  ``scale``
    may be ``maxabs`` to divide each dimension by its max absolute value
    over the training set; the scaling is folded into the final weights, so
    prediction needs no extra state.
    """
    if reg <= 0:
        raise ValueError(f"regularization must be positive, got {reg}")
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    if scale not in ("none", "maxabs"):
        raise ValueError(f"scale must be 'none' or 'maxabs', got {scale!r}")
    classes = tuple(sorted(set(train.labels)))
    if len(classes) < 2:
        raise ValueError("training requires at least two classes")
    dim = train.layout.dim
    n = len(train)
    idx_rows, val_rows = _sparse_rows(train)

    factors = np.ones(dim)
    if scale == "maxabs":
        for idx, vals in zip(idx_rows, val_rows):
            np.maximum.at(factors, idx, np.abs(vals))
        val_rows = [vals / factors[idx] for idx, vals in zip(idx_rows, val_rows)]

    labels = np.asarray(train.labels)
    weights = np.zeros((len(classes), dim))
    biases = np.zeros(len(classes))
    lam = float(reg)
    for ci, cls in enumerate(classes):
        y = np.where(labels == cls, 1.0, -1.0)
        rng = np.random.default_rng([seed, ci])
        v = np.zeros(dim)
        scale_w = 1.0
        b = 0.0
        t = 0
        for _ in range(epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * (t + 1))
                scale_w *= 1.0 - eta * lam  # = t/(t+1), never zero
                idx = idx_rows[i]
                vals = val_rows[i]
                margin = y[i] * (scale_w * (v[idx] @ vals) + b)
                if margin < 1.0:
                    v[idx] += (eta * y[i] / scale_w) * vals
                    b += eta * y[i]
                if scale_w < 1e-9:
                    v *= scale_w
                    scale_w = 1.0
        weights[ci] = (scale_w * v) / factors
        biases[ci] = b
    return LinearOvrModel(classes, weights, biases, lam, seed, epochs)


def predict_forced_choice(model: LinearOvrModel, f: FeatureVector) -> int:
    """Class with the highest decision value; ties go to the lowest class."""
    return model.classes[int(np.argmax(model.decision_values(f)))]


def accuracy(model: LinearOvrModel, lset: LabeledFeatureSet) -> float:
    if len(lset) == 0:
        raise ValueError("cannot evaluate on an empty set")
    correct = sum(
        1
        for f, label in zip(lset.features, lset.labels)
        if predict_forced_choice(model, f) == label
    )
    return correct / len(lset)


def grid_search_train(
    train: LabeledFeatureSet,
    val: LabeledFeatureSet,
    seed: int,
    grid: Sequence[float] = DEFAULT_REG_GRID,
    epochs: int = 60,
    scale: str = "none",
) -> tuple[LinearOvrModel, float, dict[float, float]]:
    """Pick the regularization with the best validation accuracy (first in
    grid order on ties) and return that model."""
    if len(val) == 0:
        raise ValueError(
            "validation split is empty; fix the regularization explicitly or provide more data"
        )
    best_model = None
    best_reg = None
    best_acc = -1.0
    val_accs: dict[float, float] = {}
    for reg in grid:
        model = train_ovr_linear(train, reg, seed, epochs=epochs, scale=scale)
        acc = accuracy(model, val)
        val_accs[reg] = acc
        if acc > best_acc:
            best_model, best_reg, best_acc = model, reg, acc
    assert best_model is not None and best_reg is not None
    return best_model, best_reg, val_accs


# --------------------------------------------------------------------------
# DET curves
# --------------------------------------------------------------------------


def det_points_from_scores(
    scores: np.ndarray, positive: np.ndarray
) -> list[tuple[float, float]]:
    """(false-alarm rate, miss rate) trade-off of a score ranking.

    Sweeps a threshold over the distinct score values (predict positive at
    score >= threshold); endpoints (0,1) and (1,0) are always included and
    points come sorted by ascending false-alarm rate with miss rate
    non-increasing.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    npos = int(positive.sum())
    nneg = int(positive.size - npos)
    if npos == 0 or nneg == 0:
        raise ValueError("DET curve requires both positives and negatives")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(positive[order])
    fp = np.cumsum(~positive[order])
    # prefix boundaries where the score changes: thresholds are distinct values
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    cuts = np.concatenate((distinct, [scores.size - 1]))
    points = [(0.0, 1.0)]
    for k in cuts:
        fa = fp[k] / nneg
        miss = (npos - tp[k]) / npos
        if (fa, miss) != points[-1]:
            points.append((float(fa), float(miss)))
    if points[-1] != (1.0, 0.0):
        points.append((1.0, 0.0))
    return points


def det_curve(
    model: LinearOvrModel, lset: LabeledFeatureSet, event: int
) -> list[tuple[float, float]]:
    """DET curve of one class's decision values over a labeled set."""
    if event not in model.classes:
        raise ValueError(f"class {event} not in model classes {model.classes}")
    ci = model.classes.index(event)
    scores = np.array([model.decision_values(f)[ci] for f in lset.features])
    positive = np.asarray(lset.labels) == event
    return det_points_from_scores(scores, positive)


# --------------------------------------------------------------------------
# Fusion
# --------------------------------------------------------------------------


def fuse_features(sets: Sequence[LabeledFeatureSet]) -> LabeledFeatureSet:
    """Concatenate feature sets per video with cumulative index offsets.

    All sets must list the same videos with the same labels in the same
    order; the fused dimension is the sum of input dimensions.
    """
    if not sets:
        raise ValueError("nothing to fuse")
    if len(sets) == 1:
        return sets[0]
    base = sets[0]
    for other in sets[1:]:
        if len(other) != len(base):
            raise ValueError(
                f"cannot fuse sets of {len(base)} and {len(other)} videos"
            )
        for bf, of, bl, ol in zip(base.features, other.features, base.labels, other.labels):
            if bf.video_id != of.video_id:
                raise ValueError(
                    f"video ordering mismatch: {bf.video_id!r} vs {of.video_id!r}"
                )
            if bl != ol:
                raise ValueError(f"label mismatch for video {bf.video_id!r}: {bl} vs {ol}")
    total_dim = sum(s.layout.dim for s in sets)
    layout = FeatureLayout(dim=total_dim)
    fused = []
    for row in range(len(base)):
        values: dict[int, float] = {}
        offset = 0
        for s in sets:
            f = s.features[row]
            for idx, val in f.values.items():
                values[idx + offset] = val
            offset += s.layout.dim
        fused.append(
            FeatureVector(layout, values, base.features[row].video_id, base.labels[row])
        )
    return LabeledFeatureSet(layout, fused, list(base.labels))


# --------------------------------------------------------------------------
# Model file format
# --------------------------------------------------------------------------
#
# Header:  #DBMODEL v1 dim=<D> reg=<r> seed=<s> epochs=<e> classes=<c1,c2,...>
# Payload: one line per class: `<class> <bias> idx:val ...` (nonzero weights,
# ascending indices, 17 significant digits).


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_model(out: IO[str], model: LinearOvrModel) -> None:
    classes = ",".join(str(c) for c in model.classes)
    out.write(
        f"{_MODEL_HEADER_PREFIX} dim={model.dim} reg={_fmt(model.reg)} "
        f"seed={model.seed} epochs={model.epochs} classes={classes}\n"
    )
    for ci, cls in enumerate(model.classes):
        row = model.weights[ci]
        nonzero = np.flatnonzero(row)
        pairs = " ".join(f"{i}:{_fmt(row[i])}" for i in nonzero)
        out.write(f"{cls} {_fmt(model.biases[ci])} {pairs}".rstrip() + "\n")


def read_model(data: bytes | str) -> LinearOvrModel:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(_MODEL_HEADER_PREFIX):
        raise ValueError("line 1: missing model header")
    fields: dict[str, str] = {}
    for token in lines[0].split()[2:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"line 1: bad model header field {token!r}")
        fields[key] = value
    try:
        dim = int(fields["dim"])
        reg = float(fields["reg"])
        seed = int(fields["seed"])
        epochs = int(fields["epochs"])
        classes = tuple(int(c) for c in fields["classes"].split(","))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"line 1: bad model header ({exc})") from None
    if len(lines) - 1 != len(classes):
        raise ValueError(
            f"expected {len(classes)} weight lines, got {len(lines) - 1}"
        )
    weights = np.zeros((len(classes), dim))
    biases = np.zeros(len(classes))
    for ci, line in enumerate(lines[1:]):
        tokens = line.split()
        lineno = ci + 2
        if len(tokens) < 2 or int(tokens[0]) != classes[ci]:
            raise ValueError(f"line {lineno}: expected weights for class {classes[ci]}")
        biases[ci] = float(tokens[1])
        prev = -1
        for fieldno, token in enumerate(tokens[2:], start=3):
            idx_str, sep, val_str = token.partition(":")
            if not sep:
                raise ValueError(f"line {lineno}, field {fieldno}: expected idx:val")
            idx = int(idx_str)
            if not 0 <= idx < dim or idx <= prev:
                raise ValueError(
                    f"line {lineno}, field {fieldno}: bad index {idx} for dim {dim}"
                )
            prev = idx
            weights[ci, idx] = float(val_str)
    return LinearOvrModel(classes, weights, biases, reg, seed, epochs)
