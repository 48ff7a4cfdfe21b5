"""Command-line pipeline: synth -> extract -> train -> eval / det / fuse.

Every command takes ``--seed`` where randomness is involved, writes its data
to files (diagnostics go to stderr), and emits a JSON run manifest next to
each primary output recording the configuration snapshot, inputs, outputs,
counts, and per-stage wall-clock timings.  Re-running a command with
identical inputs and seed reproduces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bank import (
    FeatureLayout,
    FeatureVector,
    StatTensor,
    accumulate_cell_statistics,
    assemble_feature,
    pool_video,
    read_feature_file,
    write_feature_file,
)
from .classify import (
    DEFAULT_REG_GRID,
    LabeledFeatureSet,
    accuracy,
    det_curve,
    fuse_features,
    grid_search_train,
    read_model,
    split_corpus,
    train_ovr_linear,
    write_model,
)
from .core import (
    BankConfig,
    FrameDetections,
    NormalizationStats,
    StreamFormatError,
    VideoDetections,
    iter_stream_lines,
    parse_detection_line,
    parse_labels,
    serialize_labels,
)
from .pyramid import enumerate_regions, level_table
from .suppress import nms_keep_indices
from .synth import BUILTIN_SPECS, generate, load_spec, video_labels


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _csv_strs(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _write_manifest(
    out_path: Path,
    command: str,
    seed: int | None,
    config: dict,
    inputs: list[str],
    outputs: list[str],
    counts: dict,
    timings: dict,
) -> None:
    manifest = {
        "tool": "detbank",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "counts": counts,
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _load_bank_config(args: argparse.Namespace) -> BankConfig:
    fields: dict = {}
    if args.config:
        doc = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError(f"{args.config}: config file must be a YAML mapping")
        known = {"categories", "thresholds", "levels", "nms_iou", "pooling", "statistics", "min_score"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys {sorted(unknown)}")
        fields.update(doc)
    if args.categories:
        fields["categories"] = _csv_strs(args.categories)
    if args.thresholds:
        fields["thresholds"] = _csv_floats(args.thresholds)
    if args.levels:
        fields["levels"] = _csv_ints(args.levels)
    if args.stats:
        fields["statistics"] = _csv_strs(args.stats)
    if args.pooling:
        fields["pooling"] = args.pooling
    if args.nms_iou is not None:
        fields["nms_iou"] = args.nms_iou
    if args.min_threshold is not None:
        fields["min_score"] = args.min_threshold
    if "categories" not in fields:
        raise ValueError("no categories configured; pass --config or --categories")
    return BankConfig(
        categories=fields["categories"],
        thresholds=fields.get("thresholds", (-1.1, -0.9, -0.7, -0.5)),
        pyramid_levels=fields.get("levels", (1, 2, 4)),
        nms_iou=fields.get("nms_iou", 0.5),
        pooling=fields.get("pooling", "mean"),
        statistics=fields.get("statistics", ("sum", "count", "binary")),
        min_score=fields.get("min_score"),
    )


def _config_snapshot(config: BankConfig) -> dict:
    snap = dataclasses.asdict(config)
    snap["categories"] = list(snap["categories"])
    snap["thresholds"] = list(snap["thresholds"])
    snap["pyramid_levels"] = list(snap["pyramid_levels"])
    snap["statistics"] = list(snap["statistics"])
    return snap


# --------------------------------------------------------------------------
# extract
# --------------------------------------------------------------------------


def _assemble_worker(payload: tuple[VideoDetections, BankConfig]):
    video, config = payload
    stats = NormalizationStats()
    feature = assemble_feature(video, config, norm_stats=stats)
    return feature, stats.dropped_outside, stats.dropped_degenerate


def _assemble_columns(
    video_id: str,
    frames: dict[int, list],
    config: BankConfig,
    table,
    num_regions: int,
    layout: FeatureLayout,
    label: int | None,
    norm_stats: NormalizationStats,
) -> FeatureVector:
    """Column-array twin of the record pipeline (single-threaded fast path).

    Produces bit-identical features to parse -> normalize -> suppress ->
    assemble: same clip/drop rules, same floor-then-NMS order with pools in
    file order, same accumulation core.
    """
    floor = config.suppression_floor
    C = config.num_categories
    tensors = []
    for fidx in sorted(frames):
        w, h, lx1, ly1, lx2, ly2, lscore, lcat = frames[fidx]
        if lscore:
            x1 = np.asarray(lx1) / w
            y1 = np.asarray(ly1) / h
            x2 = np.asarray(lx2) / w
            y2 = np.asarray(ly2) / h
            score = np.asarray(lscore)
            cat = np.asarray(lcat, dtype=np.int64)
            cx1 = np.minimum(np.maximum(x1, 0.0), 1.0)
            cy1 = np.minimum(np.maximum(y1, 0.0), 1.0)
            cx2 = np.minimum(np.maximum(x2, 0.0), 1.0)
            cy2 = np.minimum(np.maximum(y2, 0.0), 1.0)
            keep = (cx2 > cx1) & (cy2 > cy1)
            dropped = np.flatnonzero(~keep)
            if dropped.size:
                outside = (x2[dropped] <= 0.0) | (x1[dropped] >= 1.0) | (
                    y2[dropped] <= 0.0
                ) | (y1[dropped] >= 1.0)
                norm_stats.dropped_outside += int(outside.sum())
                norm_stats.dropped_degenerate += int(dropped.size - outside.sum())
            keep &= score >= floor
            survivors = []  # per-category kept row indices, category order
            for ci in range(C):
                rows = np.flatnonzero(keep & (cat == ci))
                if rows.size == 0:
                    continue
                gx1 = cx1[rows]
                gy1 = cy1[rows]
                gx2 = cx2[rows]
                gy2 = cy2[rows]
                gs = score[rows]
                if rows.size <= 48:
                    kept = nms_keep_indices(
                        gx1.tolist(), gy1.tolist(), gx2.tolist(), gy2.tolist(),
                        gs.tolist(), config.nms_iou,
                    )
                else:
                    kept = nms_keep_indices(gx1, gy1, gx2, gy2, gs, config.nms_iou)
                survivors.append(rows[kept])
            if survivors:
                rows = np.concatenate(survivors)
                values = accumulate_cell_statistics(
                    cat[rows],
                    (cx1[rows] + cx2[rows]) * 0.5,
                    (cy1[rows] + cy2[rows]) * 0.5,
                    score[rows],
                    table,
                    num_regions,
                    config,
                )
                tensors.append(StatTensor(fidx, values))
                continue
        tensors.append(
            StatTensor(fidx, np.zeros((C, num_regions, config.num_thresholds,
                                       config.num_statistics)))
        )
    if config.pooling == "both":
        block = layout.dim // 2
        mean_vec = pool_video(tensors, "mean")
        max_vec = pool_video(tensors, "max")
        merged = dict(mean_vec.values)
        merged.update({idx + block: val for idx, val in max_vec.values.items()})
        return FeatureVector(layout, merged, video_id, label)
    pooled = pool_video(tensors, config.pooling)
    return FeatureVector(layout, pooled.values, video_id, label)


def _extract_stream_fast(
    text: str,
    config: BankConfig,
    labels: dict[str, int],
    norm_stats: NormalizationStats,
):
    """Single-pass column-based extraction; yields (feature, frames, dets)."""
    payload = list(iter_stream_lines(text))
    last_line: dict[str, int] = {}
    for lineno, line in payload:
        last_line[line.split("\t", 1)[0]] = lineno
    cat_index = config.category_index()
    regions = enumerate_regions(config.pyramid_levels)
    table = level_table(regions)
    layout = FeatureLayout.from_config(config, len(regions))
    isfinite = math.isfinite
    open_videos: dict[str, dict[int, list]] = {}
    for lineno, line in payload:
        parts = line.split("\t")
        n = len(parts)
        if n not in (4, 10, 11):
            raise StreamFormatError(
                f"line {lineno}: expected 4, 10, or 11 tab-separated fields, got {n}"
            )
        video_id = parts[0]
        try:
            frame_index = int(parts[1])
            w = float(parts[2])
            h = float(parts[3])
            if frame_index < 0:
                raise ValueError(f"frame_index must be nonnegative, got {frame_index}")
            if not (w > 0 and h > 0):
                raise ValueError(f"frame dimensions must be positive, got {w}x{h}")
            frames = open_videos.get(video_id)
            if frames is None:
                if not video_id or any(ch.isspace() for ch in video_id):
                    raise ValueError("video_id must be nonempty without whitespace")
                frames = open_videos[video_id] = {}
            cols = frames.get(frame_index)
            if cols is None:
                cols = frames[frame_index] = [w, h, [], [], [], [], [], []]
            elif cols[0] != w or cols[1] != h:
                raise ValueError(
                    f"conflicting dimensions for video {video_id!r} frame {frame_index}"
                )
            if n > 4:
                category = parts[4]
                ci = cat_index.get(category)
                if ci is None:
                    raise ValueError(f"unknown category {category!r}")
                x1 = float(parts[5])
                y1 = float(parts[6])
                x2 = float(parts[7])
                y2 = float(parts[8])
                score = float(parts[9])
                if not isfinite(x1 + y1 + x2 + y2 + score):
                    raise ValueError("box fields must be finite")
                if not (x1 < x2 and y1 < y2):
                    raise ValueError(
                        f"box corners must satisfy x1 < x2 and y1 < y2, got "
                        f"({x1}, {y1}, {x2}, {y2})"
                    )
                if n == 11 and int(parts[10]) < 0:
                    raise ValueError(f"scale must be nonnegative, got {parts[10]}")
                cols[2].append(x1)
                cols[3].append(y1)
                cols[4].append(x2)
                cols[5].append(y2)
                cols[6].append(score)
                cols[7].append(ci)
        except StreamFormatError:
            raise
        except ValueError as exc:
            raise StreamFormatError(f"line {lineno}: {exc}") from None
        if lineno == last_line[video_id]:
            frames = open_videos.pop(video_id)
            feature = _assemble_columns(
                video_id, frames, config, table, len(regions), layout,
                labels.get(video_id), norm_stats,
            )
            num_dets = sum(len(cols[6]) for cols in frames.values())
            yield feature, len(frames), num_dets


def _iter_finalized_videos(text: str, config: BankConfig, labels: dict[str, int]):
    """Yield complete videos while streaming the input.

    A first pass records the last line of each video, so memory stays
    bounded by the open (typically one) videos even though inputs may
    interleave videos arbitrarily.
    """
    payload = list(iter_stream_lines(text))
    last_line: dict[str, int] = {}
    for lineno, line in payload:
        last_line[line.split("\t", 1)[0]] = lineno
    catset = frozenset(config.categories)
    open_videos: dict[str, dict[int, FrameDetections]] = {}
    for lineno, line in payload:
        video_id, frame_index, width, height, record = parse_detection_line(
            line, lineno, catset
        )
        frames = open_videos.setdefault(video_id, {})
        frame = frames.get(frame_index)
        if frame is None:
            frame = frames[frame_index] = FrameDetections(frame_index, width, height, [])
        elif frame.width != width or frame.height != height:
            raise ValueError(
                f"line {lineno}: conflicting dimensions for video {video_id!r} "
                f"frame {frame_index}"
            )
        if record is not None:
            frame.detections.append(record)
        if lineno == last_line[video_id]:
            ordered = [frames[k] for k in sorted(frames)]
            del open_videos[video_id]
            yield VideoDetections(video_id, ordered, labels.get(video_id))


def cmd_extract(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    config = _load_bank_config(args)
    labels = parse_labels(Path(args.labels).read_bytes()) if args.labels else {}
    layout = FeatureLayout.from_config(config, len(enumerate_regions(config.pyramid_levels)))

    text = Path(args.input).read_text(encoding="utf-8")
    t_read = time.perf_counter()

    num_videos = 0
    num_frames = 0
    num_detections = 0
    dropped_outside = 0
    dropped_degenerate = 0
    features = []

    def account(video: VideoDetections):
        nonlocal num_videos, num_frames, num_detections
        num_videos += 1
        num_frames += video.num_frames
        num_detections += sum(len(f.detections) for f in video.frames)

    try:
        if args.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                videos = []
                for video in _iter_finalized_videos(text, config, labels):
                    account(video)
                    videos.append((video, config))
                for feature, out_cnt, deg_cnt in pool.map(_assemble_worker, videos, chunksize=8):
                    features.append(feature)
                    dropped_outside += out_cnt
                    dropped_degenerate += deg_cnt
        else:
            stats = NormalizationStats()
            for feature, nframes, ndets in _extract_stream_fast(text, config, labels, stats):
                num_videos += 1
                num_frames += nframes
                num_detections += ndets
                features.append(feature)
            dropped_outside = stats.dropped_outside
            dropped_degenerate = stats.dropped_degenerate
    except ValueError as exc:
        raise ValueError(f"{args.input}: {exc}") from exc
    t_extract = time.perf_counter()

    features.sort(key=lambda f: f.video_id)
    out_path = Path(args.output)
    with out_path.open("w", encoding="utf-8") as out:
        write_feature_file(out, layout, features)
    t_write = time.perf_counter()

    if dropped_outside or dropped_degenerate:
        print(
            f"warning: dropped {dropped_outside} out-of-frame and "
            f"{dropped_degenerate} degenerate boxes during normalization",
            file=sys.stderr,
        )
    _write_manifest(
        out_path,
        "extract",
        args.seed,
        _config_snapshot(config),
        [args.input] + ([args.labels] if args.labels else []),
        [args.output],
        {
            "videos": num_videos,
            "frames": num_frames,
            "detections": num_detections,
            "dropped_outside": dropped_outside,
            "dropped_degenerate": dropped_degenerate,
            "dim": layout.dim,
        },
        {
            "read": t_read - t_start,
            "extract": t_extract - t_read,
            "write": t_write - t_extract,
            "total": t_write - t_start,
        },
    )
    print(
        f"extracted {num_videos} videos ({num_detections} detections) -> "
        f"{args.output} [dim={layout.dim}]",
        file=sys.stderr,
    )
    return 0


# --------------------------------------------------------------------------
# synth
# --------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    if bool(args.builtin) == bool(args.spec):
        raise ValueError("pass exactly one of --builtin or --spec")
    if args.builtin:
        builder = BUILTIN_SPECS.get(args.builtin)
        if builder is None:
            raise ValueError(
                f"unknown builtin {args.builtin!r}; choose from {sorted(BUILTIN_SPECS)}"
            )
        spec = builder(seed=args.seed if args.seed is not None else 0)
    else:
        spec = load_spec(Path(args.spec).read_bytes())
        if args.seed is not None:  # explicit --seed wins over the file's seed
            spec.seed = args.seed
    if args.videos_per_class:
        spec.videos_per_class = args.videos_per_class
    if args.frames_per_video:
        spec.frames_per_video = args.frames_per_video

    stream = generate(spec)
    labels = video_labels(spec)
    out_path = Path(args.output)
    out_path.write_text(stream, encoding="utf-8")
    labels_path = Path(args.labels_out) if args.labels_out else Path(str(out_path) + ".labels")
    labels_path.write_text(serialize_labels(labels), encoding="utf-8")
    t_done = time.perf_counter()

    _write_manifest(
        out_path,
        "synth",
        spec.seed,
        {
            "builtin": args.builtin,
            "spec_file": args.spec,
            "classes": len(spec.classes),
            "videos_per_class": spec.videos_per_class,
            "frames_per_video": spec.frames_per_video,
            "categories": list(spec.categories),
        },
        [args.spec] if args.spec else [],
        [str(out_path), str(labels_path)],
        {"videos": len(labels), "lines": stream.count("\n")},
        {"total": t_done - t_start},
    )
    print(f"generated {len(labels)} videos -> {out_path}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# train / eval / det / fuse
# --------------------------------------------------------------------------


def _read_labeled_set(path: str) -> LabeledFeatureSet:
    layout, features = read_feature_file(Path(path).read_bytes())
    try:
        return LabeledFeatureSet.from_features(layout, features)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def cmd_train(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    corpus = _read_labeled_set(args.input)
    ratios = tuple(_csv_floats(args.ratios))
    train, val, test = split_corpus(corpus, ratios, args.seed)
    t_split = time.perf_counter()

    if args.reg is not None:
        model = train_ovr_linear(train, args.reg, args.seed, epochs=args.epochs, scale=args.scale)
        best_reg = args.reg
        val_accs = {args.reg: accuracy(model, val) if len(val) else float("nan")}
    else:
        grid = tuple(_csv_floats(args.reg_grid)) if args.reg_grid else DEFAULT_REG_GRID
        model, best_reg, val_accs = grid_search_train(
            train, val, args.seed, grid=grid, epochs=args.epochs, scale=args.scale
        )
    t_train = time.perf_counter()

    report = {
        "train_accuracy": accuracy(model, train),
        "val_accuracy": accuracy(model, val) if len(val) else None,
        "test_accuracy": accuracy(model, test) if len(test) else None,
    }
    out_path = Path(args.output)
    with out_path.open("w", encoding="utf-8") as out:
        write_model(out, model)
    if args.dump_splits:
        for name, subset in (("train", train), ("val", val), ("test", test)):
            with open(f"{args.dump_splits}.{name}", "w", encoding="utf-8") as out:
                write_feature_file(out, corpus.layout, subset.features)
    t_done = time.perf_counter()

    _write_manifest(
        out_path,
        "train",
        args.seed,
        {
            "ratios": list(ratios),
            "reg": best_reg,
            "reg_grid_val_accuracy": {str(k): v for k, v in val_accs.items()},
            "epochs": args.epochs,
            "scale": args.scale,
            "dim": corpus.layout.dim,
        },
        [args.input],
        [args.output],
        {
            "videos": len(corpus),
            "train": len(train),
            "val": len(val),
            "test": len(test),
            "classes": len(model.classes),
            **{f"{k}": v for k, v in report.items()},
        },
        {
            "split": t_split - t_start,
            "train": t_train - t_split,
            "evaluate": t_done - t_train,
            "total": t_done - t_start,
        },
    )
    fmt = lambda a: "n/a" if a is None else f"{a:.4f}"
    print(
        f"trained {len(model.classes)} classes (reg={best_reg}); "
        f"train/val/test accuracy: {fmt(report['train_accuracy'])}/"
        f"{fmt(report['val_accuracy'])}/{fmt(report['test_accuracy'])}",
        file=sys.stderr,
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    model = read_model(Path(args.model).read_bytes())
    lset = _read_labeled_set(args.input)
    acc = accuracy(model, lset)
    correct = round(acc * len(lset))
    report = f"videos {len(lset)}\ncorrect {correct}\naccuracy {acc:.17g}\n"
    t_done = time.perf_counter()
    if args.output:
        Path(args.output).write_text(report, encoding="utf-8")
        _write_manifest(
            Path(args.output),
            "eval",
            None,
            {"model": args.model},
            [args.model, args.input],
            [args.output],
            {"videos": len(lset), "correct": correct, "accuracy": acc},
            {"total": t_done - t_start},
        )
    else:
        sys.stdout.write(report)
    return 0


def cmd_det(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    model = read_model(Path(args.model).read_bytes())
    lset = _read_labeled_set(args.input)
    points = det_curve(model, lset, args.event)
    out_path = Path(args.output)
    with out_path.open("w", encoding="utf-8") as out:
        out.write(f"# false_alarm_rate miss_rate (event {args.event})\n")
        for fa, miss in points:
            out.write(f"{fa:.17g} {miss:.17g}\n")
    t_done = time.perf_counter()
    _write_manifest(
        out_path,
        "det",
        None,
        {"event": args.event, "model": args.model},
        [args.model, args.input],
        [args.output],
        {"videos": len(lset), "points": len(points)},
        {"total": t_done - t_start},
    )
    print(f"wrote {len(points)} DET points -> {out_path}", file=sys.stderr)
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    sets = [_read_labeled_set(path) for path in args.inputs]
    fused = fuse_features(sets)
    out_path = Path(args.output)
    with out_path.open("w", encoding="utf-8") as out:
        write_feature_file(out, fused.layout, fused.features)
    t_done = time.perf_counter()
    _write_manifest(
        out_path,
        "fuse",
        None,
        {"dims": [s.layout.dim for s in sets]},
        list(args.inputs),
        [args.output],
        {"videos": len(fused), "dim": fused.layout.dim},
        {"total": t_done - t_start},
    )
    print(f"fused {len(args.inputs)} files -> {out_path} [dim={fused.layout.dim}]", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detbank",
        description="Detection-bank video features and event-classification harness.",
        epilog=(
            "File formats: detection streams are tab-separated "
            "'video_id frame_index width height category x1 y1 x2 y2 score [scale]' "
            "lines (four-field lines declare empty keyframes; '#' starts a comment). "
            "Feature files begin with '#DB v1 dim=.. C=.. R=.. T=.. S=.. pooling=..' "
            "followed by 'video_id label idx:val ...' lines. Label sidecars are "
            "'video_id<TAB>label' lines. Every command writes '<output>.manifest.json'."
        ),
    )
    parser.add_argument("--version", action="version", version=f"detbank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="detection stream -> feature file")
    p.add_argument("-i", "--input", required=True, help="detection stream file")
    p.add_argument("-o", "--output", required=True, help="feature file to write")
    p.add_argument("--config", help="bank configuration YAML")
    p.add_argument("--categories", help="comma-separated category list (overrides config)")
    p.add_argument("--thresholds", help="comma-separated ascending thresholds")
    p.add_argument("--levels", help="comma-separated pyramid subdivisions, e.g. 1,2,4")
    p.add_argument("--stats", help="subset of sum,count,binary")
    p.add_argument("--pooling", choices=("mean", "max", "both"))
    p.add_argument("--nms-iou", type=float, help="NMS overlap threshold in (0,1]")
    p.add_argument("--min-threshold", type=float, help="suppression score floor (default: lowest threshold)")
    p.add_argument("--labels", help="label sidecar file to attach to videos")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers across videos")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="generate a synthetic detection stream")
    p.add_argument("--builtin", help=f"built-in corpus: {', '.join(sorted(BUILTIN_SPECS))}")
    p.add_argument("--spec", help="YAML spec file")
    p.add_argument("-o", "--output", required=True, help="detection stream to write")
    p.add_argument("--labels-out", help="label sidecar path (default: <output>.labels)")
    p.add_argument("--videos-per-class", type=int)
    p.add_argument("--frames-per-video", type=int)
    p.add_argument("--seed", type=int, default=None, help="overrides a spec file's seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="split features, grid-search reg, train one-vs-rest model")
    p.add_argument("-i", "--input", required=True, help="labeled feature file")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--ratios", default="0.4,0.2,0.4", help="train,val,test fractions")
    p.add_argument("--reg", type=float, help="fixed regularization (skips grid search)")
    p.add_argument("--reg-grid", help="comma-separated regularization grid")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--scale", choices=("none", "maxabs"), default="none")
    p.add_argument("--dump-splits", help="write <prefix>.train/.val/.test feature files")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="forced-choice accuracy of a model on a feature file")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-i", "--input", required=True, help="labeled feature file")
    p.add_argument("-o", "--output", help="report file (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("det", help="DET curve for one event")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-i", "--input", required=True, help="labeled feature file")
    p.add_argument("--event", type=int, required=True, help="event identifier")
    p.add_argument("-o", "--output", required=True, help="two-column points file")
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("fuse", help="concatenate feature files")
    p.add_argument("-i", "--inputs", nargs="+", required=True, help="feature files")
    p.add_argument("-o", "--output", required=True, help="fused feature file")
    p.set_defaults(func=cmd_fuse)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
