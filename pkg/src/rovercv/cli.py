"""Single executable exposing every pipeline stage as a file-based subcommand.

Exit codes: 0 success, 1 runtime/domain error (message on stderr), 2 usage or
configuration error. No output file is written when the exit code is nonzero.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .calibration import calibrate_from_image
from .classifier import model_from_dict, model_to_dict, svm_train
from .detector import (
    DEFAULT_BANDS,
    BandConfig,
    DetectorConfig,
    detect_sequence,
    draw_boxes,
    plan_windows,
)
from .features import FeatureConfig, HogParams, extract_features
from .geometry import LaneConfig, detect_lane
from .mapping import (
    ExploreConfig,
    LocalizeConfig,
    OccupancyMap,
    Pose,
    explore_step,
    localize,
    map_from_bytes,
    map_to_bytes,
)
from .raster import Raster, load_pnm, write_pnm
from .segmentation import SegmentConfig, segment_floor
from .steering import AngleSeries, bin_angle, smooth_series


class UsageError(Exception):
    """Bad parameters or configuration; maps to exit code 2."""


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return value


def _nonneg_float(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return value


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return value


_CONFIG_KEYS = {
    "seed", "edge_threshold", "blur_passes", "method", "k", "horizon_frac",
    "top_width_frac", "min_votes", "hist_bins", "spatial_px", "hog_cell",
    "hog_bins", "hog_block_cells", "hog_per_channel", "lam", "epochs",
    "min_score", "frame_memory", "bands", "cell_cm", "patch_width_cm",
    "patch_depth_cm", "patch_offset_cm", "min_known", "localize_min_score", "min_overlap_frac",
    "bin_width", "distance_cm", "length_cm",
}


def _build_parser(defaults: dict) -> argparse.ArgumentParser:
    d = defaults.get

    parser = argparse.ArgumentParser(prog="rovercv",
                                     description="Classical perception toolkit for "
                                                 "indoor and outdoor vehicles")
    parser.add_argument("--config", help="JSON file with default parameter values")
    parser.add_argument("--seed", type=int, default=d("seed", 42),
                        help="seed for every randomized stage (training shuffles)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="estimate the perceived focal length from a "
                                         "reference rectangle of known size")
    p.add_argument("image")
    p.add_argument("--distance-cm", type=_positive_float, required="distance_cm" not in defaults,
                   default=d("distance_cm"))
    p.add_argument("--length-cm", type=_positive_float, required="length_cm" not in defaults,
                   default=d("length_cm"))
    p.add_argument("--edge-threshold", type=_nonneg_int, default=d("edge_threshold", 60))
    p.add_argument("--out", default="camera.json")
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("segment", help="floor/obstacle segmentation")
    p.add_argument("image")
    p.add_argument("--method", choices=("otsu", "kmeans", "watershed"),
                   default=d("method", "otsu"))
    p.add_argument("--k", type=_positive_int, default=d("k", 2))
    p.add_argument("--blur-passes", type=_nonneg_int, default=d("blur_passes", 1))
    p.add_argument("--markers", help="optional P5 seed image for watershed (values = labels)")
    p.add_argument("--out-mask", default="mask.pnm")
    p.add_argument("--out-json", default="mask.json")
    p.set_defaults(handler=_cmd_segment)

    p = sub.add_parser("lanes", help="detect lane boundary lines")
    p.add_argument("image")
    p.add_argument("--horizon-frac", type=_positive_float, default=d("horizon_frac", 0.6))
    p.add_argument("--top-width-frac", type=_positive_float, default=d("top_width_frac", 0.2))
    p.add_argument("--edge-threshold", type=_nonneg_int, default=d("edge_threshold", 60))
    p.add_argument("--min-votes", type=_positive_int, default=d("min_votes", 30))
    p.add_argument("--blur-passes", type=_nonneg_int, default=d("blur_passes", 1))
    p.add_argument("--out", default="lane.json")
    p.add_argument("--out-image", default=None, help="write an annotated copy of the frame")
    p.set_defaults(handler=_cmd_lanes)

    p = sub.add_parser("extract", help="feature vectors for labeled training patches")
    p.add_argument("patch_dir")
    p.add_argument("labels_csv", help="rows of <filename>,<label 0|1>")
    p.add_argument("--hist-bins", type=_positive_int, default=d("hist_bins", 32))
    p.add_argument("--spatial-px", type=_positive_int, default=d("spatial_px", 32))
    p.add_argument("--hog-cell", type=_positive_int, default=d("hog_cell", 8))
    p.add_argument("--hog-bins", type=_positive_int, default=d("hog_bins", 9))
    p.add_argument("--hog-block-cells", type=_positive_int, default=d("hog_block_cells", 2))
    p.add_argument("--hog-per-channel", action="store_true",
                   default=d("hog_per_channel", False))
    p.add_argument("--out", default="features.csv")
    p.add_argument("--layout-json", default=None)
    p.set_defaults(handler=_cmd_extract)

    p = sub.add_parser("train", help="train the car/non-car linear SVM")
    p.add_argument("features_csv")
    p.add_argument("--lambda", dest="lam", type=_positive_float, default=d("lam", 1e-4))
    p.add_argument("--epochs", type=_positive_int, default=d("epochs", 30))
    p.add_argument("--out", default="model.json")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("detect", help="sliding-window car detection over numbered frames")
    p.add_argument("frame_dir")
    p.add_argument("model_json")
    p.add_argument("--min-score", type=float, default=d("min_score", 0.0))
    p.add_argument("--frame-memory", type=_positive_int, default=d("frame_memory", 1))
    p.add_argument("--annotate", action="store_true")
    p.add_argument("--out-dir", default="detections")
    p.set_defaults(handler=_cmd_detect)

    p = sub.add_parser("map-build", help="build an occupancy map from a replay script")
    p.add_argument("replay_jsonl", help="JSON lines: {frame, forward_cm, rotate_deg}")
    p.add_argument("--method", choices=("otsu", "kmeans", "watershed"),
                   default=d("method", "otsu"))
    p.add_argument("--cell-cm", type=_positive_float, default=d("cell_cm", 2.0))
    p.add_argument("--blur-passes", type=_nonneg_int, default=d("blur_passes", 1))
    p.add_argument("--patch-width-cm", type=_positive_float, default=d("patch_width_cm", 60.0))
    p.add_argument("--patch-depth-cm", type=_positive_float, default=d("patch_depth_cm", 40.0))
    p.add_argument("--patch-offset-cm", type=_positive_float, default=d("patch_offset_cm", 10.0))
    p.add_argument("--out", default="map.rmap")
    p.set_defaults(handler=_cmd_map_build)

    p = sub.add_parser("localize", help="match a partial map onto a complete map")
    p.add_argument("global_map")
    p.add_argument("partial_map")
    p.add_argument("--min-known", type=_positive_int, default=d("min_known", 50))
    p.add_argument("--min-score", dest="localize_min_score", type=_nonneg_float,
                   default=d("localize_min_score", 0.6))
    p.add_argument("--min-overlap-frac", type=_nonneg_float,
                   default=d("min_overlap_frac", 0.5))
    p.add_argument("--out", default="pose.json")
    p.set_defaults(handler=_cmd_localize)

    p = sub.add_parser("smooth", help="smooth (and optionally bin) a steering-angle series")
    p.add_argument("angles_csv", help="CSV with header frame_id,angle_deg")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=d("lam", 5.0))
    p.add_argument("--bin-width", type=_nonneg_float, default=d("bin_width", 0.0),
                   help="if > 0, snap the smoothed angles to this bin width")
    p.add_argument("--out", default="smoothed.csv")
    p.set_defaults(handler=_cmd_smooth)

    return parser


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("ascii")


def _cmd_calibrate(args) -> dict:
    model = calibrate_from_image(load_pnm(args.image), args.distance_cm, args.length_cm,
                                 edge_threshold=args.edge_threshold)
    return {Path(args.out): _json_bytes(model.to_dict())}


def _load_markers(path, shape):
    from .segmentation import LabelMask

    seeds = load_pnm(path)
    if seeds.channels != 1 or seeds.pixels.shape != shape:
        raise ValueError("marker image must be P5 with the same dimensions as the input")
    return LabelMask(seeds.pixels.astype(np.int32), num_labels=int(seeds.pixels.max()) + 1)


def _cmd_segment(args) -> dict:
    img = load_pnm(args.image)
    cfg = SegmentConfig(blur_passes=args.blur_passes, kmeans_k=args.k)
    markers = None
    if args.markers:
        gray_shape = img.pixels.shape[:2]
        markers = _load_markers(args.markers, gray_shape)
    mask = segment_floor(img, args.method, cfg, markers=markers)
    out_mask = Raster((mask.labels * 255 // max(mask.num_labels - 1, 1)).astype(np.uint8))
    sidecar = {
        "num_labels": mask.num_labels,
        "method": args.method,
        "params": {"blur_passes": args.blur_passes, "k": args.k},
    }
    return {Path(args.out_mask): write_pnm(out_mask),
            Path(args.out_json): _json_bytes(sidecar)}


def _side_dict(side) -> dict:
    return {"x0": side.x0, "y0": side.y0, "x1": side.x1, "y1": side.y1, "valid": side.valid}


def _draw_segment(pixels, side, color):
    h, w = pixels.shape[:2]
    steps = int(max(abs(side.x1 - side.x0), abs(side.y1 - side.y0))) * 2 + 1
    for t in np.linspace(0.0, 1.0, steps):
        x = int(round(side.x0 + t * (side.x1 - side.x0)))
        y = int(round(side.y0 + t * (side.y1 - side.y0)))
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if 0 <= y + dy < h and 0 <= x + dx < w:
                    pixels[y + dy, x + dx] = color


def _cmd_lanes(args) -> dict:
    frame = load_pnm(args.image)
    cfg = LaneConfig(horizon_frac=args.horizon_frac, top_width_frac=args.top_width_frac,
                     edge_threshold=args.edge_threshold, min_votes=args.min_votes,
                     blur_passes=args.blur_passes)
    lane = detect_lane(frame, cfg)
    outputs = {Path(args.out): _json_bytes({"left": _side_dict(lane.left),
                                            "right": _side_dict(lane.right)})}
    if args.out_image:
        annotated = frame.pixels.copy()
        color = np.array([255, 0, 0], dtype=np.uint8) if frame.channels == 3 else np.uint8(255)
        for side in (lane.left, lane.right):
            if side.valid:
                _draw_segment(annotated, side, color)
        outputs[Path(args.out_image)] = write_pnm(Raster(annotated))
    return outputs


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(hog=HogParams(cell_px=args.hog_cell, bins=args.hog_bins,
                                       block_cells=args.hog_block_cells,
                                       per_channel=args.hog_per_channel),
                         hist_bins=args.hist_bins, spatial_px=args.spatial_px)


def _cmd_extract(args) -> dict:
    cfg = _feature_config(args)
    rows = []
    labels_text = Path(args.labels_csv).read_text().strip()
    if not labels_text:
        raise ValueError("labels CSV is empty")
    layout = None
    for line in labels_text.splitlines():
        name, _, label = line.strip().partition(",")
        if label not in ("0", "1"):
            raise ValueError(f"label for {name!r} must be 0 or 1, got {label!r}")
        fv = extract_features(load_pnm(Path(args.patch_dir) / name), cfg)
        layout = fv.layout
        rows.append(label + "," + ",".join(repr(float(v)) for v in fv.values))
    outputs = {Path(args.out): ("\n".join(rows) + "\n").encode("ascii")}
    layout_path = args.layout_json or str(Path(args.out).with_suffix(".layout.json"))
    outputs[Path(layout_path)] = _json_bytes({k: list(v) for k, v in layout.items()})
    return outputs


def _read_features_csv(path) -> tuple:
    text = Path(path).read_text().strip()
    if not text:
        raise ValueError("features CSV is empty")
    labels, rows = [], []
    for line in text.splitlines():
        parts = line.split(",")
        labels.append(float(parts[0]))
        rows.append([float(v) for v in parts[1:]])
    return np.asarray(rows, dtype=np.float64), np.asarray(labels)


def _cmd_train(args) -> dict:
    X, y = _read_features_csv(args.features_csv)
    model = svm_train(X, y, lambda_=args.lam, epochs=args.epochs, seed=args.seed)
    return {Path(args.out): _json_bytes(model_to_dict(model))}


def _bands_from_config(raw) -> tuple:
    try:
        return tuple(BandConfig(y_top=int(b["y_top"]), y_bottom=int(b["y_bottom"]),
                                window_px=int(b["window_px"]), stride_px=int(b["stride_px"]))
                     for b in raw)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad bands configuration: {exc}") from None


def _cmd_detect(args) -> dict:
    frame_paths = sorted(Path(args.frame_dir).glob("*.pnm"))
    if not frame_paths:
        raise ValueError(f"no .pnm frames found in {args.frame_dir}")
    frames = [load_pnm(p) for p in frame_paths]
    w, h = frames[0].width, frames[0].height
    if any(f.width != w or f.height != h for f in frames):
        raise ValueError("all frames must share one size")
    model = model_from_dict(json.loads(Path(args.model_json).read_text()))
    bands = _bands_from_config(args.bands) if getattr(args, "bands", None) else DEFAULT_BANDS
    try:
        plan = plan_windows(w, h, bands)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = DetectorConfig(min_score=args.min_score, frame_memory=args.frame_memory)
    fused = detect_sequence(frames, model, plan, cfg)
    outputs = {}
    out_dir = Path(args.out_dir)
    for path, frame, boxes in zip(frame_paths, frames, fused):
        record = {"frame": path.stem,
                  "boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h, "score": b.score}
                            for b in boxes]}
        outputs[out_dir / f"{path.stem}.json"] = _json_bytes(record)
        if args.annotate:
            outputs[out_dir / f"{path.stem}.pnm"] = write_pnm(draw_boxes(frame, boxes))
    return outputs


def _cmd_map_build(args) -> dict:
    replay_path = Path(args.replay_jsonl)
    base = replay_path.parent
    cfg = ExploreConfig(method=args.method,
                        seg=SegmentConfig(blur_passes=args.blur_passes),
                        patch_width_cm=args.patch_width_cm,
                        patch_depth_cm=args.patch_depth_cm,
                        patch_offset_cm=args.patch_offset_cm)
    world = OccupancyMap.empty(args.cell_cm)
    pose = Pose(0.0, 0.0, 0.0)
    lines = replay_path.read_text().strip()
    if not lines:
        raise ValueError("replay script is empty")
    for line in lines.splitlines():
        step = json.loads(line)
        frame = load_pnm(base / step["frame"])
        world, pose = explore_step(world, pose, frame,
                                   float(step["forward_cm"]), float(step["rotate_deg"]), cfg)
    return {Path(args.out): map_to_bytes(world)}


def _cmd_localize(args) -> dict:
    global_map = map_from_bytes(Path(args.global_map).read_bytes())
    partial = map_from_bytes(Path(args.partial_map).read_bytes())
    cfg = LocalizeConfig(min_known=args.min_known, min_score=args.localize_min_score,
                         min_overlap_frac=args.min_overlap_frac)
    result = localize(global_map, partial, cfg)
    record = {"x": result.pose.x, "y": result.pose.y, "theta": result.pose.theta,
              "score": result.score}
    return {Path(args.out): _json_bytes(record)}


def _read_angles_csv(path) -> AngleSeries:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].strip() != "frame_id,angle_deg":
        raise ValueError("angles CSV must start with header 'frame_id,angle_deg'")
    ids, angles = [], []
    for line in lines[1:]:
        frame_id, _, angle = line.strip().partition(",")
        ids.append(frame_id)
        angles.append(float(angle))
    return AngleSeries(np.asarray(angles), tuple(ids))


def _cmd_smooth(args) -> dict:
    series = _read_angles_csv(args.angles_csv)
    smoothed = smooth_series(series, args.lam)
    values = smoothed.angles
    if args.bin_width > 0:
        values = np.array([bin_angle(a, args.bin_width) for a in values])
    body = "frame_id,angle_deg\n" + "".join(
        f"{fid},{repr(float(a))}\n" for fid, a in zip(smoothed.frame_ids, values))
    return {Path(args.out): body.encode("ascii")}


def run(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    defaults = {}
    if known.config:
        try:
            defaults = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        if not isinstance(defaults, dict) or not set(defaults) <= _CONFIG_KEYS:
            bad = sorted(set(defaults) - _CONFIG_KEYS) if isinstance(defaults, dict) else defaults
            print(f"config error: unknown keys {bad}", file=sys.stderr)
            return 2

    parser = _build_parser(defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.bands = defaults.get("bands")

    try:
        outputs = args.handler(args)
    except UsageError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for path, data in outputs.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
