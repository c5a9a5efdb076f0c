import json

import numpy as np
import pytest

from scenes import (
    calibration_scene,
    car_patch,
    corridor_frame,
    floor_box_scene,
    noise_patch,
    road_frame,
    write_replay,
)
from rovercv.cli import run
from rovercv.mapping import OccupancyMap, map_to_bytes
from rovercv.raster import load_pnm, save_pnm

@pytest.fixture()
def calib_image(tmp_path):
    path = tmp_path / "book.pnm"
    save_pnm(path, calibration_scene())
    return path

def test_calibrate_writes_model(tmp_path, calib_image):
    out = tmp_path / "camera.json"
    code = run(["calibrate", str(calib_image), "--distance-cm", "70",
                "--length-cm", "20", "--out", str(out)])
    assert code == 0
    model = json.loads(out.read_text())
    assert set(model) == {"focal_px", "ref_length_cm", "ref_distance_cm", "ref_pixels"}
    assert model["focal_px"] == pytest.approx(120 * 70 / 20, rel=0.02)

def test_calibrate_rejects_bad_distance(tmp_path, calib_image, capsys):
    code = run(["calibrate", str(calib_image), "--distance-cm", "-5",
                "--length-cm", "20", "--out", str(tmp_path / "cam.json")])
    assert code == 2
    assert not (tmp_path / "cam.json").exists()

def test_segment_outputs_mask_and_sidecar(tmp_path):
    img, _ = floor_box_scene()
    src = tmp_path / "scene.pnm"
    save_pnm(src, img)
    mask_path = tmp_path / "mask.pnm"
    json_path = tmp_path / "mask.json"
    code = run(["segment", str(src), "--method", "otsu",
                "--out-mask", str(mask_path), "--out-json", str(json_path)])
    assert code == 0
    mask = load_pnm(mask_path)
    assert set(np.unique(mask.pixels)) <= {0, 255}
    sidecar = json.loads(json_path.read_text())
    assert sidecar["num_labels"] == 2 and sidecar["method"] == "otsu"

def test_segment_bogus_method_usage_error(tmp_path):
    img, _ = floor_box_scene()
    src = tmp_path / "scene.pnm"
    save_pnm(src, img)
    assert run(["segment", str(src), "--method", "bogus"]) == 2

def test_lanes_contract(tmp_path):
    frame, _ = road_frame()
    src = tmp_path / "frame.pnm"
    save_pnm(src, frame)
    out = tmp_path / "lane.json"
    annotated = tmp_path / "lane.pnm"
    code = run(["lanes", str(src), "--out", str(out), "--out-image", str(annotated)])
    assert code == 0
    lane = json.loads(out.read_text())
    assert set(lane) == {"left", "right"}
    assert set(lane["left"]) == {"x0", "y0", "x1", "y1", "valid"}
    assert lane["left"]["valid"] and lane["right"]["valid"]
    assert annotated.exists()

def _write_patches(tmp_path, n_cars=6, n_noise=6):
    rng = np.random.default_rng(0)
    patch_dir = tmp_path / "patches"
    patch_dir.mkdir()
    rows = []
    for i in range(n_cars):
        name = f"car_{i}.pnm"
        save_pnm(patch_dir / name, car_patch(rng))
        rows.append(f"{name},1")
    for i in range(n_noise):
        name = f"noise_{i}.pnm"
        save_pnm(patch_dir / name, noise_patch(rng))
        rows.append(f"{name},0")
    labels = tmp_path / "labels.csv"
    labels.write_text("\n".join(rows) + "\n")
    return patch_dir, labels

def test_extract_train_detect_chain(tmp_path):
    patch_dir, labels = _write_patches(tmp_path)
    feats = tmp_path / "features.csv"
    assert run(["extract", str(patch_dir), str(labels), "--out", str(feats)]) == 0
    assert feats.exists()
    layout = json.loads((tmp_path / "features.layout.json").read_text())
    assert layout["hog"] == [0, 1764]

    model_path = tmp_path / "model.json"
    assert run(["train", str(feats), "--out", str(model_path), "--epochs", "5"]) == 0
    model = json.loads(model_path.read_text())
    assert {"weights", "bias", "feat_mean", "feat_std", "lambda", "epochs", "seed"} <= set(model)

    frames = tmp_path / "frames"
    frames.mkdir()
    rng = np.random.default_rng(1)
    frame = rng.integers(0, 256, (128, 256, 3)).astype(np.uint8)
    frame[32:96, 64:128] = car_patch(rng).pixels
    from rovercv.raster import Raster

    save_pnm(frames / "000000.pnm", Raster(frame))
    cfg = tmp_path / "bands.json"
    cfg.write_text(json.dumps({"bands": [
        {"y_top": 32, "y_bottom": 96, "window_px": 64, "stride_px": 16}]}))
    det_dir = tmp_path / "detections"
    code = run(["--config", str(cfg), "detect", str(frames), str(model_path),
                "--min-score", "0.5", "--annotate", "--out-dir", str(det_dir)])
    assert code == 0
    record = json.loads((det_dir / "000000.json").read_text())
    assert record["frame"] == "000000"
    assert len(record["boxes"]) == 1
    assert (det_dir / "000000.pnm").exists()

def test_train_single_class_exits_one(tmp_path, capsys):
    feats = tmp_path / "feats.csv"
    rows = ["1," + ",".join(str(v) for v in np.arange(4) + i) for i in range(6)]
    feats.write_text("\n".join(rows) + "\n")
    out = tmp_path / "model.json"
    code = run(["train", str(feats), "--out", str(out)])
    assert code == 1
    assert "single-class" in capsys.readouterr().err
    assert not out.exists()

def test_map_build_and_localize(tmp_path):
    # L-shaped corridor: the bend breaks the translation symmetry a straight
    # corridor would have, so the cutout below localizes uniquely
    frames = [corridor_frame() for _ in range(10)]
    motions = [(20.0, 0.0)] * 5 + [(20.0, 90.0)] + [(20.0, 0.0)] * 4
    script = write_replay(tmp_path, frames, motions)
    map_path = tmp_path / "map.rmap"
    assert run(["map-build", str(script), "--out", str(map_path)]) == 0

    from rovercv.mapping import map_from_bytes

    world = map_from_bytes(map_path.read_bytes())
    # cut a window around the bend (robot turned at world (100, 0))
    corner_c = int((100.0 - world.origin[0]) / world.cell_cm)
    corner_r = int((0.0 - world.origin[1]) / world.cell_cm)
    r0 = max(0, min(corner_r - 20, world.height - 40))
    c0 = max(0, min(corner_c - 20, world.width - 40))
    partial = OccupancyMap(cell_cm=world.cell_cm, origin=(0.0, 0.0),
                           grid=world.grid[r0:r0 + 40, c0:c0 + 40].copy())
    partial_path = tmp_path / "partial.rmap"
    partial_path.write_bytes(map_to_bytes(partial))

    pose_path = tmp_path / "pose.json"
    code = run(["localize", str(map_path), str(partial_path), "--min-known", "50",
                "--min-overlap-frac", "0.9", "--out", str(pose_path)])
    assert code == 0
    pose = json.loads(pose_path.read_text())
    assert pose["score"] == 1.0
    assert pose["theta"] == 0.0
    assert pose["x"] == pytest.approx(world.origin[0] + c0 * world.cell_cm, abs=world.cell_cm)
    assert pose["y"] == pytest.approx(world.origin[1] + r0 * world.cell_cm, abs=world.cell_cm)

def test_smooth_round_trip(tmp_path):
    src = tmp_path / "angles.csv"
    src.write_text("frame_id,angle_deg\n" +
                   "".join(f"f{i},{a}\n" for i, a in enumerate([0, 0, 20, 20, 20])))
    out = tmp_path / "smoothed.csv"
    assert run(["smooth", str(src), "--lambda", "2.0", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "frame_id,angle_deg"
    values = [float(line.split(",")[1]) for line in lines[1:]]
    assert len(values) == 5
    assert values[0] > 0 and values[-1] < 20

def test_smooth_with_binning(tmp_path):
    src = tmp_path / "angles.csv"
    src.write_text("frame_id,angle_deg\nf0,3.1\nf1,-3.1\n")
    out = tmp_path / "smoothed.csv"
    assert run(["smooth", str(src), "--lambda", "0", "--bin-width", "2", "--out", str(out)]) == 0
    values = [float(line.split(",")[1]) for line in out.read_text().strip().splitlines()[1:]]
    assert values == [4.0, -4.0]

def test_unknown_subcommand_exits_two(capsys):
    assert run(["frobnicate"]) == 2

def test_missing_file_exits_one(tmp_path, capsys):
    code = run(["segment", str(tmp_path / "nope.pnm")])
    assert code == 1
    assert not (tmp_path / "mask.pnm").exists()

def test_bad_config_key_exits_two(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"made_up_key": 1}))
    assert run(["--config", str(cfg), "smooth", "whatever.csv"]) == 2

def test_config_provides_defaults(tmp_path):
    img, _ = floor_box_scene()
    src = tmp_path / "scene.pnm"
    save_pnm(src, img)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "kmeans", "k": 2}))
    json_path = tmp_path / "mask.json"
    code = run(["--config", str(cfg), "segment", str(src),
                "--out-mask", str(tmp_path / "mask.pnm"), "--out-json", str(json_path)])
    assert code == 0
    assert json.loads(json_path.read_text())["method"] == "kmeans"
