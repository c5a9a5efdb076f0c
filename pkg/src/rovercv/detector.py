"""Multi-scale sliding-window car detection.

Each band of the frame is rescaled so its window size maps onto the canonical
training patch, the descriptor cell grid is computed once per scaled band, and
every window reuses the aligned sub-array. Overlapping raw detections are fused
by summing Gaussian splats into a heatmap and thresholding at half its peak.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import LinearModel, svm_score_many
from .features import FeatureConfig, color_histogram, hog_block_grid, spatial_features
from .geometry import label_components
from .raster import Raster, resize_bilinear, to_grayscale

# sigma per box chosen so the half-maximum contour of one splat spans exactly
# the box extent; threshold_boxes(heatmap_fuse([box])) then returns the box.
SPLAT_SIGMA_FACTOR = 0.5 / math.sqrt(2.0 * math.log(2.0))
SPLAT_TRUNCATE_SIGMAS = 3.0


@dataclass(frozen=True)
class BandConfig:
    y_top: int
    y_bottom: int
    window_px: int
    stride_px: int


# Default band layout for 1280x720 road frames; enumerates 697 windows total.
DEFAULT_BANDS = (
    BandConfig(400, 496, 64, 16),
    BandConfig(392, 584, 96, 24),
    BandConfig(384, 640, 128, 32),
    BandConfig(368, 656, 192, 96),
    BandConfig(360, 680, 320, 160),
)


@dataclass(frozen=True)
class WindowPlan:
    frame_w: int
    frame_h: int
    bands: tuple
    counts: tuple  # per band (nx, ny)
    total_windows: int


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    w: int
    h: int
    score: float


@dataclass(frozen=True, eq=False)
class Heatmap:
    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DetectorConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    min_score: float = 0.0
    frame_memory: int = 1


def plan_windows(frame_w: int, frame_h: int, bands, cell_px: int = 8,
                 canonical_px: int = 64) -> WindowPlan:
    """Validate a band layout and count its windows in closed form."""
    bands = tuple(bands)
    if not bands:
        raise ValueError("at least one band is required")
    counts = []
    total = 0
    for band in bands:
        h_band = band.y_bottom - band.y_top
        if band.y_top < 0 or band.y_bottom > frame_h or h_band <= 0:
            raise ValueError(f"band {band} lies outside the {frame_w}x{frame_h} frame")
        if band.window_px <= 0 or band.window_px > h_band or band.window_px > frame_w:
            raise ValueError(f"band {band}: window does not fit")
        if band.stride_px <= 0:
            raise ValueError(f"band {band}: stride must be positive")
        if band.stride_px % cell_px:
            raise ValueError(f"band {band}: stride must be a multiple of the {cell_px} px cell")
        scaled_stride, rem = divmod(band.stride_px * canonical_px, band.window_px)
        if rem or scaled_stride % cell_px:
            raise ValueError(
                f"band {band}: stride does not stay cell-aligned at the {canonical_px} px scale")
        nx = (frame_w - band.window_px) // band.stride_px + 1
        ny = (h_band - band.window_px) // band.stride_px + 1
        counts.append((nx, ny))
        total += nx * ny
    return WindowPlan(frame_w=frame_w, frame_h=frame_h, bands=bands,
                      counts=tuple(counts), total_windows=total)


def iter_windows(plan: WindowPlan):
    """Window placements in deterministic (band, y, x) order."""
    for b, (band, (nx, ny)) in enumerate(zip(plan.bands, plan.counts)):
        for i in range(ny):
            for j in range(nx):
                yield b, band.y_top + i * band.stride_px, j * band.stride_px


def _scaled_band(frame: Raster, band: BandConfig, nx: int, ny: int, canonical: int):
    """Rescale one band crop so its window size becomes the canonical patch size."""
    crop = frame.pixels[band.y_top:band.y_bottom]
    h_band = band.y_bottom - band.y_top
    ss = band.stride_px * canonical // band.window_px
    ws = max(int(round(frame.width * canonical / band.window_px)), (nx - 1) * ss + canonical)
    hs = max(int(round(h_band * canonical / band.window_px)), (ny - 1) * ss + canonical)
    return resize_bilinear(Raster(crop), ws, hs), ss


def iter_window_features(frame: Raster, plan: WindowPlan, cfg: DetectorConfig = DetectorConfig()):
    """Yield ((band, x, y), feature vector) per window, sharing one cell grid per band.

    The block grid of the whole scaled band is computed once; every window takes
    its aligned block sub-array, which equals per-window extraction exactly
    because cell histograms never look outside their own cell.
    """
    if frame.channels != 3:
        raise ValueError("detection frames must be RGB")
    fc = cfg.features
    p = fc.hog
    canonical = fc.patch_px
    cell = p.cell_px
    win_blocks = canonical // cell - p.block_cells + 1

    for b, (band, (nx, ny)) in enumerate(zip(plan.bands, plan.counts)):
        scaled, ss = _scaled_band(frame, band, nx, ny, canonical)
        if p.per_channel:
            planes = [scaled.pixels[..., c].astype(np.float64) for c in range(3)]
        else:
            planes = [to_grayscale(scaled).pixels.astype(np.float64)]
        block_grids = [hog_block_grid(plane, p) for plane in planes]
        for i in range(ny):
            for j in range(nx):
                ys, xs = i * ss, j * ss
                cy, cx = ys // cell, xs // cell
                hog_part = np.concatenate([
                    g[cy:cy + win_blocks, cx:cx + win_blocks].reshape(-1) for g in block_grids
                ])
                window = Raster(scaled.pixels[ys:ys + canonical, xs:xs + canonical])
                fv = np.concatenate([
                    hog_part,
                    color_histogram(window, fc.hist_bins),
                    spatial_features(window, fc.spatial_px),
                ])
                yield (b, j * band.stride_px, band.y_top + i * band.stride_px), fv


def detect_cars(frame: Raster, model: LinearModel, plan: WindowPlan,
                cfg: DetectorConfig = DetectorConfig()) -> list:
    """Score every planned window; keep those above cfg.min_score, in plan order."""
    placements = []
    rows = []
    for (b, x, y), fv in iter_window_features(frame, plan, cfg):
        placements.append((b, x, y))
        rows.append(fv)
    if not rows:
        return []
    scores = svm_score_many(model, np.vstack(rows))
    dets = []
    for (b, x, y), score in zip(placements, scores):
        if score > cfg.min_score:
            side = plan.bands[b].window_px
            dets.append(Detection(x=x, y=y, w=side, h=side, score=float(score)))
    return dets


def heatmap_fuse(dets, frame_w: int, frame_h: int) -> Heatmap:
    """Accumulate one unit-amplitude Gaussian splat per detection box."""
    heat = np.zeros((frame_h, frame_w), dtype=np.float64)
    for det in dets:
        if det.w <= 0 or det.h <= 0 or det.x < 0 or det.y < 0 \
                or det.x + det.w > frame_w or det.y + det.h > frame_h:
            raise ValueError(f"detection box {det} out of bounds")
        cx = det.x + (det.w - 1) / 2.0
        cy = det.y + (det.h - 1) / 2.0
        sx = det.w * SPLAT_SIGMA_FACTOR
        sy = det.h * SPLAT_SIGMA_FACTOR
        x_lo = max(0, int(math.ceil(cx - SPLAT_TRUNCATE_SIGMAS * sx)))
        x_hi = min(frame_w - 1, int(math.floor(cx + SPLAT_TRUNCATE_SIGMAS * sx)))
        y_lo = max(0, int(math.ceil(cy - SPLAT_TRUNCATE_SIGMAS * sy)))
        y_hi = min(frame_h - 1, int(math.floor(cy + SPLAT_TRUNCATE_SIGMAS * sy)))
        gx = np.exp(-((np.arange(x_lo, x_hi + 1) - cx) ** 2) / (2.0 * sx * sx))
        gy = np.exp(-((np.arange(y_lo, y_hi + 1) - cy) ** 2) / (2.0 * sy * sy))
        heat[y_lo:y_hi + 1, x_lo:x_hi + 1] += np.outer(gy, gx)
    return Heatmap(values=heat)


def threshold_boxes(heatmap: Heatmap) -> list:
    """Boxes from the connected regions where heat >= half its peak."""
    values = heatmap.values
    peak = float(values.max()) if values.size else 0.0
    if peak <= 0.0:
        return []
    labels, n = label_components(values >= 0.5 * peak, connectivity=8)
    boxes = []
    for cid in range(n):
        ys, xs = np.nonzero(labels == cid)
        x0, y0 = int(xs.min()), int(ys.min())
        boxes.append(Detection(
            x=x0, y=y0, w=int(xs.max()) - x0 + 1, h=int(ys.max()) - y0 + 1,
            score=float(values[ys, xs].max()),
        ))
    boxes.sort(key=lambda d: (-d.score, d.y, d.x))
    return boxes


def detect_and_fuse(frame: Raster, model: LinearModel, plan: WindowPlan,
                    cfg: DetectorConfig = DetectorConfig()) -> list:
    dets = detect_cars(frame, model, plan, cfg)
    return threshold_boxes(heatmap_fuse(dets, frame.width, frame.height))


def detect_sequence(frames, model: LinearModel, plan: WindowPlan,
                    cfg: DetectorConfig = DetectorConfig()) -> list:
    """Per-frame fused boxes, summing heatmaps over the last cfg.frame_memory frames."""
    memory = []
    fused = []
    for frame in frames:
        dets = detect_cars(frame, model, plan, cfg)
        memory.append(heatmap_fuse(dets, frame.width, frame.height).values)
        if len(memory) > cfg.frame_memory:
            memory.pop(0)
        combined = memory[0].copy()
        for extra in memory[1:]:
            combined += extra
        fused.append(threshold_boxes(Heatmap(values=combined)))
    return fused


def draw_boxes(frame: Raster, dets, thickness: int = 3) -> Raster:
    """Burn detection borders into a copy of the frame (red for RGB, white for gray)."""
    out = frame.pixels.copy()
    color = np.array([255, 0, 0], dtype=np.uint8) if frame.channels == 3 else np.uint8(255)
    for det in dets:
        x0, y0 = max(det.x, 0), max(det.y, 0)
        x1, y1 = min(det.x + det.w, frame.width), min(det.y + det.h, frame.height)
        if x1 <= x0 or y1 <= y0:
            continue
        t = thickness
        out[y0:min(y0 + t, y1), x0:x1] = color
        out[max(y1 - t, y0):y1, x0:x1] = color
        out[y0:y1, x0:min(x0 + t, x1)] = color
        out[y0:y1, max(x1 - t, x0):x1] = color
    return Raster(out)
