"""Patch descriptors for car / non-car classification: oriented-gradient
histograms, per-channel color histograms, and downsampled raw pixels.
"""

from dataclasses import dataclass, field

import numpy as np

from .raster import Raster, _resize_bilinear, to_grayscale

HOG_EPS = 1e-6
HOG_CLIP = 0.2


@dataclass(frozen=True)
class HogParams:
    cell_px: int = 8
    block_cells: int = 2
    bins: int = 9
    per_channel: bool = False

    def __post_init__(self):
        if self.cell_px < 2:
            raise ValueError("cell_px must be at least 2")
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if self.block_cells < 1:
            raise ValueError("block_cells must be at least 1")


@dataclass(frozen=True)
class FeatureConfig:
    hog: HogParams = field(default_factory=HogParams)
    hist_bins: int = 32
    spatial_px: int = 32
    patch_px: int = 64


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    layout: dict  # name -> (start, stop)


def _cell_gradients(arr: np.ndarray, cell: int):
    """Central-difference gradients computed independently inside each cell.

    Each cell replicates its own edges, so a cell's histogram never depends on
    pixels outside the cell; whole-image cell grids can then be sub-sampled for
    sliding windows with no boundary mismatch.
    """
    h, w = arr.shape
    ncy, ncx = h // cell, w // cell
    v = arr.reshape(ncy, cell, ncx, cell)
    gx = np.empty_like(v)
    gx[..., 1:cell - 1] = v[..., 2:] - v[..., :cell - 2]
    gx[..., 0] = v[..., 1] - v[..., 0]
    gx[..., cell - 1] = v[..., cell - 1] - v[..., cell - 2]
    gy = np.empty_like(v)
    gy[:, 1:cell - 1] = v[:, 2:] - v[:, :cell - 2]
    gy[:, 0] = v[:, 1] - v[:, 0]
    gy[:, cell - 1] = v[:, cell - 1] - v[:, cell - 2]
    return gx, gy


def hog_cell_histograms(arr: np.ndarray, p: HogParams) -> np.ndarray:
    """Orientation histograms per cell; shape (ncy, ncx, bins).

    Magnitudes vote into the two nearest orientation bins (bin centers at
    (i + 0.5) * 180/bins degrees, wrapping at 180) with linear interpolation.
    """
    cell = p.cell_px
    h, w = arr.shape
    if h % cell or w % cell:
        raise ValueError("patch dimensions must be divisible by the cell size")
    ncy, ncx = h // cell, w // cell
    gx, gy = _cell_gradients(arr.astype(np.float64), cell)
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0

    binw = 180.0 / p.bins
    t = ang / binw - 0.5
    b0 = np.floor(t).astype(np.int64)
    frac = t - b0
    lo = b0 % p.bins
    hi = (b0 + 1) % p.bins

    cell_ids = (np.arange(ncy)[:, None, None, None] * ncx
                + np.arange(ncx)[None, None, :, None])
    cell_ids = np.broadcast_to(cell_ids, mag.shape)
    size = ncy * ncx * p.bins
    hist = (np.bincount((cell_ids * p.bins + lo).ravel(),
                        weights=((1.0 - frac) * mag).ravel(), minlength=size)
            + np.bincount((cell_ids * p.bins + hi).ravel(),
                          weights=(frac * mag).ravel(), minlength=size))
    return hist.reshape(ncy, ncx, p.bins)


def hog_block_grid(arr: np.ndarray, p: HogParams) -> np.ndarray:
    """Sliding normalized blocks; shape (nby, nbx, block_cells**2 * bins).

    Each block is L2-normalized (eps 1e-6), clipped at 0.2, and renormalized.
    """
    hist = hog_cell_histograms(arr, p)
    ncy, ncx = hist.shape[:2]
    bc = p.block_cells
    if ncy < bc or ncx < bc:
        raise ValueError("patch too small for the requested block size")
    windows = np.lib.stride_tricks.sliding_window_view(hist, (bc, bc, p.bins))
    blocks = windows.reshape(ncy - bc + 1, ncx - bc + 1, bc * bc * p.bins).astype(np.float64)
    n1 = blocks / np.sqrt((blocks ** 2).sum(axis=-1, keepdims=True) + HOG_EPS ** 2)
    n2 = np.minimum(n1, HOG_CLIP)
    return n2 / np.sqrt((n2 ** 2).sum(axis=-1, keepdims=True) + HOG_EPS ** 2)


def hog(patch: Raster, p: HogParams = HogParams()) -> np.ndarray:
    """Oriented-gradient descriptor of a grayscale patch, blocks concatenated row-major."""
    if patch.channels != 1:
        raise ValueError("expected a grayscale raster")
    return hog_block_grid(patch.pixels.astype(np.float64), p).reshape(-1)


def color_histogram(patch: Raster, bins: int = 32) -> np.ndarray:
    """Per-channel intensity counts over [0, 255], concatenated R, G, B."""
    if patch.channels != 3:
        raise ValueError("expected an RGB raster")
    out = []
    for c in range(3):
        vals = patch.pixels[..., c].ravel().astype(np.int64)
        idx = np.minimum(vals * bins // 256, bins - 1)
        out.append(np.bincount(idx, minlength=bins).astype(np.float64))
    return np.concatenate(out)


def spatial_features(patch: Raster, size: int = 32) -> np.ndarray:
    """Bilinear thumbnail flattened row-major with channels interleaved."""
    return _resize_bilinear(patch.pixels, size, size).reshape(-1)


def feature_layout(cfg: FeatureConfig) -> dict:
    cells = cfg.patch_px // cfg.hog.cell_px
    nb = cells - cfg.hog.block_cells + 1
    hog_len = nb * nb * cfg.hog.block_cells ** 2 * cfg.hog.bins
    if cfg.hog.per_channel:
        hog_len *= 3
    hist_len = 3 * cfg.hist_bins
    spatial_len = cfg.spatial_px * cfg.spatial_px * 3
    return {
        "hog": (0, hog_len),
        "color_hist": (hog_len, hog_len + hist_len),
        "spatial": (hog_len + hist_len, hog_len + hist_len + spatial_len),
    }


def feature_length(cfg: FeatureConfig) -> int:
    return feature_layout(cfg)["spatial"][1]


def extract_features(patch: Raster, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Concatenated descriptor of a canonical RGB training patch."""
    if patch.channels != 3:
        raise ValueError(f"expected an RGB patch, got {patch.channels} channel(s)")
    if patch.width != cfg.patch_px or patch.height != cfg.patch_px:
        raise ValueError(
            f"expected a {cfg.patch_px}x{cfg.patch_px} patch, got {patch.width}x{patch.height}")
    if cfg.hog.per_channel:
        hog_part = np.concatenate([
            hog_block_grid(patch.pixels[..., c].astype(np.float64), cfg.hog).reshape(-1)
            for c in range(3)
        ])
    else:
        hog_part = hog(to_grayscale(patch), cfg.hog)
    values = np.concatenate([
        hog_part,
        color_histogram(patch, cfg.hist_bins),
        spatial_features(patch, cfg.spatial_px),
    ])
    return FeatureVector(values=values, layout=feature_layout(cfg))
