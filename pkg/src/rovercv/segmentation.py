"""Floor-vs-obstacle segmentation: Otsu thresholding, k-means clustering, and
marker-based watershed flooding behind one ``segment_floor`` entry point.
"""

import heapq
from dataclasses import dataclass
from itertools import count

import numpy as np

from .raster import GAUSSIAN_3x3, Raster, convolve3, sobel_magnitude, to_grayscale


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Per-pixel region labels; every label is a non-negative int below ``num_labels``."""

    labels: np.ndarray
    num_labels: int

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError("labels must be a 2-D grid")
        if self.num_labels < 1:
            raise ValueError("num_labels must be positive")
        if lab.size and (lab.min() < 0 or lab.max() >= self.num_labels):
            raise ValueError("labels must lie in [0, num_labels)")
        object.__setattr__(self, "labels", lab.astype(np.int32))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class OtsuResult:
    threshold: int
    between_class_variance: float


@dataclass(frozen=True)
class WatershedResult:
    """Flood labels plus the companion mask of pixels where two basins met."""

    regions: LabelMask
    lines: np.ndarray


@dataclass(frozen=True)
class SegmentConfig:
    blur_passes: int = 1
    kmeans_k: int = 2
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-4
    marker_dist_frac: float = 0.5


def otsu_from_histogram(hist) -> OtsuResult:
    """Threshold maximizing the between-class variance of a 256-bin histogram.

    Classes are split as below-t vs at-or-above-t; ties pick the smallest t.
    """
    counts = np.asarray(hist, dtype=np.float64)
    if counts.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    if np.count_nonzero(counts) < 2:
        raise ValueError("degenerate histogram: need at least two distinct values")
    total = counts.sum()
    cum_n = np.cumsum(counts)
    cum_m = np.cumsum(counts * np.arange(256, dtype=np.float64))
    # n0[t] / m0[t] describe the class of values strictly below t, for t in 0..254
    n0 = np.concatenate(([0.0], cum_n[:254]))
    m0 = np.concatenate(([0.0], cum_m[:254]))
    n1 = total - n0
    m1 = cum_m[-1] - m0
    valid = (n0 > 0) & (n1 > 0)
    mu0 = np.divide(m0, n0, out=np.zeros(255), where=valid)
    mu1 = np.divide(m1, n1, out=np.zeros(255), where=valid)
    var = np.where(valid, (n0 / total) * (n1 / total) * (mu0 - mu1) ** 2, 0.0)
    t = int(np.argmax(var))
    return OtsuResult(threshold=t, between_class_variance=float(var[t]))


def otsu_threshold(img: Raster) -> OtsuResult:
    """Otsu's optimal threshold for a grayscale raster."""
    if img.channels != 1:
        raise ValueError("expected a grayscale raster")
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    return otsu_from_histogram(hist)


def kmeans_points(points: np.ndarray, k: int, max_iter: int = 100, tol: float = 1e-4):
    """Lloyd iterations on row vectors.

    Seeds are spread evenly over the lexicographically sorted distinct points, so
    runs are deterministic without an RNG. Returns (labels, centers, sse_history)
    where labels are renumbered so center first-components ascend.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1:
        raise ValueError("k must be at least 1")
    distinct = np.unique(pts, axis=0)
    if k > len(distinct):
        raise ValueError(f"insufficient distinct pixels: k={k} but only {len(distinct)} distinct values")
    seed_idx = np.rint(np.linspace(0, len(distinct) - 1, k)).astype(int)
    centers = distinct[seed_idx].copy()

    history = []
    labels = np.zeros(len(pts), dtype=np.int64)
    prev_sse = np.inf
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        sse = float(d2[np.arange(len(pts)), labels].sum())
        history.append(sse)
        for j in range(k):
            members = pts[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
        if prev_sse - sse < tol:
            break
        prev_sse = sse

    order = np.lexsort(tuple(centers[:, c] for c in reversed(range(centers.shape[1]))))
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return remap[labels], centers[order], history


def kmeans_segment(img: Raster, k: int, max_iter: int = 100, tol: float = 1e-4) -> LabelMask:
    """Cluster pixel vectors (intensity or RGB) into k regions."""
    pts = img.pixels.reshape(-1, img.channels).astype(np.float64)
    labels, _, _ = kmeans_points(pts, k, max_iter=max_iter, tol=tol)
    return LabelMask(labels.reshape(img.height, img.width), num_labels=k)


_N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


def watershed_segment(img: Raster, markers: LabelMask) -> WatershedResult:
    """Priority-flood the image treated as terrain height, starting from marker seeds.

    Pixels pop in ascending (height, y, x, insertion order); each takes the
    smallest label among its already-labeled 4-neighbors, and is flagged as a
    watershed-line pixel when two different labels meet there.
    """
    if img.channels != 1:
        raise ValueError("expected a grayscale raster")
    if markers.labels.shape != img.pixels.shape:
        raise ValueError("marker dimensions must match the image")
    seeds = markers.labels
    if not (seeds > 0).any():
        raise ValueError("no markers")

    h, w = img.pixels.shape
    height = img.pixels
    labels = seeds.astype(np.int32).copy()
    lines = np.zeros((h, w), dtype=bool)
    ticket = count()
    heap = []

    for y, x in np.argwhere(seeds > 0):
        for dy, dx in _N4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] == 0:
                heapq.heappush(heap, (int(height[ny, nx]), int(ny), int(nx), next(ticket)))

    while heap:
        _, y, x, _ = heapq.heappop(heap)
        if labels[y, x] != 0:
            continue
        neighbor_labels = set()
        for dy, dx in _N4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] > 0:
                neighbor_labels.add(int(labels[ny, nx]))
        labels[y, x] = min(neighbor_labels)
        if len(neighbor_labels) > 1:
            lines[y, x] = True
        for dy, dx in _N4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] == 0:
                heapq.heappush(heap, (int(height[ny, nx]), int(ny), int(nx), next(ticket)))

    return WatershedResult(LabelMask(labels, num_labels=int(seeds.max()) + 1), lines)


def _distance_to_outside(region: np.ndarray) -> np.ndarray:
    """4-connected grid distance from each region cell to the nearest non-region cell."""
    dist = np.where(region, -1, 0).astype(np.int64)
    frontier = ~region
    d = 0
    while True:
        d += 1
        grown = np.zeros_like(frontier)
        grown[1:, :] |= frontier[:-1, :]
        grown[:-1, :] |= frontier[1:, :]
        grown[:, 1:] |= frontier[:, :-1]
        grown[:, :-1] |= frontier[:, 1:]
        newly = grown & (dist == -1)
        if not newly.any():
            break
        dist[newly] = d
        frontier = newly
    dist[dist == -1] = 0  # region with no outside at all; callers guarantee both classes
    return dist


def _derive_markers(gray: Raster, dist_frac: float):
    """Seed regions from the cores (distance-transform peaks) of the Otsu split.

    Returns the marker mask plus, per marker label, which side of the split it
    came from (0 = below threshold, 1 = at/above), so basins can be folded back
    into the two classes after flooding.
    """
    from .geometry import label_components

    t = otsu_threshold(gray).threshold
    fg = gray.pixels >= t
    seeds = np.zeros(gray.pixels.shape, dtype=np.int32)
    label_class = [0]
    next_label = 1
    for cls, region in ((1, fg), (0, ~fg)):
        if not region.any():
            continue
        dist = _distance_to_outside(region)
        core = region & (dist >= dist_frac * dist.max())
        comp_labels, n = label_components(core, connectivity=8)
        seeds[comp_labels >= 0] = comp_labels[comp_labels >= 0] + next_label
        label_class.extend([cls] * n)
        next_label += n
    return LabelMask(seeds, num_labels=next_label), np.asarray(label_class, dtype=np.int32)


def segment_floor(img: Raster, method: str, cfg: SegmentConfig = SegmentConfig(),
                  markers: LabelMask | None = None) -> LabelMask:
    """Binary floor/obstacle mask: 0 = floor, 1 = obstacle.

    The class containing the bottom-center anchor pixel is taken as floor,
    since that is where the robot stands. Watershed seeds may be supplied;
    otherwise they are derived from the cores of the Otsu split.
    """
    gray = to_grayscale(img) if img.channels == 3 else img
    for _ in range(cfg.blur_passes):
        gray = convolve3(gray, GAUSSIAN_3x3)

    if method == "otsu":
        t = otsu_threshold(gray).threshold
        labels = (gray.pixels >= t).astype(np.int32)
    elif method == "kmeans":
        labels = kmeans_segment(gray, cfg.kmeans_k, cfg.kmeans_max_iter, cfg.kmeans_tol).labels
    elif method == "watershed":
        label_class = None
        if markers is None:
            markers, label_class = _derive_markers(gray, cfg.marker_dist_frac)
        heights = sobel_magnitude(gray)
        labels = watershed_segment(heights, markers).regions.labels
        if label_class is not None:
            labels = label_class[labels]
    else:
        raise ValueError(f"unknown segmentation method {method!r}")

    anchor = labels[gray.height - 1, gray.width // 2]
    return LabelMask((labels != anchor).astype(np.int32), num_labels=2)
