"""Occupancy-grid mapping: dead-reckoned poses, stitching segmented ground
patches into a growing tri-state map, and matching a partial map onto a
complete one to recover the rigid transform between their frames.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .raster import Raster, read_pnm, write_pnm
from .segmentation import LabelMask, SegmentConfig, segment_floor

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
_STATE_TO_PNM = np.array([128, 255, 0], dtype=np.uint8)


@dataclass(frozen=True)
class Pose:
    """Planar pose: x/y in cm, heading in degrees CCW from +x, normalized to [0, 360)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % 360.0)


@dataclass(eq=False)
class OccupancyMap:
    """Tri-state world grid; cell (row, col) covers a cell_cm square whose lower
    corner sits at origin + (col, row) * cell_cm. The grid only ever grows."""

    cell_cm: float
    origin: tuple  # (x_cm, y_cm) of cell (0, 0)
    grid: np.ndarray

    def __post_init__(self):
        if self.cell_cm <= 0:
            raise ValueError("cell size must be positive")
        g = np.asarray(self.grid, dtype=np.uint8)
        if g.ndim != 2:
            raise ValueError("grid must be 2-D")
        if g.size and g.max() > OCCUPIED:
            raise ValueError("grid cells must be unknown/free/occupied")
        self.grid = g
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @classmethod
    def empty(cls, cell_cm: float = 2.0) -> "OccupancyMap":
        return cls(cell_cm=cell_cm, origin=(0.0, 0.0),
                   grid=np.full((1, 1), UNKNOWN, dtype=np.uint8))

    def copy(self) -> "OccupancyMap":
        return OccupancyMap(cell_cm=self.cell_cm, origin=self.origin, grid=self.grid.copy())

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    def known_count(self) -> int:
        return int((self.grid != UNKNOWN).sum())

    def _expand_to(self, x_min, x_max, y_min, y_max):
        """Grow the grid (with unknown cells) until the world bbox is covered."""
        c = self.cell_cm
        ox, oy = self.origin
        j0 = math.floor((x_min - ox) / c)
        j1 = math.floor((x_max - ox) / c)
        i0 = math.floor((y_min - oy) / c)
        i1 = math.floor((y_max - oy) / c)
        pad_left = max(0, -j0)
        pad_right = max(0, j1 - (self.width - 1))
        pad_bottom = max(0, -i0)
        pad_top = max(0, i1 - (self.height - 1))
        if pad_left or pad_right or pad_bottom or pad_top:
            self.grid = np.pad(self.grid,
                               ((pad_bottom, pad_top), (pad_left, pad_right)),
                               constant_values=UNKNOWN)
            self.origin = (ox - pad_left * c, oy - pad_bottom * c)


@dataclass(frozen=True)
class GroundPatch:
    """Binary floor/obstacle view of the ground rectangle ahead of the robot."""

    mask: LabelMask
    width_cm: float
    depth_cm: float
    offset_cm: float

    def __post_init__(self):
        if self.width_cm <= 0 or self.depth_cm <= 0:
            raise ValueError("patch extent must be positive")
        if self.offset_cm <= 0:
            raise ValueError("patch offset must be positive")


def advance_pose(p: Pose, forward_cm: float, rotate_deg: float) -> Pose:
    """Rotate, then translate along the new heading."""
    theta = (p.theta + rotate_deg) % 360.0
    rad = math.radians(theta)
    return Pose(x=p.x + forward_cm * math.cos(rad),
                y=p.y + forward_cm * math.sin(rad),
                theta=theta)


def stitch_patch(m: OccupancyMap, pose: Pose, patch: GroundPatch) -> OccupancyMap:
    """Rigid-transform a ground patch into the map frame and fuse it in.

    Fusion per cell: occupied dominates forever, free fills in unknown, and
    unknown never overwrites anything. Returns a new map; the input is untouched.
    """
    out = m.copy()
    mask = patch.mask.labels
    mh, mw = mask.shape
    rad = math.radians(pose.theta)
    cos_t, sin_t = math.cos(rad), math.sin(rad)

    corners_robot = [(patch.offset_cm, -patch.width_cm / 2.0),
                     (patch.offset_cm, patch.width_cm / 2.0),
                     (patch.offset_cm + patch.depth_cm, -patch.width_cm / 2.0),
                     (patch.offset_cm + patch.depth_cm, patch.width_cm / 2.0)]
    corners = [(pose.x + cos_t * rx - sin_t * ry, pose.y + sin_t * rx + cos_t * ry)
               for rx, ry in corners_robot]
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    out._expand_to(min(xs), max(xs), min(ys), max(ys))

    c = out.cell_cm
    ox, oy = out.origin
    j0 = max(0, math.floor((min(xs) - ox) / c))
    j1 = min(out.width - 1, math.floor((max(xs) - ox) / c))
    i0 = max(0, math.floor((min(ys) - oy) / c))
    i1 = min(out.height - 1, math.floor((max(ys) - oy) / c))

    jj, ii = np.meshgrid(np.arange(j0, j1 + 1), np.arange(i0, i1 + 1))
    wx = ox + (jj + 0.5) * c
    wy = oy + (ii + 0.5) * c
    dx = wx - pose.x
    dy = wy - pose.y
    rx = cos_t * dx + sin_t * dy
    ry = -sin_t * dx + cos_t * dy

    col = np.floor((patch.width_cm / 2.0 - ry) / patch.width_cm * mw).astype(np.int64)
    row = mh - 1 - np.floor((rx - patch.offset_cm) / patch.depth_cm * mh).astype(np.int64)
    valid = (col >= 0) & (col < mw) & (row >= 0) & (row < mh)

    state = np.full(valid.shape, UNKNOWN, dtype=np.uint8)
    state[valid] = np.where(mask[row[valid], col[valid]] == 0, FREE, OCCUPIED)

    sub = out.grid[i0:i1 + 1, j0:j1 + 1]
    sub[(state == FREE) & (sub == UNKNOWN)] = FREE
    sub[state == OCCUPIED] = OCCUPIED
    return out


def _rot90_map(m: OccupancyMap, quarter_turns: int) -> OccupancyMap:
    """Exact rotation by multiples of 90 degrees CCW about the map frame origin."""
    out = m.copy()
    for _ in range(quarter_turns % 4):
        ox, oy = out.origin
        h = out.height
        # world (x, y) -> (-y, x); cell (i, j) -> (row j, col h-1-i)
        out = OccupancyMap(cell_cm=out.cell_cm,
                           origin=(-oy - h * out.cell_cm, ox),
                           grid=out.grid.T[:, ::-1].copy())
    return out


def _rotate_map(m: OccupancyMap, deg: float) -> OccupancyMap:
    deg = deg % 360.0
    if abs(deg - round(deg)) < 1e-9 and round(deg) % 90 == 0:
        return _rot90_map(m, int(round(deg)) // 90)
    c = m.cell_cm
    ii, jj = np.nonzero(m.grid != UNKNOWN)
    if len(ii) == 0:
        return m.copy()
    cx = m.origin[0] + (jj + 0.5) * c
    cy = m.origin[1] + (ii + 0.5) * c
    rad = math.radians(deg)
    rx = math.cos(rad) * cx - math.sin(rad) * cy
    ry = math.sin(rad) * cx + math.cos(rad) * cy
    origin = (rx.min() - 0.5 * c, ry.min() - 0.5 * c)
    col = np.floor((rx - origin[0]) / c).astype(np.int64)
    row = np.floor((ry - origin[1]) / c).astype(np.int64)
    grid = np.full((row.max() + 1, col.max() + 1), UNKNOWN, dtype=np.uint8)
    states = m.grid[ii, jj]
    free = states == FREE
    grid[row[free], col[free]] = FREE
    occ = states == OCCUPIED
    grid[row[occ], col[occ]] = OCCUPIED  # occupied wins on collisions
    return OccupancyMap(cell_cm=c, origin=origin, grid=grid)


def _fft_xcorr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full 2-D cross-correlation of small 0/1 grids, made exact by rounding.

    out[dy + hb - 1, dx + wb - 1] = sum over (i, j) of a[i+dy, j+dx] * b[i, j].
    """
    sh = (a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1)
    fa = np.fft.rfft2(a, sh)
    fb = np.fft.rfft2(b[::-1, ::-1], sh)
    cc = np.fft.irfft2(fa * fb, sh)
    return np.rint(cc).astype(np.int64)


@dataclass(frozen=True)
class LocalizeConfig:
    min_known: int = 50
    min_score: float = 0.6
    wall_min_votes: int = 5
    top_angles: int = 3
    # placements are scored only where at least this fraction of the partial's
    # known cells lands on known global cells (floored by min_known); sliver
    # overlaps would otherwise win on luck, and frontier placements by hiding
    # their distinctive cells over unexplored territory
    min_overlap_frac: float = 0.5


@dataclass(frozen=True)
class LocalizeResult:
    pose: Pose
    score: float


def _wall_angles(m: OccupancyMap, cfg: LocalizeConfig) -> list:
    from .geometry import hough_lines

    occ = m.grid == OCCUPIED
    if not occ.any():
        return []
    raster = Raster((occ * 255).astype(np.uint8))
    angles = []
    for ln in hough_lines(raster, min_votes=cfg.wall_min_votes):
        if ln.theta_deg not in angles:
            angles.append(ln.theta_deg)
        if len(angles) >= cfg.top_angles:
            break
    return angles


def _candidate_rotations(global_map, partial, cfg) -> list:
    cands = {0, 90, 180, 270}
    for tg in _wall_angles(global_map, cfg):
        for tp in _wall_angles(partial, cfg):
            d = (tg - tp) % 180.0
            cands.add(int(round(d)) % 360)
            cands.add((int(round(d)) + 180) % 360)
    return sorted(cands)


def localize(global_map: OccupancyMap, partial: OccupancyMap,
             cfg: LocalizeConfig = LocalizeConfig()) -> LocalizeResult:
    """Find the rigid transform placing the partial map onto the global map.

    Candidate rotations come from differences of the dominant wall angles of
    the two maps (plus quarter-turn fallbacks); for each, every translation at
    cell resolution is scored as matching / overlapping known cells. Ties keep
    the smallest (rotation, dy, dx), so the search is fully deterministic.
    """
    if partial.known_count() < cfg.min_known:
        raise ValueError(
            f"insufficient map content: {partial.known_count()} known cells, "
            f"need {cfg.min_known}")
    if abs(global_map.cell_cm - partial.cell_cm) > 1e-9:
        raise ValueError("maps must share one cell size")
    min_overlap = max(cfg.min_known,
                      int(math.ceil(cfg.min_overlap_frac * partial.known_count())))

    kg = (global_map.grid != UNKNOWN).astype(np.float64)
    fg = (global_map.grid == FREE).astype(np.float64)
    og = (global_map.grid == OCCUPIED).astype(np.float64)

    best_score = -1.0
    best = None
    for rot in _candidate_rotations(global_map, partial, cfg):
        r = _rotate_map(partial, rot)
        kp = (r.grid != UNKNOWN).astype(np.float64)
        if not kp.any():
            continue
        overlap = _fft_xcorr(kg, kp)
        match = (_fft_xcorr(fg, (r.grid == FREE).astype(np.float64))
                 + _fft_xcorr(og, (r.grid == OCCUPIED).astype(np.float64)))
        valid = overlap >= min_overlap
        if not valid.any():
            continue
        scores = np.where(valid, match / np.maximum(overlap, 1), -1.0)
        idx = int(np.argmax(scores))
        score = float(scores.flat[idx])
        if score > best_score:
            ay, ax = divmod(idx, scores.shape[1])
            dy = ay - (r.height - 1)
            dx = ax - (r.width - 1)
            c = global_map.cell_cm
            best = Pose(x=global_map.origin[0] + dx * c - r.origin[0],
                        y=global_map.origin[1] + dy * c - r.origin[1],
                        theta=float(rot))
            best_score = score

    if best is None or best_score < cfg.min_score:
        raise ValueError(f"ambiguous localization: best score {max(best_score, 0.0):.3f} "
                         f"below {cfg.min_score}")
    return LocalizeResult(pose=best, score=best_score)


@dataclass(frozen=True)
class ExploreConfig:
    method: str = "otsu"
    seg: SegmentConfig = field(default_factory=SegmentConfig)
    patch_width_cm: float = 60.0
    patch_depth_cm: float = 40.0
    patch_offset_cm: float = 10.0


def explore_step(m: OccupancyMap, pose: Pose, frame: Raster,
                 forward_cm: float, rotate_deg: float,
                 cfg: ExploreConfig = ExploreConfig()):
    """Segment the ground view, stitch it at the current pose, then move."""
    mask = segment_floor(frame, cfg.method, cfg.seg)
    patch = GroundPatch(mask=mask, width_cm=cfg.patch_width_cm,
                        depth_cm=cfg.patch_depth_cm, offset_cm=cfg.patch_offset_cm)
    new_map = stitch_patch(m, pose, patch)
    return new_map, advance_pose(pose, forward_cm, rotate_deg)


def map_to_bytes(m: OccupancyMap) -> bytes:
    """One JSON header line, then the grid as P5 (unknown=128, free=255, occupied=0)."""
    header = json.dumps({"cell_cm": m.cell_cm, "origin": list(m.origin),
                         "width": m.width, "height": m.height}, sort_keys=True)
    body = write_pnm(Raster(_STATE_TO_PNM[m.grid]))
    return header.encode("ascii") + b"\n" + body


def map_from_bytes(data: bytes) -> OccupancyMap:
    newline = data.find(b"\n")
    if newline < 0:
        raise ValueError("malformed map file: missing header line")
    try:
        header = json.loads(data[:newline].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed map header: {exc}") from None
    raster = read_pnm(data[newline + 1:])
    if raster.width != header["width"] or raster.height != header["height"]:
        raise ValueError("map header dimensions do not match the grid body")
    levels = raster.pixels
    grid = np.full(levels.shape, 255, dtype=np.uint8)
    for state, level in enumerate(_STATE_TO_PNM):
        grid[levels == level] = state
    if grid.max() > OCCUPIED:
        raise ValueError("invalid map cell value; expected 0, 128, or 255")
    return OccupancyMap(cell_cm=float(header["cell_cm"]),
                        origin=tuple(header["origin"]), grid=grid)
