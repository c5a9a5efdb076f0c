"""8-bit raster images, binary PNM (P5/P6) file I/O, and 3x3 filter kernels.

Every downstream stage (segmentation, lane finding, feature extraction,
detection) operates on these rasters. Pixels are stored row-major as numpy
uint8, shape (h, w) for grayscale or (h, w, 3) for RGB.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Raster:
    """Rectangular 8-bit image; ``pixels`` is (h, w) grayscale or (h, w, 3) RGB."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if not (px.ndim == 2 or (px.ndim == 3 and px.shape[2] == 3)):
            raise ValueError("raster pixels must have shape (h, w) or (h, w, 3)")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True, eq=False)
class Kernel3:
    """3x3 kernel with an explicit normalizing divisor (applied after the weighted sum)."""

    weights: np.ndarray
    divisor: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (3, 3):
            raise ValueError("kernel weights must be 3x3")
        if self.divisor == 0:
            raise ValueError("kernel divisor must be nonzero")
        object.__setattr__(self, "weights", w)


IDENTITY_3x3 = Kernel3([[0, 0, 0], [0, 1, 0], [0, 0, 0]])
GAUSSIAN_3x3 = Kernel3([[1, 2, 1], [2, 4, 2], [1, 2, 1]], divisor=16.0)
SOBEL_X = Kernel3([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]])
SOBEL_Y = Kernel3([[-1, -2, -1], [0, 0, 0], [1, 2, 1]])


def _require_gray(img: Raster):
    if img.channels != 1:
        raise ValueError("expected a grayscale raster")


def to_grayscale(img: Raster) -> Raster:
    """Luma conversion: y = round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]."""
    if img.channels == 1:
        raise ValueError("already grayscale")
    rgb = img.pixels.astype(np.float64)
    y = GRAY_WEIGHTS[0] * rgb[..., 0] + GRAY_WEIGHTS[1] * rgb[..., 1] + GRAY_WEIGHTS[2] * rgb[..., 2]
    return Raster(np.clip(np.rint(y), 0, 255).astype(np.uint8))


def _correlate3(arr: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Positional 3x3 weighted sum (no kernel flip); borders replicate the edge pixel."""
    h, w = arr.shape
    padded = np.pad(arr, 1, mode="edge")
    out = np.zeros((h, w), dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            coeff = weights[dy, dx]
            if coeff != 0.0:
                out += coeff * padded[dy:dy + h, dx:dx + w]
    return out


def convolve3(img: Raster, kernel: Kernel3) -> Raster:
    """Apply a 3x3 kernel: clamp(round(weighted sum / divisor)); edge-replicated borders."""
    _require_gray(img)
    acc = _correlate3(img.pixels.astype(np.float64), kernel.weights) / kernel.divisor
    return Raster(np.clip(np.rint(acc), 0, 255).astype(np.uint8))


def sobel_magnitude(img: Raster) -> Raster:
    """Euclidean Sobel gradient magnitude, rounded and clamped to [0, 255]."""
    _require_gray(img)
    arr = img.pixels.astype(np.float64)
    gx = _correlate3(arr, SOBEL_X.weights)
    gy = _correlate3(arr, SOBEL_Y.weights)
    mag = np.hypot(gx, gy)
    return Raster(np.clip(np.rint(mag), 0, 255).astype(np.uint8))


def threshold_binary(img: Raster, t: int) -> Raster:
    """Pixels >= t become 255, the rest 0."""
    _require_gray(img)
    if not 0 <= t <= 255:
        raise ValueError("threshold must be in 0..255")
    return Raster(np.where(img.pixels >= t, 255, 0).astype(np.uint8))


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise ValueError("malformed header: unexpected end of data")
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def read_pnm(data: bytes) -> Raster:
    """Parse binary PNM bytes (P5 grayscale or P6 RGB, maxval 255)."""
    magic, pos = _next_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError("malformed header: expected P5 or P6 magic")
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise ValueError(f"malformed header: non-numeric field {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError("malformed header: non-positive dimensions")
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}, expected 255")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ValueError("malformed header: missing whitespace before payload")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    needed = width * height * channels
    payload = data[pos:pos + needed]
    if len(payload) < needed:
        raise ValueError(f"truncated payload: expected {needed} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return Raster(arr.reshape(shape).copy())


def write_pnm(img: Raster) -> bytes:
    """Serialize to canonical binary PNM (P5 for grayscale, P6 for RGB)."""
    magic = "P5" if img.channels == 1 else "P6"
    header = f"{magic}\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def load_pnm(path) -> Raster:
    return read_pnm(Path(path).read_bytes())


def save_pnm(path, img: Raster):
    Path(path).write_bytes(write_pnm(img))


def _resize_bilinear(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample to (out_h, out_w); float64 output, exact for identity sizes."""
    if out_w < 1 or out_h < 1:
        raise ValueError("target size must be positive")
    src = arr.astype(np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    src_h, src_w = src.shape[:2]

    def _coords(n_out, n_src):
        if n_out == 1 or n_src == 1:
            return np.zeros(n_out, dtype=np.int64), np.zeros(n_out)
        pos = np.arange(n_out) * ((n_src - 1) / (n_out - 1))
        lo = np.minimum(np.floor(pos).astype(np.int64), n_src - 2)
        return lo, pos - lo

    y0, fy = _coords(out_h, src_h)
    x0, fx = _coords(out_w, src_w)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    tl = src[y0[:, None], x0[None, :]]
    tr = src[y0[:, None], x1[None, :]]
    bl = src[y1[:, None], x0[None, :]]
    br = src[y1[:, None], x1[None, :]]
    fxg = fx[None, :, None]
    fyg = fy[:, None, None]
    # lerp form keeps constants exact: a + f*(b - a)
    top = tl + fxg * (tr - tl)
    bot = bl + fxg * (br - bl)
    out = top + fyg * (bot - top)
    return out[:, :, 0] if squeeze else out


def resize_bilinear(img: Raster, width: int, height: int) -> Raster:
    """Bilinear resize, rounded back to 8-bit."""
    out = _resize_bilinear(img.pixels, width, height)
    return Raster(np.clip(np.rint(out), 0, 255).astype(np.uint8))
