"""Monocular distance calibration from a reference object of known size.

A single reference shot of an object of known width, photographed at a known
distance, fixes the perceived focal length; after that, the distance to any
object of known width follows from its apparent width in pixels.
"""

from dataclasses import dataclass
from fractions import Fraction

from .geometry import largest_rectangle
from .raster import Raster


@dataclass(frozen=True)
class CameraModel:
    """Perceived focal length plus the reference measurements that produced it."""

    focal_px: float
    ref_length_cm: float
    ref_distance_cm: float
    ref_pixels: float

    def to_dict(self) -> dict:
        return {
            "focal_px": self.focal_px,
            "ref_length_cm": self.ref_length_cm,
            "ref_distance_cm": self.ref_distance_cm,
            "ref_pixels": self.ref_pixels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(focal_px=float(d["focal_px"]), ref_length_cm=float(d["ref_length_cm"]),
                   ref_distance_cm=float(d["ref_distance_cm"]), ref_pixels=float(d["ref_pixels"]))


def estimate_focal(n_pixels: float, distance_cm: float, length_cm: float) -> CameraModel:
    """Perceived focal length from a reference object: pixels * distance / length."""
    if n_pixels <= 0 or distance_cm <= 0 or length_cm <= 0:
        raise ValueError("reference pixel count, distance, and length must all be positive")
    return CameraModel(focal_px=n_pixels * distance_cm / length_cm,
                       ref_length_cm=float(length_cm),
                       ref_distance_cm=float(distance_cm),
                       ref_pixels=float(n_pixels))


def estimate_distance(model: CameraModel, known_width_cm: float, observed_pixels: float) -> float:
    """Distance (cm) to an object of known width appearing ``observed_pixels`` wide.

    Evaluates width * focal / pixels in exact rational arithmetic from the
    stored reference triple, so measuring the reference object itself returns
    the reference distance bit-exactly.
    """
    if known_width_cm <= 0:
        raise ValueError("object width must be positive")
    if observed_pixels <= 0:
        raise ValueError("observed pixel count must be positive")
    focal = (Fraction(model.ref_pixels) * Fraction(model.ref_distance_cm)
             / Fraction(model.ref_length_cm))
    return float(Fraction(known_width_cm) * focal / Fraction(observed_pixels))


def calibrate_from_image(img: Raster, distance_cm: float, length_cm: float,
                         edge_threshold: int = 60) -> CameraModel:
    """Measure the reference rectangle in a calibration shot and fit the model.

    The pixel count is the bbox width (horizontal extent) of the detected
    rectangle.
    """
    if distance_cm <= 0 or length_cm <= 0:
        raise ValueError("reference distance and length must be positive")
    rect = largest_rectangle(img, edge_threshold=edge_threshold)
    n_pixels = rect.bbox[2]
    return estimate_focal(n_pixels, distance_cm, length_cm)
