"""C-arm cone-beam projection geometry.

World frame
-----------
Millimetres, origin at the isocenter. ``+x`` points to the patient's left,
``+y`` cranial (towards the head) and ``+z`` anterior. In the PA view
(both angles zero) the source sits posterior at ``z = -SOD`` and the beam
travels along ``+z`` towards the detector.

The view rotation is ``R = R_primary @ R_secondary`` where the secondary
(cranial/caudal) tilt rotates about ``x`` and the primary (LAO/RAO) angle
rotates about ``y``; i.e. the secondary rotation is applied first. Positive
primary angles swing the detector towards ``+x`` (LAO), positive secondary
angles tilt it towards ``+y`` (cranial).

Detector columns run along ``R @ x`` and rows along ``R @ -y`` so that
cranial anatomy appears near the top of the image in the PA view. Pixel
centres sit on integer ``(col, row)`` coordinates.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CalibrationError, NearParallel

PARALLEL_EPS = 1e-10

CALIBRATION_KEYS = (
    "primary_angle_deg",
    "secondary_angle_deg",
    "sid_mm",
    "sod_mm",
    "cols",
    "rows",
    "pixel_spacing_mm",
    "principal_point_px",
)


@dataclass(frozen=True)
class CArmPose:
    """Geometry of one X-ray view.

    Parameters
    ----------
    primary_angle : float
        Degrees, LAO positive and RAO negative.
    secondary_angle : float
        Degrees, cranial positive and caudal negative.
    source_to_detector, source_to_isocenter : float
        SID and SOD in mm.
    detector_cols, detector_rows : int
        Detector size in pixels.
    pixel_spacing : float
        Detector pixel pitch in mm.
    principal_point : tuple of float, optional
        ``(col, row)`` of the central ray; defaults to the detector centre.
    """

    primary_angle: float = 0.0
    secondary_angle: float = 0.0
    source_to_detector: float = 1000.0
    source_to_isocenter: float = 700.0
    detector_cols: int = 512
    detector_rows: int = 512
    pixel_spacing: float = 0.2
    principal_point: tuple[float, float] | None = None

    def __post_init__(self):
        if self.principal_point is None:
            pp = ((self.detector_cols - 1) / 2.0, (self.detector_rows - 1) / 2.0)
            object.__setattr__(self, "principal_point", pp)
        else:
            pp = tuple(float(c) for c in self.principal_point)
            object.__setattr__(self, "principal_point", pp)
        self.validate()

    def validate(self) -> None:
        vals = (self.primary_angle, self.secondary_angle, self.source_to_detector,
                self.source_to_isocenter, self.pixel_spacing, *self.principal_point)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("pose contains non-finite values")
        if not self.source_to_detector > self.source_to_isocenter > 0:
            raise ValueError(
                f"need SID > SOD > 0, got SID={self.source_to_detector}, "
                f"SOD={self.source_to_isocenter}")
        if self.pixel_spacing <= 0:
            raise ValueError("pixel_spacing must be positive")
        if self.detector_cols <= 0 or self.detector_rows <= 0:
            raise ValueError("detector size must be positive")
        c, r = self.principal_point
        if not (0 <= c <= self.detector_cols - 1 and 0 <= r <= self.detector_rows - 1):
            raise ValueError(f"principal point {self.principal_point} outside detector")

    @property
    def magnification(self) -> float:
        """Geometric magnification at the isocenter plane (SID / SOD)."""
        return self.source_to_detector / self.source_to_isocenter

    @property
    def mm_per_pixel_at_isocenter(self) -> float:
        return self.pixel_spacing / self.magnification

    def to_dict(self) -> dict:
        return {
            "primary_angle_deg": self.primary_angle,
            "secondary_angle_deg": self.secondary_angle,
            "sid_mm": self.source_to_detector,
            "sod_mm": self.source_to_isocenter,
            "cols": self.detector_cols,
            "rows": self.detector_rows,
            "pixel_spacing_mm": self.pixel_spacing,
            "principal_point_px": list(self.principal_point),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CArmPose":
        missing = [k for k in CALIBRATION_KEYS if k not in d]
        if missing:
            raise CalibrationError(f"calibration missing keys: {', '.join(missing)}")
        return cls(
            primary_angle=float(d["primary_angle_deg"]),
            secondary_angle=float(d["secondary_angle_deg"]),
            source_to_detector=float(d["sid_mm"]),
            source_to_isocenter=float(d["sod_mm"]),
            detector_cols=int(d["cols"]),
            detector_rows=int(d["rows"]),
            pixel_spacing=float(d["pixel_spacing_mm"]),
            principal_point=tuple(d["principal_point_px"]),
        )


def load_calibration(path) -> CArmPose:
    """Read a JSON calibration document."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise CalibrationError(f"calibration file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise CalibrationError(f"cannot parse calibration {path}: {exc}") from None
    try:
        return CArmPose.from_dict(data)
    except (ValueError, TypeError, CalibrationError) as exc:
        raise CalibrationError(f"invalid calibration {path}: {exc}") from None


def save_calibration(pose: CArmPose, path) -> None:
    Path(path).write_text(json.dumps(pose.to_dict(), indent=2) + "\n")


def _rot_x(deg):
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(deg):
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(d))) or n == 0:
            raise ValueError("ray needs a finite origin and non-zero direction")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / n)

    def at(self, t):
        return self.origin + np.multiply.outer(t, self.direction)


@dataclass(frozen=True)
class ProjectionModel:
    """Pinhole model of one C-arm view; build with :func:`build_projection`."""

    pose: CArmPose
    rotation: np.ndarray = field(repr=False)
    source: np.ndarray = field(repr=False)

    @property
    def axis(self) -> np.ndarray:
        """Unit vector from source towards detector."""
        return self.rotation[:, 2]

    @property
    def detector_center(self) -> np.ndarray:
        return self.source + self.pose.source_to_detector * self.axis

    def to_camera(self, points) -> np.ndarray:
        """World points to the rotated frame with the source at the origin."""
        p = np.asarray(points, dtype=float)
        return (p - self.source) @ self.rotation

    def project(self, points) -> np.ndarray:
        """Map world points ``(..., 3)`` to detector pixels ``(..., 2)``."""
        pc = self.to_camera(points)
        pose = self.pose
        f = pose.source_to_detector / pose.pixel_spacing
        col = pose.principal_point[0] + f * pc[..., 0] / pc[..., 2]
        row = pose.principal_point[1] - f * pc[..., 1] / pc[..., 2]
        return np.stack([col, row], axis=-1)

    def pixel_to_detector(self, pixels) -> np.ndarray:
        """3D position (mm) of detector pixels ``(..., 2)`` on the detector plane."""
        px = np.asarray(pixels, dtype=float)
        pose = self.pose
        x = (px[..., 0] - pose.principal_point[0]) * pose.pixel_spacing
        y = -(px[..., 1] - pose.principal_point[1]) * pose.pixel_spacing
        local = np.stack([x, y, np.full_like(x, pose.source_to_detector)], axis=-1)
        return self.source + local @ self.rotation.T

    def detector_to_pixel(self, points) -> np.ndarray:
        """Inverse of :meth:`pixel_to_detector` for points on the detector plane."""
        local = (np.asarray(points, dtype=float) - self.source) @ self.rotation
        pose = self.pose
        col = local[..., 0] / pose.pixel_spacing + pose.principal_point[0]
        row = -local[..., 1] / pose.pixel_spacing + pose.principal_point[1]
        return np.stack([col, row], axis=-1)

    def in_field(self, pixels) -> np.ndarray:
        px = np.asarray(pixels, dtype=float)
        return ((px[..., 0] >= -0.5) & (px[..., 0] <= self.pose.detector_cols - 0.5)
                & (px[..., 1] >= -0.5) & (px[..., 1] <= self.pose.detector_rows - 0.5))


def build_projection(pose: CArmPose) -> ProjectionModel:
    """Construct the projection model for ``pose``."""
    pose.validate()
    rot = _rot_y(pose.primary_angle) @ _rot_x(-pose.secondary_angle)
    source = -pose.source_to_isocenter * rot[:, 2]
    return ProjectionModel(pose=pose, rotation=rot, source=source)


def view_angle_between(model_a: ProjectionModel, model_b: ProjectionModel) -> float:
    """Angle in degrees between two central axes."""
    c = float(np.clip(model_a.axis @ model_b.axis, -1.0, 1.0))
    return math.degrees(math.acos(c))


def backproject_ray(model: ProjectionModel, pixel) -> Ray:
    """Ray from the X-ray source through a detector pixel."""
    px = np.asarray(pixel, dtype=float)
    if px.shape != (2,) or not np.all(np.isfinite(px)):
        raise ValueError(f"pixel must be two finite coordinates, got {pixel!r}")
    target = model.pixel_to_detector(px)
    return Ray(model.source, target - model.source)


def triangulate_midpoint(ray_a: Ray, ray_b: Ray) -> tuple[np.ndarray, float]:
    """Midpoint and length of the shortest segment joining two lines.

    Raises
    ------
    NearParallel
        If the direction cross product is shorter than 1e-10.
    """
    d1, d2 = ray_a.direction, ray_b.direction
    n = np.cross(d1, d2)
    nn = np.linalg.norm(n)
    if nn < PARALLEL_EPS:
        raise NearParallel(f"rays are parallel (|d1 x d2| = {nn:.3g})")
    w = ray_b.origin - ray_a.origin
    # closest-point parameters from Cramer's rule on the 2x2 normal equations
    denom = nn * nn
    t1 = np.dot(np.cross(w, d2), n) / denom
    t2 = np.dot(np.cross(w, d1), n) / denom
    p1 = ray_a.origin + t1 * d1
    p2 = ray_b.origin + t2 * d2
    return 0.5 * (p1 + p2), float(np.linalg.norm(p1 - p2))


def triangulate_pixels(model_a, model_b, px_a, px_b):
    """Vectorised midpoint triangulation of pixel pairs ``(N, 2)``.

    Returns ``(points (N, 3), gaps (N,))``; parallel pairs give NaN.
    """
    pa = np.atleast_2d(np.asarray(px_a, dtype=float))
    pb = np.atleast_2d(np.asarray(px_b, dtype=float))
    o1, o2 = model_a.source, model_b.source
    d1 = model_a.pixel_to_detector(pa) - o1
    d2 = model_b.pixel_to_detector(pb) - o2
    d1 /= np.linalg.norm(d1, axis=-1, keepdims=True)
    d2 /= np.linalg.norm(d2, axis=-1, keepdims=True)
    n = np.cross(d1, d2)
    nn2 = np.einsum("...i,...i->...", n, n)
    w = o2 - o1
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.einsum("...i,...i->...", np.cross(w, d2), n) / nn2
        t2 = np.einsum("...i,...i->...", np.cross(w, d1), n) / nn2
    p1 = o1 + t1[..., None] * d1
    p2 = o2 + t2[..., None] * d2
    bad = np.sqrt(nn2) < PARALLEL_EPS
    mid = 0.5 * (p1 + p2)
    gap = np.linalg.norm(p1 - p2, axis=-1)
    mid[bad] = np.nan
    gap[bad] = np.nan
    return mid, gap


def pixel_error_to_mm(model: ProjectionModel, pixels):
    """Convert detector pixel distances to mm at the isocenter plane."""
    return np.asarray(pixels, dtype=float) * model.pose.mm_per_pixel_at_isocenter


def reconstruction_error(p, obs_a, obs_b, model_a: ProjectionModel, model_b: ProjectionModel) -> float:
    """Larger of the two per-view reprojection errors, in isocenter-plane mm."""
    p = np.asarray(p, dtype=float)
    ea = np.linalg.norm(model_a.project(p) - np.asarray(obs_a, dtype=float))
    eb = np.linalg.norm(model_b.project(p) - np.asarray(obs_b, dtype=float))
    return float(max(pixel_error_to_mm(model_a, ea), pixel_error_to_mm(model_b, eb)))
