"""Synthetic vessel trees, cone-beam mask rendering and simulated device
motion, used as ground truth for testing the reconstruction."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .camera import CArmPose, ProjectionModel, build_projection
from .errors import OutOfField
from .spline.curve import BSplineCurve

_BEZIER_KNOTS = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=float)
DOWN = np.array([0.0, -1.0, 0.0])


@dataclass
class PhantomBranch:
    """One vessel segment: a cubic Bezier centreline with a linear radius taper."""

    control_points: np.ndarray
    radius_start: float
    radius_end: float
    parent: int | None = None

    @property
    def curve(self) -> BSplineCurve:
        return BSplineCurve(3, self.control_points, _BEZIER_KNOTS)

    def radius_at(self, u):
        u = np.asarray(u, dtype=float)
        return self.radius_start + (self.radius_end - self.radius_start) * u

    def truncated(self, keep: float) -> "PhantomBranch":
        """The part ``u in [0, keep]`` (de Casteljau split), same taper."""
        if not 0.0 < keep <= 1.0:
            raise ValueError("keep must be in (0, 1]")
        a = self.control_points.astype(float)
        left = [a[0]]
        while len(a) > 1:
            a = (1.0 - keep) * a[:-1] + keep * a[1:]
            left.append(a[0])
        return PhantomBranch(np.array(left), self.radius_start, float(self.radius_at(keep)), self.parent)


@dataclass
class PhantomTree:
    branches: list[PhantomBranch]
    seed: int | None = None

    @property
    def junctions(self) -> dict[int, list[int]]:
        """Parent branch index -> child indices (children start at the parent's end)."""
        out: dict[int, list[int]] = {}
        for k, b in enumerate(self.branches):
            if b.parent is not None:
                out.setdefault(b.parent, []).append(k)
        return out

    def translated(self, offset) -> "PhantomTree":
        off = np.asarray(offset, dtype=float)
        return PhantomTree(
            [PhantomBranch(b.control_points + off, b.radius_start, b.radius_end, b.parent)
             for b in self.branches], self.seed)

    def with_truncated(self, index: int, keep: float) -> "PhantomTree":
        """Copy with one leaf branch shortened, e.g. to mimic distal occlusion in one view."""
        if index in self.junctions:
            raise ValueError(f"branch {index} has children; only leaves can be truncated")
        branches = list(self.branches)
        branches[index] = branches[index].truncated(keep)
        return PhantomTree(branches, self.seed)

    def landmarks(self) -> np.ndarray:
        """Root start, junctions and leaf ends (3D)."""
        pts = [self.branches[0].control_points[0]]
        for b in self.branches:
            pts.append(b.control_points[-1])
        return np.array(pts)

    def sample(self, n_per_branch: int = 400):
        """Dense centreline samples ``[(points, radii), ...]`` per branch."""
        u = np.linspace(0, 1, n_per_branch)
        return [(b.curve(u), b.radius_at(u)) for b in self.branches]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "branches": [
                {"control_points": b.control_points.tolist(),
                 "radius_start": b.radius_start, "radius_end": b.radius_end,
                 "parent": b.parent}
                for b in self.branches
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomTree":
        return cls([PhantomBranch(np.array(b["control_points"], dtype=float), float(b["radius_start"]),
                                  float(b["radius_end"]), b["parent"]) for b in d["branches"]],
                   d.get("seed"))

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def _unit(v):
    return v / np.linalg.norm(v)


def _rotate(v, axis, angle):
    """Rodrigues rotation of ``v`` about unit ``axis``."""
    k = _unit(axis)
    return (v * math.cos(angle) + np.cross(k, v) * math.sin(angle)
            + k * (k @ v) * (1 - math.cos(angle)))


def _bezier(rng, start, direction, length):
    d = _unit(direction)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = _unit(np.cross(d, helper))
    e2 = np.cross(d, e1)
    P = [start]
    for f in (1 / 3, 2 / 3):
        bend = rng.uniform(-0.12, 0.12, size=2) * length
        P.append(start + d * f * length + bend[0] * e1 + bend[1] * e2)
    P.append(start + d * length)
    return np.array(P)


def generate_tree(seed: int = 0, n_branches: int = 3, extent_mm: float = 40.0,
                  root_radius_mm: tuple[float, float] = (1.0, 1.4),
                  min_landmark_separation_mm: float | None = None,
                  max_tries: int = 200) -> PhantomTree:
    """Random bifurcating vessel tree around the isocenter.

    The root runs roughly caudally from the cranial side; every bifurcation
    adds two children at its parent's end, diverging laterally by 20-70
    degrees. ``n_branches`` therefore has to be 1 or odd. Landmarks are kept
    ``min_landmark_separation_mm`` apart along the cranio-caudal axis
    (default ``min(4, extent / (3 * n_landmarks))``), which keeps branch and
    end points unambiguous for C-arm pairs that rotate about that axis. All
    control points lie within ``extent_mm`` of the origin.
    """
    if n_branches < 1:
        raise ValueError("n_branches must be at least 1")
    if n_branches > 1 and n_branches % 2 == 0:
        raise ValueError("a bifurcating tree has an odd number of branches")
    if min_landmark_separation_mm is None:
        min_landmark_separation_mm = min(4.0, extent_mm / (3 * (n_branches + 1)))
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        tree = _try_tree(rng, n_branches, extent_mm, root_radius_mm)
        if tree is None:
            continue
        ys = np.sort(tree.landmarks()[:, 1])
        if len(ys) > 1 and np.min(np.diff(ys)) < min_landmark_separation_mm:
            continue
        tree.seed = seed
        return tree
    raise RuntimeError(f"could not generate a valid tree in {max_tries} attempts")


def _try_tree(rng, n_branches, extent, root_radius):
    L0 = extent * rng.uniform(0.55, 0.75)
    tilt = math.radians(rng.uniform(0, 20))
    az = rng.uniform(0, 2 * math.pi)
    d0 = np.array([math.sin(tilt) * math.cos(az), -math.cos(tilt), math.sin(tilt) * math.sin(az)])
    start = np.array([rng.uniform(-0.1, 0.1) * extent, 0.0, rng.uniform(-0.1, 0.1) * extent]) - d0 * L0 * 0.9
    r0 = rng.uniform(*root_radius)
    r_end = r0 * rng.uniform(0.8, 0.95)
    branches = [PhantomBranch(_bezier(rng, start, d0, L0), r0, r_end, None)]
    leaves = [0]
    while len(branches) < n_branches:
        parent = leaves.pop(0)
        pb = branches[parent]
        P = pb.control_points
        t_end = _unit(P[3] - P[2])
        phi = rng.uniform(-math.pi / 6, math.pi / 6)
        lateral = np.array([math.cos(phi), 0.0, math.sin(phi)])
        for sign in (1.0, -1.0):
            axis = np.cross(t_end, sign * lateral)
            if np.linalg.norm(axis) < 1e-6:
                return None
            # keep every segment heading caudally
            for _ in range(20):
                alpha = math.radians(rng.uniform(20, 70))
                d = _rotate(t_end, axis, -alpha)
                if d @ DOWN >= math.cos(math.radians(75)):
                    break
            else:
                return None
            L = extent * rng.uniform(0.4, 0.6) * (0.8 ** (len(branches) // 2))
            rs = max(0.5, pb.radius_end * rng.uniform(0.8, 0.95))
            child = PhantomBranch(_bezier(rng, P[3], d, L), rs, max(0.5, rs * rng.uniform(0.85, 0.95)), parent)
            branches.append(child)
            leaves.append(len(branches) - 1)
    tree = PhantomTree(branches)
    allp = np.vstack([b.control_points for b in branches])
    r = np.linalg.norm(allp, axis=1).max()
    if r > extent:
        s = 0.98 * extent / r
        tree = PhantomTree([PhantomBranch(b.control_points * s, b.radius_start, b.radius_end, b.parent)
                            for b in branches])
    for b in tree.branches:
        # monotone cranio-caudal course (no self-overlap along epipolar lines)
        ys = b.curve(np.linspace(0, 1, 64))[:, 1]
        if np.any(np.diff(ys) >= 0):
            return None
        if not (0.5 <= b.radius_end <= 5.0 and 0.5 <= b.radius_start <= 5.0):
            return None
    return tree


def _stamp(mask: np.ndarray, cols, rows, radii):
    """Set every pixel whose centre is within ``radius`` of a sample."""
    h, w = mask.shape
    R = int(math.ceil(float(np.max(radii)))) + 1
    off = np.arange(-R, R + 1)
    dr, dc = np.meshgrid(off, off, indexing="ij")
    dr, dc = dr.ravel(), dc.ravel()
    for s in range(0, len(cols), 512):
        c0 = np.rint(cols[s:s + 512]).astype(int)
        r0 = np.rint(rows[s:s + 512]).astype(int)
        pc = c0[:, None] + dc[None, :]
        pr = r0[:, None] + dr[None, :]
        d2 = (pc - cols[s:s + 512, None]) ** 2 + (pr - rows[s:s + 512, None]) ** 2
        inside = (d2 <= radii[s:s + 512, None] ** 2) & (pc >= 0) & (pc < w) & (pr >= 0) & (pr < h)
        mask[pr[inside], pc[inside]] = True


def forward_project(tree: PhantomTree, pose: CArmPose | ProjectionModel, noise: float = 0.0,
                    seed: int = 0, step_px: float = 0.25) -> np.ndarray:
    """Binary vessel mask of ``tree`` seen from ``pose``.

    Dense centreline samples are projected and stamped as disks of radius
    ``radius_mm * (SID/SOD) / pixel_spacing`` pixels. ``noise`` is the
    standard deviation (pixels) of a smooth random perturbation of the disk
    radii along each branch.

    Raises
    ------
    OutOfField
        If more than 10% of the samples fall outside the detector.
    """
    model = pose if isinstance(pose, ProjectionModel) else build_projection(pose)
    pose = model.pose
    mask = np.zeros((pose.detector_rows, pose.detector_cols), dtype=bool)
    rng = np.random.default_rng(seed)
    scale = pose.magnification / pose.pixel_spacing
    all_px, all_r = [], []
    for b in tree.branches:
        coarse = model.project(b.curve(np.linspace(0, 1, 64)))
        length_px = np.linalg.norm(np.diff(coarse, axis=0), axis=1).sum()
        n = max(16, int(math.ceil(length_px / step_px)))
        u = np.linspace(0, 1, n)
        px = model.project(b.curve(u))
        r = b.radius_at(u) * scale
        if noise > 0:
            k = max(3, n // 40)
            raw = rng.normal(0.0, 1.0, n + k)
            smooth = np.convolve(raw, np.ones(k) / math.sqrt(k), mode="valid")[:n]
            r = np.maximum(r + noise * smooth, 0.5)
        all_px.append(px)
        all_r.append(r)
    px = np.vstack(all_px)
    r = np.concatenate(all_r)
    outside = ~model.in_field(px)
    if outside.mean() > 0.1:
        raise OutOfField(f"{outside.mean():.0%} of centreline samples fall outside the detector")
    _stamp(mask, px[:, 0], px[:, 1], r)
    return mask


@dataclass
class MotionTrace:
    """Two-frequency (cardiac + respiratory) rigid displacement model."""

    cardiac_amplitude: float = 5.0
    respiratory_amplitude: float = 5.0
    cardiac_period: float = 0.8
    respiratory_period: float = 4.0
    cardiac_direction: np.ndarray = field(default_factory=lambda: _unit(np.array([0.3, 1.0, 0.25])))
    respiratory_direction: np.ndarray = field(default_factory=lambda: _unit(np.array([0.1, 1.0, 0.2])))
    frame_rate: float = 15.0

    def __post_init__(self):
        if abs(self.cardiac_amplitude) + abs(self.respiratory_amplitude) > 15.0:
            raise ValueError("motion amplitude must stay within 15 mm of rest")
        self.cardiac_direction = _unit(np.asarray(self.cardiac_direction, dtype=float))
        self.respiratory_direction = _unit(np.asarray(self.respiratory_direction, dtype=float))

    @classmethod
    def with_amplitude(cls, amplitude: float, **kw) -> "MotionTrace":
        """Split a peak amplitude evenly between the two components."""
        return cls(cardiac_amplitude=amplitude / 2, respiratory_amplitude=amplitude / 2, **kw)

    def phases(self, t):
        t = np.asarray(t, dtype=float)
        return (np.mod(t / self.cardiac_period, 1.0), np.mod(t / self.respiratory_period, 1.0))

    def displacement(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        c = self.cardiac_amplitude * np.sin(2 * math.pi * t / self.cardiac_period)
        r = self.respiratory_amplitude * np.sin(2 * math.pi * t / self.respiratory_period)
        return (np.multiply.outer(c, self.cardiac_direction)
                + np.multiply.outer(r, self.respiratory_direction))

    def frame_times(self, n_frames: int, offset: float = 0.0) -> np.ndarray:
        return offset + np.arange(n_frames) / self.frame_rate


def render_device(point, pose: CArmPose | ProjectionModel, radius_mm: float = 2.0) -> np.ndarray:
    """Mask of a spherical balloon centred at ``point``."""
    model = pose if isinstance(pose, ProjectionModel) else build_projection(pose)
    pose = model.pose
    mask = np.zeros((pose.detector_rows, pose.detector_cols), dtype=bool)
    px = model.project(np.asarray(point, dtype=float)[None, :])
    _stamp(mask, px[:, 0], px[:, 1], np.array([radius_mm * pose.magnification / pose.pixel_spacing]))
    return mask


@dataclass
class VideoPair:
    masks_a: list[np.ndarray]
    masks_b: list[np.ndarray]
    device_a: list[np.ndarray]
    device_b: list[np.ndarray]
    true_pair: tuple[int, int]
    displacements_a: np.ndarray
    displacements_b: np.ndarray


def true_alignment(disp_a: np.ndarray, disp_b: np.ndarray) -> tuple[int, int]:
    """Frame pair with the closest 3D displacement (lexicographic tie-break)."""
    D = np.linalg.norm(disp_a[:, None, :] - disp_b[None, :, :], axis=-1)
    i, j = np.unravel_index(int(np.argmin(D)), D.shape)
    return int(i), int(j)


def simulate_videos(tree: PhantomTree, device_point, pose_a: CArmPose, pose_b: CArmPose,
                    n_frames: int, phase_offsets: tuple[float, float] = (0.0, 0.0),
                    motion: MotionTrace | None = None, noise: float = 0.0,
                    device_radius_mm: float = 2.0, seed: int = 0,
                    render_vessels: bool = True, tree_b: PhantomTree | None = None) -> VideoPair:
    """Render two mask videos of a rigidly moving tree and balloon.

    ``phase_offsets`` are start times (seconds) of the two acquisitions.
    ``tree_b`` replaces the tree in view B (default: the same tree).
    """
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    motion = motion or MotionTrace()
    ma, mb = build_projection(pose_a), build_projection(pose_b)
    disp_a = motion.displacement(motion.frame_times(n_frames, phase_offsets[0]))
    disp_b = motion.displacement(motion.frame_times(n_frames, phase_offsets[1]))
    dev = np.asarray(device_point, dtype=float)
    out = {"a": ([], []), "b": ([], [])}
    views = (("a", ma, disp_a, seed, tree), ("b", mb, disp_b, seed + 7919, tree_b or tree))
    for key, model, disp, s0, tr in views:
        vessels, devices = out[key]
        for f in range(n_frames):
            if render_vessels:
                vessels.append(forward_project(tr.translated(disp[f]), model, noise, seed=s0 + f))
            devices.append(render_device(dev + disp[f], model, device_radius_mm))
    return VideoPair(out["a"][0], out["b"][0], out["a"][1], out["b"][1],
                     true_alignment(disp_a, disp_b), disp_a, disp_b)
