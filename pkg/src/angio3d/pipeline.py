"""End-to-end reconstruction from two mask videos and reprojection scoring."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .camera import CArmPose, ProjectionModel, build_projection, view_angle_between
from .errors import AmbiguousTip, EmptyMask, JoinGapTooLarge, NearParallel, NoValidPairs, ReconstructionError
from .matching import (ChainPairing, Correspondence, ErrorMatrix, match_landmarks, pair_branch_curves,
                       phase_match)
from .raster import (PixelChain, Skeleton, classify_points, device_keypoint, distance_map, extract_chains,
                     prune_spurs, radius_profile, thin)
from .spline.curve import BSplineCurve, ParamCurve3, fit_cubic, merge_c1, resample
from .spline.intersect import IntersectionOptions, intersect_surfaces
from .spline.io import curve_to_dict, surface_mesh, write_obj
from .spline.surface import NurbsSurface, extrude_surface, pipe_surface

log = logging.getLogger(__name__)


@dataclass
class ReconstructionParams:
    """Tunable settings; every field is echoed in run manifests."""

    device_kind: str = "balloon"
    frames: tuple[int, int] | None = None
    match_threshold_mm: float = 2.0
    min_spur_px: int = 5
    min_chain_px: int = 8
    ctrl_spacing_px: float = 12.0
    grid_u: int = 64
    grid_v: int = 8
    intersection_tol: float = 1e-6
    resample_ctrl: int = 6
    resample_tol_mm: float = 0.05
    join_tol_mm: float = 0.5
    junction_trim: float = 2.0
    junction_max_mm: float = 10.0
    radius_samples: int = 32
    pipe_sections: int = 33
    min_view_angle_deg: float = 5.0
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frames"] = None if self.frames is None else list(self.frames)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReconstructionParams":
        d = dict(d)
        if d.get("frames") is not None:
            d["frames"] = tuple(int(x) for x in d["frames"])
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class Branch3D:
    curve: ParamCurve3
    landmark_a: tuple[int | None, int | None]
    """Start/end landmark indices in view A's landmark list."""
    chain_a: int
    chain_b: int
    surface: NurbsSurface | None = None


@dataclass
class VesselTree3D:
    branches: list[Branch3D] = field(default_factory=list)
    main_path: ParamCurve3 | None = None
    main_path_branches: list[int] = field(default_factory=list)

    @property
    def topology(self) -> dict[int, list[int]]:
        """Landmark index (view A) -> branches touching it."""
        out: dict[int, list[int]] = {}
        for k, b in enumerate(self.branches):
            for lm in b.landmark_a:
                if lm is not None:
                    out.setdefault(lm, []).append(k)
        return out

    def junctions(self) -> dict[int, list[int]]:
        return {lm: bs for lm, bs in self.topology.items() if len(bs) > 1}

    def meshes(self, nu: int = 64, nv: int = 24):
        out = []
        for k, b in enumerate(self.branches):
            if b.surface is not None:
                v, f = surface_mesh(b.surface, nu, nv)
                out.append((f"branch_{k}", v, f))
        return out

    def to_dict(self) -> dict:
        return {
            "branches": [
                {"curve": curve_to_dict(b.curve), "landmarks_a": list(b.landmark_a),
                 "chain_a": b.chain_a, "chain_b": b.chain_b}
                for b in self.branches
            ],
            "main_path": None if self.main_path is None else curve_to_dict(self.main_path),
            "main_path_branches": self.main_path_branches,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VesselTree3D":
        from .spline.io import curve_from_dict

        branches = []
        for b in d["branches"]:
            c = curve_from_dict(b["curve"])
            if not isinstance(c, ParamCurve3):
                c = ParamCurve3(c)
            branches.append(Branch3D(c, tuple(b["landmarks_a"]), b["chain_a"], b["chain_b"]))
        mp = d.get("main_path")
        if mp is not None:
            mp = curve_from_dict(mp)
            mp = mp if isinstance(mp, ParamCurve3) else ParamCurve3(mp)
        return cls(branches, mp, list(d.get("main_path_branches", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "VesselTree3D":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ErrorStats:
    n_samples: int = 0
    mean_mm: float = 0.0
    std_mm: float = 0.0
    max_mm: float = 0.0

    @classmethod
    def of(cls, e) -> "ErrorStats":
        e = np.asarray(e, dtype=float)
        if e.size == 0:
            return cls()
        return cls(int(e.size), float(e.mean()), float(e.std()), float(e.max()))


@dataclass
class ReprojectionReport:
    """Reprojection errors (mm at the isocenter plane) per branch, per view and overall.

    Overall and per-branch statistics pool the per-view errors of every
    sample.
    """

    branches: list[ErrorStats] = field(default_factory=list)
    overall: ErrorStats = field(default_factory=ErrorStats)
    per_view: dict[str, ErrorStats] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.overall.n_samples == 0

    def to_dict(self) -> dict:
        return {
            "branches": [asdict(b) for b in self.branches],
            "overall": asdict(self.overall),
            "per_view": {k: asdict(v) for k, v in self.per_view.items()},
            "empty": self.empty,
        }

    def rows(self):
        for k, b in enumerate(self.branches):
            yield str(k), b
        for name, s in self.per_view.items():
            yield name, s
        yield "all", self.overall

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["branch_id", "n_samples", "mean_mm", "std_mm", "max_mm"])
            for bid, s in self.rows():
                w.writerow([bid, s.n_samples, f"{s.mean_mm:.6f}", f"{s.std_mm:.6f}", f"{s.max_mm:.6f}"])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def summary(self) -> str:
        o = self.overall
        if self.empty:
            return "no samples"
        return f"{o.mean_mm:.3f} mm +/- {o.std_mm:.3f} mm (max {o.max_mm:.3f} mm, n={o.n_samples})"


@dataclass
class ViewAnalysis:
    skeleton: Skeleton
    chains: list[PixelChain]
    edt: np.ndarray


@dataclass
class ReconstructionResult:
    tree: VesselTree3D
    frames: tuple[int, int]
    report: ReprojectionReport
    error_matrix: ErrorMatrix | None
    correspondence: Correspondence
    pairing: ChainPairing
    view_a: ViewAnalysis
    view_b: ViewAnalysis
    failures: list[str] = field(default_factory=list)

    @property
    def unpaired(self) -> list[str]:
        return ([f"UnpairedChain: view A chain {i}" for i in self.pairing.unpaired_a]
                + [f"UnpairedChain: view B chain {j}" for j in self.pairing.unpaired_b])

    @property
    def partial(self) -> bool:
        return bool(self.failures or self.pairing.unpaired_a or self.pairing.unpaired_b)


def analyze_view(mask, min_spur_px: int = 5, min_chain_px: int = 0) -> ViewAnalysis:
    """Skeletonise a vessel mask and split it into landmark chains."""
    sk = prune_spurs(thin(mask), min_spur_px)
    skel = classify_points(sk)
    chains, isolated = extract_chains(skel)
    if isolated:
        log.debug("ignoring %d isolated skeleton pixels", len(isolated))
    chains = [c for c in chains if len(c) >= min_chain_px]
    return ViewAnalysis(skel, chains, distance_map(mask))


def select_frames(masks_a, masks_b, device_a, device_b, model_a, model_b, params):
    """Frame pair from device key points, or the manual override.

    The error matrix is computed whenever both videos have key points, also
    when the override decides the pair.
    """
    def keypoints(devs):
        out = []
        for m in devs or []:
            try:
                out.append(device_keypoint(m, params.device_kind))
            except (EmptyMask, AmbiguousTip) as exc:
                log.debug("no key point: %s", exc)
                out.append(None)
        return out

    ka, kb = keypoints(device_a), keypoints(device_b)
    matrix = best = None
    if any(k is not None for k in ka) and any(k is not None for k in kb):
        fa, fb, _, matrix = phase_match(ka, kb, model_a, model_b)
        best = (fa, fb)
    if params.frames is not None:
        fa, fb = params.frames
        if not (0 <= fa < len(masks_a) and 0 <= fb < len(masks_b)):
            raise ValueError(f"frame override {tuple(params.frames)} out of range "
                             f"({len(masks_a)} and {len(masks_b)} frames)")
        return (fa, fb), matrix
    if best is not None:
        return best, matrix
    if len(masks_a) == 1 and len(masks_b) == 1:
        return (0, 0), None
    raise NoValidPairs("no device key points in one of the videos; specify frames explicitly")


def _fit_chain(chain: PixelChain, model: ProjectionModel, spacing_px: float) -> BSplineCurve:
    pix = chain.pixels.astype(float)
    n_ctrl = int(np.clip(round(len(pix) / spacing_px) + 3, 4, len(pix)))
    c2 = fit_cubic(pix, n_ctrl)
    return BSplineCurve(3, model.pixel_to_detector(c2.control_points), c2.knots)


def _branch_radii(curve: ParamCurve3, n, views) -> np.ndarray:
    """Average per-view radii (mm) at ``n`` evenly spaced parameters."""
    a, b = curve.curve.domain
    pts = curve.curve(np.linspace(a, b, n))
    per_view = []
    for model, chain, edt in views:
        px = model.project(pts)
        tree = cKDTree(chain.pixels.astype(float))
        _, idx = tree.query(px)
        r_px = radius_profile(None, chain.pixels[idx], edt=edt)
        per_view.append(r_px * model.pose.mm_per_pixel_at_isocenter)
    return np.mean(per_view, axis=0)


def reconstruct_pair(chain_a: PixelChain, chain_b: PixelChain, model_a: ProjectionModel,
                     model_b: ProjectionModel, params: ReconstructionParams):
    """3D centreline of one chain pair as the intersection of two extruded surfaces."""
    ca = _fit_chain(chain_a, model_a, params.ctrl_spacing_px)
    cb = _fit_chain(chain_b, model_b, params.ctrl_spacing_px)
    S1 = extrude_surface(ca, model_a.source)
    S2 = extrude_surface(cb, model_b.source)
    opts = IntersectionOptions(grid_u=params.grid_u, grid_v=params.grid_v, tol=params.intersection_tol)
    curves = intersect_surfaces(S1, S2, opts)
    if not curves:
        raise ReconstructionError("surfaces do not intersect")
    # the centreline is the branch covering most of both curves
    def coverage(c):
        return np.ptp(c.params[:, 0]) + np.ptp(c.params[:, 2])

    best = max(curves, key=coverage)
    if best.params[0, 0] > best.params[-1, 0]:
        best = best.reversed()
    return best




def trim_junction_ends(chain: PixelChain, skel: Skeleton, edt: np.ndarray, factor: float,
                       min_keep: int = 8) -> PixelChain:
    """Drop chain pixels within ``factor`` vessel radii of a branch-point landmark.

    Skeletons bend towards the merged blob around a bifurcation, differently
    in each view; the trimmed gap is bridged in 3D afterwards.
    """
    if factor <= 0:
        return chain
    n_end = len(skel.end_points)
    lms = skel.landmarks
    pix = chain.pixels.astype(float)
    lo, hi = 0, len(pix)

    def reach(lm):
        c, r = lms[lm]
        return np.linalg.norm(pix - (c, r), axis=1) > factor * max(edt[r, c], 1.0)

    if chain.start is not None and chain.start >= n_end:
        far = reach(chain.start)
        lo = int(np.argmax(far)) if far.any() else len(pix)
    if chain.end is not None and chain.end >= n_end:
        far = reach(chain.end)[::-1]
        hi = len(pix) - (int(np.argmax(far)) if far.any() else len(pix))
    if hi - lo < min_keep:
        mid = (lo + hi) // 2
        lo, hi = max(0, mid - min_keep // 2), min(len(pix), mid + (min_keep + 1) // 2)
    return PixelChain(chain.pixels[lo:hi], chain.start, chain.end)


def _end_line(curve: BSplineCurve, at_start: bool, span_mm: float):
    """End point and outward direction from a line fit to the last ``span_mm`` of the curve."""
    a, e = curve.domain
    u = np.linspace(a, e, 400)
    pts = curve(u)
    if at_start:
        pts = pts[::-1]
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    back = np.concatenate([[0.0], np.cumsum(seg[::-1])])[::-1]
    tail = pts[back <= span_mm]
    if len(tail) < 3:
        tail = pts[-3:]
    centre = tail.mean(axis=0)
    d = np.linalg.svd(tail - centre)[2][0]
    if d @ (tail[-1] - tail[0]) < 0:
        d = -d
    return pts[-1], d


def junction_points(branches: list[Branch3D], span_mm: float = 3.0) -> dict[int, np.ndarray]:
    """Least-squares meeting point of the branch end lines at each shared landmark."""
    lines: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    for b in branches:
        for lm, at_start in zip(b.landmark_a, (True, False)):
            if lm is not None:
                lines.setdefault(lm, []).append(_end_line(b.curve.curve, at_start, span_mm))
    out = {}
    for lm, ls in lines.items():
        if len(ls) < 2:
            continue
        A = np.zeros((3, 3))
        rhs = np.zeros(3)
        for p, t in ls:
            P = np.eye(3) - np.outer(t, t)
            A += P
            rhs += P @ p
        centroid = np.mean([p for p, _ in ls], axis=0)
        try:
            x = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            x = centroid
        # near-collinear lines make the solve unstable
        gap = max(np.linalg.norm(p - centroid) for p, _ in ls)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x - centroid) > 3.0 * gap + 1e-9:
            x = centroid
        out[lm] = x
    return out


def extend_to(curve: ParamCurve3, start=None, end=None, max_dist: float = 3.0,
              tol: float = 0.05) -> ParamCurve3:
    """Refit ``curve`` with extra end points (ignored beyond ``max_dist``)."""
    c = curve.curve
    a, e = c.domain
    pts = c(np.linspace(a, e, 200))
    ctrl = len(c.control_points)
    if start is not None and 0 < np.linalg.norm(start - pts[0]) <= max_dist:
        pts = np.vstack([start, pts])
    if end is not None and 0 < np.linalg.norm(end - pts[-1]) <= max_dist:
        pts = np.vstack([pts, end])
    if len(pts) == 200:
        return curve
    return ParamCurve3(fit_cubic(pts, ctrl + 1), curve.radii, curve.points, curve.params)




def build_main_path(branches: list[Branch3D], join_tol: float):
    """Longest landmark path with the straightest continuation at each junction, merged C1."""
    if not branches:
        return None, []
    topo: dict[int, list[int]] = {}
    for k, b in enumerate(branches):
        for lm in b.landmark_a:
            if lm is not None:
                topo.setdefault(lm, []).append(k)
    lengths = [b.curve.curve.length() for b in branches]

    def end_tangent(curve, at_start):
        a, b_ = curve.curve.domain
        u = a if at_start else b_
        t = curve.curve.tangent(np.array([u]))[0]
        return t / np.linalg.norm(t)

    best_path = None
    for start_k in sorted(range(len(branches)), key=lambda k: -lengths[k]):
        b0 = branches[start_k]
        for first_lm in b0.landmark_a:
            if first_lm is None or len(topo.get(first_lm, [])) != 1:
                continue
            path, used = [], set()
            k, entry = start_k, first_lm
            while True:
                br = branches[k]
                curve = br.curve if br.landmark_a[0] == entry else br.curve.reversed()
                exit_lm = br.landmark_a[1] if br.landmark_a[0] == entry else br.landmark_a[0]
                path.append(curve)
                used.add(k)
                nxt = [j for j in topo.get(exit_lm, []) if j not in used] if exit_lm is not None else []
                if not nxt:
                    break
                t_in = end_tangent(curve, False)

                def straightness(j):
                    cj = branches[j].curve
                    cj = cj if branches[j].landmark_a[0] == exit_lm else cj.reversed()
                    return -float(t_in @ end_tangent(cj, True))

                k = min(nxt, key=lambda j: (straightness(j), j))
                entry = exit_lm
            total = sum(p.curve.length() for p in path)
            if best_path is None or total > best_path[0] + 1e-9:
                best_path = (total, path, sorted(used))
        if best_path is not None:
            break
    if best_path is None:
        return None, []
    _, path, used = best_path
    try:
        return merge_c1(path, join_tol), used
    except JoinGapTooLarge as exc:
        log.warning("main path not merged: %s", exc)
        return None, []


def reconstruct(masks_a, masks_b, device_masks_a, device_masks_b, pose_a: CArmPose, pose_b: CArmPose,
                params: ReconstructionParams | None = None) -> ReconstructionResult:
    """Full two-view reconstruction.

    Phase-matches the videos on device key points, skeletonises both chosen
    frames, matches branch/end points, intersects the extruded surfaces of
    each chain pair, rebuilds and merges the curves and sweeps pipe
    surfaces with radii from the mask widths.

    Raises
    ------
    NearParallel
        If the two view axes are closer than ``min_view_angle_deg``.
    NoValidPairs
        If no frame pair can be chosen.
    """
    params = params or ReconstructionParams()
    model_a, model_b = build_projection(pose_a), build_projection(pose_b)
    angle = view_angle_between(model_a, model_b)
    if angle < params.min_view_angle_deg:
        raise NearParallel(f"views are only {angle:.2f} degrees apart")
    (fa, fb), matrix = select_frames(masks_a, masks_b, device_masks_a, device_masks_b,
                                     model_a, model_b, params)
    mask_a, mask_b = masks_a[fa], masks_b[fb]
    for m, pose, name in ((mask_a, pose_a, "A"), (mask_b, pose_b, "B")):
        if m.shape != (pose.detector_rows, pose.detector_cols):
            raise ValueError(f"view {name} mask is {m.shape[1]}x{m.shape[0]} but detector is "
                             f"{pose.detector_cols}x{pose.detector_rows}")
    va = analyze_view(mask_a, params.min_spur_px, params.min_chain_px)
    vb = analyze_view(mask_b, params.min_spur_px, params.min_chain_px)
    corr = match_landmarks(va.skeleton.landmarks, vb.skeleton.landmarks, model_a, model_b,
                           params.match_threshold_mm)
    pairing = pair_branch_curves(corr, va.chains, vb.chains)

    branches, failures = [], []
    for ia, ib in pairing.pairs:
        ch_a, ch_b = pairing.chains_a[ia], pairing.chains_b[ib]
        tr_a = trim_junction_ends(ch_a, va.skeleton, va.edt, params.junction_trim, params.min_chain_px)
        tr_b = trim_junction_ends(ch_b, vb.skeleton, vb.edt, params.junction_trim, params.min_chain_px)
        try:
            raw = reconstruct_pair(tr_a, tr_b, model_a, model_b, params)
            curve = resample(raw, params.resample_ctrl, params.resample_tol_mm)
            curve = ParamCurve3(curve.curve, None, raw.points, raw.params)
        except (ReconstructionError, ValueError) as exc:
            failures.append(f"chain pair ({ia}, {ib}): {type(exc).__name__}: {exc}")
            continue
        branches.append(Branch3D(curve, (ch_a.start, ch_a.end), ia, ib))

    joints = junction_points(branches)
    done = []
    for b in branches:
        s_lm, e_lm = b.landmark_a
        curve = extend_to(b.curve, joints.get(s_lm), joints.get(e_lm), params.junction_max_mm)
        ch_a, ch_b = pairing.chains_a[b.chain_a], pairing.chains_b[b.chain_b]
        try:
            radii = _branch_radii(curve, params.radius_samples,
                                  [(model_a, ch_a, va.edt), (model_b, ch_b, vb.edt)])
            curve = ParamCurve3(curve.curve, radii, curve.points, curve.params)
            surf = pipe_surface(curve, n_sections=params.pipe_sections)
        except (ReconstructionError, ValueError) as exc:
            failures.append(f"chain pair ({b.chain_a}, {b.chain_b}): {type(exc).__name__}: {exc}")
            continue
        done.append(Branch3D(curve, b.landmark_a, b.chain_a, b.chain_b, surf))
    branches = done
    tree = VesselTree3D(branches)
    tree.main_path, tree.main_path_branches = build_main_path(branches, params.join_tol_mm)
    used_a = [pairing.chains_a[b.chain_a] for b in branches]
    used_b = [pairing.chains_b[b.chain_b] for b in branches]
    report = evaluate_reprojection(tree, used_a or va.chains, used_b or vb.chains, model_a, model_b)
    return ReconstructionResult(tree, (fa, fb), report, matrix, corr, pairing, va, vb, failures)


def _curves_of(tree) -> list[ParamCurve3]:
    if isinstance(tree, VesselTree3D):
        return [b.curve for b in tree.branches]
    return [c if isinstance(c, ParamCurve3) else ParamCurve3(c) for c in tree]


def evaluate_reprojection(tree, centerline_chains_a, centerline_chains_b, model_a: ProjectionModel,
                          model_b: ProjectionModel) -> ReprojectionReport:
    """Project each branch back into both views and measure distance to the skeleton.

    Branches are sampled at one sample per pixel of projected arc length
    (longer of the two views); each sample's distance to the nearest
    skeleton pixel of that view is converted to mm at the isocenter plane.
    """
    curves = _curves_of(tree)
    pix_a = [c.pixels for c in centerline_chains_a]
    pix_b = [c.pixels for c in centerline_chains_b]
    if not curves or not pix_a or not pix_b:
        return ReprojectionReport([ErrorStats() for _ in curves], ErrorStats(),
                                  {"view_a": ErrorStats(), "view_b": ErrorStats()})
    kd_a = cKDTree(np.vstack(pix_a).astype(float))
    kd_b = cKDTree(np.vstack(pix_b).astype(float))
    per_branch, all_a, all_b = [], [], []
    for c in curves:
        coarse = c.curve.sample(64)
        la = np.linalg.norm(np.diff(model_a.project(coarse), axis=0), axis=1).sum()
        lb = np.linalg.norm(np.diff(model_b.project(coarse), axis=0), axis=1).sum()
        n = max(2, int(math.ceil(max(la, lb))) + 1)
        pts = c.curve.sample(n)
        ea = kd_a.query(model_a.project(pts))[0] * model_a.pose.mm_per_pixel_at_isocenter
        eb = kd_b.query(model_b.project(pts))[0] * model_b.pose.mm_per_pixel_at_isocenter
        per_branch.append(ErrorStats.of(np.concatenate([ea, eb])))
        all_a.append(ea)
        all_b.append(eb)
    ea, eb = np.concatenate(all_a), np.concatenate(all_b)
    return ReprojectionReport(per_branch, ErrorStats.of(np.concatenate([ea, eb])),
                              {"view_a": ErrorStats.of(ea), "view_b": ErrorStats.of(eb)})


def write_centerlines(tree: VesselTree3D, path, n_samples: int = 200) -> None:
    """Plain-text polylines: a ``branch <id>`` header then ``x y z radius`` rows."""
    lines = ["# x_mm y_mm z_mm radius_mm"]
    for k, b in enumerate(tree.branches):
        a, e = b.curve.curve.domain
        u = np.linspace(a, e, n_samples)
        pts = b.curve.curve(u)
        r = b.curve.radius_at(u) if b.curve.radii is not None else np.zeros(n_samples)
        lines.append(f"branch {k} landmarks {b.landmark_a[0]} {b.landmark_a[1]}")
        lines.extend(f"{x:.6f} {y:.6f} {z:.6f} {rr:.6f}" for (x, y, z), rr in zip(pts, r))
    Path(path).write_text("\n".join(lines) + "\n")


def write_tree_obj(tree: VesselTree3D, path, nu: int = 64, nv: int = 24) -> None:
    write_obj(tree.meshes(nu, nv), path)


def write_branch_objs(tree: VesselTree3D, out_dir, nu: int = 64, nv: int = 24) -> list[Path]:
    out = []
    for name, v, f in tree.meshes(nu, nv):
        p = Path(out_dir) / f"{name}.obj"
        write_obj([(name, v, f)], p)
        out.append(p)
    return out
