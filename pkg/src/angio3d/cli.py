"""Command-line entry points: ``reconstruct``, ``phantom`` and ``eval``.

Exit status is 0 on success, 2 when the reconstruction is partial (some
chains unpaired or some chain pairs failed) and 1 on any fatal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .camera import CArmPose, build_projection, load_calibration, save_calibration
from .errors import CalibrationError, ReconstructionError
from .phantom import MotionTrace, generate_tree, simulate_videos
from .pipeline import (ReconstructionParams, VesselTree3D, analyze_view, evaluate_reprojection,
                       reconstruct, write_branch_objs, write_centerlines, write_tree_obj)
from .raster import list_frames, read_mask, write_mask

log = logging.getLogger("angio3d")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
DEVICE_KINDS = ("balloon", "catheter_tip", "lead_tip")
OUTPUTS = ("tree.obj", "centerlines.txt", "report.csv", "error_matrix.csv", "report.json", "tree.json")


class UsageError(Exception):
    """Bad input paths or arguments; the message names the offender."""


@dataclass
class RunConfig:
    view_a: Path
    view_b: Path
    calib_a: Path
    calib_b: Path
    out: Path
    device_a: Path | None = None
    device_b: Path | None = None
    params: ReconstructionParams = field(default_factory=ReconstructionParams)

    def validate(self) -> None:
        for name in ("view_a", "view_b", "device_a", "device_b"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_dir():
                raise UsageError(f"{name.replace('_', ' ')} directory not found: {p}")
        for name in ("calib_a", "calib_b"):
            p = getattr(self, name)
            if not Path(p).is_file():
                raise UsageError(f"calibration file not found: {p}")
        if self.params.device_kind not in DEVICE_KINDS:
            raise UsageError(f"unknown device kind: {self.params.device_kind}")
        if self.params.match_threshold_mm <= 0:
            raise UsageError("match threshold must be positive")

    def inputs(self) -> dict:
        return {k: (None if getattr(self, k) is None else str(Path(getattr(self, k)).resolve()))
                for k in ("view_a", "view_b", "calib_a", "calib_b", "device_a", "device_b")}

    @classmethod
    def from_manifest(cls, path, out: Path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
            inp = data["inputs"]
            params = ReconstructionParams.from_dict(data["params"])
        except FileNotFoundError:
            raise UsageError(f"manifest not found: {path}") from None
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot parse manifest {path}: {exc}") from None

        def opt(k):
            return None if inp.get(k) is None else Path(inp[k])

        return cls(Path(inp["view_a"]), Path(inp["view_b"]), Path(inp["calib_a"]), Path(inp["calib_b"]),
                   out, opt("device_a"), opt("device_b"), params)


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_video(directory: Path) -> list[np.ndarray]:
    files = list_frames(directory)
    if not files:
        raise UsageError(f"no mask frames (<view>_<NNNN>.pgm|png) in directory: {directory}")
    out = []
    for f in files:
        try:
            out.append(read_mask(f))
        except Exception as exc:  # Pillow raises several unrelated types
            raise UsageError(f"cannot read mask {f}: {exc}") from None
    return out


def _load_calib(path: Path) -> CArmPose:
    try:
        return load_calibration(path)
    except CalibrationError as exc:
        raise UsageError(str(exc)) from None


def _check_size(masks, pose: CArmPose, mask_dir, calib_path) -> None:
    rows, cols = masks[0].shape
    if (rows, cols) != (pose.detector_rows, pose.detector_cols):
        raise UsageError(f"mask size {cols}x{rows} in {mask_dir} does not match detector size "
                         f"{pose.detector_cols}x{pose.detector_rows} in {calib_path}")
    for m in masks:
        if m.shape != masks[0].shape:
            raise UsageError(f"frames of differing size in {mask_dir}")


def _write_error_matrix(matrix, n_a: int, n_b: int, path: Path) -> None:
    from .matching import ErrorMatrix

    (matrix or ErrorMatrix(np.full((n_a, n_b), np.inf))).to_csv(path)


def run_reconstruct(cfg: RunConfig) -> int:
    cfg.validate()
    pose_a, pose_b = _load_calib(cfg.calib_a), _load_calib(cfg.calib_b)
    masks_a, masks_b = _read_video(cfg.view_a), _read_video(cfg.view_b)
    _check_size(masks_a, pose_a, cfg.view_a, cfg.calib_a)
    _check_size(masks_b, pose_b, cfg.view_b, cfg.calib_b)
    dev_a = _read_video(cfg.device_a) if cfg.device_a else None
    dev_b = _read_video(cfg.device_b) if cfg.device_b else None
    for dev, masks, d in ((dev_a, masks_a, cfg.device_a), (dev_b, masks_b, cfg.device_b)):
        if dev is not None and len(dev) != len(masks):
            raise UsageError(f"{len(dev)} device frames in {d} but {len(masks)} vessel frames")

    result = reconstruct(masks_a, masks_b, dev_a, dev_b, pose_a, pose_b, cfg.params)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    tree = result.tree
    write_tree_obj(tree, out / "tree.obj")
    write_branch_objs(tree, out)
    write_centerlines(tree, out / "centerlines.txt")
    result.report.to_csv(out / "report.csv")
    result.report.to_json(out / "report.json")
    tree.save(out / "tree.json")
    _write_error_matrix(result.error_matrix, len(masks_a), len(masks_b), out / "error_matrix.csv")

    status = "partial" if result.partial else "ok"
    manifest = {
        "tool": "angio3d",
        "version": __version__,
        "inputs": cfg.inputs(),
        "input_sha256": {
            "calib_a": _sha256(cfg.calib_a),
            "calib_b": _sha256(cfg.calib_b),
        },
        "params": cfg.params.to_dict(),
        "frames": list(result.frames),
        "status": status,
        "unpaired": result.unpaired,
        "failures": result.failures,
        "n_branches": len(tree.branches),
        "outputs": {name: _sha256(out / name) for name in OUTPUTS},
        "reprojection_mean_mm": result.report.overall.mean_mm,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"frames {result.frames[0]},{result.frames[1]}; {len(tree.branches)} branches; "
          f"reprojection {result.report.summary()}")
    for line in result.unpaired + result.failures:
        print(line, file=sys.stderr)
    return EXIT_PARTIAL if result.partial else EXIT_OK


def run_phantom(out: Path, seed: int = 0, n_branches: int = 3, n_frames: int = 20,
                pose_a: CArmPose | None = None, pose_b: CArmPose | None = None,
                amplitude_mm: float = 10.0, phase_offset_s: float = 0.37, noise_px: float = 0.0,
                extent_mm: float = 40.0, truncate_b: int | None = None) -> int:
    """Write a synthetic case: mask videos, device videos, calibrations and ground truth."""
    pose_a = pose_a or CArmPose(0.0, 0.0)
    pose_b = pose_b or CArmPose(30.0, 0.0)
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory not writable: {out} ({exc.strerror})") from None
    tree = generate_tree(seed=seed, n_branches=n_branches, extent_mm=extent_mm)
    try:
        tree_b = None if truncate_b is None else tree.with_truncated(truncate_b, 0.5)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"cannot truncate branch {truncate_b}: {exc}") from None
    # the balloon sits a few mm beside the root so it never hides a vessel
    device_point = tree.branches[0].control_points[0] + np.array([6.0, 0.0, 0.0])
    motion = MotionTrace.with_amplitude(amplitude_mm)
    vids = simulate_videos(tree, device_point, pose_a, pose_b, n_frames, (0.0, phase_offset_s),
                           motion=motion, noise=noise_px, seed=seed, tree_b=tree_b)
    for name, frames in (("view_a", vids.masks_a), ("view_b", vids.masks_b),
                         ("device_a", vids.device_a), ("device_b", vids.device_b)):
        d = out / name
        d.mkdir(exist_ok=True)
        for f, m in enumerate(frames):
            write_mask(m, d / f"{name[-1]}_{f:04d}.pgm")
    save_calibration(pose_a, out / "calib_a.json")
    save_calibration(pose_b, out / "calib_b.json")
    truth = {
        "seed": seed,
        "n_branches": n_branches,
        "n_frames": n_frames,
        "amplitude_mm": amplitude_mm,
        "phase_offsets_s": [0.0, phase_offset_s],
        "noise_px": noise_px,
        "truncated_in_b": truncate_b,
        "device_point_mm": device_point.tolist(),
        "true_pair": list(vids.true_pair),
        "displacements_a_mm": vids.displacements_a.tolist(),
        "displacements_b_mm": vids.displacements_b.tolist(),
        "tree": tree.to_dict(),
    }
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    print(f"phantom seed {seed}: {n_branches} branches, {n_frames} frames, true pair "
          f"{vids.true_pair[0]},{vids.true_pair[1]} -> {out}")
    return EXIT_OK


def run_eval(tree_path: Path, view_a: Path, view_b: Path, calib_a: Path, calib_b: Path,
             frames: tuple[int, int] = (0, 0), out: Path | None = None, min_spur_px: int = 5) -> int:
    tree_path = Path(tree_path)
    if not tree_path.is_file():
        raise UsageError(f"tree file not found: {tree_path}")
    try:
        tree = VesselTree3D.load(tree_path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot parse tree {tree_path}: {exc}") from None
    pose_a, pose_b = _load_calib(Path(calib_a)), _load_calib(Path(calib_b))
    masks = []
    for src, pose, calib, f in ((view_a, pose_a, calib_a, frames[0]), (view_b, pose_b, calib_b, frames[1])):
        src = Path(src)
        if src.is_dir():
            video = _read_video(src)
        elif src.is_file():
            try:
                video = [read_mask(src)]
            except Exception as exc:  # Pillow raises several unrelated types
                raise UsageError(f"cannot read mask {src}: {exc}") from None
        else:
            raise UsageError(f"mask path not found: {src}")
        _check_size(video, pose, src, calib)
        if not 0 <= f < len(video):
            raise UsageError(f"frame {f} out of range for {src} ({len(video)} frames)")
        masks.append(video[f])
    va = analyze_view(masks[0], min_spur_px)
    vb = analyze_view(masks[1], min_spur_px)
    report = evaluate_reprojection(tree, va.chains, vb.chains, build_projection(pose_a), build_projection(pose_b))
    print(f"reprojection error: {report.summary()}")
    for bid, s in report.rows():
        print(f"  {bid:>7}: n={s.n_samples} mean={s.mean_mm:.4f} std={s.std_mm:.4f} max={s.max_mm:.4f} mm")
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "report.csv")
        report.to_json(out / "report.json")
    return EXIT_OK


def _frames_arg(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A,B frame indices, got {text!r}") from None
    return a, b


def _angles_arg(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected PRIMARY,SECONDARY degrees, got {text!r}") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="angio3d", description="Two-view coronary centreline reconstruction.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reconstruct", help="reconstruct a 3D tree from two mask videos")
    r.add_argument("--view-a", type=Path)
    r.add_argument("--view-b", type=Path)
    r.add_argument("--calib-a", type=Path)
    r.add_argument("--calib-b", type=Path)
    r.add_argument("--device-a", type=Path, help="device mask directory for view A")
    r.add_argument("--device-b", type=Path, help="device mask directory for view B")
    r.add_argument("--device-kind", choices=DEVICE_KINDS)
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--frames", type=_frames_arg, help="manual frame pair A,B")
    r.add_argument("--match-threshold-mm", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--manifest", type=Path, help="rerun inputs and parameters from a manifest")

    ph = sub.add_parser("phantom", help="write a synthetic two-view case")
    ph.add_argument("--out", type=Path, required=True)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--n-branches", type=int, default=3)
    ph.add_argument("--n-frames", type=int, default=20)
    ph.add_argument("--pose-a", type=_angles_arg, default=(0.0, 0.0), help="primary,secondary degrees")
    ph.add_argument("--pose-b", type=_angles_arg, default=(30.0, 0.0), help="primary,secondary degrees")
    ph.add_argument("--amplitude-mm", type=float, default=10.0)
    ph.add_argument("--phase-offset-s", type=float, default=0.37,
                    help="start time of video B; fractional frame offsets avoid ambiguous pairs")
    ph.add_argument("--noise-px", type=float, default=0.0)
    ph.add_argument("--extent-mm", type=float, default=40.0)
    ph.add_argument("--truncate-b", type=int, metavar="BRANCH",
                    help="render only the proximal half of this leaf branch in view B")

    e = sub.add_parser("eval", help="reprojection error of a saved tree against masks")
    e.add_argument("--tree", type=Path, required=True, help="tree.json from reconstruct")
    e.add_argument("--view-a", type=Path, required=True, help="mask file or directory")
    e.add_argument("--view-b", type=Path, required=True, help="mask file or directory")
    e.add_argument("--calib-a", type=Path, required=True)
    e.add_argument("--calib-b", type=Path, required=True)
    e.add_argument("--frames", type=_frames_arg, default=(0, 0))
    e.add_argument("--out", type=Path)
    return p


def _config_from_args(a) -> RunConfig:
    if a.manifest is not None:
        cfg = RunConfig.from_manifest(a.manifest, a.out)
    else:
        missing = [f"--{k.replace('_', '-')}" for k in ("view_a", "view_b", "calib_a", "calib_b")
                   if getattr(a, k) is None]
        if missing:
            raise UsageError(f"missing required arguments: {' '.join(missing)}")
        cfg = RunConfig(a.view_a, a.view_b, a.calib_a, a.calib_b, a.out, a.device_a, a.device_b)
    # explicit flags override the manifest
    for k in ("view_a", "view_b", "calib_a", "calib_b", "device_a", "device_b"):
        if a.manifest is not None and getattr(a, k) is not None:
            setattr(cfg, k, getattr(a, k))
    if a.device_kind is not None:
        cfg.params.device_kind = a.device_kind
    if a.frames is not None:
        cfg.params.frames = a.frames
    if a.match_threshold_mm is not None:
        cfg.params.match_threshold_mm = a.match_threshold_mm
    if a.seed is not None:
        cfg.params.seed = a.seed
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "reconstruct":
            return run_reconstruct(_config_from_args(args))
        if args.command == "phantom":
            return run_phantom(args.out, args.seed, args.n_branches, args.n_frames,
                               CArmPose(*args.pose_a), CArmPose(*args.pose_b), args.amplitude_mm,
                               args.phase_offset_s, args.noise_px, args.extent_mm, args.truncate_b)
        return run_eval(args.tree, args.view_a, args.view_b, args.calib_a, args.calib_b, args.frames, args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ReconstructionError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename}", file=sys.stderr)
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
