"""Acceptance criteria, each at its stated tolerance.

Every test prints a single ``PASS``/``FAIL`` line; the lines are repeated
in the pytest terminal summary. Run standalone with
``python3 tests/test_acceptance.py``.
"""
import itertools
import time

import numpy as np
import pytest

from angio3d.cli import main as cli_main
from angio3d.matching import match_landmarks, pairwise_errors, phase_match
from angio3d.phantom import MotionTrace, forward_project, generate_tree, simulate_videos, true_alignment
from angio3d.pipeline import reconstruct
from angio3d.raster import classify_points, device_keypoint, extract_chains, radius_profile, thin
from angio3d.spline import (BSplineCurve, ParamCurve3, basis, clamped_uniform_knots, fit_cubic,
                            intersect_surfaces, pipe_surface)

from acceptance_log import verdict
from corpus import components8, holes4, line, mask_corpus, ring, y_shape
from helpers import LAO30, PA, centreline_distance
from oracles import hausdorff, phantom_curves, projected_pair, surface_distance_brute


def test_1_phantom_round_trip():
    t0 = time.perf_counter()
    tree = generate_tree(seed=0, n_branches=3)
    ma, mb = forward_project(tree, PA), forward_project(tree, LAO30)
    res = reconstruct([ma], [mb], None, None, PA, LAO30)
    elapsed = time.perf_counter() - t0
    reproj = res.report.overall.mean_mm
    dist3d = centreline_distance(res.tree, tree).mean()
    ok = len(res.tree.branches) == 3 and reproj < 0.2 and dist3d < 0.2 and elapsed < 30.0
    assert verdict("[1] phantom round-trip", ok,
                   f"{len(res.tree.branches)} branches, reprojection {reproj:.3f} mm (<0.2), "
                   f"3D centreline {dist3d:.3f} mm (<0.2), {elapsed:.1f} s (<30)")


def test_2_phase_matching():
    tree = generate_tree(seed=1, n_branches=3)
    device = tree.branches[0].control_points[0] + [6.0, 0.0, 0.0]
    v = simulate_videos(tree, device, PA, LAO30, 20, (0.0, 0.37), MotionTrace.with_amplitude(10.0),
                        render_vessels=False)
    truth = true_alignment(v.displacements_a, v.displacements_b)
    from angio3d.camera import build_projection
    mA, mB = build_projection(PA), build_projection(LAO30)
    t0 = time.perf_counter()
    kpa = [device_keypoint(m) for m in v.device_a]
    kpb = [device_keypoint(m) for m in v.device_b]
    i, j, err, M = phase_match(kpa, kpb, mA, mB)
    elapsed = time.perf_counter() - t0
    ratio = M.values.mean() / err
    ok = abs(i - truth[0]) <= 1 and abs(j - truth[1]) <= 1 and ratio >= 5.0 and elapsed < 1.0
    assert verdict("[2] phase matching", ok,
                   f"selected ({i},{j}) vs truth {truth} (+-1), matched {err:.3f} mm vs matrix mean "
                   f"{M.values.mean():.3f} mm = {ratio:.0f}x (>=5), 20x20 in {elapsed * 1e3:.0f} ms (<1000)")


def test_3_intersection_oracle():
    worst_h = worst_f = worst_bf = 0.0
    n_points = 0
    single = True
    for curve in phantom_curves(20):
        S1, S2 = projected_pair(curve)
        res = intersect_surfaces(S1, S2)
        single &= len(res) == 1
        r = max(res, key=lambda c: len(c.points))
        q = r.params
        F = np.linalg.norm(S1(q[:, 0], q[:, 1]) - S2(q[:, 2], q[:, 3]), axis=1)
        worst_f = max(worst_f, F.max())
        n_points += len(F)
        worst_h = max(worst_h, hausdorff(r.curve, curve, 40))
        for x in r.points[np.linspace(0, len(r.points) - 1, 12).astype(int)]:
            worst_bf = max(worst_bf, surface_distance_brute(S1, x), surface_distance_brute(S2, x))
    ok = single and worst_h < 1e-4 and worst_f < 1e-6 and worst_bf < 1e-5
    assert verdict("[3] intersection oracle", ok,
                   f"20 curves, one branch each: {single}; Hausdorff {worst_h:.1e} (<1e-4); "
                   f"|S1-S2| {worst_f:.1e} over {n_points} points (<1e-6); "
                   f"brute-force grid distance {worst_bf:.1e} (<1e-5)")


def test_4_spline_kernel():
    rng = np.random.default_rng(7)
    worst_pu = 0.0
    for _ in range(1000):
        p = int(rng.integers(0, 5))
        n = int(rng.integers(p + 1, p + 9))
        inner = np.sort(rng.random(n - p - 1))
        U = np.concatenate([[0.0] * (p + 1), inner, [1.0] * (p + 1)])
        u = float(rng.random())
        worst_pu = max(worst_pu, abs(sum(basis(i, p, u, U) for i in range(n)) - 1.0))
    bez = [basis(i, 3, 0.5, [0, 0, 0, 0, 1, 1, 1, 1]) for i in range(4)]
    bez_err = np.abs(np.subtract(bez, [1 / 8, 3 / 8, 3 / 8, 1 / 8])).max()
    end_exact = True
    for _ in range(100):
        n = int(rng.integers(4, 12))
        P = rng.normal(size=(n, 3))
        c = BSplineCurve(3, P, clamped_uniform_knots(n, 3))
        e = c(np.array([0.0, 1.0]))
        end_exact &= bool(np.array_equal(e[0], P[0]) and np.array_equal(e[1], P[-1]))
    t = np.linspace(0, 1, 60)
    axis = ParamCurve3(fit_cubic(np.column_stack([20 * t, 6 * np.sin(4 * t), 3 * np.cos(2 * t)]), 6),
                       [2.0, 1.0])
    S = pipe_surface(axis, n_sections=33)
    v = np.linspace(0, 1, 101)
    pipe_r = pipe_plane = 0.0
    for u in np.linspace(0, 1, 33):
        centre, tangent = axis.curve.derivatives(u, 1)
        ring_pts = S(np.full_like(v, u), v) - centre
        pipe_r = max(pipe_r, np.abs(np.linalg.norm(ring_pts, axis=1) - (2.0 - u)).max())
        pipe_plane = max(pipe_plane, np.abs(ring_pts @ (tangent / np.linalg.norm(tangent))).max())
    ok = worst_pu < 1e-12 and bez_err == 0.0 and end_exact and pipe_r < 1e-12 and pipe_plane < 1e-12
    assert verdict("[4] spline kernel", ok,
                   f"partition of unity {worst_pu:.1e} over 1000 cases (<1e-12); Bezier at 1/2 off by "
                   f"{bez_err:.1e}; clamped ends exact: {end_exact}; pipe radius {pipe_r:.1e}, "
                   f"normal-plane {pipe_plane:.1e} (<1e-12)")


def _brute_radius(mask, pixels):
    """Nearest background pixel centre (outside counts as background) minus half a pixel, floored at 0.5."""
    padded = np.pad(mask, 1)
    bg = np.argwhere(~padded)[:, ::-1].astype(float) - 1.0
    d = np.array([np.sqrt(((bg - p) ** 2).sum(axis=1)).min() for p in pixels.astype(float)])
    return np.maximum(d - 0.5, 0.5)


def test_5_raster_properties():
    corpus = mask_corpus()
    idem = conn = True
    for m in corpus:
        t = thin(m)
        idem &= bool(np.array_equal(thin(t), t))
        conn &= components8(t) == components8(m) and holes4(t) == holes4(m) and not (t & ~m).any()
    counts = []
    for fixture, expected in ((y_shape(), (3, 1)), (line(10), (2, 0)), (ring(4), (0, 0))):
        sk = classify_points(thin(fixture))
        counts.append((len(sk.end_points), len(sk.branch_points)) == expected)
    worst_r = 0.0
    for m in corpus[15:]:
        chains, _ = extract_chains(classify_points(thin(m)))
        for ch in chains[:2]:
            worst_r = max(worst_r, np.abs(radius_profile(m, ch) - _brute_radius(m, ch.pixels)).max())
    ok = idem and conn and all(counts) and worst_r < 1e-9
    assert verdict("[5] raster properties", ok,
                   f"thin idempotent on {len(corpus)} masks: {idem}; connectivity kept: {conn}; "
                   f"Y/line/ring landmark counts: {counts}; radius vs brute-force EDT {worst_r:.1e} (<1e-9)")


def test_6_assignment_optimality(models):
    ma, mb = models
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        na, nb = (int(x) for x in rng.integers(1, 7, size=2))
        pa = rng.uniform(40, 470, (na, 2))
        pb = rng.uniform(40, 470, (nb, 2))
        E = pairwise_errors(pa, pb, ma, mb)
        C, n, m = (E, na, nb) if na <= nb else (E.T, nb, na)
        best = min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
        corr = match_landmarks(pa, pb, ma, mb, match_threshold=np.inf)
        total = sum(e for _, _, e in corr.pairs)
        mismatches += (len(corr.pairs) != n) or abs(total - best) > 1e-9 * max(1.0, best)
    assert verdict("[6] assignment optimality", mismatches == 0,
                   f"{1000 - mismatches}/1000 random problems up to 6x6 equal permutation brute force")


def test_7_determinism(tmp_path):
    case = tmp_path / "case"
    assert cli_main(["phantom", "--out", str(case), "--seed", "11", "--n-frames", "6"]) == 0
    first = tmp_path / "first"
    assert cli_main(["reconstruct", "--view-a", str(case / "view_a"), "--view-b", str(case / "view_b"),
                     "--calib-a", str(case / "calib_a.json"), "--calib-b", str(case / "calib_b.json"),
                     "--device-a", str(case / "device_a"), "--device-b", str(case / "device_b"),
                     "--out", str(first)]) == 0
    runs = []
    for name in ("run1", "run2"):
        assert cli_main(["reconstruct", "--manifest", str(first / "manifest.json"),
                         "--out", str(tmp_path / name)]) == 0
        runs.append(tmp_path / name)
    names = sorted(p.name for p in runs[0].iterdir()
                   if p.suffix in (".obj", ".csv") or p.name.startswith("report"))
    same = [n for n in names if (runs[0] / n).read_bytes() == (runs[1] / n).read_bytes()]
    ok = len(names) >= 5 and same == names
    assert verdict("[7] determinism", ok, f"{len(same)}/{len(names)} OBJ/CSV/report files byte-identical "
                                          f"across two manifest runs ({', '.join(names)})")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
