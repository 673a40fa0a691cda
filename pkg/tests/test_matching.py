import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from angio3d.camera import reconstruction_error, triangulate_pixels
from angio3d.errors import NoValidPairs
from angio3d.matching import (Correspondence, ErrorMatrix, assign_min_cost, match_landmarks,
                              pair_branch_curves, pairwise_errors, phase_match)
from angio3d.phantom import generate_tree
from angio3d.raster import PixelChain


def brute_force_cost(C):
    """Minimum total over all injective maps from the shorter side to the longer one."""
    C = np.asarray(C)
    if C.shape[0] > C.shape[1]:
        C = C.T
    n, m = C.shape
    return min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))


def landmarks_3d(rng, n):
    return rng.uniform(-40, 40, (n, 3))


def test_assignment_equals_brute_force_on_random_matrices():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n, m = rng.integers(1, 7, size=2)
        C = rng.uniform(0, 10, (n, m))
        pairs = assign_min_cost(C)
        assert len(pairs) == min(n, m)
        assert len({r for r, _ in pairs}) == len(pairs) == len({c for _, c in pairs})
        assert sum(C[r, c] for r, c in pairs) == pytest.approx(brute_force_cost(C), abs=1e-9)


def test_match_landmarks_total_equals_brute_force(models):
    ma, mb = models
    rng = np.random.default_rng(12)
    for _ in range(200):
        na, nb = rng.integers(1, 7, size=2)
        pa = rng.uniform(50, 450, (na, 2))
        pb = rng.uniform(50, 450, (nb, 2))
        corr = match_landmarks(pa, pb, ma, mb, match_threshold=np.inf)
        E = pairwise_errors(pa, pb, ma, mb)
        total = sum(e for _, _, e in corr.pairs)
        assert len(corr.pairs) == min(na, nb)
        assert total == pytest.approx(brute_force_cost(E), rel=1e-12, abs=1e-9)


def test_infinite_entries_never_assigned():
    C = np.array([[np.inf, 1.0], [np.inf, 2.0]])
    assert assign_min_cost(C) == [(0, 1)] or assign_min_cost(C) == [(1, 1)]
    assert assign_min_cost(np.full((2, 2), np.inf)) == []


def test_pairwise_errors_match_scalar_oracle(models):
    ma, mb = models
    rng = np.random.default_rng(3)
    pa = rng.uniform(0, 512, (4, 2))
    pb = rng.uniform(0, 512, (3, 2))
    E = pairwise_errors(pa, pb, ma, mb)
    for i, j in itertools.product(range(4), range(3)):
        P, _ = triangulate_pixels(ma, mb, pa[i:i + 1], pb[j:j + 1])
        assert E[i, j] == pytest.approx(reconstruction_error(P[0], pa[i], pb[j], ma, mb), rel=1e-12)


def test_projected_branch_points_give_identity(models):
    ma, mb = models
    X = landmarks_3d(np.random.default_rng(5), 5)
    corr = match_landmarks(ma.project(X), mb.project(X), ma, mb)
    assert [(a, b) for a, b, _ in corr.pairs] == [(i, i) for i in range(5)]
    assert max(e for _, _, e in corr.pairs) < 1e-6
    assert corr.unmatched_a == [] and corr.unmatched_b == []


def test_single_consistent_pair(models):
    ma, mb = models
    X = np.array([[3.0, -7.0, 2.0]])
    corr = match_landmarks(ma.project(X), mb.project(X), ma, mb)
    assert len(corr.pairs) == 1 and corr.pairs[0][:2] == (0, 0)


def test_spurious_point_is_unmatched(models):
    ma, mb = models
    X = landmarks_3d(np.random.default_rng(6), 3)
    pa, pb = ma.project(X), mb.project(X)
    # LAO rotation is about the vertical axis, so epipolar lines run along columns; shift rows
    extra = pa[0] + [0.0, 60.0]
    corr = match_landmarks(np.vstack([pa, extra]), pb, ma, mb)
    assert corr.unmatched_a == [3]
    assert sorted(corr.a_to_b().items()) == [(0, 0), (1, 1), (2, 2)]
    assert all(e <= 2.0 for _, _, e in corr.pairs)


def test_threshold_drops_pairs(models):
    ma, mb = models
    X = landmarks_3d(np.random.default_rng(7), 2)
    pb = mb.project(X)
    pa = ma.project(X) + [[0, 0], [0, 40]]
    corr = match_landmarks(pa, pb, ma, mb, match_threshold=2.0)
    assert corr.a_to_b() == {0: 0}
    assert corr.unmatched_a == [1] and corr.unmatched_b == [1]


def test_empty_inputs_all_unmatched(models):
    ma, mb = models
    corr = match_landmarks(np.empty((0, 2)), [[1.0, 2.0]], ma, mb)
    assert corr.pairs == [] and corr.unmatched_b == [0]


@settings(max_examples=40, deadline=None)
@given(st.permutations(range(5)), st.permutations(range(5)))
def test_label_equivariance(pa_perm, pb_perm):
    from angio3d.camera import CArmPose, build_projection
    ma, mb = build_projection(CArmPose(0, 0)), build_projection(CArmPose(30, 0))
    X = landmarks_3d(np.random.default_rng(8), 5)
    pa, pb = ma.project(X), mb.project(X)
    base = match_landmarks(pa, pb, ma, mb).a_to_b()
    perm = match_landmarks(pa[list(pa_perm)], pb[list(pb_perm)], ma, mb).a_to_b()
    for i_new, i_old in enumerate(pa_perm):
        assert pb_perm[perm[i_new]] == base[i_old]


def test_phase_match_is_global_minimum(models):
    ma, mb = models
    rng = np.random.default_rng(9)
    base = np.array([1.0, 2.0, 3.0])
    kpa = [ma.project((base + rng.normal(0, 3, 3))[None])[0] for _ in range(6)]
    kpb = [mb.project((base + rng.normal(0, 3, 3))[None])[0] for _ in range(5)]
    kpa[2] = None
    i, j, e, M = phase_match(kpa, kpb, ma, mb)
    assert M.shape == (6, 5)
    assert np.isinf(M.values[2]).all()
    assert e == M.values.min() == M.values[i, j]


def test_phase_match_single_frame(models):
    ma, mb = models
    X = np.array([[0.0, 5.0, -3.0]])
    i, j, e, M = phase_match([ma.project(X)[0]], [mb.project(X)[0]], ma, mb)
    assert (i, j) == (0, 0) and e < 1e-9


def test_phase_match_without_keypoints_raises(models):
    ma, mb = models
    with pytest.raises(NoValidPairs):
        phase_match([None, None], [None], ma, mb)


def test_argmin_tie_break_is_lexicographic():
    M = ErrorMatrix(np.array([[3.0, 1.0], [1.0, 1.0]]))
    assert M.argmin() == (0, 1)


def test_error_matrix_csv_round_trip(tmp_path):
    v = np.array([[0.1234567890123, np.inf], [2.5, 1e-9]])
    ErrorMatrix(v).to_csv(tmp_path / "m.csv")
    back = ErrorMatrix.from_csv(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.values, v)
    header = (tmp_path / "m.csv").read_text().splitlines()[0]
    assert header == "frame_a,b0,b1"


def _chain(start, end, n=10):
    return PixelChain(np.column_stack([np.arange(n), np.zeros(n)]).astype(int), start, end)


def test_pairing_reorients_reversed_chains():
    corr = Correspondence([(0, 2, 0.0), (1, 0, 0.0), (2, 1, 0.0)])
    chains_a = [_chain(0, 1), _chain(1, 2, 12)]
    chains_b = [_chain(1, 0, 12), _chain(2, 0)]  # chain 0 runs opposite to its A partner
    p = pair_branch_curves(corr, chains_a, chains_b)
    assert p.pairs == [(0, 1), (1, 0)]
    np.testing.assert_array_equal(p.chains_b[1].pixels, chains_b[1].pixels)
    a2b = corr.a_to_b()
    for i, j in p.pairs:
        assert (a2b[chains_a[i].start], a2b[chains_a[i].end]) == (p.chains_b[j].start, p.chains_b[j].end)
    np.testing.assert_array_equal(p.chains_b[0].pixels, chains_b[0].pixels[::-1])


def test_pairing_reports_unpaired_chains():
    corr = Correspondence([(0, 0, 0.0)], unmatched_a=[1], unmatched_b=[1])
    p = pair_branch_curves(corr, [_chain(0, 1)], [_chain(0, 1)])
    assert p.pairs == [] and p.unpaired_a == [0] and p.unpaired_b == [0]


def test_phantom_y_tree_gives_three_pairs(models):
    from angio3d.phantom import forward_project
    from angio3d.pipeline import analyze_view
    ma, mb = models
    tree = generate_tree(seed=2, n_branches=3)
    va = analyze_view(forward_project(tree, ma), 5, 8)
    vb = analyze_view(forward_project(tree, mb), 5, 8)
    corr = match_landmarks(va.skeleton.landmarks, vb.skeleton.landmarks, ma, mb)
    p = pair_branch_curves(corr, va.chains, vb.chains)
    assert len(p.pairs) == 3 and p.unpaired_a == [] and p.unpaired_b == []
