"""Motion-phase matching between two videos and landmark correspondence
between the two chosen frames, both driven by the two-view reconstruction
error of midpoint-triangulated points."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .camera import ProjectionModel, triangulate_pixels
from .errors import NoValidPairs
from .raster import PixelChain


def pairwise_errors(points_a, points_b, model_a: ProjectionModel, model_b: ProjectionModel) -> np.ndarray:
    """Reconstruction error (mm) for every pairing of pixels in A with pixels in B."""
    pa = np.asarray(points_a, dtype=float).reshape(-1, 2)
    pb = np.asarray(points_b, dtype=float).reshape(-1, 2)
    A = np.repeat(pa, len(pb), axis=0)
    B = np.tile(pb, (len(pa), 1))
    P, _ = triangulate_pixels(model_a, model_b, A, B)
    ea = np.linalg.norm(model_a.project(P) - A, axis=1) * model_a.pose.mm_per_pixel_at_isocenter
    eb = np.linalg.norm(model_b.project(P) - B, axis=1) * model_b.pose.mm_per_pixel_at_isocenter
    err = np.maximum(ea, eb)
    err[~np.isfinite(err)] = np.inf
    return err.reshape(len(pa), len(pb))


@dataclass
class ErrorMatrix:
    """``values[i, j]``: error of frame ``i`` of video A against frame ``j`` of video B."""

    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    def argmin(self) -> tuple[int, int]:
        v = self.values
        if not np.isfinite(v).any():
            raise NoValidPairs("no frame pair has key points in both views")
        # np.argmin returns the first minimum in row-major order
        i, j = np.unravel_index(int(np.argmin(np.where(np.isfinite(v), v, np.inf))), v.shape)
        return int(i), int(j)

    def to_csv(self, path) -> None:
        """Rows are frames of A, columns frames of B; missing pairs written as ``inf``."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame_a"] + [f"b{j}" for j in range(self.values.shape[1])])
            for i, row in enumerate(self.values):
                w.writerow([i] + [("inf" if not np.isfinite(x) else repr(float(x))) for x in row])

    @classmethod
    def from_csv(cls, path) -> "ErrorMatrix":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls(np.array([[float(x) for x in r[1:]] for r in rows]))


def phase_match(keypoints_a: Sequence, keypoints_b: Sequence, model_a: ProjectionModel,
                model_b: ProjectionModel) -> tuple[int, int, float, ErrorMatrix]:
    """Pick the frame pair whose device key points reconstruct best.

    ``keypoints_a[i]`` is the ``(col, row)`` key point of frame ``i`` or
    ``None`` when the device was not found. Ties go to the smallest
    ``(frame_a, frame_b)``.
    """
    na, nb = len(keypoints_a), len(keypoints_b)
    M = np.full((na, nb), np.inf)
    ia = [i for i, k in enumerate(keypoints_a) if k is not None]
    ib = [j for j, k in enumerate(keypoints_b) if k is not None]
    if ia and ib:
        E = pairwise_errors([keypoints_a[i] for i in ia], [keypoints_b[j] for j in ib], model_a, model_b)
        M[np.ix_(ia, ib)] = E
    matrix = ErrorMatrix(M)
    i, j = matrix.argmin()
    return i, j, float(M[i, j]), matrix


@dataclass
class Correspondence:
    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_a: list[int] = field(default_factory=list)
    unmatched_b: list[int] = field(default_factory=list)

    def a_to_b(self) -> dict[int, int]:
        return {a: b for a, b, _ in self.pairs}


def assign_min_cost(cost: np.ndarray) -> list[tuple[int, int]]:
    """Optimal one-to-one assignment on a rectangular matrix; infinite entries are never used."""
    C = np.asarray(cost, dtype=float)
    finite = np.isfinite(C)
    if not finite.any():
        return []
    big = (np.abs(C[finite]).max() + 1.0) * (C.size + 1)
    rows, cols = linear_sum_assignment(np.where(finite, C, big))
    return [(int(r), int(c)) for r, c in zip(rows, cols) if finite[r, c]]


def match_landmarks(points_a, points_b, model_a: ProjectionModel, model_b: ProjectionModel,
                    match_threshold: float = 2.0) -> Correspondence:
    """One-to-one landmark matching with minimum total reconstruction error.

    Pairs whose error exceeds ``match_threshold`` (mm) are reported as
    unmatched instead.
    """
    pa = np.asarray(points_a, dtype=float).reshape(-1, 2)
    pb = np.asarray(points_b, dtype=float).reshape(-1, 2)
    if len(pa) == 0 or len(pb) == 0:
        return Correspondence([], list(range(len(pa))), list(range(len(pb))))
    E = pairwise_errors(pa, pb, model_a, model_b)
    pairs = []
    for r, c in assign_min_cost(E):
        if E[r, c] <= match_threshold:
            pairs.append((r, c, float(E[r, c])))
    pairs.sort()
    ma = {a for a, _, _ in pairs}
    mb = {b for _, b, _ in pairs}
    return Correspondence(pairs, [i for i in range(len(pa)) if i not in ma],
                          [j for j in range(len(pb)) if j not in mb])


@dataclass
class ChainPairing:
    pairs: list[tuple[int, int]]
    """``(index into chains_a, index into chains_b)``; chain B oriented like chain A."""
    chains_a: list[PixelChain]
    chains_b: list[PixelChain]
    unpaired_a: list[int] = field(default_factory=list)
    unpaired_b: list[int] = field(default_factory=list)


def pair_branch_curves(corr: Correspondence, chains_a: Sequence[PixelChain],
                       chains_b: Sequence[PixelChain]) -> ChainPairing:
    """Pair chains whose two end landmarks both correspond.

    Chains of B are reversed where needed so each pair runs landmark to
    landmark in the same order. Returned ``chains_b`` holds the oriented
    chains.
    """
    a2b = corr.a_to_b()
    index_b = {}
    for j, ch in enumerate(chains_b):
        if ch.start is None or ch.end is None:
            continue
        index_b.setdefault((ch.start, ch.end), []).append((j, False))
        index_b.setdefault((ch.end, ch.start), []).append((j, True))
    oriented_b = list(chains_b)
    used_b = set()
    pairs, unpaired_a = [], []
    for i, ch in enumerate(chains_a):
        if ch.start is None or ch.end is None or ch.start not in a2b or ch.end not in a2b:
            unpaired_a.append(i)
            continue
        key = (a2b[ch.start], a2b[ch.end])
        options = [(j, flip) for j, flip in index_b.get(key, []) if j not in used_b]
        if not options:
            unpaired_a.append(i)
            continue
        # several chains between the same landmarks: pick the closest length
        j, flip = min(options, key=lambda o: (abs(len(chains_b[o[0]]) - len(ch)), o[0]))
        used_b.add(j)
        if flip:
            oriented_b[j] = chains_b[j].reversed()
        pairs.append((i, j))
    unpaired_b = [j for j in range(len(chains_b)) if j not in used_b]
    return ChainPairing(pairs, list(chains_a), oriented_b, unpaired_a, unpaired_b)
