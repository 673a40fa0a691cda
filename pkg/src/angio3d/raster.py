"""Binary-mask processing: thinning, skeleton point classification, chain
extraction, vessel radius estimation and device key points.

Masks are boolean numpy arrays indexed ``[row, col]``; points are returned
as ``(col, row)`` pairs to match detector pixel coordinates.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import AmbiguousTip, EmptyMask

EIGHT = np.ones((3, 3), dtype=bool)

# neighbour offsets P2..P9 (clockwise from north), as (drow, dcol)
_RING = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def as_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("mask must be a non-empty 2-D array")
    return m.astype(bool)


def _neighbours(padded: np.ndarray):
    """The eight shifted views P2..P9 of a padded image (interior region)."""
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    return [padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] for dr, dc in _RING]


def neighbour_count(mask: np.ndarray) -> np.ndarray:
    m = as_mask(mask).astype(np.uint8)
    counts = ndimage.convolve(m, EIGHT.astype(np.uint8), mode="constant") - m
    return np.where(m.astype(bool), counts, 0)


def _zhang_suen_pass(img: np.ndarray, first: bool) -> np.ndarray:
    """Deletion candidates of one Zhang-Suen sub-iteration."""
    pad = np.pad(img, 1)
    P = [n.astype(np.uint8) for n in _neighbours(pad)]
    p2, p3, p4, p5, p6, p7, p8, p9 = P
    B = sum(P)
    seq = P + [P[0]]
    A = sum(((seq[k] == 0) & (seq[k + 1] == 1)).astype(np.uint8) for k in range(8))
    if first:
        c = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
    else:
        c = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
    cand = img & (B >= 2) & (B <= 6) & (A == 1) & c
    # a 2x2 block would vanish completely; keep its top-left pixel
    blk = cand[:-1, :-1] & cand[1:, :-1] & cand[:-1, 1:] & cand[1:, 1:]
    blk &= img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]
    if blk.any():
        r, c_ = np.nonzero(blk)
        cand[r, c_] = False
    return cand


def _is_simple(win: np.ndarray) -> bool:
    """Whether deleting the centre of a 3x3 window keeps local topology."""
    ring = [win[1 + dr, 1 + dc] for dr, dc in _RING]
    # foreground ring cells must form one 8-connected group
    fg = [i for i in range(8) if ring[i]]
    if not fg:
        return False
    seen = {fg[0]}
    stack = [fg[0]]
    while stack:
        i = stack.pop()
        for j in fg:
            if j in seen:
                continue
            d = (i - j) % 8
            # ring neighbours touch; two edge cells two apart touch diagonally
            if d in (1, 7) or (d in (2, 6) and i % 2 == 0 and j % 2 == 0):
                seen.add(j)
                stack.append(j)
    if len(seen) != len(fg):
        return False
    # background components touching a 4-neighbour of the centre
    bg4 = [i for i in (0, 2, 4, 6) if not ring[i]]
    if not bg4:
        return False
    comps = 0
    visited = set()
    for s in bg4:
        if s in visited:
            continue
        comps += 1
        stack = [s]
        visited.add(s)
        while stack:
            i = stack.pop()
            for j in ((i + 1) % 8, (i - 1) % 8):
                if not ring[j] and j not in visited:
                    visited.add(j)
                    stack.append(j)
    return comps == 1


def _remove_staircase(img: np.ndarray) -> bool:
    """Sequentially delete simple corner pixels that make skeletons two wide."""
    changed = False
    pad = np.pad(img, 1)
    n4 = [(-1, 0), (0, 1), (1, 0), (0, -1)]
    rows, cols = np.nonzero(img)
    for r, c in zip(rows + 1, cols + 1):
        if not pad[r, c]:
            continue
        win = pad[r - 1:r + 2, c - 1:c + 2]
        if win.sum() - 1 < 2:
            continue
        on = [bool(pad[r + dr, c + dc]) for dr, dc in n4]
        if not ((on[0] and on[1]) or (on[1] and on[2]) or (on[2] and on[3]) or (on[3] and on[0])):
            continue
        if _is_simple(win):
            pad[r, c] = False
            changed = True
    if changed:
        img[:] = pad[1:-1, 1:-1]
    return changed


def thin(mask) -> np.ndarray:
    """One-pixel-wide skeleton by Zhang-Suen parallel thinning.

    The two sub-iterations run until neither deletes a pixel; a sequential
    clean-up then removes simple staircase-corner pixels that Zhang-Suen
    leaves behind, and the whole loop repeats to a fixed point. Pixels
    outside the image count as background.
    """
    img = as_mask(mask).copy()
    while True:
        changed = False
        while True:
            d1 = _zhang_suen_pass(img, True)
            img &= ~d1
            d2 = _zhang_suen_pass(img, False)
            img &= ~d2
            if not (d1.any() or d2.any()):
                break
            changed = True
        if _remove_staircase(img):
            changed = True
        if not changed:
            return img


@dataclass
class Skeleton:
    """Thinned mask with classified landmark pixels, all as ``(col, row)``."""

    mask: np.ndarray
    branch_points: list[tuple[int, int]] = field(default_factory=list)
    end_points: list[tuple[int, int]] = field(default_factory=list)
    clusters: list[list[tuple[int, int]]] = field(default_factory=list)

    @property
    def landmarks(self) -> list[tuple[int, int]]:
        """End points followed by branch points."""
        return list(self.end_points) + list(self.branch_points)


def classify_points(skeleton_mask) -> Skeleton:
    """Label skeleton end points (one neighbour) and branch points (more than two).

    Adjacent branch pixels form a cluster represented by the member nearest
    the cluster centroid (first in row-major order on ties).
    """
    m = as_mask(skeleton_mask)
    counts = neighbour_count(m)
    ends = np.argwhere(m & (counts == 1))
    branch = m & (counts > 2)
    lab, n = ndimage.label(branch, structure=EIGHT)
    reps, clusters = [], []
    for k in range(1, n + 1):
        members = np.argwhere(lab == k)  # row-major order
        centroid = members.mean(axis=0)
        d = np.linalg.norm(members - centroid, axis=1)
        r, c = members[int(np.argmin(d))]
        reps.append((int(c), int(r)))
        clusters.append([(int(cc), int(rr)) for rr, cc in members])
    order = sorted(range(len(reps)), key=lambda i: (reps[i][1], reps[i][0]))
    return Skeleton(
        mask=m,
        branch_points=[reps[i] for i in order],
        end_points=[(int(c), int(r)) for r, c in ends],
        clusters=[clusters[i] for i in order],
    )


@dataclass
class PixelChain:
    """Ordered 8-connected skeleton pixels ``(col, row)``.

    ``start`` / ``end`` index into the owning skeleton's ``landmarks`` list
    (``None`` for closed loops without landmarks).
    """

    pixels: np.ndarray
    start: int | None = None
    end: int | None = None

    def __len__(self):
        return len(self.pixels)

    def reversed(self) -> "PixelChain":
        return PixelChain(self.pixels[::-1].copy(), self.end, self.start)


def _nbrs(m, r, c):
    h, w = m.shape
    out = []
    # 4-neighbours first so walks prefer the straight step
    for dr, dc in ((-1, 0), (0, 1), (1, 0), (0, -1), (-1, 1), (1, 1), (1, -1), (-1, -1)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w and m[rr, cc]:
            out.append((rr, cc))
    return out


def extract_chains(skel: Skeleton) -> tuple[list[PixelChain], list[tuple[int, int]]]:
    """Split a classified skeleton into landmark-to-landmark pixel chains.

    Walks start at end points in row-major order, then at branch clusters.
    Returns ``(chains, isolated)`` where ``isolated`` lists foreground pixels
    without neighbours (they belong to no chain).
    """
    m = skel.mask
    n_end = len(skel.end_points)
    node_of = {}
    for i, (c, r) in enumerate(skel.end_points):
        node_of[(r, c)] = i
    for k, members in enumerate(skel.clusters):
        for (c, r) in members:
            node_of[(r, c)] = n_end + k
    rep_rc = {n_end + k: (r, c) for k, (c, r) in enumerate(skel.branch_points)}
    cluster_rc = {n_end + k: {(r, c) for (c, r) in mem} for k, mem in enumerate(skel.clusters)}

    counts = neighbour_count(m)
    isolated = [(int(c), int(r)) for r, c in np.argwhere(m & (counts == 0))]

    visited = np.zeros_like(m)
    chains: list[PixelChain] = []

    def node_path(node, rc):
        """Pixels from a node entry pixel to its representative (inside the cluster)."""
        if node < n_end:
            return [rc]
        target = rep_rc[node]
        allowed = cluster_rc[node]
        prev = {rc: None}
        dq = deque([rc])
        while dq:
            cur = dq.popleft()
            if cur == target:
                break
            for nb in _nbrs(m, *cur):
                if nb in allowed and nb not in prev:
                    prev[nb] = cur
                    dq.append(nb)
        path = []
        cur = target
        while cur is not None:
            path.append(cur)
            cur = prev.get(cur)
        return path[::-1]

    def walk(start_node, first, entry):
        """Follow interior pixels from ``first`` until a node pixel."""
        path = node_path(start_node, entry)[::-1]
        cur, prev = first, entry
        while True:
            if cur in node_of:
                end_node = node_of[cur]
                path.extend(node_path(end_node, cur))
                return path, end_node
            visited[cur] = True
            path.append(cur)
            # interior pixels have exactly two neighbours: prev and next
            nxt = next((nb for nb in _nbrs(m, *cur)
                        if nb != prev and (nb in node_of or not visited[nb])), None)
            if nxt is None:
                return path, None
            prev, cur = cur, nxt

    def emit(path, a, b):
        pix = np.array([(c, r) for r, c in path], dtype=int)
        chains.append(PixelChain(pix, a, b))

    # end points first, then branch clusters
    starts = [(i, [(r, c)]) for i, (c, r) in enumerate(skel.end_points)]
    starts += [(n_end + k, sorted((r, c) for (c, r) in mem)) for k, mem in enumerate(skel.clusters)]
    done_pairs = set()
    for node, pixels in starts:
        for entry in pixels:
            for nb in _nbrs(m, *entry):
                if nb in node_of:
                    other = node_of[nb]
                    if other == node:
                        continue
                    key = (min(entry, nb), max(entry, nb))
                    if key in done_pairs:
                        continue
                    # direct node-to-node adjacency (spur of length one)
                    done_pairs.add(key)
                    if node < n_end or other < n_end:
                        path = node_path(node, entry)[::-1] + node_path(other, nb)
                        emit(path, node, other)
                    continue
                if visited[nb]:
                    continue
                path, end_node = walk(node, nb, entry)
                if len(path) >= 2:
                    emit(path, node, end_node)

    # closed loops without landmarks
    rest = m & ~visited
    for rc in list(node_of):
        rest[rc] = False
    for r, c in isolated:
        rest[c, r] = False
    for r0, c0 in np.argwhere(rest):
        if visited[r0, c0]:
            continue
        path = [(int(r0), int(c0))]
        visited[r0, c0] = True
        cur, prev = (int(r0), int(c0)), None
        while True:
            nxt = next((nb for nb in _nbrs(m, *cur) if nb != prev and not visited[nb]), None)
            if nxt is None:
                break
            visited[nxt] = True
            path.append(nxt)
            prev, cur = cur, nxt
        path.append(path[0])
        emit(path, None, None)
    return chains, isolated


def prune_spurs(skeleton_mask, min_spur_px: int = 5) -> np.ndarray:
    """Remove end-point-to-branch-point chains shorter than ``min_spur_px``."""
    m = as_mask(skeleton_mask).copy()
    if min_spur_px <= 0:
        return m
    while True:
        skel = classify_points(m)
        chains, _ = extract_chains(skel)
        n_end = len(skel.end_points)
        removed = False
        for ch in chains:
            a, b = ch.start, ch.end
            if a is None or b is None:
                continue
            one_end = (a < n_end) != (b < n_end)
            if one_end and len(ch) < min_spur_px:
                node = a if a >= n_end else b
                cluster = set(skel.clusters[node - n_end])
                for c, r in ch.pixels:
                    if (int(c), int(r)) not in cluster:
                        m[r, c] = False
                removed = True
        if not removed:
            return m
        m = thin(m)


def distance_map(mask) -> np.ndarray:
    """Exact Euclidean distance to the nearest background pixel (outside = background)."""
    m = np.pad(as_mask(mask), 1)
    return ndimage.distance_transform_edt(m)[1:-1, 1:-1]


def radius_profile(mask, chain: PixelChain | np.ndarray, edt: np.ndarray | None = None) -> np.ndarray:
    """Vessel radius in pixels at each chain pixel: EDT - 0.5, at least 0.5."""
    dist = distance_map(mask) if edt is None else edt
    pix = chain.pixels if isinstance(chain, PixelChain) else np.asarray(chain, dtype=int)
    r = dist[pix[:, 1], pix[:, 0]] - 0.5
    return np.maximum(r, 0.5)


def device_keypoint(device_mask, kind: str = "balloon") -> tuple[float, float]:
    """Key point ``(col, row)`` of a stationary device.

    ``balloon``: centroid of the largest 8-connected component.
    ``catheter_tip`` / ``lead_tip``: the skeleton end point farthest along
    the skeleton from where the device enters the image border (or from the
    end point nearest the border when it does not touch it).
    """
    m = as_mask(device_mask)
    if not m.any():
        raise EmptyMask("device mask is empty")
    lab, n = ndimage.label(m, structure=EIGHT)
    sizes = ndimage.sum_labels(m, lab, index=np.arange(1, n + 1))
    largest = lab == (int(np.argmax(sizes)) + 1)
    if kind == "balloon":
        r, c = np.nonzero(largest)
        return float(c.mean()), float(r.mean())
    if kind not in ("catheter_tip", "lead_tip"):
        raise ValueError(f"unknown device kind {kind!r}")
    sk = thin(largest)
    skel = classify_points(sk)
    ends = skel.end_points
    if len(ends) > 2:
        raise AmbiguousTip(f"device skeleton has {len(ends)} end points")
    h, w = sk.shape
    pix = np.argwhere(sk)
    border = pix[(pix[:, 0] == 0) | (pix[:, 1] == 0) | (pix[:, 0] == h - 1) | (pix[:, 1] == w - 1)]
    if len(border):
        entry = tuple(border[0])
    else:
        cand = ends if ends else [(int(c), int(r)) for r, c in pix]
        bd = [min(r, c, h - 1 - r, w - 1 - c) for c, r in cand]
        c, r = cand[int(np.argmin(bd))]
        entry = (r, c)
    # geodesic distances along the skeleton from the entry pixel
    dist = {entry: 0.0}
    dq = deque([entry])
    while dq:
        cur = dq.popleft()
        for nb in _nbrs(sk, *cur):
            if nb not in dist:
                dist[nb] = dist[cur] + float(np.hypot(nb[0] - cur[0], nb[1] - cur[1]))
                dq.append(nb)
    cand = ends if ends else [(entry[1], entry[0])]
    best = max(cand, key=lambda cr: dist.get((cr[1], cr[0]), -1.0))
    return float(best[0]), float(best[1])


# --- file I/O -------------------------------------------------------------

_FRAME_RE = re.compile(r"^(?P<view>.+)_(?P<frame>\d{4})\.(pgm|png)$", re.IGNORECASE)


def read_mask(path) -> np.ndarray:
    """8-bit PGM (P5) or PNG; values above 127 are foreground."""
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 127


def write_mask(mask, path) -> None:
    from PIL import Image

    arr = as_mask(mask).astype(np.uint8) * 255
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    Image.fromarray(arr, mode="L").save(path, format=fmt)


def list_frames(directory) -> list[Path]:
    """Mask files named ``<view>_<frame:04>.pgm|png`` sorted by frame index."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"mask directory not found: {d}")
    files = [p for p in d.iterdir() if _FRAME_RE.match(p.name)]
    return sorted(files, key=lambda p: int(_FRAME_RE.match(p.name).group("frame")))


def read_sequence(directory) -> list[np.ndarray]:
    files = list_frames(directory)
    if not files:
        raise FileNotFoundError(f"no mask frames in directory: {directory}")
    return [read_mask(p) for p in files]
