"""Shared mask fixtures and brute-force oracles for the raster tests."""
import numpy as np
from scipy import ndimage

from angio3d.camera import CArmPose
from angio3d.phantom import forward_project, generate_tree


def y_shape():
    m = np.zeros((5, 5), bool)
    for c, r in [(2, 0), (2, 1), (2, 2), (1, 3), (0, 4), (3, 3), (4, 4)]:
        m[r, c] = True
    return m


def line(n=10):
    m = np.zeros((5, n + 4), bool)
    m[2, 2:2 + n] = True
    return m


def ring(radius=4):
    """Thin closed 8-connected ring: the one-pixel boundary of a digital disk."""
    size = 2 * radius + 5
    yy, xx = np.mgrid[:size, :size] - size // 2
    disk = xx ** 2 + yy ** 2 <= radius ** 2
    return disk & ~ndimage.binary_erosion(disk, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))


def disk(shape, centre, radius):
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    return (xx - centre[0]) ** 2 + (yy - centre[1]) ** 2 <= radius ** 2


def mask_corpus():
    """Twenty masks: primitives, blobs with holes, and phantom renders."""
    rng = np.random.default_rng(2024)
    out = []
    bar = np.zeros((9, 26), bool)
    bar[3:6, 3:23] = True
    out.append(bar)
    out.append(disk((40, 40), (20, 20), 12))
    annulus = disk((50, 50), (25, 25), 18) & ~disk((50, 50), (25, 25), 8)
    out.append(annulus)
    cross = np.zeros((40, 40), bool)
    cross[17:23, 4:36] = True
    cross[4:36, 17:23] = True
    out.append(cross)
    diag = np.eye(30, dtype=bool)
    out.append(diag)
    thick_diag = ndimage.binary_dilation(np.eye(40, dtype=bool), iterations=2)
    out.append(thick_diag)
    square = np.zeros((20, 20), bool)
    square[5:15, 5:15] = True
    out.append(square)
    two = np.zeros((30, 60), bool)
    two[5:10, 5:25] = True
    two[15:25, 35:55] = True
    out.append(two)
    frame = np.zeros((30, 30), bool)
    frame[3:27, 3:27] = True
    frame[9:21, 9:21] = False
    out.append(frame)
    full = np.ones((12, 12), bool)
    out.append(full)
    for _ in range(5):
        m = ndimage.gaussian_filter(rng.random((48, 48)), 2.5) > 0.52
        out.append(m)
    pa, lao = CArmPose(0, 0, detector_cols=256, detector_rows=256, pixel_spacing=0.4), CArmPose(30, 0, detector_cols=256, detector_rows=256, pixel_spacing=0.4)
    for seed, n in ((0, 3), (1, 5), (2, 1)):
        t = generate_tree(seed=seed, n_branches=n)
        out.append(forward_project(t, pa))
    out.append(forward_project(generate_tree(seed=3, n_branches=3), lao))
    out.append(forward_project(generate_tree(seed=4, n_branches=3), lao, noise=0.5, seed=4))
    assert len(out) == 20
    return out


def components8(m):
    return ndimage.label(m, structure=np.ones((3, 3)))[1]


def holes4(m):
    """Background 4-components that do not touch the image border."""
    lab, n = ndimage.label(np.pad(~m, 1, constant_values=True))
    return n - 1


def brute_edt(m):
    """Distance from each pixel to the nearest background pixel (outside counts as background)."""
    padded = np.pad(m, 1)
    bg = np.argwhere(~padded).astype(float)
    out = np.zeros(m.shape)
    for r, c in np.argwhere(m):
        out[r, c] = np.sqrt(((bg - (r + 1, c + 1)) ** 2).sum(axis=1)).min()
    return out


def reference_zhang_suen(mask):
    """Literal two-subiteration Zhang-Suen with explicit loops, no extra rules."""
    img = np.pad(np.asarray(mask, bool).astype(int), 1)
    h, w = img.shape
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            kill = []
            for r in range(1, h - 1):
                for c in range(1, w - 1):
                    if not img[r, c]:
                        continue
                    p = [img[r - 1, c], img[r - 1, c + 1], img[r, c + 1], img[r + 1, c + 1],
                         img[r + 1, c], img[r + 1, c - 1], img[r, c - 1], img[r - 1, c - 1]]
                    b = sum(p)
                    a = sum(1 for k in range(8) if p[k] == 0 and p[(k + 1) % 8] == 1)
                    p2, p4, p6, p8 = p[0], p[2], p[4], p[6]
                    if step == 0:
                        ok = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
                    else:
                        ok = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
                    if 2 <= b <= 6 and a == 1 and ok:
                        kill.append((r, c))
            for r, c in kill:
                img[r, c] = 0
            changed = changed or bool(kill)
    return img[1:-1, 1:-1].astype(bool)
