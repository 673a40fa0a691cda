"""Pick the best-matching frame pair from two videos of a moving balloon.

Heart beat and breathing move the device rigidly. Two videos started at
different times see it at different motion phases; the frame pair whose
key points triangulate with the smallest two-view error is the pair taken
at the same phase.
"""
import numpy as np

from angio3d.camera import CArmPose, build_projection
from angio3d.matching import phase_match
from angio3d.phantom import MotionTrace, generate_tree, simulate_videos
from angio3d.raster import device_keypoint

from _common import out_dir, pyplot

out = out_dir(__doc__.splitlines()[0])
pa, lao = CArmPose(0.0, 0.0), CArmPose(30.0, 0.0)
tree = generate_tree(seed=1)
device = tree.branches[0].control_points[0] + [6.0, 0.0, 0.0]
videos = simulate_videos(tree, device, pa, lao, 20, (0.0, 0.37), MotionTrace.with_amplitude(10.0),
                         render_vessels=False)

kp_a = [device_keypoint(m) for m in videos.device_a]
kp_b = [device_keypoint(m) for m in videos.device_b]
i, j, err, matrix = phase_match(kp_a, kp_b, build_projection(pa), build_projection(lao))
print(f"selected frames ({i}, {j}) with error {err:.3f} mm; ground truth {videos.true_pair}")
print(f"matrix mean {matrix.values.mean():.3f} mm, max {matrix.values.max():.3f} mm")
matrix.to_csv(out / "error_matrix.csv")

# Displacements that stay inside an epipolar plane leave no reconstruction
# error, so pairs with equal vertical position can look equally good.
d = np.linalg.norm(videos.displacements_a[i] - videos.displacements_b[j])
print(f"3D displacement difference of the selected pair: {d:.3f} mm")

plt = pyplot()
if plt:
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(matrix.values, cmap="viridis", origin="upper")
    ax.plot(j, i, "r+", ms=14, mew=2)
    ax.set_xlabel("frame of video B")
    ax.set_ylabel("frame of video A")
    fig.colorbar(im, label="reconstruction error (mm)")
    fig.tight_layout()
    fig.savefig(out / "error_matrix.png", dpi=110)
    print("figure written to", out / "error_matrix.png")
