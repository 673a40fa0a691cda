"""Recover a 3D curve exactly from two central projections.

Each view's image curve is extruded towards its X-ray source into a ruled
NURBS surface; the original curve is where the two surfaces meet. With the
exact rational image of the curve as input, the traced intersection agrees
with the generating curve to solver precision.
"""
import numpy as np

from angio3d.camera import CArmPose, build_projection
from angio3d.phantom import generate_tree
from angio3d.spline import central_projection, extrude_surface, intersect_surfaces, point_inversion

from _common import out_dir, pyplot

out = out_dir(__doc__.splitlines()[0])
curve = generate_tree(seed=5).branches[0].curve
surfaces = []
for pose in (CArmPose(0.0, 0.0), CArmPose(30.0, 0.0)):
    m = build_projection(pose)
    image = central_projection(curve, m.source, m.detector_center, m.axis)
    surfaces.append(extrude_surface(image, m.source))

(res,) = intersect_surfaces(*surfaces)
q = res.params
gap = np.linalg.norm(surfaces[0](q[:, 0], q[:, 1]) - surfaces[1](q[:, 2], q[:, 3]), axis=1)
print(f"traced {len(res.points)} points; largest surface gap {gap.max():.2e} mm")

dist = []
for x in res.curve.sample(50):
    u = point_inversion(curve, x)
    dist.append(np.linalg.norm(curve(np.array([u]))[0] - x))
print(f"distance of the fitted intersection curve to the original: max {max(dist):.2e} mm")

plt = pyplot()
if plt:
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    for S, colour in zip(surfaces, ("tab:blue", "tab:orange")):
        U, V = np.meshgrid(np.linspace(0, 1, 40), np.linspace(0, 0.9, 10), indexing="ij")
        X = S(U, V)
        ax.plot_wireframe(X[..., 0], X[..., 1], X[..., 2], color=colour, lw=0.3, alpha=0.5)
    P = res.points
    ax.plot(P[:, 0], P[:, 1], P[:, 2], "k", lw=2)
    ax.set_xlim(-60, 60)
    ax.set_ylim(-60, 60)
    ax.set_zlim(-60, 60)
    fig.savefig(out / "intersection.png", dpi=110)
    print("figure written to", out / "intersection.png")
