"""Phantom fixtures and ground-truth metrics shared by pipeline, CLI and acceptance tests."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from angio3d.camera import CArmPose
from angio3d.phantom import PhantomTree, forward_project, generate_tree

PA = CArmPose(0.0, 0.0)
LAO30 = CArmPose(30.0, 0.0)


def phantom_pair(seed=0, n_branches=3, pose_a=PA, pose_b=LAO30, noise=0.0):
    tree = generate_tree(seed=seed, n_branches=n_branches)
    return (tree, forward_project(tree, pose_a, noise, seed=seed),
            forward_project(tree, pose_b, noise, seed=seed + 1))


def centreline_distance(recon_tree, truth: PhantomTree, n=200):
    """Distances (mm) from dense samples of every reconstructed branch to the true centrelines."""
    kd = cKDTree(np.vstack([p for p, _ in truth.sample(4000)]))
    return np.concatenate([kd.query(b.curve.sample(n))[0] for b in recon_tree.branches])


@dataclass
class RenderBranch:
    """Adapter letting a reconstructed branch be rasterised by the phantom renderer."""

    curve: object

    def radius_at(self, u):
        return self.curve.radius_at(u)


def render_reconstruction(recon_tree, pose):
    return forward_project(PhantomTree([RenderBranch(b.curve) for b in recon_tree.branches]), pose)


def dice(a, b):
    return 2.0 * np.logical_and(a, b).sum() / (a.sum() + b.sum())
