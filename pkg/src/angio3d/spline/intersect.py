"""Surface-surface intersection by seeded Newton refinement and marching.

Unknowns are ``q = (u, v, s, t)`` with ``F(q) = S1(u, v) - S2(s, t)``:
three equations, four unknowns. Corrections use the Moore-Penrose
pseudo-inverse of the 3x4 Jacobian (minimum-norm step, i.e. orthogonal
to the curve tangent) and the tangent itself is the Jacobian's null vector.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InsufficientPoints, NewtonDivergence
from .curve import ParamCurve3, fit_to_tolerance
from .surface import NurbsSurface

log = logging.getLogger(__name__)


@dataclass
class IntersectionOptions:
    grid_u: int = 64
    grid_v: int = 8
    tol: float = 1e-6
    capture_radius: float | None = None
    max_iter: int = 50
    step: float = 1.0 / 128
    min_step: float = 1e-7
    v_max: float = 0.999
    max_turn_deg: float = 30.0
    max_points: int = 20000
    fit_tol: float = 1e-5


class _Problem:
    def __init__(self, S1: NurbsSurface, S2: NurbsSurface, opts: IntersectionOptions):
        self.S1, self.S2, self.opts = S1, S2, opts
        (ua, ub), (va, vb) = S1.domain
        (sa, sb), (ta, tb) = S2.domain
        self.lo = np.array([ua, va, sa, ta])
        self.hi = np.array([ub, min(vb, va + opts.v_max * (vb - va)),
                            sb, min(tb, ta + opts.v_max * (tb - ta))])

    def residual(self, q):
        S, Su, Sv = self.S1.derivatives(q[0], q[1])
        T, Ts, Tt = self.S2.derivatives(q[2], q[3])
        return S - T, np.column_stack([Su, Sv, -Ts, -Tt]), S, T

    def newton(self, q0, fixed: int | None = None):
        """Refine ``q0`` onto the intersection; returns ``(q, |F|, ok)``."""
        tol = self.opts.tol
        q = np.clip(np.asarray(q0, dtype=float), self.lo, self.hi)
        fn = math.inf
        for _ in range(self.opts.max_iter):
            F, J, _, _ = self.residual(q)
            fn = float(np.linalg.norm(F))
            if fn < tol * 1e-3:
                break
            if fixed is not None:
                J = J.copy()
                J[:, fixed] = 0.0
            dq = -np.linalg.pinv(J, rcond=1e-13) @ F
            q_new = np.clip(q + dq, self.lo, self.hi)
            step = float(np.linalg.norm(q_new - q))
            q = q_new
            if step < 1e-14:
                F, _, _, _ = self.residual(q)
                fn = float(np.linalg.norm(F))
                break
        else:
            F, _, _, _ = self.residual(q)
            fn = float(np.linalg.norm(F))
        return q, fn, fn < tol

    def tangent(self, q):
        _, J, _, _ = self.residual(q)
        _, sv, vt = np.linalg.svd(J)
        if sv[-1] < 1e-12 * max(sv[0], 1e-300):
            return None  # surfaces tangent here; direction undefined
        return vt[-1]

    def point(self, q):
        return 0.5 * (self.S1.evaluate(q[0], q[1]) + self.S2.evaluate(q[2], q[3]))


def _march(prob: _Problem, q0, t0, start_q):
    """Trace from ``q0`` along ``t0``; returns (params list, closed flag)."""
    opts = prob.opts
    h = opts.step
    q, t = q0.copy(), t0.copy()
    out = []
    cos_max = math.cos(math.radians(opts.max_turn_deg))
    while len(out) < opts.max_points:
        qp = q + h * t
        outside = (qp < prob.lo) | (qp > prob.hi)
        if outside.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                lam = np.where(qp < prob.lo, (prob.lo - q) / (h * t), (prob.hi - q) / (h * t))
            lam = np.where(outside, lam, np.inf)
            k = int(np.argmin(lam))
            frac = float(np.clip(lam[k], 0.0, 1.0))
            if frac * h < 1e-14:
                break
            qb = q + frac * h * t
            qb[k] = prob.lo[k] if qp[k] < prob.lo[k] else prob.hi[k]
            qc, _, ok = prob.newton(qb, fixed=k)
            if ok and np.linalg.norm(qc - q) <= 2 * h:
                out.append(qc)
                break
            h *= 0.5
            if h < opts.min_step:
                break
            continue
        qc, _, ok = prob.newton(qp)
        tn = prob.tangent(qc) if ok else None
        if tn is not None and tn @ t < 0:
            tn = -tn
        if (not ok or tn is None or np.linalg.norm(qc - q) > 2 * h or tn @ t < cos_max
                or np.linalg.norm(qc - q) < 1e-3 * h):
            h *= 0.5
            if h < opts.min_step:
                break
            continue
        out.append(qc)
        if len(out) > 3 and np.linalg.norm(qc - start_q) < h:
            return out, True
        q, t = qc, tn
        h = min(h * 1.5, opts.step)
    return out, False


def _trace(prob: _Problem, seed):
    t = prob.tangent(seed)
    if t is None:
        return np.array([seed]), False
    fwd, closed = _march(prob, seed, t, seed)
    if closed:
        return np.array([seed] + fwd), True
    bwd, _ = _march(prob, seed, -t, seed)
    return np.array(bwd[::-1] + [seed] + fwd), False


def _seeds(prob: _Problem):
    o = prob.opts
    vmax1 = prob.hi[1]
    vmax2 = prob.hi[3]
    U1, V1, X1 = prob.S1.grid(o.grid_u, o.grid_v, vmax1)
    U2, V2, X2 = prob.S2.grid(o.grid_u, o.grid_v, vmax2)
    if o.capture_radius is None:
        edges = []
        for X in (X1, X2):
            edges.append(np.linalg.norm(np.diff(X, axis=0), axis=-1).max())
            edges.append(np.linalg.norm(np.diff(X, axis=1), axis=-1).max())
        capture = float(max(edges))
    else:
        capture = o.capture_radius
    A = X1.reshape(-1, 3)
    B = X2.reshape(-1, 3)
    D = cdist(A, B)
    P1 = np.column_stack([U1.ravel(), V1.ravel()])
    P2 = np.column_stack([U2.ravel(), V2.ravel()])
    cands = {}
    # best pair per u-column of each surface
    for iu in range(o.grid_u):
        rows = np.arange(iu * o.grid_v, (iu + 1) * o.grid_v)
        sub = D[rows]
        k = np.unravel_index(np.argmin(sub), sub.shape)
        cands[(rows[k[0]], k[1])] = sub[k]
        subT = D[:, rows]
        k = np.unravel_index(np.argmin(subT), subT.shape)
        cands[(k[0], rows[k[1]])] = subT[k]
    order = sorted((d, i, j) for (i, j), d in cands.items() if d <= capture)
    return [np.concatenate([P1[i], P2[j]]) for _, i, j in order]


def trace_intersections(S1: NurbsSurface, S2: NurbsSurface, opts: IntersectionOptions | None = None):
    """Raw traced branches: list of ``(params (k, 4), points (k, 3), closed)``."""
    opts = opts or IntersectionOptions()
    prob = _Problem(S1, S2, opts)
    branches = []
    near = 2 * opts.step
    for q0 in _seeds(prob):
        if any(np.min(np.linalg.norm(b[0] - q0, axis=1)) < near for b in branches):
            continue
        q, fn, ok = prob.newton(q0)
        if not ok:
            log.debug("seed %s: %s", q0, NewtonDivergence(f"residual {fn:.3g} after refinement"))
            continue
        if any(np.min(np.linalg.norm(b[0] - q, axis=1)) < near for b in branches):
            continue
        params, closed = _trace(prob, q)
        pts = np.array([prob.point(p) for p in params])
        branches.append((params, pts, closed))
    branches.sort(key=lambda b: tuple(b[0][0]))
    return branches


def intersect_surfaces(S1: NurbsSurface, S2: NurbsSurface, opts: IntersectionOptions | None = None,
                       **kwargs) -> list[ParamCurve3]:
    """Intersection curves of two NURBS surfaces.

    Each branch's traced points are refined to ``|S1 - S2| < tol`` and the
    branch is returned as a cubic B-spline fitted to them (``points`` and
    ``params`` keep the raw trace). An empty list means no intersection.
    """
    if opts is None:
        opts = IntersectionOptions(**kwargs)
    elif kwargs:
        raise TypeError("pass either opts or keyword options")
    curves = []
    for params, pts, _closed in trace_intersections(S1, S2, opts):
        try:
            c = fit_to_tolerance(pts, opts.fit_tol, n_start=max(4, len(pts) // 16))
        except InsufficientPoints:
            log.debug("dropping intersection branch with %d points", len(pts))
            continue
        curves.append(ParamCurve3(c, points=pts, params=params))
    return curves
