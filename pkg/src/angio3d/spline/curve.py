"""B-spline / NURBS curves: evaluation, least-squares fitting, point
inversion, rebuilding with fewer control points and tangent-continuous
merging."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateChain, DomainError, InsufficientPoints, JoinGapTooLarge
from .basis import basis_funs, basis_matrix, find_span, validate_knots


@dataclass
class BSplineCurve:
    """Clamped B-spline curve, rational when ``weights`` is given.

    Parameters
    ----------
    degree : int
    control_points : array_like, shape (n, d)
    knots : array_like, shape (n + degree + 1,)
    weights : array_like, shape (n,), optional
    """

    degree: int
    control_points: np.ndarray
    knots: np.ndarray
    weights: np.ndarray | None = None
    _deriv_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.control_points = np.array(self.control_points, dtype=float)
        if self.control_points.ndim != 2:
            raise ValueError("control_points must be (n, dim)")
        n = len(self.control_points)
        if n < self.degree + 1:
            raise ValueError(f"degree {self.degree} needs at least {self.degree + 1} control points")
        if not np.all(np.isfinite(self.control_points)):
            raise ValueError("control points must be finite")
        self.knots = validate_knots(self.knots, self.degree, n)
        if self.weights is not None:
            self.weights = np.array(self.weights, dtype=float)
            if self.weights.shape != (n,) or not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
                raise ValueError("weights must be positive, finite, one per control point")

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def is_rational(self) -> bool:
        return self.weights is not None

    def _homogeneous(self) -> np.ndarray:
        w = np.ones(len(self.control_points)) if self.weights is None else self.weights
        return np.column_stack([self.control_points * w[:, None], w])

    def _derivative_nets(self, order: int):
        """Control nets/knots of homogeneous derivative curves up to ``order``."""
        if order not in self._deriv_cache:
            nets = [(self._homogeneous(), self.knots, self.degree)]
            for _ in range(order):
                P, U, p = nets[-1]
                if p == 0:
                    nets.append((np.zeros((1, P.shape[1])), np.array([U[0], U[-1]]), 0))
                    continue
                denom = U[p + 1:p + len(P)] - U[1:len(P)]
                with np.errstate(divide="ignore", invalid="ignore"):
                    Q = p * (P[1:] - P[:-1]) / denom[:, None]
                Q[~np.isfinite(Q)] = 0.0
                nets.append((Q, U[1:-1], p - 1))
            self._deriv_cache[order] = nets
        return self._deriv_cache[order]

    def _check_domain(self, u):
        a, b = self.domain
        tol = 1e-12 * max(1.0, abs(b - a))
        if np.any(u < a - tol) or np.any(u > b + tol):
            raise DomainError(f"parameter outside curve domain [{a}, {b}]")
        return np.clip(u, a, b)

    def _homog_eval(self, u, order: int = 0):
        out = []
        for P, U, p in self._derivative_nets(order)[: order + 1]:
            span = find_span(u, p, U)
            N = basis_funs(span, u, p, U)
            idx = span[..., None] - p + np.arange(p + 1)
            out.append(np.einsum("...k,...kd->...d", N, P[idx]))
        return out

    def derivatives(self, u, order: int = 1) -> list[np.ndarray]:
        """``[C(u), C'(u), ...]`` up to ``order`` (at most 2)."""
        u = self._check_domain(np.asarray(u, dtype=float))
        H = self._homog_eval(u, order)
        w = [h[..., -1:] for h in H]
        A = [h[..., :-1] for h in H]
        C = A[0] / w[0]
        res = [C]
        if order >= 1:
            C1 = (A[1] - w[1] * C) / w[0]
            res.append(C1)
        if order >= 2:
            C2 = (A[2] - 2 * w[1] * res[1] - w[2] * C) / w[0]
            res.append(C2)
        return res

    def __call__(self, u) -> np.ndarray:
        return self.derivatives(u, 0)[0]

    evaluate = __call__

    def tangent(self, u) -> np.ndarray:
        return self.derivatives(u, 1)[1]

    def sample(self, n: int) -> np.ndarray:
        a, b = self.domain
        return self(np.linspace(a, b, n))

    def reversed(self) -> "BSplineCurve":
        a, b = self.domain
        U = (a + b) - self.knots[::-1]
        w = None if self.weights is None else self.weights[::-1].copy()
        return BSplineCurve(self.degree, self.control_points[::-1].copy(), U, w)

    def reparametrized(self, a: float, b: float) -> "BSplineCurve":
        a0, b0 = self.domain
        U = a + (self.knots - a0) * (b - a) / (b0 - a0)
        U[: self.degree + 1] = a
        U[-self.degree - 1:] = b
        return BSplineCurve(self.degree, self.control_points.copy(), U,
                            None if self.weights is None else self.weights.copy())

    def length(self, n: int = 512) -> float:
        pts = self.sample(n)
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


@dataclass
class ParamCurve3:
    """A 3D centreline segment with optional radii and traced sample points.

    ``radii`` are values (mm) at evenly spaced parameters across the domain.
    """

    curve: BSplineCurve
    radii: np.ndarray | None = None
    points: np.ndarray | None = None
    params: np.ndarray | None = None

    def __post_init__(self):
        if self.curve.dim != 3:
            raise ValueError("ParamCurve3 needs a 3D curve")
        if self.radii is not None:
            self.radii = np.asarray(self.radii, dtype=float)
            if self.radii.ndim != 1 or len(self.radii) == 0 or np.any(~(self.radii > 0)):
                raise ValueError("radii must be positive")

    def __call__(self, u):
        return self.curve(u)

    def radius_at(self, u):
        if self.radii is None:
            raise ValueError("curve has no radii")
        a, b = self.curve.domain
        t = (np.asarray(u, dtype=float) - a) / (b - a)
        if len(self.radii) == 1:
            return np.full_like(t, self.radii[0])
        return np.interp(t, np.linspace(0.0, 1.0, len(self.radii)), self.radii)

    def sample(self, n: int) -> np.ndarray:
        return self.curve.sample(n)

    def reversed(self) -> "ParamCurve3":
        return ParamCurve3(
            self.curve.reversed(),
            None if self.radii is None else self.radii[::-1].copy(),
            None if self.points is None else self.points[::-1].copy(),
            None if self.params is None else self.params[::-1].copy(),
        )


def chord_length_params(points: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(np.diff(points, axis=0), axis=1)
    total = d.sum()
    if total <= 0:
        raise DegenerateChain("all points coincide")
    t = np.concatenate([[0.0], np.cumsum(d) / total])
    t[-1] = 1.0
    return t


def _dedupe(points: np.ndarray) -> np.ndarray:
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(points, axis=0), axis=1) > 0
    return points[keep]


def averaged_knots(params: np.ndarray, n_ctrl: int, degree: int) -> np.ndarray:
    """Knot placement for least-squares fitting by parameter averaging.

    With ``m+1`` data parameters and ``n+1`` control points each interior
    knot is a blend of two neighbouring data parameters so that every knot
    span contains data (keeps the normal equations well conditioned).
    """
    m = len(params) - 1
    n = n_ctrl - 1
    p = degree
    U = np.zeros(n + p + 2)
    U[-p - 1:] = 1.0
    if n_ctrl == len(params):
        # interpolation: classic averaging of p consecutive parameters
        for j in range(1, n - p + 1):
            U[j + p] = params[j:j + p].mean()
        return U
    d = (m + 1) / (n - p + 1)
    for j in range(1, n - p + 1):
        i = int(j * d)
        alpha = j * d - i
        U[p + j] = (1 - alpha) * params[i - 1] + alpha * params[i]
    return U


def fit_cubic(points, n_ctrl: int, degree: int = 3, params=None) -> BSplineCurve:
    """Least-squares cubic B-spline through ordered points.

    Chord-length parameterisation, averaged knots, and exact interpolation
    of the first and last point.

    Raises
    ------
    InsufficientPoints
        If fewer than ``n_ctrl`` points are given or ``n_ctrl < degree + 1``.
    DegenerateChain
        If all points coincide.
    """
    Q = np.asarray(points, dtype=float)
    if Q.ndim != 2:
        raise ValueError("points must be (n, dim)")
    if n_ctrl < degree + 1:
        raise InsufficientPoints(f"n_ctrl={n_ctrl} below degree + 1 = {degree + 1}")
    if len(Q) < n_ctrl:
        raise InsufficientPoints(f"{len(Q)} points cannot support {n_ctrl} control points")
    if params is None:
        Q = _dedupe(Q)
        if len(Q) < 2:
            raise DegenerateChain("all points coincide")
        if len(Q) < n_ctrl:
            raise InsufficientPoints(f"{len(Q)} distinct points cannot support {n_ctrl} control points")
        t = chord_length_params(Q)
    else:
        t = np.asarray(params, dtype=float)
    U = averaged_knots(t, n_ctrl, degree)
    A = basis_matrix(t, degree, U, n_ctrl)
    P = np.zeros((n_ctrl, Q.shape[1]))
    P[0], P[-1] = Q[0], Q[-1]
    if n_ctrl > 2:
        rhs = Q - np.outer(A[:, 0], Q[0]) - np.outer(A[:, -1], Q[-1])
        Ai = A[1:-1, 1:-1] if n_ctrl == len(Q) else A[:, 1:-1]
        rhs = rhs[1:-1] if n_ctrl == len(Q) else rhs
        sol, *_ = np.linalg.lstsq(Ai, rhs, rcond=None)
        P[1:-1] = sol
    return BSplineCurve(degree, P, U)


def fit_deviation(curve: BSplineCurve, points: np.ndarray) -> float:
    """Upper bound on the distance from ``points`` to ``curve`` (chord-length params)."""
    t = chord_length_params(_dedupe(points))
    return float(np.max(np.linalg.norm(curve(t) - _dedupe(points), axis=1)))


def fit_to_tolerance(points, tol: float, n_start: int = 4, degree: int = 3) -> BSplineCurve:
    """Fit with geometrically increasing control counts until within ``tol``."""
    Q = _dedupe(np.asarray(points, dtype=float))
    n_max = len(Q)
    if n_max < degree + 1:
        raise InsufficientPoints(f"{n_max} distinct points, need {degree + 1}")
    n = max(degree + 1, min(n_start, n_max))
    while True:
        c = fit_cubic(Q, n, degree)
        if n >= n_max or fit_deviation(c, Q) <= tol:
            return c
        n = min(n_max, max(n + 1, int(math.ceil(n * 1.5))))


def point_inversion(curve: BSplineCurve, x, samples_per_span: int = 8) -> float:
    """Parameter of the closest point on ``curve`` to ``x``.

    Every knot span is sampled and each span's best sample is polished with
    Newton iterations on ``C'(u) . (C(u) - x) = 0``. The global minimiser is
    returned; exact ties go to the smallest parameter.
    """
    x = np.asarray(x, dtype=float)
    U = curve.knots
    breaks = np.unique(U)
    candidates = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        us = np.linspace(a, b, samples_per_span + 1)
        d = np.linalg.norm(curve(us) - x, axis=1)
        u = us[int(np.argmin(d))]
        for _ in range(50):
            C, C1, C2 = curve.derivatives(np.array([u]), 2)
            r = C[0] - x
            f = C1[0] @ r
            fp = C2[0] @ r + C1[0] @ C1[0]
            if fp <= 0:
                break
            step = f / fp
            un = min(max(u - step, a), b)
            if abs(un - u) < 1e-15 * max(1.0, abs(b)):
                u = un
                break
            u = un
        candidates.append(u)
    candidates = np.array(candidates + [breaks[0], breaks[-1]])
    dist = np.linalg.norm(curve(candidates) - x, axis=1)
    best = dist.min()
    tied = candidates[dist <= best * (1 + 1e-12) + 1e-15]
    return float(tied.min())


def _radii_resampled(radii, n):
    if radii is None:
        return None
    if len(radii) == n:
        return radii.copy()
    return np.interp(np.linspace(0, 1, n), np.linspace(0, 1, len(radii)), radii)


def resample(curve: ParamCurve3, n_ctrl: int, tol: float, n_samples: int | None = None) -> ParamCurve3:
    """Rebuild ``curve`` with fewer control points.

    Dense samples of the curve are refitted with ``n_ctrl`` controls; the
    count doubles until the deviation is within ``tol`` (``tol <= 0`` means
    1e-9). Once the count would reach the input's own control count the
    input representation is returned unchanged, since no refit with as
    many controls can be closer.
    """
    if n_ctrl < 4:
        raise ValueError("n_ctrl must be at least 4")
    tol = 1e-9 if tol <= 0 else tol
    c = curve.curve
    n_orig = len(c.control_points)
    n_samples = n_samples or max(200, 10 * n_orig)
    pts = c.sample(n_samples)
    n = n_ctrl
    while n < n_orig:
        refit = fit_cubic(pts, n)
        if fit_deviation(refit, pts) <= tol:
            return ParamCurve3(refit, None if curve.radii is None else curve.radii.copy(),
                               curve.points, curve.params)
        n *= 2
    return ParamCurve3(c, None if curve.radii is None else curve.radii.copy(), curve.points, curve.params)


def merge_c1(segments, join_tol: float = 0.5) -> ParamCurve3:
    """Join ordered segments into one C1 cubic curve.

    Consecutive segments must meet (end of one at the start of the next)
    within ``join_tol``. Each join point becomes a shared control point with
    a knot of multiplicity 3; the two neighbouring controls are moved onto a
    common tangent line with speeds matched to the adjacent knot spans.
    """
    segs = [s if isinstance(s, ParamCurve3) else ParamCurve3(s) for s in segments]
    if not segs:
        raise ValueError("nothing to merge")
    p = segs[0].curve.degree
    if any(s.curve.degree != p or s.curve.is_rational for s in segs):
        raise ValueError("merge_c1 needs non-rational curves of a common degree")
    if len(segs) == 1:
        return ParamCurve3(segs[0].curve.reparametrized(0.0, 1.0), segs[0].radii, segs[0].points)

    for k in range(len(segs) - 1):
        a = segs[k].curve.control_points[-1]
        b = segs[k + 1].curve.control_points[0]
        gap = float(np.linalg.norm(a - b))
        if gap > join_tol:
            raise JoinGapTooLarge(f"segments {k} and {k + 1} are {gap:.3f} apart (tolerance {join_tol})")

    lengths = np.array([max(s.curve.length(), 1e-12) for s in segs])
    bounds = np.concatenate([[0.0], np.cumsum(lengths) / lengths.sum()])
    bounds[-1] = 1.0
    curves = [s.curve.reparametrized(bounds[k], bounds[k + 1]) for k, s in enumerate(segs)]
    ctrls = [c.control_points.copy() for c in curves]

    for k in range(len(curves) - 1):
        left, right = ctrls[k], ctrls[k + 1]
        J = 0.5 * (left[-1] + right[0])
        left[-1] = J
        right[0] = J
        UL, UR = curves[k].knots, curves[k + 1].knots
        h_left = UL[-1] - UL[len(left) - 1]
        h_right = UR[p + 1] - UR[0]
        vl = (J - left[-2]) * p / h_left
        vr = (right[1] - J) * p / h_right
        sl, sr = np.linalg.norm(vl), np.linalg.norm(vr)
        if sl == 0 or sr == 0:
            raise ValueError("segment with vanishing end tangent")
        d = vl / sl + vr / sr
        dn = np.linalg.norm(d)
        d = vl / sl if dn < 1e-12 else d / dn
        speed = 0.5 * (sl + sr)
        left[-2] = J - d * speed * h_left / p
        right[1] = J + d * speed * h_right / p

    P = [ctrls[0]]
    knots = [curves[0].knots[: -(p + 1)]]
    for k in range(1, len(curves)):
        P.append(ctrls[k][1:])
        inner = curves[k].knots[p + 1: -(p + 1)]
        knots.append(np.concatenate([np.full(p, bounds[k]), inner]))
    knots.append(np.ones(p + 1))
    merged = BSplineCurve(p, np.vstack(P), np.concatenate(knots))

    radii = None
    if all(s.radii is not None for s in segs):
        ts, rs = [], []
        for k, s in enumerate(segs):
            t = np.linspace(bounds[k], bounds[k + 1], len(s.radii))
            ts.append(t)
            rs.append(s.radii)
        n = sum(len(s.radii) for s in segs)
        radii = np.interp(np.linspace(0, 1, n), np.concatenate(ts), np.concatenate(rs))
    return ParamCurve3(merged, radii)
