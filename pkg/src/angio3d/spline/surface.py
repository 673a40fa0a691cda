"""NURBS surfaces: rational evaluation, extruded (ruled) surfaces towards an
X-ray source and pipe surfaces swept along a centreline."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, SourceOnPlane, VanishingTangent
from .basis import basis_funs, basis_matrix, ders_basis_funs, find_span, validate_knots
from .curve import BSplineCurve, ParamCurve3, averaged_knots


@dataclass
class NurbsSurface:
    """Tensor-product NURBS surface.

    ``control_net[i, j]`` is the control point for ``N_{i,p}(u) N_{j,q}(v)``
    and ``weights[i, j]`` its weight.
    """

    degree_u: int
    degree_v: int
    control_net: np.ndarray
    weights: np.ndarray
    knots_u: np.ndarray
    knots_v: np.ndarray

    def __post_init__(self):
        self.control_net = np.array(self.control_net, dtype=float)
        if self.control_net.ndim != 3 or self.control_net.shape[2] != 3:
            raise ValueError("control_net must have shape (n+1, m+1, 3)")
        nu, nv = self.control_net.shape[:2]
        self.weights = np.array(self.weights, dtype=float)
        if self.weights.shape != (nu, nv):
            raise ValueError("weights shape does not match control net")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive and finite")
        if not np.all(np.isfinite(self.control_net)):
            raise ValueError("control net must be finite")
        self.knots_u = validate_knots(self.knots_u, self.degree_u, nu)
        self.knots_v = validate_knots(self.knots_v, self.degree_v, nv)
        self._Pw = np.concatenate([self.control_net * self.weights[..., None],
                                   self.weights[..., None]], axis=-1)

    @property
    def domain(self):
        return ((float(self.knots_u[0]), float(self.knots_u[-1])),
                (float(self.knots_v[0]), float(self.knots_v[-1])))

    def _check(self, u, v):
        (ua, ub), (va, vb) = self.domain
        eps = 1e-12
        if np.any(u < ua - eps) or np.any(u > ub + eps) or np.any(v < va - eps) or np.any(v > vb + eps):
            raise DomainError("(u, v) outside surface domain")
        return np.clip(u, ua, ub), np.clip(v, va, vb)

    def evaluate(self, u, v) -> np.ndarray:
        """Points ``S(u, v)`` for broadcastable parameter arrays."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        u, v = self._check(u, v)
        p, q = self.degree_u, self.degree_v
        su = find_span(u, p, self.knots_u)
        sv = find_span(v, q, self.knots_v)
        Nu = basis_funs(su, u, p, self.knots_u)
        Nv = basis_funs(sv, v, q, self.knots_v)
        iu = su[..., None] - p + np.arange(p + 1)
        iv = sv[..., None] - q + np.arange(q + 1)
        Pw = self._Pw[iu[..., :, None], iv[..., None, :]]
        H = np.einsum("...i,...j,...ijk->...k", Nu, Nv, Pw)
        return H[..., :3] / H[..., 3:]

    __call__ = evaluate

    def derivatives(self, u: float, v: float):
        """``(S, S_u, S_v)`` at a single parameter pair."""
        u, v = self._check(np.float64(u), np.float64(v))
        p, q = self.degree_u, self.degree_v
        su = int(find_span(u, p, self.knots_u))
        sv = int(find_span(v, q, self.knots_v))
        Du = ders_basis_funs(su, float(u), p, 1, self.knots_u)
        Dv = ders_basis_funs(sv, float(v), q, 1, self.knots_v)
        Pw = self._Pw[su - p:su + 1, sv - q:sv + 1]
        H = Du[0] @ np.tensordot(Dv[0], Pw, axes=(0, 1))
        Hu = Du[1] @ np.tensordot(Dv[0], Pw, axes=(0, 1))
        Hv = Du[0] @ np.tensordot(Dv[1], Pw, axes=(0, 1))
        w, wu, wv = H[3], Hu[3], Hv[3]
        S = H[:3] / w
        Su = (Hu[:3] - wu * S) / w
        Sv = (Hv[:3] - wv * S) / w
        return S, Su, Sv

    def grid(self, nu: int, nv: int, v_max: float | None = None):
        (ua, ub), (va, vb) = self.domain
        us = np.linspace(ua, ub, nu)
        vs = np.linspace(va, vb if v_max is None else min(vb, v_max), nv)
        U, V = np.meshgrid(us, vs, indexing="ij")
        return U, V, self.evaluate(U, V)


def surface_eval(S: NurbsSurface, u, v) -> np.ndarray:
    """Evaluate the rational tensor-product sum at ``(u, v)``."""
    return S.evaluate(u, v)


def central_projection(curve: BSplineCurve, centre, plane_point, normal) -> BSplineCurve:
    """Exact image of a 3D curve under central projection onto a plane.

    Projection from ``centre`` is linear in homogeneous coordinates, so the
    image is again a NURBS curve of the same degree and knots: control
    points are the projected controls and weights scale by the controls'
    depth along ``normal``. All controls must lie on the plane's side of
    the centre.
    """
    c0 = np.asarray(centre, dtype=float)
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    d = float((np.asarray(plane_point, dtype=float) - c0) @ n)
    P = curve.control_points
    h = (P - c0) @ n
    if d == 0 or np.any(h * d <= 0):
        raise ValueError("control points must lie strictly in front of the projection centre")
    Q = c0 + (P - c0) * (d / h)[:, None]
    w = np.ones(len(P)) if curve.weights is None else curve.weights
    return BSplineCurve(curve.degree, Q, curve.knots.copy(), w * h / d)


def extrude_surface(curve: BSplineCurve, source) -> NurbsSurface:
    """Ruled surface from a detector-plane curve to the X-ray source.

    Row ``v = 0`` of the control net is the curve (lifted to 3D), row
    ``v = 1`` repeats the source; the curve's weights (unit for plain
    B-splines) are used on both rows so ``S(u, v)`` moves linearly from
    ``C(u)`` to the source.

    Raises
    ------
    SourceOnPlane
        If the source lies in the plane of the curve.
    """
    if curve.dim != 3:
        raise ValueError("curve must be embedded in 3D (lift detector pixels first)")
    src = np.asarray(source, dtype=float)
    P = curve.control_points
    centered = P - P.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=True)
    scale = max(np.linalg.norm(centered, axis=1).max(), 1.0)
    if sv[1] > 1e-9 * scale:
        normal = vt[2]
        if abs(normal @ (src - P.mean(axis=0))) < 1e-9 * max(scale, np.linalg.norm(src - P.mean(axis=0))):
            raise SourceOnPlane("X-ray source lies in the plane of the curve")
    else:
        # collinear controls: the source must not lie on their line
        d = vt[0]
        off = src - P.mean(axis=0)
        if np.linalg.norm(off - (off @ d) * d) < 1e-9 * scale:
            raise SourceOnPlane("X-ray source lies on the curve's line")
    n = len(P)
    net = np.stack([P, np.repeat(src[None, :], n, axis=0)], axis=1)
    w = np.ones(n) if curve.weights is None else curve.weights
    weights = np.column_stack([w, w])
    return NurbsSurface(curve.degree, 1, net, weights, curve.knots.copy(),
                        np.array([0.0, 0.0, 1.0, 1.0]))


# exact rational quadratic circle: 9 controls, 4 quarter arcs
_CIRCLE_KNOTS = np.array([0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1], dtype=float)
_CIRCLE_W = np.array([1, math.sqrt(0.5)] * 4 + [1], dtype=float)
_CIRCLE_UNIT = np.array([[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0],
                         [-1, -1], [0, -1], [1, -1], [1, 0]], dtype=float)


def rotation_minimizing_frames(points: np.ndarray, tangents: np.ndarray, r0=None) -> np.ndarray:
    """Double-reflection rotation-minimising frames; returns reference vectors ``(n, 3)``."""
    T = tangents / np.linalg.norm(tangents, axis=1, keepdims=True)
    if r0 is None:
        t0 = T[0]
        helper = np.eye(3)[int(np.argmin(np.abs(t0)))]
        r0 = np.cross(t0, helper)
    r0 = np.asarray(r0, dtype=float)
    r0 = r0 - (r0 @ T[0]) * T[0]
    r0 /= np.linalg.norm(r0)
    R = np.zeros_like(T)
    R[0] = r0
    for k in range(len(T) - 1):
        v1 = points[k + 1] - points[k]
        c1 = v1 @ v1
        if c1 == 0:
            R[k + 1] = R[k]
            continue
        rL = R[k] - (2 / c1) * (v1 @ R[k]) * v1
        tL = T[k] - (2 / c1) * (v1 @ T[k]) * v1
        v2 = T[k + 1] - tL
        c2 = v2 @ v2
        r = rL if c2 == 0 else rL - (2 / c2) * (v2 @ rL) * v2
        r = r - (r @ T[k + 1]) * T[k + 1]
        R[k + 1] = r / np.linalg.norm(r)
    return R


def _interpolate_columns(values: np.ndarray, params: np.ndarray, degree: int):
    """Global interpolation of ``values[k, ...]`` at ``params[k]``; returns controls and knots."""
    n = len(params)
    p = min(degree, n - 1)
    U = averaged_knots(params, n, p)
    A = basis_matrix(params, p, U, n)
    flat = values.reshape(n, -1)
    ctrl = np.linalg.solve(A, flat).reshape(values.shape)
    return ctrl, U, p


def pipe_surface(axis: ParamCurve3, radii=None, n_sections: int = 33) -> NurbsSurface:
    """Tube of varying radius around ``axis``.

    Cross-sections are exact rational circles (9 controls) placed in
    rotation-minimising frames at ``n_sections`` evenly spaced axis
    parameters and interpolated cubically along the axis, so every
    section parameter carries an exact circle of the interpolated radius.
    Surface ``u`` runs along the axis, ``v`` around the circle.

    Raises
    ------
    VanishingTangent
        If the axis derivative vanishes at a section.
    """
    if radii is None:
        radii = axis.radii
    if radii is None:
        raise ValueError("pipe_surface needs radii")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(~(radii > 0)):
        raise ValueError("radii must be positive")
    a, b = axis.curve.domain
    ts = np.linspace(a, b, n_sections)
    C, D = axis.curve.derivatives(ts, 1)
    speed = np.linalg.norm(D, axis=1)
    scale = max(1.0, float(np.ptp(C, axis=0).max()))
    if np.any(speed < 1e-12 * scale):
        raise VanishingTangent("axis tangent vanishes")
    T = D / speed[:, None]
    R = rotation_minimizing_frames(C, T)
    B = np.cross(T, R)
    frac = (ts - a) / (b - a)
    if len(radii) == 1:
        rad = np.full(n_sections, radii[0])
    else:
        rad = np.interp(frac, np.linspace(0, 1, len(radii)), radii)
    sections = (C[:, None, :]
                + rad[:, None, None] * (_CIRCLE_UNIT[None, :, 0, None] * R[:, None, :]
                                        + _CIRCLE_UNIT[None, :, 1, None] * B[:, None, :]))
    ctrl, U, p = _interpolate_columns(sections, frac, 3)
    weights = np.tile(_CIRCLE_W, (len(ctrl), 1))
    return NurbsSurface(p, 2, ctrl, weights, U, _CIRCLE_KNOTS.copy())


def tessellate(S: NurbsSurface, nu: int = 64, nv: int = 24, closed_v: bool = True):
    """Quad mesh of ``S``: ``(vertices (k, 3), faces (f, 4) zero-based)``."""
    (ua, ub), (va, vb) = S.domain
    us = np.linspace(ua, ub, nu)
    vs = np.linspace(va, vb, nv + 1)[:-1] if closed_v else np.linspace(va, vb, nv)
    U, V = np.meshgrid(us, vs, indexing="ij")
    verts = S.evaluate(U, V).reshape(-1, 3)
    ncol = len(vs)
    faces = []
    for i in range(nu - 1):
        for j in range(ncol if closed_v else ncol - 1):
            j2 = (j + 1) % ncol
            faces.append((i * ncol + j, (i + 1) * ncol + j, (i + 1) * ncol + j2, i * ncol + j2))
    return verts, np.array(faces, dtype=int).reshape(-1, 4)
