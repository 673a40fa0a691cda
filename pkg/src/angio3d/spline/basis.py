"""B-spline basis functions.

The scalar :func:`basis` is the textbook Cox-de Boor recursion and serves as
the reference. The array routines below (span search, triangular basis
table, derivatives) are what the curve and surface code actually uses.
"""
from __future__ import annotations

import numpy as np

from ..errors import DomainError


def clamped_uniform_knots(n_ctrl: int, degree: int) -> np.ndarray:
    """Clamped knot vector on [0, 1] with uniformly spaced interior knots."""
    if n_ctrl < degree + 1:
        raise ValueError("need at least degree + 1 control points")
    n_inner = n_ctrl - degree - 1
    inner = np.linspace(0.0, 1.0, n_inner + 2)[1:-1]
    return np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])


def validate_knots(knots, degree: int, n_ctrl: int | None = None) -> np.ndarray:
    U = np.asarray(knots, dtype=float)
    if U.ndim != 1 or not np.all(np.isfinite(U)):
        raise ValueError("knot vector must be a finite 1-D sequence")
    if np.any(np.diff(U) < 0):
        raise ValueError("knot vector must be nondecreasing")
    if n_ctrl is not None and len(U) != n_ctrl + degree + 1:
        raise ValueError(
            f"expected {n_ctrl + degree + 1} knots for {n_ctrl} controls of degree {degree}, got {len(U)}")
    if not (np.all(U[: degree + 1] == U[0]) and np.all(U[-degree - 1:] == U[-1])):
        raise ValueError("knot vector must be clamped")
    if U[-1] <= U[0]:
        raise ValueError("knot vector spans an empty domain")
    return U


def basis(i: int, p: int, u: float, knots) -> float:
    """Value of the ``i``-th degree-``p`` basis function at ``u``.

    Plain Cox-de Boor recursion with the 0/0 := 0 convention. At the right
    end of a clamped domain the last non-degenerate span is taken as closed
    so that the functions still sum to one there.
    """
    U = np.asarray(knots, dtype=float)
    n_funcs = len(U) - p - 1
    if not 0 <= i < n_funcs:
        raise IndexError(f"basis index {i} out of range for {n_funcs} functions")
    if u < U[0] or u > U[-1]:
        raise DomainError(f"u={u} outside knot domain [{U[0]}, {U[-1]}]")

    last = len(U) - 1
    # index of the last span with positive length
    end_span = last - 1
    while end_span > 0 and U[end_span] == U[end_span + 1]:
        end_span -= 1

    def rec(i, p):
        if p == 0:
            if U[i] <= u < U[i + 1]:
                return 1.0
            if u == U[-1] and i == end_span:
                return 1.0
            return 0.0
        val = 0.0
        d1 = U[i + p] - U[i]
        if d1 > 0:
            val += (u - U[i]) / d1 * rec(i, p - 1)
        d2 = U[i + p + 1] - U[i + 1]
        if d2 > 0:
            val += (U[i + p + 1] - u) / d2 * rec(i + 1, p - 1)
        return val

    return float(rec(i, p))


def find_span(u, p: int, U: np.ndarray) -> np.ndarray:
    """Knot span index for each ``u`` (array-valued)."""
    n = len(U) - p - 2  # index of last control point
    u = np.asarray(u, dtype=float)
    span = np.searchsorted(U, u, side="right") - 1
    return np.clip(span, p, n)


def basis_funs(span, u, p: int, U: np.ndarray) -> np.ndarray:
    """Non-zero basis values ``N[span-p .. span]`` at ``u``; shape ``(..., p+1)``."""
    u = np.asarray(u, dtype=float)
    span = np.asarray(span)
    N = np.zeros(u.shape + (p + 1,))
    N[..., 0] = 1.0
    left = np.zeros(u.shape + (p + 1,))
    right = np.zeros(u.shape + (p + 1,))
    for j in range(1, p + 1):
        left[..., j] = u - U[span + 1 - j]
        right[..., j] = U[span + j] - u
        saved = np.zeros(u.shape)
        for r in range(j):
            temp = N[..., r] / (right[..., r + 1] + left[..., j - r])
            N[..., r] = saved + right[..., r + 1] * temp
            saved = left[..., j - r] * temp
        N[..., j] = saved
    return N


def ders_basis_funs(span: int, u: float, p: int, n_ders: int, U: np.ndarray) -> np.ndarray:
    """Basis values and derivatives up to ``n_ders``; shape ``(n_ders+1, p+1)``."""
    ndu = np.zeros((p + 1, p + 1))
    ndu[0, 0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = u - U[span + 1 - j]
        right[j] = U[span + j] - u
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n_ders + 1, p + 1))
    ders[0] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, n_ders + 1):
        ders[k] *= fac
        fac *= p - k
    return ders


def basis_matrix(u, p: int, U: np.ndarray, n_ctrl: int) -> np.ndarray:
    """Dense collocation matrix ``A[k, i] = N_{i,p}(u_k)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    span = find_span(u, p, U)
    vals = basis_funs(span, u, p, U)
    A = np.zeros((len(u), n_ctrl))
    rows = np.arange(len(u))[:, None]
    cols = span[:, None] - p + np.arange(p + 1)[None, :]
    A[rows, cols] = vals
    return A
