"""Gauss rules on intervals, rectangles, triangles, and simple polygons."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss_01", "tensor_rule", "triangle_rule", "ear_clip", "polygon_area"]


@lru_cache(maxsize=64)
def gauss_01(n: int):
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def tensor_rule(rect, n: int):
    """Tensor Gauss rule on an axis-aligned rectangle ((u0,v0),(u1,v1))."""
    (u0, v0), (u1, v1) = rect
    x, w = gauss_01(n)
    us = u0 + (u1 - u0) * x
    vs = v0 + (v1 - v0) * x
    pts = np.stack(np.meshgrid(us, vs, indexing="ij"), axis=-1).reshape(-1, 2)
    wts = ((u1 - u0) * (v1 - v0) * np.outer(w, w)).ravel()
    return pts, wts


def triangle_rule(v0, v1, v2, n: int):
    """Positive-weight rule on a triangle via the collapsed-square (Duffy) map;
    exact for polynomials of total degree 2n-2 at least in each Duffy variable."""
    v0, v1, v2 = (np.asarray(v, dtype=float) for v in (v0, v1, v2))
    x, w = gauss_01(n)
    s, t = np.meshgrid(x, x, indexing="ij")
    ws = np.outer(w, w)
    pts = (v0[None, None]
           + s[..., None] * (v1 - v0)[None, None]
           + (s * t)[..., None] * (v2 - v1)[None, None])
    area2 = abs(_cross2(v1 - v0, v2 - v0))
    wts = ws * s * area2
    return pts.reshape(-1, 2), wts.ravel()


def polygon_area(verts) -> float:
    """Signed shoelace area (positive for CCW)."""
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def ear_clip(verts) -> list[np.ndarray]:
    """Triangulate a simple polygon (no holes) by ear clipping.

    Returns triangles as (3, 2) arrays; orientation of the input is normalized
    to CCW first.
    """
    v = np.asarray(verts, dtype=float)
    # drop an explicit ring-closure vertex; tolerance must stay far below any
    # genuine vertex separation (slivers can be ~1e-12 of the diameter wide)
    diam = float(np.abs(v.max(0) - v.min(0)).max())
    if np.abs(v[0] - v[-1]).max() <= 1e-14 * diam:
        v = v[:-1]
    if polygon_area(v) < 0:
        v = v[::-1]
    # convex (within tolerance) polygons -- including degenerate slivers --
    # triangulate exactly by fanning from the first vertex
    diam2 = float(((v.max(0) - v.min(0)) ** 2).sum())
    crosses = [_cross2(v[(k + 1) % len(v)] - v[k], v[(k + 2) % len(v)] - v[(k + 1) % len(v)])
               for k in range(len(v))]
    if min(crosses) >= -1e-12 * diam2:
        return [np.array([v[0], v[k], v[k + 1]]) for k in range(1, len(v) - 1)]
    idx = list(range(len(v)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(v) ** 2:
            raise ValueError("ear clipping failed (degenerate or non-simple polygon)")
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = v[i0], v[i1], v[i2]
            cross = _cross2(b - a, c - b)
            if cross <= 0:
                continue
            if any(_point_in_tri(v[j], a, b, c) for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append(np.array([a, b, c]))
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            # tolerate exactly-collinear vertices: drop the flattest one
            flat = min(range(n), key=lambda k: abs(_cross2(v[idx[k]] - v[idx[(k - 1) % n]],
                                                           v[idx[(k + 1) % n]] - v[idx[k]])))
            idx.pop(flat)
    tris.append(v[idx])
    return tris


def _point_in_tri(p, a, b, c, eps=1e-14):
    # closed containment: a vertex on the candidate ear's boundary blocks it
    d1 = _cross2(b - a, p - a)
    d2 = _cross2(c - b, p - b)
    d3 = _cross2(a - c, p - c)
    return d1 >= -eps and d2 >= -eps and d3 >= -eps


def polygon_rule(verts, n: int, drop_area: float = 0.0):
    """Quadrature over a simple polygon: ear-clip then per-triangle Duffy rule.

    Triangles with area <= drop_area are discarded.
    """
    pts, wts = [], []
    for tri in ear_clip(verts):
        area = abs(polygon_area(tri))
        if area <= drop_area:
            continue
        p, w = triangle_rule(tri[0], tri[1], tri[2], n)
        pts.append(p)
        wts.append(w)
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(pts), np.concatenate(wts)
