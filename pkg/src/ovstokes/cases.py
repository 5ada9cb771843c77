"""Experiment case generators and manufactured solutions.

A ``Case`` bundles a patch hierarchy with its boundary-condition layout and an
optional exact solution. The two generators reproduce the experiment setups:
a trapezoidal patch overlapping a unit-square background mesh with a tunable
worst cut ratio, and a stack of rotated rectangular patches over the square.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

from .geometry import Patch, PatchHierarchy
from .splines import GeometryMap, TaylorHoodPair

__all__ = [
    "Case",
    "gen_two_patch",
    "gen_multi_patch",
    "manufactured_solution",
    "trapezoid_geometry",
]

BASE_N = 8          # background mesh is BASE_N x BASE_N on [0,1]^2
TRAPEZOID_N = 5     # trapezoid patch subdivisions per direction


@dataclass
class Case:
    """A runnable configuration: geometry + boundary conditions + exact data.

    ``dirichlet`` lists (patch, face) pairs with face in
    {left, right, bottom, top}; every other outer-boundary piece is Neumann.
    ``solution`` is None or a dict of vectorized callables
    u(x) -> (m,2), grad_u(x) -> (m,2,2), p(x) -> (m,), f(x) -> (m,2).
    """

    name: str
    hierarchy: PatchHierarchy
    dirichlet: list = field(default_factory=list)
    solution: dict | None = None

    def refine_dyadic(self) -> "Case":
        return Case(self.name, self.hierarchy.refine_dyadic(), self.dirichlet,
                    self.solution)


def trapezoid_geometry(eps: float) -> GeometryMap:
    """Bilinear trapezoid over the 8x8 background mesh whose slanted sides
    leave a column of cut background elements with worst area ratio exactly
    eps; its horizontal edges lie on background mesh lines (y = 1/4, 3/4)."""
    h = 1.0 / BASE_N
    return GeometryMap.bilinear(
        (0.25 + 1.875 * h * eps, 0.25),
        (0.75 - 1.875 * h * eps, 0.25),
        (0.25 + 0.875 * h * eps, 0.75),
        (0.75 - 0.875 * h * eps, 0.75),
    )


def gen_two_patch(eps, degree=2, theta=0.1, smoothness=None,
                  solution="ms-stokes-2021") -> Case:
    """Unit-square background patch plus an overlapping trapezoid.

    Dirichlet (u = 0) on the left and right boundaries, Neumann on the bottom
    and top; the trapezoid has no outer boundary.
    """
    base = Patch(GeometryMap.unit_square(),
                 TaylorHoodPair.uniform(degree, BASE_N, BASE_N, smoothness), "base")
    top = Patch(trapezoid_geometry(eps),
                TaylorHoodPair.uniform(degree, TRAPEZOID_N, TRAPEZOID_N, smoothness),
                "trapezoid")
    hier = PatchHierarchy([base, top], theta=theta)
    sol = manufactured_solution(solution) if solution else None
    return Case(f"two-patch-eps{eps:g}-k{degree}", hier,
                dirichlet=[(0, "left"), (0, "right")], solution=sol)


# centers, half-extents, and rotation angles (degrees) of the stacked patches;
# all contain the point (0.5, 0.5), so the top patch overlaps every lower one
_MULTI_LAYOUT = [
    ((0.48, 0.50), (0.26, 0.20), 15.0),
    ((0.53, 0.49), (0.24, 0.185), -24.0),
    ((0.50, 0.545), (0.22, 0.17), 52.0),
    ((0.515, 0.465), (0.205, 0.16), 95.0),
]


def _rotated_rect(center, half, angle_deg) -> GeometryMap:
    c, s = np.cos(np.radians(angle_deg)), np.sin(np.radians(angle_deg))
    R = np.array([[c, -s], [s, c]])
    corners = [R @ (np.array(d) * half) + center
               for d in [(-1, -1), (1, -1), (-1, 1), (1, 1)]]
    return GeometryMap.bilinear(*corners)


def gen_multi_patch(n_patches, degree=2, theta=0.1, smoothness=None,
                    solution="ms-stokes-2021") -> Case:
    """Unit-square background plus n_patches-1 stacked rotated rectangles, all
    overlapping near the center; boundary conditions as in the two-patch case."""
    if not 2 <= n_patches <= 1 + len(_MULTI_LAYOUT):
        raise ValueError(f"n_patches must be in [2, {1 + len(_MULTI_LAYOUT)}]")
    patches = [Patch(GeometryMap.unit_square(),
                     TaylorHoodPair.uniform(degree, BASE_N, BASE_N, smoothness), "base")]
    for m, (center, half, angle) in enumerate(_MULTI_LAYOUT[: n_patches - 1]):
        n_el = max(4, int(round(2 * max(half) / 0.11)))
        patches.append(Patch(_rotated_rect(center, half, angle),
                             TaylorHoodPair.uniform(degree, n_el, n_el, smoothness),
                             f"layer{m + 1}"))
    hier = PatchHierarchy(patches, theta=theta)
    sol = manufactured_solution(solution) if solution else None
    return Case(f"multi-patch-n{n_patches}-k{degree}", hier,
                dirichlet=[(0, "left"), (0, "right")], solution=sol)


@lru_cache(maxsize=8)
def manufactured_solution(name: str) -> dict:
    """Vectorized callables for a named exact Stokes solution (viscosity 1).

    The returned dict has keys u, grad_u, p, f and additionally ``traction``
    (x, n) -> (Du)n - p n for Neumann data.
    """
    x, y = sp.symbols("x y", real=True)
    if name == "ms-stokes-2021":
        u1 = 2 * sp.exp(x) * (x - 1) ** 2 * x ** 2 * (y ** 2 - y) * (2 * y - 1)
        u2 = -sp.exp(x) * (x - 1) * x * (x ** 2 + 3 * x - 2) * (y - 1) ** 2 * y ** 2
        p = (-424 + 156 * sp.E
             + (y ** 2 - y) * (-456
                               + sp.exp(x) * (456
                                              + x ** 2 * (228 - 5 * (y ** 2 - y))
                                              + 2 * x * (-228 + y ** 2 - y)
                                              + 2 * x ** 3 * (-36 + y ** 2 - y)
                                              + x ** 4 * (12 + y ** 2 - y))))
    elif name == "patch-test-linear":
        u1, u2 = y, x
        p = x * sp.Integer(1)
    else:
        raise KeyError(f"unknown manufactured solution {name!r}")
    return _compile_solution(u1, u2, p, x, y)


def _compile_solution(u1, u2, p, x, y) -> dict:
    grad = [[sp.diff(u1, x), sp.diff(u1, y)], [sp.diff(u2, x), sp.diff(u2, y)]]
    lap = [sp.diff(c, x, 2) + sp.diff(c, y, 2) for c in (u1, u2)]
    f_expr = [-lap[0] + sp.diff(p, x), -lap[1] + sp.diff(p, y)]

    def vec(exprs):
        fns = [sp.lambdify((x, y), sp.simplify(e), "numpy") for e in exprs]

        def call(pts):
            pts = np.atleast_2d(pts)
            return np.stack([np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]),
                                                        dtype=float), (len(pts),))
                             for f in fns], axis=-1)
        return call

    u_fn = vec([u1, u2])
    g_fn = vec([grad[0][0], grad[0][1], grad[1][0], grad[1][1]])
    p_fn = vec([p])
    f_fn = vec(f_expr)

    def grad_u(pts):
        return g_fn(pts).reshape(-1, 2, 2)

    def pressure(pts):
        return p_fn(pts)[:, 0]

    def traction(pts, normals):
        return np.einsum("mcd,md->mc", grad_u(pts), normals) \
            - pressure(pts)[:, None] * normals

    return {"u": u_fn, "grad_u": grad_u, "p": pressure, "f": f_fn,
            "traction": traction}
