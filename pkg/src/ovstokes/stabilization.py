"""Minimal stabilization operators: polynomial extrapolation from good donor
elements onto bad ones.

For every bad element K the classification provides a good donor K'. The donor
field (pressure spline of degree k, or each velocity component of degree k+1)
is L2-projected over the full cell K' onto tensor-product polynomials expressed
in a physical affine frame on K' (center = centroid, scale = half-extents,
Legendre products), and the resulting polynomial is evaluated wherever K needs
values. On good elements the operators reduce to plain spline evaluation, so
the stabilized spaces introduce no new degrees of freedom.

The interface flux average uses the same normal (the outward normal of the
upper patch) on both sides; see the notes in the repository for why the
one-normal convention is the consistent reading of the averaged flux.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import InterfaceSegment, PatchHierarchy
from .quadrature import tensor_rule

__all__ = [
    "ExtrapolationFrame",
    "StabOp",
    "Stabilization",
    "build_local_projection",
    "build_stabilization",
    "eval_stab_pressure",
    "eval_stab_velocity_flux",
    "averaged_flux",
    "StabilizationError",
    "FrameConditioningError",
]


class StabilizationError(ValueError):
    pass


class FrameConditioningError(StabilizationError):
    pass


@dataclass(frozen=True)
class ExtrapolationFrame:
    """Affine frame on the donor cell: local = (x - center) / scale."""

    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.scale) <= 0):
            raise FrameConditioningError("frame scale must be positive")

    @classmethod
    def from_element(cls, hierarchy: PatchHierarchy, patch: int, element: int):
        v = hierarchy.element_polygon(patch, element)
        # shoelace centroid of the full cell and bounding-box half-extents
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        area = 0.5 * cross.sum()
        cx = ((x + xn) * cross).sum() / (6 * area)
        cy = ((y + yn) * cross).sum() / (6 * area)
        scale = 0.5 * (v.max(axis=0) - v.min(axis=0))
        return cls(np.array([cx, cy]), scale)

    def local(self, x):
        return (np.atleast_2d(x) - self.center) / self.scale


def _legendre_1d(x, deg):
    """Values and derivatives of Legendre polynomials P_0..P_deg at x."""
    x = np.asarray(x, dtype=float)
    V = np.polynomial.legendre.legvander(x, deg)
    D = np.zeros_like(V)
    for a in range(1, deg + 1):
        c = np.zeros(a + 1)
        c[a] = 1.0
        D[:, a] = np.polynomial.legendre.legval(x, np.polynomial.legendre.legder(c))
    return V, D


def poly_basis(frame: ExtrapolationFrame, degree: int, x, grad=False):
    """Tensor Legendre-product basis of Q_degree in the frame at physical x.

    Returns values of shape (m, (degree+1)^2); with ``grad`` also the physical
    gradients (m, n_poly, 2). Basis index p = b*(degree+1) + a for P_a(x)P_b(y).
    """
    xl = frame.local(x)
    Vx, Dx = _legendre_1d(xl[:, 0], degree)
    Vy, Dy = _legendre_1d(xl[:, 1], degree)
    vals = (Vy[:, :, None] * Vx[:, None, :]).reshape(len(xl), -1)
    if not grad:
        return vals
    gx = (Vy[:, :, None] * Dx[:, None, :]).reshape(len(xl), -1) / frame.scale[0]
    gy = (Dy[:, :, None] * Vx[:, None, :]).reshape(len(xl), -1) / frame.scale[1]
    return vals, np.stack([gx, gy], axis=-1)


def _spline_values_at(space, params):
    """(global_indices, value matrix (m, nloc)) for points in a single element."""
    data = space.eval_fields_at_points(params, order=0)
    gidx = data[0][0]
    vals = np.stack([d[1] for d in data])
    return gidx, vals


def build_local_projection(hierarchy, donor_patch, donor_element, field="pressure",
                           full_cell=True, cond_limit=1e12):
    """L2 projection on the donor cell from spline shape functions onto Q_degree
    in the donor's physical frame.

    Returns (frame, proj, dof_indices, cond) where proj maps the donor's local
    spline coefficients to polynomial coefficients; the quadrature is Gauss,
    exact for polynomial degree 2(k+1) on affine cells. ``full_cell`` integrates
    over all of K' as in the operator definition; the variant restricted to the
    visible part K' ∩ Ω is kept as a switch.
    """
    patch = hierarchy.patches[donor_patch]
    space = patch.spaces.pressure if field == "pressure" else patch.spaces.velocity
    degree = space.degrees[0]
    frame = ExtrapolationFrame.from_element(hierarchy, donor_patch, donor_element)
    n = degree + 3
    if full_cell:
        rect = patch.mesh.element_rect(donor_element)
        param, w = tensor_rule(rect, n)
        phys, _, det = patch.geometry.eval_with_jacobian(param)
        w = w * det
    else:
        quad = hierarchy.element_quadrature(donor_patch, donor_element, n)
        param, phys, w = quad.param, quad.phys, quad.weights
    P = poly_basis(frame, degree, phys)
    gidx, S = _spline_values_at(space, param)
    M = P.T @ (w[:, None] * P)
    cond = float(np.linalg.cond(M))
    if cond > cond_limit:
        raise FrameConditioningError(
            f"local mass matrix on donor ({donor_patch}, {donor_element}) "
            f"has condition number {cond:.2e}")
    proj = np.linalg.solve(M, P.T @ (w[:, None] * S))
    return frame, proj, gidx, cond


@dataclass(frozen=True)
class StabOp:
    """Extrapolation operator for one bad element: maps donor spline DOFs to
    polynomial values (or gradients) anywhere in physical space."""

    donor_patch: int
    donor_element: int
    degree: int
    frame: ExtrapolationFrame
    proj: np.ndarray         # (n_poly, nloc)
    dof_indices: np.ndarray  # donor-patch global basis indices, len nloc
    cond: float

    def values(self, x) -> np.ndarray:
        """(m, nloc) matrix: values @ donor_coeffs[dof_indices] = field at x."""
        return poly_basis(self.frame, self.degree, x) @ self.proj

    def gradients(self, x) -> np.ndarray:
        """(m, nloc, 2) physical-gradient matrix with the same contraction."""
        _, G = poly_basis(self.frame, self.degree, x, grad=True)
        return np.einsum("mpd,pl->mld", G, self.proj)


@dataclass(frozen=True)
class Stabilization:
    """All extrapolation operators of a hierarchy, keyed by bad element."""

    pressure: dict
    velocity: dict
    full_cell: bool

    def is_stabilized(self, i, e) -> bool:
        return (i, e) in self.pressure


def build_stabilization(hierarchy: PatchHierarchy, full_cell=True) -> Stabilization:
    """Build pressure and velocity extrapolation operators for every bad element."""
    p_ops, v_ops = {}, {}
    for (i, e), cls in hierarchy.classes.items():
        if cls.good:
            continue
        k, ke = cls.neighbor
        for field, ops in (("pressure", p_ops), ("velocity", v_ops)):
            frame, proj, gidx, cond = build_local_projection(
                hierarchy, k, ke, field=field, full_cell=full_cell)
            space = (hierarchy.patches[k].spaces.pressure if field == "pressure"
                     else hierarchy.patches[k].spaces.velocity)
            ops[i, e] = StabOp(k, ke, space.degrees[0], frame, proj, gidx, cond)
    return Stabilization(p_ops, v_ops, full_cell)


# ------------------------------------------------------------------ evaluation

def _native_values(hierarchy, i, e, x, space, order=0):
    """Native spline basis data at physical points known to lie in element e."""
    patch = hierarchy.patches[i]
    rect = patch.mesh.element_rect(e)
    params = np.empty_like(np.atleast_2d(x), dtype=float)
    guess = 0.5 * (np.asarray(rect[0]) + np.asarray(rect[1]))
    for a, pt in enumerate(np.atleast_2d(x)):
        guess = patch.geometry.inverse(pt, xi0=guess, bounds=rect)
        params[a] = guess
    data = space.eval_fields_at_points(params, order=order)
    gidx = data[0][0]
    vals = np.stack([d[1] for d in data])
    if order == 0:
        return gidx, vals, None
    _, J = patch.geometry.jacobian(params)
    Jinv = np.linalg.inv(J)
    grads_param = np.stack([d[2] for d in data])        # (m, nloc, 2)
    grads = np.einsum("mld,mdc->mlc", grads_param, Jinv)  # physical gradients
    return gidx, vals, grads


def eval_stab_pressure(hierarchy, stab, i, e, x, pressure_coeffs):
    """Stabilized pressure at physical points x in element e of patch i.

    ``pressure_coeffs`` is a per-patch list of coefficient vectors. Good
    elements evaluate the native spline; bad elements evaluate the donor's
    extended polynomial.
    """
    op = stab.pressure.get((i, e))
    if op is None:
        space = hierarchy.patches[i].spaces.pressure
        gidx, vals, _ = _native_values(hierarchy, i, e, x, space)
        return vals @ pressure_coeffs[i][gidx]
    return op.values(x) @ pressure_coeffs[op.donor_patch][op.dof_indices]


def eval_stab_velocity_flux(hierarchy, stab, seg: InterfaceSegment, side, x,
                            velocity_coeffs):
    """D R^v(v) n at physical points on a segment, for one side's owner.

    ``velocity_coeffs`` is per patch an array (n_basis, 2) of scalar-space
    coefficients per velocity component. The normal is always the outward
    normal of the upper patch (side i), for both sides.
    """
    x = np.atleast_2d(x)
    n = _segment_normals(hierarchy, seg, x)
    if side == "i":
        patch, elem = seg.patch_i, seg.elem_i
    elif side == "j":
        patch, elem = seg.patch_j, seg.elem_j
    else:
        raise StabilizationError(f"side must be 'i' or 'j', got {side!r}")
    op = stab.velocity.get((patch, elem))
    if op is None:
        space = hierarchy.patches[patch].spaces.velocity
        gidx, _, grads = _native_values(hierarchy, patch, elem, x, space, order=1)
        coeffs = velocity_coeffs[patch][gidx]          # (nloc, 2)
    else:
        grads = op.gradients(x)                        # (m, nloc, 2)
        coeffs = velocity_coeffs[op.donor_patch][op.dof_indices]
    # flux_c = sum_l sum_d dB_l/dx_d * c_{l,c} * n_d
    return np.einsum("mld,lc,md->mc", grads, coeffs, n)


def averaged_flux(hierarchy, stab, seg: InterfaceSegment, t, x, velocity_coeffs):
    """⟨D R^v(v) n⟩_t = t · (side-i flux) + (1-t) · (side-j flux), both sides
    contracted with the side-i outward normal."""
    if t not in (0.5, 1.0):
        raise StabilizationError(f"flux weight t must be 1/2 or 1, got {t}")
    flux_i = eval_stab_velocity_flux(hierarchy, stab, seg, "i", x, velocity_coeffs)
    if t == 1.0:
        return flux_i
    flux_j = eval_stab_velocity_flux(hierarchy, stab, seg, "j", x, velocity_coeffs)
    return t * flux_i + (1.0 - t) * flux_j


def _segment_normals(hierarchy, seg, x):
    """Outward normals of patch i at physical points on the segment."""
    d = seg.p1 - seg.p0
    s = np.clip(((np.atleast_2d(x) - seg.p0) @ d) / (d @ d), 0.0, 1.0)
    params = seg.xi0[None] + s[:, None] * (seg.xi1 - seg.xi0)[None]
    n, _ = hierarchy._outward_normal(seg.patch_i, params, seg.xi1 - seg.xi0)
    return n
