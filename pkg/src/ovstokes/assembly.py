"""Assembly of the Nitsche-coupled Stokes system on overlapping patches.

The discrete problem couples Taylor-Hood velocity/pressure splines on every
patch through interface terms: a symmetric consistency/adjoint pair built on
the (optionally stabilized) averaged viscous flux, a penalty on the velocity
jump with coefficient gamma/h, and a pressure-average against the normal
velocity jump added to the divergence constraint. Volume terms integrate over
visible parts only (cut-cell quadrature). With stabilization on, the pressure
field on bad elements is the donor extrapolation, so those terms scatter to
the donor's degrees of freedom and no new unknowns appear.

Assembly is plain sequential scatter-add into COO triplets, so runs are
bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import ConfigurationError, PatchHierarchy
from .stabilization import Stabilization, build_stabilization

__all__ = [
    "AssemblyConfig",
    "DofMap",
    "StokesSystem",
    "gamma",
    "assemble_system",
    "assemble_volume",
    "assemble_interface",
    "assemble_rhs",
    "apply_dirichlet",
    "split_solution",
    "energy_norm",
    "pressure_norm",
    "interface_pressure_jump",
    "errors_vs_exact",
]

# face name -> (parametric direction held fixed, its value on the face)
FACES = {"left": (0, 0.0), "right": (0, 1.0), "bottom": (1, 0.0), "top": (1, 1.0)}


@dataclass(frozen=True)
class AssemblyConfig:
    """Discretization switches: flux weight t, penalty base, stabilization."""

    t: float = 0.5
    gamma0: float = 10.0
    stabilize: bool = True
    quad_points: int | None = None   # Gauss points per direction; default k+3
    pressure_mean: bool = False      # append a mean-zero pressure constraint row

    def __post_init__(self):
        if self.t not in (0.5, 1.0):
            raise ConfigurationError(f"flux weight t must be 1/2 or 1, got {self.t}")
        if self.gamma0 <= 0:
            raise ConfigurationError(f"gamma0 must be positive, got {self.gamma0}")


def gamma(config: AssemblyConfig, pressure_degree: int) -> float:
    """Penalty value gamma0*(k+2)^2, quadratic in the velocity degree k+1."""
    return config.gamma0 * (pressure_degree + 2) ** 2


@dataclass(frozen=True)
class DofMap:
    """Global numbering of active basis functions.

    Scalar velocity slots come first (components interleaved: dof = 2*slot+c),
    pressures follow. A velocity basis function is active iff its support
    touches an active element; with stabilization on, a pressure basis
    function is active iff its support touches a *good* active element (on bad
    elements the pressure field is the donor extension, so functions supported
    only there would otherwise produce zero columns).
    """

    vslot: list
    pslot: list
    n_vslots: int
    n_pressure: int

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_vslots

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_pressure

    def vdofs(self, i, basis_idx, comp):
        slots = self.vslot[i][basis_idx]
        if np.any(slots < 0):
            raise ConfigurationError("inactive velocity basis referenced")
        return 2 * slots + comp

    def pdofs(self, i, basis_idx):
        slots = self.pslot[i][basis_idx]
        if np.any(slots < 0):
            raise ConfigurationError("inactive pressure basis referenced")
        return self.n_velocity + slots

    @classmethod
    def build(cls, hierarchy: PatchHierarchy, stabilize=True) -> "DofMap":
        vslot, pslot = [], []
        nv = npr = 0
        for i, patch in enumerate(hierarchy.patches):
            vmask = np.zeros(patch.spaces.velocity.n_basis_total, dtype=bool)
            pmask = np.zeros(patch.spaces.pressure.n_basis_total, dtype=bool)
            for e in hierarchy.active_elements(i):
                vmask[patch.spaces.velocity.element_basis_indices(e)] = True
                if not stabilize or hierarchy.classes[i, e].good:
                    pmask[patch.spaces.pressure.element_basis_indices(e)] = True
            vs = np.full(len(vmask), -1, dtype=int)
            vs[vmask] = nv + np.arange(vmask.sum())
            nv += int(vmask.sum())
            ps = np.full(len(pmask), -1, dtype=int)
            ps[pmask] = npr + np.arange(pmask.sum())
            npr += int(pmask.sum())
            vslot.append(vs)
            pslot.append(ps)
        return cls(vslot, pslot, nv, npr)


@dataclass
class StokesSystem:
    """Assembled saddle-point system [[A, B^T], [B, 0]] with its metadata."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    config: AssemblyConfig
    hierarchy: PatchHierarchy
    stab: Stabilization
    gamma: float


# --------------------------------------------------------------- local eval

def _stack_point_eval(data, order):
    """Union-indexed dense matrices from per-point sparse basis data."""
    gidx0 = data[0][0]
    if all(np.array_equal(d[0], gidx0) for d in data):
        vals = np.stack([d[1] for d in data])
        grads = np.stack([d[2] for d in data]) if order else None
        return gidx0, vals, grads
    keys = np.unique(np.concatenate([d[0] for d in data]))
    pos = {g: a for a, g in enumerate(keys)}
    vals = np.zeros((len(data), len(keys)))
    grads = np.zeros((len(data), len(keys), 2)) if order else None
    for m, (g, v, gr) in enumerate(data):
        cols = [pos[x] for x in g]
        vals[m, cols] = v
        if order:
            grads[m, cols] = gr
    return keys, vals, grads


def _basis_at(hierarchy, i, space, params, order=0, element=None):
    """(gidx, values, physical gradients) of a spline space at known params.

    With ``element`` the evaluation is forced onto that element's polynomial
    pieces, so traces on element boundaries are one-sided limits from inside
    the owner element (points on mesh lines must not leak basis functions of
    the hidden side).
    """
    if element is not None:
        gidx, vals, grads = space.eval_element_basis(element, params, order=order)
    else:
        data = space.eval_fields_at_points(params, order=order)
        gidx, vals, grads = _stack_point_eval(data, order)
    if order:
        _, J = hierarchy.patches[i].geometry.jacobian(params)
        grads = np.einsum("mld,mdc->mlc", grads, np.linalg.inv(J))
    return gidx, vals, grads


def _pressure_trace(hierarchy, stab, config, i, e, params, phys):
    """(patch, gidx, value matrix) of the (stabilized) pressure on element e."""
    op = stab.pressure.get((i, e)) if config.stabilize else None
    if op is None:
        space = hierarchy.patches[i].spaces.pressure
        gidx, vals, _ = _basis_at(hierarchy, i, space, params, element=e)
        return i, gidx, vals
    return op.donor_patch, op.dof_indices, op.values(phys)


def _velocity_flux(hierarchy, stab, config, i, e, params, phys, normal):
    """(patch, gidx, flux matrix) with flux_l = grad(B_l) . n on one side."""
    op = stab.velocity.get((i, e)) if config.stabilize else None
    if op is None:
        space = hierarchy.patches[i].spaces.velocity
        gidx, _, grads = _basis_at(hierarchy, i, space, params, order=1, element=e)
        return i, gidx, np.einsum("mld,md->ml", grads, normal)
    return (op.donor_patch, op.dof_indices,
            np.einsum("mld,md->ml", op.gradients(phys), normal))


def _n_points(hierarchy, config):
    if config.quad_points is not None:
        return config.quad_points
    return hierarchy.patches[0].spaces.pressure.degrees[0] + 3


# ----------------------------------------------------------------- assembly

class _Coo:
    """Deterministic scatter-add accumulator."""

    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, block):
        self.rows.append(np.repeat(rows, len(cols)))
        self.cols.append(np.tile(cols, len(rows)))
        self.vals.append(np.asarray(block).ravel())

    def matrix(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        return sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n)).tocsr()


def assemble_volume(hierarchy, dofmap, config, stab, coo, mean_row=None):
    """Viscous and divergence volume terms over visible parts of all patches."""
    n_q = _n_points(hierarchy, config)
    for i, patch in enumerate(hierarchy.patches):
        vspace, pspace = patch.spaces.velocity, patch.spaces.pressure
        for e in hierarchy.active_elements(i):
            quad = hierarchy.element_quadrature(i, e, n_q)
            w = quad.weights
            vg, _, G = _basis_at(hierarchy, i, vspace, quad.param, order=1,
                                 element=e)
            K = np.einsum("mld,m,mkd->lk", G, w, G)
            pp, pg, P = _pressure_trace(hierarchy, stab, config, i, e,
                                        quad.param, quad.phys)
            prows = dofmap.pdofs(pp, pg)
            for c in (0, 1):
                vcols = dofmap.vdofs(i, vg, c)
                coo.add(vcols, vcols, K)
                # -int q d(v_c)/dx_c, scattered to both off-diagonal blocks
                Bblk = -np.einsum("ml,m,mk->lk", P, w, G[:, :, c])
                coo.add(prows, vcols, Bblk)
                coo.add(vcols, prows, Bblk.T)
            if mean_row is not None:
                mean_row[prows] += P.T @ w


def assemble_interface(hierarchy, dofmap, config, stab, coo):
    """Nitsche flux, penalty, and pressure-jump terms over all interfaces."""
    n_q = _n_points(hierarchy, config)
    gam = gamma(config, hierarchy.patches[0].spaces.pressure.degrees[0])
    t = config.t
    for (i, j), segs in sorted(hierarchy.interfaces.items()):
        for seg in segs:
            q = hierarchy.interface_quadrature(seg, n_q)
            w, n = q.weights, q.normal
            h = seg.h_i
            vsp_i = hierarchy.patches[i].spaces.velocity
            vsp_j = hierarchy.patches[j].spaces.velocity
            gi, Vi, _ = _basis_at(hierarchy, i, vsp_i, q.param_i, element=seg.elem_i)
            gj, Vj, _ = _basis_at(hierarchy, j, vsp_j, q.param_j, element=seg.elem_j)
            fp_i, fg_i, Fi = _velocity_flux(hierarchy, stab, config, i,
                                            seg.elem_i, q.param_i, q.phys, n)
            fp_j, fg_j, Fj = _velocity_flux(hierarchy, stab, config, j,
                                            seg.elem_j, q.param_j, q.phys, n)
            # jump columns: +side i, -side j; averaged flux: t*side_i+(1-t)*side_j
            jump = [(i, gi, Vi, 1.0), (j, gj, Vj, -1.0)]
            flux = [(fp_i, fg_i, Fi, t), (fp_j, fg_j, Fj, 1.0 - t)]
            for c in (0, 1):
                for pf, gf, F, tf in flux:
                    if tf == 0.0:
                        continue
                    frows = dofmap.vdofs(pf, gf, c)
                    for pv, gv, V, s in jump:
                        vcols = dofmap.vdofs(pv, gv, c)
                        blk = -tf * s * np.einsum("ml,m,mk->lk", F, w, V)
                        coo.add(frows, vcols, blk)
                        coo.add(vcols, frows, blk.T)
                for pa, ga, Va, sa in jump:
                    ra = dofmap.vdofs(pa, ga, c)
                    for pb, gb, Vb, sb in jump:
                        cb = dofmap.vdofs(pb, gb, c)
                        coo.add(ra, cb, (gam / h) * sa * sb
                                * np.einsum("ml,m,mk->lk", Va, w, Vb))
            # pressure average against [v . n]
            pr_i = _pressure_trace(hierarchy, stab, config, i, seg.elem_i,
                                   q.param_i, q.phys)
            pr_j = _pressure_trace(hierarchy, stab, config, j, seg.elem_j,
                                   q.param_j, q.phys)
            for (pp, pg, P), tp in ((pr_i, t), (pr_j, 1.0 - t)):
                if tp == 0.0:
                    continue
                prows = dofmap.pdofs(pp, pg)
                for pv, gv, V, s in jump:
                    for c in (0, 1):
                        vcols = dofmap.vdofs(pv, gv, c)
                        blk = tp * s * np.einsum("ml,m,mk->lk", P, w * n[:, c], V)
                        coo.add(prows, vcols, blk)
                        coo.add(vcols, prows, blk.T)


def assemble_rhs(hierarchy, dofmap, config, f=None, neumann=None,
                 dirichlet_faces=()):
    """Body-force and Neumann-traction load vector.

    ``f(x) -> (m, 2)`` acts over visible parts; ``neumann(x, n) -> (m, 2)``
    over every outer-boundary segment not lying on a Dirichlet face.
    """
    n_q = _n_points(hierarchy, config)
    rhs = np.zeros(dofmap.n_total + (1 if config.pressure_mean else 0))
    if f is not None:
        for i, patch in enumerate(hierarchy.patches):
            vspace = patch.spaces.velocity
            for e in hierarchy.active_elements(i):
                quad = hierarchy.element_quadrature(i, e, n_q)
                fv = f(quad.phys)
                vg, V, _ = _basis_at(hierarchy, i, vspace, quad.param, element=e)
                for c in (0, 1):
                    rhs[dofmap.vdofs(i, vg, c)] += V.T @ (quad.weights * fv[:, c])
    if neumann is not None:
        for i, segs in sorted(hierarchy.boundary.items()):
            vspace = hierarchy.patches[i].spaces.velocity
            for seg in segs:
                if _on_dirichlet_face(hierarchy, i, seg, dirichlet_faces):
                    continue
                q = hierarchy.interface_quadrature(seg, n_q)
                g = neumann(q.phys, q.normal)
                vg, V, _ = _basis_at(hierarchy, i, vspace, q.param_i,
                                     element=seg.elem_i)
                for c in (0, 1):
                    rhs[dofmap.vdofs(i, vg, c)] += V.T @ (q.weights * g[:, c])
    return rhs


def _on_dirichlet_face(hierarchy, i, seg, dirichlet_faces):
    tol = 1e-10
    for patch, face in dirichlet_faces:
        if patch != i:
            continue
        if face not in FACES:
            raise ConfigurationError(
                f"Dirichlet region must be a full face, got {face!r}")
        axis, val = FACES[face]
        if abs(seg.xi0[axis] - val) < tol and abs(seg.xi1[axis] - val) < tol:
            return True
    return False


def assemble_system(hierarchy, config=None, f=None, neumann=None,
                    dirichlet_faces=(), stab=None) -> StokesSystem:
    """Assemble matrix and right-hand side for a hierarchy.

    The matrix is symmetric by construction (every interface block is added
    together with its transpose); the returned system is unconstrained, apply
    Dirichlet conditions with :func:`apply_dirichlet`.
    """
    config = config or AssemblyConfig()
    if stab is None:
        stab = (build_stabilization(hierarchy) if config.stabilize
                else Stabilization({}, {}, True))
    dofmap = DofMap.build(hierarchy, stabilize=config.stabilize)
    coo = _Coo()
    n = dofmap.n_total + (1 if config.pressure_mean else 0)
    mean_row = np.zeros(n) if config.pressure_mean else None
    assemble_volume(hierarchy, dofmap, config, stab, coo, mean_row)
    assemble_interface(hierarchy, dofmap, config, stab, coo)
    if config.pressure_mean:
        idx = np.nonzero(mean_row)[0]
        coo.add(np.array([n - 1]), idx, mean_row[idx][None, :])
        coo.add(idx, np.array([n - 1]), mean_row[idx][:, None])
    rhs = assemble_rhs(hierarchy, dofmap, config, f, neumann, dirichlet_faces)
    gam = gamma(config, hierarchy.patches[0].spaces.pressure.degrees[0])
    return StokesSystem(coo.matrix(n), rhs, dofmap, config, hierarchy, stab, gam)


# ---------------------------------------------------------------- dirichlet

def _face_dofs(space, face):
    """Global scalar-space basis indices lying on a full parametric face."""
    if face not in FACES:
        raise ConfigurationError(f"Dirichlet region must be a full face, got {face!r}")
    axis, val = FACES[face]
    n_u, n_v = space.n_basis
    if axis == 0:
        iu = 0 if val == 0.0 else n_u - 1
        return np.array([space.global_index(iu, iv) for iv in range(n_v)])
    iv = 0 if val == 0.0 else n_v - 1
    return np.array([space.global_index(iu, iv) for iu in range(n_u)])


def _project_face_values(hierarchy, i, face, u_D, n_q):
    """L2 projection of u_D onto the trace space of one face; returns
    (face basis indices, coefficient array (n_face, 2))."""
    from .quadrature import gauss_01

    patch = hierarchy.patches[i]
    space = patch.spaces.velocity
    fdofs = _face_dofs(space, face)
    axis, val = FACES[face]
    kv = space.kv_v if axis == 0 else space.kv_u
    xg, wg = gauss_01(space.degrees[0] + 2)
    pos = {g: a for a, g in enumerate(fdofs)}
    M = np.zeros((len(fdofs), len(fdofs)))
    b = np.zeros((len(fdofs), 2))
    bp = kv.breakpoints
    for s0, s1 in zip(bp[:-1], bp[1:]):
        sv = s0 + (s1 - s0) * xg
        params = np.empty((len(sv), 2))
        params[:, axis] = val
        params[:, 1 - axis] = sv
        _, J = patch.geometry.jacobian(params)
        ds = np.linalg.norm(J[:, :, 1 - axis], axis=1) * (s1 - s0) * wg
        data = space.eval_fields_at_points(params, order=0)
        phys = patch.geometry(params)
        vals = u_D(phys) if u_D is not None else np.zeros((len(sv), 2))
        for m, (gidx, v, _) in enumerate(data):
            on = [a for a, g in enumerate(gidx) if g in pos]
            rows = [pos[gidx[a]] for a in on]
            vloc = v[on]
            M[np.ix_(rows, rows)] += ds[m] * np.outer(vloc, vloc)
            b[rows] += ds[m] * np.outer(vloc, vals[m])
    return fdofs, np.linalg.solve(M, b)


def apply_dirichlet(system: StokesSystem, dirichlet_faces, u_D=None):
    """Constrain velocity DOFs on full faces by face-trace L2 projection.

    Rows and columns are eliminated symmetrically: the right-hand side absorbs
    the constrained columns, constrained rows become identity rows carrying
    the projected values. Returns (matrix, rhs, fixed_dof_indices).
    """
    hier, dm = system.hierarchy, system.dofmap
    n_q = _n_points(hier, system.config)
    fixed = {}
    for patch, face in dirichlet_faces:
        fdofs, coef = _project_face_values(hier, patch, face, u_D, n_q)
        for a, g in enumerate(fdofs):
            for c in (0, 1):
                fixed[int(dm.vdofs(patch, np.array([g]), c)[0])] = coef[a, c]
    if not fixed:
        return system.matrix.copy(), system.rhs.copy(), np.array([], dtype=int)
    idx = np.array(sorted(fixed))
    vals = np.array([fixed[d] for d in idx])
    A = system.matrix.tolil(copy=True)
    b = system.rhs.copy()
    b -= system.matrix[:, idx] @ vals
    A[idx, :] = 0.0
    A[:, idx] = 0.0
    A[idx, idx] = 1.0
    b[idx] = vals
    return A.tocsr(), b, idx


def split_solution(system: StokesSystem, x):
    """Per-patch coefficient arrays (velocity (n_basis, 2), pressure (n,))
    from a solution vector; inactive coefficients are zero."""
    dm = system.dofmap
    vel, pres = [], []
    for i, patch in enumerate(system.hierarchy.patches):
        v = np.zeros((patch.spaces.velocity.n_basis_total, 2))
        act = dm.vslot[i] >= 0
        for c in (0, 1):
            v[act, c] = x[2 * dm.vslot[i][act] + c]
        p = np.zeros(patch.spaces.pressure.n_basis_total)
        pact = dm.pslot[i] >= 0
        p[pact] = x[dm.n_velocity + dm.pslot[i][pact]]
        vel.append(v)
        pres.append(p)
    return vel, pres


# -------------------------------------------------------------------- norms

def _norm_points(hierarchy, order):
    return order if order is not None else \
        hierarchy.patches[0].spaces.pressure.degrees[0] + 4


def energy_norm(hierarchy, vel, order=None):
    """Broken H1 seminorm over visible parts plus h^(-1/2)-weighted interface
    jumps of a per-patch velocity field."""
    n_q = _norm_points(hierarchy, order)
    total = 0.0
    for i, patch in enumerate(hierarchy.patches):
        vspace = patch.spaces.velocity
        for e in hierarchy.active_elements(i):
            quad = hierarchy.element_quadrature(i, e, n_q)
            vg, _, G = _basis_at(hierarchy, i, vspace, quad.param, order=1,
                                 element=e)
            Dv = np.einsum("mld,lc->mcd", G, vel[i][vg])
            total += np.sum(quad.weights * np.sum(Dv ** 2, axis=(1, 2)))
    for (i, j), segs in sorted(hierarchy.interfaces.items()):
        for seg in segs:
            q = hierarchy.interface_quadrature(seg, n_q)
            jump = _segment_jump(hierarchy, seg, q, vel)
            total += np.sum(q.weights / seg.h_i * np.sum(jump ** 2, axis=1))
    return float(np.sqrt(total))


def _segment_jump(hierarchy, seg, q, vel):
    i, j = seg.patch_i, seg.patch_j
    gi, Vi, _ = _basis_at(hierarchy, i, hierarchy.patches[i].spaces.velocity,
                          q.param_i, element=seg.elem_i)
    gj, Vj, _ = _basis_at(hierarchy, j, hierarchy.patches[j].spaces.velocity,
                          q.param_j, element=seg.elem_j)
    return Vi @ vel[i][gi] - Vj @ vel[j][gj]


def _pressure_values(hierarchy, stab, i, e, params, phys, pres):
    cfg = AssemblyConfig(stabilize=stab is not None)
    pp, pg, P = _pressure_trace(hierarchy, stab or Stabilization({}, {}, True),
                                cfg, i, e, params, phys)
    return P @ pres[pp][pg]


def pressure_norm(hierarchy, pres, stab=None, order=None):
    """Broken L2 norm plus h^(1/2)-weighted interface jumps of a per-patch
    pressure field; with ``stab`` the stabilized field is evaluated."""
    n_q = _norm_points(hierarchy, order)
    total = 0.0
    for i in range(len(hierarchy.patches)):
        for e in hierarchy.active_elements(i):
            quad = hierarchy.element_quadrature(i, e, n_q)
            p = _pressure_values(hierarchy, stab, i, e, quad.param, quad.phys, pres)
            total += np.sum(quad.weights * p ** 2)
    for (i, j), segs in sorted(hierarchy.interfaces.items()):
        for seg in segs:
            q = hierarchy.interface_quadrature(seg, n_q)
            pi = _pressure_values(hierarchy, stab, i, seg.elem_i, q.param_i,
                                  q.phys, pres)
            pj = _pressure_values(hierarchy, stab, j, seg.elem_j, q.param_j,
                                  q.phys, pres)
            total += np.sum(q.weights * seg.h_i * (pi - pj) ** 2)
    return float(np.sqrt(total))


def interface_pressure_jump(hierarchy, pres, stab=None, order=None):
    """Sum over interfaces of the h^(1/2)-weighted L2 norm of the pressure
    jump, the quantity tracked by the pressure-jump experiment."""
    n_q = _norm_points(hierarchy, order)
    total = 0.0
    for (i, j), segs in sorted(hierarchy.interfaces.items()):
        acc = 0.0
        for seg in segs:
            q = hierarchy.interface_quadrature(seg, n_q)
            pi = _pressure_values(hierarchy, stab, i, seg.elem_i, q.param_i,
                                  q.phys, pres)
            pj = _pressure_values(hierarchy, stab, j, seg.elem_j, q.param_j,
                                  q.phys, pres)
            acc += np.sum(q.weights * seg.h_i * (pi - pj) ** 2)
        total += np.sqrt(acc)
    return float(total)


def errors_vs_exact(hierarchy, vel, pres, exact, stab=None, order=None):
    """Mesh-dependent and L2 errors of a discrete solution vs exact fields.

    ``exact`` needs keys u, grad_u, p. Returns a dict with the broken-energy
    velocity error, the broken-L2 pressure error (both with their interface
    jump parts), and plain L2 errors.
    """
    n_q = _norm_points(hierarchy, order)
    e_grad = e_l2u = e_p = e_l2p = 0.0
    for i, patch in enumerate(hierarchy.patches):
        vspace = patch.spaces.velocity
        for e in hierarchy.active_elements(i):
            quad = hierarchy.element_quadrature(i, e, n_q)
            w = quad.weights
            vg, V, G = _basis_at(hierarchy, i, vspace, quad.param, order=1,
                                 element=e)
            uh = V @ vel[i][vg]
            Duh = np.einsum("mld,lc->mcd", G, vel[i][vg])
            ph = _pressure_values(hierarchy, stab, i, e, quad.param, quad.phys,
                                  pres)
            e_grad += np.sum(w * np.sum((exact["grad_u"](quad.phys) - Duh) ** 2,
                                        axis=(1, 2)))
            e_l2u += np.sum(w * np.sum((exact["u"](quad.phys) - uh) ** 2, axis=1))
            dp = exact["p"](quad.phys) - ph
            e_p += np.sum(w * dp ** 2)
            e_l2p += np.sum(w * dp ** 2)
    e_jump_u = e_jump_p = 0.0
    for (i, j), segs in sorted(hierarchy.interfaces.items()):
        for seg in segs:
            q = hierarchy.interface_quadrature(seg, n_q)
            jump = _segment_jump(hierarchy, seg, q, vel)   # exact u is continuous
            e_jump_u += np.sum(q.weights / seg.h_i * np.sum(jump ** 2, axis=1))
            pi = _pressure_values(hierarchy, stab, i, seg.elem_i, q.param_i,
                                  q.phys, pres)
            pj = _pressure_values(hierarchy, stab, j, seg.elem_j, q.param_j,
                                  q.phys, pres)
            e_jump_p += np.sum(q.weights * seg.h_i * (pi - pj) ** 2)
    return {
        "energy_u": float(np.sqrt(e_grad + e_jump_u)),
        "pressure": float(np.sqrt(e_p + e_jump_p)),
        "l2_u": float(np.sqrt(e_l2u)),
        "l2_p": float(np.sqrt(e_l2p)),
    }
