import numpy as np
import pytest

from ovstokes.cases import gen_two_patch
from ovstokes.geometry import PatchHierarchy
from ovstokes.quadrature import tensor_rule
from ovstokes.splines import TensorSplineSpace
from ovstokes.stabilization import (
    ExtrapolationFrame,
    FrameConditioningError,
    Stabilization,
    StabilizationError,
    averaged_flux,
    build_local_projection,
    build_stabilization,
    eval_stab_pressure,
    eval_stab_velocity_flux,
    poly_basis,
)

RNG = np.random.default_rng(42)


def dense_eval(space: TensorSplineSpace, params, order=0):
    """Dense basis matrix (and parametric gradients) at scattered points."""
    A = np.zeros((len(params), space.n_basis_total))
    G = np.zeros((len(params), space.n_basis_total, 2))
    for row, (gidx, vals, grads) in enumerate(space.eval_fields_at_points(params, order=order)):
        A[row, gidx] = vals
        if order:
            G[row, gidx] = grads
    return (A, G) if order else A


def fit_spline(space, geom, fn):
    """Least-squares spline coefficients matching fn on a dense physical grid."""
    g = np.linspace(0.0, 1.0, 41)
    params = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    A = dense_eval(space, params)
    b = fn(geom(params))
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


def random_points_in_element(hier, i, e, m=7, seed=0):
    rng = np.random.default_rng(seed)
    (u0, v0), (u1, v1) = hier.patches[i].mesh.element_rect(e)
    params = rng.uniform([u0, v0], [u1, v1], size=(m, 2))
    return hier.patches[i].geometry(params), params


@pytest.fixture(scope="module")
def bad_case():
    case = gen_two_patch(1e-6, solution=None)
    stab = build_stabilization(case.hierarchy)
    return case.hierarchy, stab


@pytest.fixture(scope="module")
def good_case():
    case = gen_two_patch(0.3, solution=None)
    stab = build_stabilization(case.hierarchy)
    return case.hierarchy, stab


class TestProjection:
    def test_constant_donor_reproduced(self, bad_case):
        hier, stab = bad_case
        (i, e), op = next(iter(stab.pressure.items()))
        coeffs = np.ones(hier.patches[op.donor_patch].spaces.pressure.n_basis_total)
        x, _ = random_points_in_element(hier, i, e)
        vals = op.values(x) @ coeffs[op.dof_indices]
        np.testing.assert_allclose(vals, 1.0, atol=1e-12)

    def test_single_piece_is_interpolated(self, bad_case):
        # a spline restricted to one element is a single polynomial, so the
        # projection must reproduce it exactly on the donor cell
        hier, stab = bad_case
        (_, _), op = next(iter(stab.pressure.items()))
        space = hier.patches[op.donor_patch].spaces.pressure
        coeffs = RNG.normal(size=space.n_basis_total)
        x, params = random_points_in_element(hier, op.donor_patch, op.donor_element, seed=3)
        native = dense_eval(space, params) @ coeffs
        stabbed = op.values(x) @ coeffs[op.dof_indices]
        np.testing.assert_allclose(stabbed, native, atol=1e-12)

    def test_residual_orthogonality(self, bad_case):
        # quadrature inner-product oracle: residual on K' orthogonal to Q_k
        hier, stab = bad_case
        (_, _), op = next(iter(stab.pressure.items()))
        patch = hier.patches[op.donor_patch]
        space = patch.spaces.pressure
        coeffs = RNG.normal(size=space.n_basis_total)
        rect = patch.mesh.element_rect(op.donor_element)
        param, w = tensor_rule(rect, 8)
        phys, _, det = patch.geometry.eval_with_jacobian(param)
        w = w * det
        spline = dense_eval(space, param) @ coeffs
        poly = op.values(phys) @ coeffs[op.dof_indices]
        B = poly_basis(op.frame, op.degree, phys)
        ips = B.T @ (w * (spline - poly))
        assert np.abs(ips).max() < 1e-10

    def test_monomial_reproduction(self, bad_case):
        hier, stab = bad_case
        for ops, field in ((stab.pressure, "pressure"), (stab.velocity, "velocity")):
            (i, e), op = next(iter(ops.items()))
            patch = hier.patches[op.donor_patch]
            space = getattr(patch.spaces, field)
            k = space.degrees[0]
            x, _ = random_points_in_element(hier, i, e, seed=5)
            for a in range(k + 1):
                for b in range(k + 1):
                    coeffs = fit_spline(space, patch.geometry,
                                        lambda p: p[:, 0] ** a * p[:, 1] ** b)
                    got = op.values(x) @ coeffs[op.dof_indices]
                    np.testing.assert_allclose(got, x[:, 0] ** a * x[:, 1] ** b,
                                               atol=1e-11)

    def test_gradient_reproduction(self, bad_case):
        hier, stab = bad_case
        (i, e), op = next(iter(stab.velocity.items()))
        patch = hier.patches[op.donor_patch]
        space = patch.spaces.velocity
        coeffs = fit_spline(space, patch.geometry, lambda p: p[:, 0] ** 2 * p[:, 1])
        x, _ = random_points_in_element(hier, i, e, seed=6)
        grads = np.einsum("mld,l->md", op.gradients(x), coeffs[op.dof_indices])
        want = np.stack([2 * x[:, 0] * x[:, 1], x[:, 0] ** 2], -1)
        np.testing.assert_allclose(grads, want, atol=1e-10)

    def test_reported_conditioning_is_bounded(self, bad_case):
        _, stab = bad_case
        for op in list(stab.pressure.values()) + list(stab.velocity.values()):
            assert op.cond < 1e6

    def test_visible_part_variant(self):
        # the projection-domain switch: restricted to K' ∩ Ω it must still
        # reproduce polynomials (weights there are a valid inner product)
        case = gen_two_patch(1e-3, solution=None)
        hier = case.hierarchy
        stab = build_stabilization(hier, full_cell=False)
        (i, e), op = next(iter(stab.pressure.items()))
        patch = hier.patches[op.donor_patch]
        coeffs = fit_spline(patch.spaces.pressure, patch.geometry,
                            lambda p: p[:, 0] * p[:, 1])
        x, _ = random_points_in_element(hier, i, e, seed=7)
        got = op.values(x) @ coeffs[op.dof_indices]
        np.testing.assert_allclose(got, x[:, 0] * x[:, 1], atol=1e-10)

    def test_degenerate_frame_rejected(self):
        with pytest.raises(FrameConditioningError):
            ExtrapolationFrame(np.zeros(2), np.array([1.0, 0.0]))

    def test_frame_from_element_scale_positive(self, bad_case):
        hier, stab = bad_case
        for op in stab.pressure.values():
            assert np.all(op.frame.scale > 0)


class TestEvaluation:
    def test_good_element_native(self, bad_case):
        hier, stab = bad_case
        good = next(e for e in hier.active_elements(0) if hier.classes[0, e].good)
        space = hier.patches[0].spaces.pressure
        coeffs = [RNG.normal(size=space.n_basis_total),
                  RNG.normal(size=hier.patches[1].spaces.pressure.n_basis_total)]
        x, params = random_points_in_element(hier, 0, good, seed=8)
        got = eval_stab_pressure(hier, stab, 0, good, x, coeffs)
        want = dense_eval(space, params) @ coeffs[0]
        np.testing.assert_allclose(got, want, atol=1e-11)

    def test_bad_element_dense_oracle(self, bad_case):
        # independent projection oracle: plain monomial frame basis, separate
        # quadrature, dense solve
        hier, stab = bad_case
        (i, e), op = next(iter(stab.pressure.items()))
        patch = hier.patches[op.donor_patch]
        space = patch.spaces.pressure
        k = space.degrees[0]
        coeffs = [RNG.normal(size=space.n_basis_total),
                  RNG.normal(size=hier.patches[1].spaces.pressure.n_basis_total)]
        rect = patch.mesh.element_rect(op.donor_element)
        param, w = tensor_rule(rect, 9)
        phys, _, det = patch.geometry.eval_with_jacobian(param)
        w = w * det
        loc = (phys - op.frame.center) / op.frame.scale

        def monos(pts):
            return np.stack([pts[:, 0] ** a * pts[:, 1] ** b
                             for b in range(k + 1) for a in range(k + 1)], -1)

        V = monos(loc)
        target = dense_eval(space, param) @ coeffs[op.donor_patch]
        c_poly = np.linalg.solve(V.T @ (w[:, None] * V), V.T @ (w * target))
        x, _ = random_points_in_element(hier, i, e, seed=9)
        want = monos((x - op.frame.center) / op.frame.scale) @ c_poly
        got = eval_stab_pressure(hier, stab, i, e, x, coeffs)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_locality(self, bad_case):
        hier, stab = bad_case
        (i, e), op = next(iter(stab.pressure.items()))
        n = hier.patches[op.donor_patch].spaces.pressure.n_basis_total
        coeffs = [RNG.normal(size=n),
                  RNG.normal(size=hier.patches[1].spaces.pressure.n_basis_total)]
        x, _ = random_points_in_element(hier, i, e, seed=10)
        base = eval_stab_pressure(hier, stab, i, e, x, coeffs)
        perturbed = [c.copy() for c in coeffs]
        outside = np.setdiff1d(np.arange(n), op.dof_indices)
        perturbed[op.donor_patch][outside] += RNG.normal(size=len(outside))
        again = eval_stab_pressure(hier, stab, i, e, x, perturbed)
        np.testing.assert_array_equal(base, again)

    def test_linearity(self, bad_case):
        hier, stab = bad_case
        (i, e), _ = next(iter(stab.pressure.items()))
        n0 = hier.patches[0].spaces.pressure.n_basis_total
        n1 = hier.patches[1].spaces.pressure.n_basis_total
        c1 = [RNG.normal(size=n0), RNG.normal(size=n1)]
        c2 = [RNG.normal(size=n0), RNG.normal(size=n1)]
        x, _ = random_points_in_element(hier, i, e, seed=11)
        lin = 2.0 * eval_stab_pressure(hier, stab, i, e, x, c1) \
            - 3.0 * eval_stab_pressure(hier, stab, i, e, x, c2)
        combo = eval_stab_pressure(hier, stab, i, e, x,
                                   [2.0 * a - 3.0 * b for a, b in zip(c1, c2)])
        np.testing.assert_allclose(lin, combo, atol=1e-12)

    def test_no_bad_elements_identity(self, good_case):
        hier, stab = good_case
        assert not stab.pressure and not stab.velocity
        e = hier.active_elements(0)[10]
        space = hier.patches[0].spaces.pressure
        coeffs = [RNG.normal(size=space.n_basis_total),
                  RNG.normal(size=hier.patches[1].spaces.pressure.n_basis_total)]
        x, params = random_points_in_element(hier, 0, e, seed=12)
        got = eval_stab_pressure(hier, stab, 0, e, x, coeffs)
        np.testing.assert_allclose(got, dense_eval(space, params) @ coeffs[0], atol=1e-11)


def velocity_coeff_list(hier, rng):
    return [rng.normal(size=(p.spaces.velocity.n_basis_total, 2)) for p in hier.patches]


class TestFlux:
    def test_both_good_matches_unstabilized(self, good_case):
        hier, stab = good_case
        empty = Stabilization({}, {}, True)
        coeffs = velocity_coeff_list(hier, np.random.default_rng(1))
        seg = hier.interfaces[1, 0][0]
        q = hier.interface_quadrature(seg, 3)
        for side in ("i", "j"):
            a = eval_stab_velocity_flux(hier, stab, seg, side, q.phys, coeffs)
            b = eval_stab_velocity_flux(hier, empty, seg, side, q.phys, coeffs)
            np.testing.assert_allclose(a, b, atol=1e-13)

    def test_linear_field_exact_on_bad_owners(self, bad_case):
        hier, stab = bad_case
        coeffs = [fit_spline_vec(hier, i) for i in range(2)]
        checked = 0
        for seg in hier.interfaces[1, 0]:
            if hier.classes[seg.patch_j, seg.elem_j].good:
                continue
            q = hier.interface_quadrature(seg, 3)
            flux = eval_stab_velocity_flux(hier, stab, seg, "j", q.phys, coeffs)
            # u = (y, x): Du = [[0,1],[1,0]], so Du n = (n_y, n_x)
            np.testing.assert_allclose(flux, q.normal[:, ::-1], atol=1e-9)
            checked += 1
        assert checked > 0

    def test_averaged_flux_t1_is_top_side(self, bad_case):
        hier, stab = bad_case
        coeffs = velocity_coeff_list(hier, np.random.default_rng(2))
        seg = hier.interfaces[1, 0][0]
        q = hier.interface_quadrature(seg, 2)
        top = eval_stab_velocity_flux(hier, stab, seg, "i", q.phys, coeffs)
        np.testing.assert_array_equal(
            averaged_flux(hier, stab, seg, 1.0, q.phys, coeffs), top)

    def test_averaged_flux_hand_combination(self, bad_case):
        hier, stab = bad_case
        coeffs = velocity_coeff_list(hier, np.random.default_rng(3))
        seg = hier.interfaces[1, 0][0]
        q = hier.interface_quadrature(seg, 2)
        fi = eval_stab_velocity_flux(hier, stab, seg, "i", q.phys, coeffs)
        fj = eval_stab_velocity_flux(hier, stab, seg, "j", q.phys, coeffs)
        got = averaged_flux(hier, stab, seg, 0.5, q.phys, coeffs)
        np.testing.assert_allclose(got, 0.5 * fi + 0.5 * fj, atol=1e-13)

    def test_invalid_t_rejected(self, bad_case):
        hier, stab = bad_case
        seg = hier.interfaces[1, 0][0]
        with pytest.raises(StabilizationError):
            averaged_flux(hier, stab, seg, 0.7, seg.midpoint, [None, None])

    def test_invalid_side_rejected(self, bad_case):
        hier, stab = bad_case
        seg = hier.interfaces[1, 0][0]
        with pytest.raises(StabilizationError):
            eval_stab_velocity_flux(hier, stab, seg, "k", seg.midpoint, [None, None])


def fit_spline_vec(hier, i):
    patch = hier.patches[i]
    c1 = fit_spline(patch.spaces.velocity, patch.geometry, lambda p: p[:, 1])
    c2 = fit_spline(patch.spaces.velocity, patch.geometry, lambda p: p[:, 0])
    return np.stack([c1, c2], -1)


def stability_ratio(eps):
    """Operator-norm constant sup_v ||h^(1/2) D R^v(v) n||_(Γ∩K) / ||Dv||_(K'∩Ω),
    maximized over base-mesh owner elements K, by a generalized eigenproblem on
    the donor's supported coefficients (constants quotiented out). The base
    patch has an identity geometry map, so parametric gradients are physical."""
    case = gen_two_patch(eps, solution=None)
    hier = case.hierarchy
    stab = build_stabilization(hier)
    space = hier.patches[0].spaces.velocity
    acc = {}
    for seg in hier.interfaces[1, 0]:
        q = hier.interface_quadrature(seg, 4)
        e = seg.elem_j
        op = stab.velocity.get((0, e))
        if op is None:
            dofs = np.asarray(space.element_basis_indices(e))
            _, G = dense_eval(space, q.param_j, order=1)
            g = G[:, dofs, :]
        else:
            dofs = op.dof_indices
            g = op.gradients(q.phys)
        a = np.einsum("mld,md->ml", g, q.normal)
        A = np.einsum("ml,m,mk->lk", a, q.weights * seg.h_i, a)
        if e in acc:
            acc[e] = (dofs, acc[e][1] + A)
        else:
            acc[e] = (dofs, A)
    worst = 0.0
    for e, (dofs, A) in acc.items():
        op = stab.velocity.get((0, e))
        donor = op.donor_element if op else e
        quad = hier.element_quadrature(0, donor, 5)
        _, G = dense_eval(space, quad.param, order=1)
        g = G[:, dofs, :]
        B = np.einsum("mld,m,mkd->lk", g, quad.weights, g)
        lam, V = np.linalg.eigh(B)
        keep = lam > 1e-10 * lam[-1]
        W = V[:, keep] / np.sqrt(lam[keep])
        worst = max(worst, float(np.sqrt(np.linalg.eigvalsh(W.T @ A @ W)[-1])))
    return worst


class TestStabilityRatio:
    def test_flux_bounded_as_eps_vanishes(self):
        base = stability_ratio(0.3)
        for eps in (1e-3, 1e-6, 1e-9, 1e-12):
            assert stability_ratio(eps) <= 10.0 * base
