import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import Point, Polygon
from shapely.ops import unary_union

from ovstokes.geometry import (
    ConfigurationError,
    GeometryError,
    Patch,
    PatchHierarchy,
    classify,
)
from ovstokes.quadrature import ear_clip, polygon_area, polygon_rule, triangle_rule
from ovstokes.splines import GeometryMap, KnotVector, TaylorHoodPair, TensorSplineSpace


# ----------------------------------------------------------------- oracles

def sutherland_hodgman(subject, clip):
    """Clip a polygon against a convex CCW polygon (test oracle only)."""
    out = [np.asarray(p, float) for p in subject]
    clip = np.asarray(clip, float)
    for a in range(len(clip)):
        e0, e1 = clip[a], clip[(a + 1) % len(clip)]
        inp, out = out, []
        if not inp:
            break
        prev = inp[-1]

        def inside(p):
            return np.cross(e1 - e0, p - e0) >= 0

        def intersect(p, q):
            d1, d2 = np.cross(e1 - e0, p - e0), np.cross(e1 - e0, q - e0)
            return p + (q - p) * (d1 / (d1 - d2))

        for cur in inp:
            if inside(cur):
                if not inside(prev):
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif inside(prev):
                out.append(intersect(prev, cur))
            prev = cur
    return out


def greens_monomial(verts, a, b):
    """Exact integral of x^a y^b over a polygon via the boundary integral
    of x^(a+1)/(a+1) * y^b dy (Green's theorem, Gauss-exact per edge)."""
    v = np.asarray(verts, float)
    t, w = np.polynomial.legendre.leggauss(12)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    total = 0.0
    for i in range(len(v)):
        p, q = v[i], v[(i + 1) % len(v)]
        x = p[0] + t * (q[0] - p[0])
        y = p[1] + t * (q[1] - p[1])
        total += np.sum(w * x ** (a + 1) / (a + 1) * y ** b) * (q[1] - p[1])
    return total


def rect_patch(x0, y0, x1, y1, n=1, degree=2):
    gm = GeometryMap.bilinear((x0, y0), (x1, y0), (x0, y1), (x1, y1))
    return Patch(gm, TaylorHoodPair.uniform(degree, n, n), f"rect[{x0},{x1}]x[{y0},{y1}]")


def unit_patch(n=4, degree=2):
    return Patch(GeometryMap.unit_square(), TaylorHoodPair.uniform(degree, n, n), "base")


def trapezoid_patch(eps, n=5, degree=2):
    """Bilinear quadrilateral whose slanted sides cut the 8x8 base mesh with
    worst visible-area ratio exactly eps."""
    h = 0.125
    c00 = (0.25 + 1.875 * h * eps, 0.25)
    c10 = (0.75 - 1.875 * h * eps, 0.25)
    c01 = (0.25 + 0.875 * h * eps, 0.75)
    c11 = (0.75 - 0.875 * h * eps, 0.75)
    gm = GeometryMap.bilinear(c00, c10, c01, c11)
    return Patch(gm, TaylorHoodPair.uniform(degree, n, n), "trapezoid")


# ------------------------------------------------------------- quadrature lib

class TestQuadratureLib:
    def test_triangle_rule_area_and_moments(self):
        tri = [(0.2, 0.1), (0.9, 0.3), (0.4, 0.8)]
        pts, wts = triangle_rule(*tri, 5)
        assert np.all(wts > 0)
        assert abs(wts.sum() - abs(polygon_area(tri))) < 1e-14
        for a, b in [(1, 0), (2, 1), (3, 2)]:
            got = np.sum(wts * pts[:, 0] ** a * pts[:, 1] ** b)
            assert abs(got - greens_monomial(tri, a, b)) < 1e-13

    def test_ear_clip_preserves_area(self):
        poly = [(0, 0), (1, 0), (1, 0.4), (0.5, 0.2), (0.3, 0.9), (0, 0.7)]
        tris = ear_clip(poly)
        total = sum(abs(polygon_area(t)) for t in tris)
        assert abs(total - abs(polygon_area(poly))) < 1e-13

    def test_polygon_rule_green_oracle(self):
        poly = [(0.1, 0.0), (0.8, 0.1), (0.7, 0.6), (0.35, 0.45), (0.05, 0.5)]
        pts, wts = polygon_rule(poly, 6)
        got = np.sum(wts * pts[:, 0] ** 2 * pts[:, 1])
        assert abs(got - greens_monomial(poly, 2, 1)) < 1e-12


# --------------------------------------------------------------- footprints

class TestFootprints:
    def test_unit_square_four_vertices(self):
        hier = PatchHierarchy([unit_patch(n=1)])
        assert len(hier.footprints[0].vertices) == 4
        assert abs(hier.footprints[0].polygon.area - 1.0) < 1e-14

    def test_trapezoid_vertex_count(self):
        # straight edges: only mesh breakpoints appear, no chord refinement
        hier = PatchHierarchy([unit_patch(), trapezoid_patch(0.3)])
        assert len(hier.footprints[1].vertices) == 4 * 5

    def test_curved_edge_within_chord_tol(self):
        # quadratic map bending the top edge upward
        kv2 = KnotVector(2, np.array([0, 0, 0, 1, 1, 1.0]))
        kv1 = KnotVector(1, np.array([0, 0, 1, 1.0]))
        space = TensorSplineSpace(kv2, kv1)
        ctrl = np.array([[[0, 0], [0, 1.0]],
                         [[0.5, 0], [0.5, 1.4]],
                         [[1, 0], [1, 1.0]]])
        gm = GeometryMap(space, ctrl)
        patch = Patch(gm, TaylorHoodPair.uniform(2, 1, 1), "curved")
        tol = 1e-4
        hier = PatchHierarchy([patch], chord_tol=tol)
        ring = Polygon(hier.footprints[0].vertices).exterior
        # dense-sampling oracle along the curved top edge
        for u in np.linspace(0, 1, 400):
            x = gm(np.array([[u, 1.0]]))[0]
            assert ring.distance(Point(x)) < 2 * tol

    def test_degenerate_footprint_rejected(self):
        gm = GeometryMap.bilinear((0, 0), (1, 0), (1, 0), (0, 0))  # zero area
        with pytest.raises(GeometryError):
            PatchHierarchy([Patch(gm, TaylorHoodPair.uniform(2, 1, 1))])


# ------------------------------------------------------------------ clipping

class TestClipVisible:
    def test_half_covered_element(self):
        base = unit_patch(n=1)
        top = rect_patch(0.5, -0.1, 1.1, 1.1)
        hier = PatchHierarchy([base, top])
        assert abs(hier.visible[0, 0].ratio - 0.5) < 1e-12

    def test_fully_covered_inactive(self):
        base = rect_patch(0.4, 0.4, 0.6, 0.6, n=1)
        top = rect_patch(0.0, 0.0, 1.0, 1.0)
        hier = PatchHierarchy([base, top])
        assert not hier.is_active(0, 0)
        assert hier.is_active(1, 0)

    def test_trapezoid_ratios_match_clip_oracle(self):
        eps = 0.37
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(eps)])
        # CCW corners of the trapezoid straight from its geometry map
        corners = hier.patches[1].geometry(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
        mesh = hier.patches[0].mesh
        for e in hier.active_elements(0):
            (u0, v0), (u1, v1) = mesh.element_rect(e)
            K = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
            inter = sutherland_hodgman([np.array(k, float) for k in K], corners)
            covered = abs(polygon_area(inter)) if len(inter) >= 3 else 0.0
            rho_oracle = 1.0 - covered / ((u1 - u0) * (v1 - v0))
            assert abs(hier.visible[0, e].ratio - rho_oracle) < 1e-10

    def test_worst_ratio_is_epsilon(self):
        for eps in (0.3, 1e-3, 1e-12):
            hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(eps)])
            cut = [hier.visible[0, e].ratio for e in hier.active_elements(0)
                   if not hier.visible[0, e].uncut]
            # clipping noise is absolute (~1e-17 in area), so the relative
            # deviation grows as eps shrinks; 1e-3 covers the 1e-12 slivers
            assert abs(min(cut) - eps) / eps < 1e-3

    def test_area_conservation(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.42)])
        d = hier.diagnostics
        assert abs(d.visible_area - d.union_area) < 1e-8
        assert abs(d.union_area - 1.0) < 1e-12  # trapezoid is interior

    @given(st.floats(0.05, 0.9), st.floats(0.05, 0.9),
           st.floats(0.05, 0.9), st.floats(0.05, 0.9))
    @settings(max_examples=40, deadline=None)
    def test_random_rectangle_ratios(self, x0, y0, wx, wy):
        x1, y1 = min(x0 + wx, 0.98), min(y0 + wy, 0.98)
        if x1 - x0 < 0.02 or y1 - y0 < 0.02:
            return
        hier = PatchHierarchy([unit_patch(n=4), rect_patch(x0, y0, x1, y1)])
        mesh = hier.patches[0].mesh
        total = 0.0
        for e in range(mesh.n_elements_total):
            (u0, v0), (u1, v1) = mesh.element_rect(e)
            ov = max(0.0, min(u1, x1) - max(u0, x0)) * max(0.0, min(v1, y1) - max(v0, y0))
            rho = 1.0 - ov / ((u1 - u0) * (v1 - v0))
            if rho < 1e-14:
                assert not hier.is_active(0, e)
            else:
                assert abs(hier.visible[0, e].ratio - rho) < 1e-9
                total += hier.visible[0, e].area
        assert abs(total + (x1 - x0) * (y1 - y0) - 1.0) < 1e-9


# ------------------------------------------------------------ classification

class TestClassify:
    def test_trivial_cases(self):
        assert classify(1.0, 0.1)
        assert not classify(0.05, 0.1)

    def test_boundary_case_is_good(self):
        assert classify(0.1, 0.1)

    def test_theta_domain(self):
        with pytest.raises(GeometryError):
            classify(0.5, 0.0)

    def test_no_bad_elements_at_large_eps(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.3)], theta=0.1)
        assert all(c.good for c in hier.classes.values())

    def test_bad_elements_at_tiny_eps(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(1e-6)], theta=0.1)
        bad = [(i, e) for (i, e), c in hier.classes.items() if not c.good]
        assert bad and all(i == 0 for i, _ in bad)
        for key in bad:
            assert hier.classes[key].neighbor is not None


class TestGoodNeighbor:
    def test_edge_adjacent_same_mesh(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(1e-6)], theta=0.1)
        for (i, e), c in hier.classes.items():
            if c.good:
                continue
            k, e2 = c.neighbor
            assert k == i == 0  # same-mesh branch fires first
            assert hier.classes[k, e2].good
            d = Polygon(hier.element_polygon(i, e)).distance(
                Polygon(hier.element_polygon(k, e2)))
            assert d <= 2 * hier.element_diameter(i, e) + 1e-12

    def test_donor_from_higher_mesh_when_own_mesh_all_bad(self):
        # middle patch almost entirely hidden by the top patch: every visible
        # element of the middle mesh is bad, so the donor must come from above
        base = unit_patch(n=4)
        mid = Patch(GeometryMap.bilinear((0.4, 0.4), (0.6, 0.4), (0.4, 0.6), (0.6, 0.6)),
                    TaylorHoodPair.uniform(2, 2, 2), "mid")
        top = rect_patch(0.402, 0.38, 0.63, 0.63, n=2)
        hier = PatchHierarchy([base, mid, top], theta=0.1)
        bad_mid = [(e, hier.classes[1, e]) for e in hier.active_elements(1)
                   if not hier.classes[1, e].good]
        assert bad_mid, "construction should leave bad elements in the middle mesh"
        for _, c in bad_mid:
            assert c.neighbor[0] == 2

    def test_tiebreak_lowest_index_and_stable(self):
        picks = []
        for _ in range(2):
            hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(1e-6)], theta=0.1)
            picks.append(sorted((key, c.neighbor) for key, c in hier.classes.items()
                                if not c.good))
        assert picks[0] == picks[1]
        # exhaustive oracle: among good elements at minimal cell distance, the
        # donor closest to the visible part of K (centroid to centroid, lowest
        # index on exact ties) is chosen
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(1e-6)], theta=0.1)
        for (i, e), c in hier.classes.items():
            if c.good:
                continue
            poly = Polygon(hier.element_polygon(i, e))
            vis = unary_union([Polygon(p) for p in hier.visible[i, e].polygons])
            vc = np.asarray(vis.centroid.coords[0])
            cands = []
            for e2 in hier.active_elements(i):
                if e2 != e and hier.classes[i, e2].good:
                    cand = Polygon(hier.element_polygon(i, e2))
                    d = poly.distance(cand)
                    dc = float(np.hypot(*(np.asarray(cand.centroid.coords[0]) - vc)))
                    cands.append((d, dc, e2))
            dmin = min(c0 for c0, _, _ in cands)
            best = min((dc, e2) for c0, dc, e2 in cands if c0 <= dmin + 1e-12)[1]
            assert c.neighbor == (i, best)

    def test_unreachable_raises(self):
        # the tiny base element is cut bad by a slab whose own single element
        # is also bad (hidden by a patch starting far away), so every good
        # element lies beyond the maximally relaxed search radius
        base = rect_patch(0.0, 0.0, 0.001, 0.001, n=1)
        slab = rect_patch(0.00005, -1.0, 100.0, 1.0, n=1)
        far = rect_patch(0.2, -1.0, 101.0, 1.0, n=1)
        with pytest.raises(ConfigurationError):
            PatchHierarchy([base, slab, far], theta=0.1)


# ---------------------------------------------------------------- interfaces

class TestInterfaces:
    def test_matching_mesh_lines(self):
        base = unit_patch(n=4)
        top = rect_patch(0.25, 0.25, 0.75, 0.75, n=2)
        hier = PatchHierarchy([base, top])
        segs = hier.interfaces[1, 0]
        # each side splits into 2 pieces of length 0.25
        assert len(segs) == 8
        lengths = sorted(s.length for s in segs)
        np.testing.assert_allclose(lengths, 0.25, atol=1e-12)
        assert abs(sum(s.length for s in segs) - 2.0) < 1e-10

    def test_trapezoid_split_counts(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.3)])
        segs = hier.interfaces[1, 0]
        total = sum(s.length for s in segs)
        # arc-length oracle from the four footprint corners
        c = trapezoid_patch(0.3).geometry(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
        perim = sum(np.linalg.norm(c[(a + 1) % 4] - c[a]) for a in range(4))
        assert abs(total - perim) < 1e-10

    def test_owner_elements_contain_midpoints(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.3)])
        for segs in hier.interfaces.values():
            for s in segs:
                for patch, elem in ((s.patch_i, s.elem_i), (s.patch_j, s.elem_j)):
                    p = hier.patches[patch]
                    xi = p.geometry.inverse(s.midpoint)
                    (u0, v0), (u1, v1) = p.mesh.element_rect(elem)
                    assert u0 - 1e-10 <= xi[0] <= u1 + 1e-10
                    assert v0 - 1e-10 <= xi[1] <= v1 + 1e-10

    def test_segments_within_single_elements(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.3)])
        for segs in hier.interfaces.values():
            for s in segs:
                for t in (0.01, 0.5, 0.99):
                    x = s.p0 + t * (s.p1 - s.p0)
                    pj = hier.patches[s.patch_j]
                    rect = pj.mesh.element_rect(s.elem_j)
                    xi = pj.geometry.inverse(x)
                    assert rect[0][0] - 1e-9 <= xi[0] <= rect[1][0] + 1e-9
                    assert rect[0][1] - 1e-9 <= xi[1] <= rect[1][1] + 1e-9

    def test_horizontal_edges_align_with_base_mesh(self):
        # y = 0.25 / 0.75 lie on base mesh lines; splitting there comes only
        # from the 5-element top subdivision and base vertical lines
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.3)])
        horiz = [s for s in hier.interfaces[1, 0]
                 if abs(s.p0[1] - s.p1[1]) < 1e-14 and abs(s.p0[1] - 0.25) < 1e-14]
        assert horiz
        # owner elements on the base must be below the line y=0.25 (visible side)
        for s in horiz:
            (u0, v0), (u1, v1) = hier.patches[0].mesh.element_rect(s.elem_j)
            assert abs(v1 - 0.25) < 1e-12

    def test_interface_quadrature_normals_and_length(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.3)])
        total = 0.0
        for s in hier.interfaces[1, 0]:
            q = hier.interface_quadrature(s, 4)
            total += q.weights.sum()
            np.testing.assert_allclose(np.linalg.norm(q.normal, axis=1), 1.0, atol=1e-12)
            # outward: stepping along the normal exits the trapezoid footprint
            probe = q.phys + 1e-6 * q.normal
            for p in probe:
                assert not hier.footprints[1].polygon.contains(Point(p))
            # pullbacks map back to the same physical points
            back_i = hier.patches[1].geometry(q.param_i)
            back_j = hier.patches[0].geometry(q.param_j)
            np.testing.assert_allclose(back_i, q.phys, atol=1e-9)
            np.testing.assert_allclose(back_j, q.phys, atol=1e-9)
        c = trapezoid_patch(0.3).geometry(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]))
        perim = sum(np.linalg.norm(c[(a + 1) % 4] - c[a]) for a in range(4))
        assert abs(total - perim) < 1e-10

    def test_outer_boundary_collected(self):
        hier = PatchHierarchy([unit_patch(n=4), rect_patch(0.25, 0.25, 0.75, 0.75, n=2)])
        outer = sum(s.length for s in hier.boundary[0])
        assert abs(outer - 4.0) < 1e-10
        assert not hier.boundary[1]  # top patch boundary is entirely interface


# ----------------------------------------------------------- cut-cell quadrature

class TestElementQuadrature:
    def test_uncut_tensor_rule(self):
        hier = PatchHierarchy([unit_patch(n=4)])
        q = hier.element_quadrature(0, 5, 3)
        assert len(q.weights) == 9
        assert abs(q.weights.sum() - 1.0 / 16) < 1e-14

    def test_half_element_weight_sum(self):
        hier = PatchHierarchy([unit_patch(n=1), rect_patch(0.5, -0.1, 1.1, 1.1)])
        q = hier.element_quadrature(0, 0, 4)
        assert abs(q.weights.sum() - 0.5) < 1e-12
        assert np.all(q.weights > 0)

    def test_cut_cell_green_oracle(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.41)])
        mesh = hier.patches[0].mesh
        for e in hier.active_elements(0):
            region = hier.visible[0, e]
            if region.uncut:
                continue
            q = hier.element_quadrature(0, e, 6)
            got = np.sum(q.weights * q.phys[:, 0] ** 2 * q.phys[:, 1])
            want = sum(greens_monomial(p, 2, 1) for p in region.polygons)
            assert abs(got - want) < 1e-12

    def test_param_phys_consistency(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.41)])
        for e in hier.active_elements(1):
            q = hier.element_quadrature(1, e, 3)
            np.testing.assert_allclose(hier.patches[1].geometry(q.param), q.phys, atol=1e-9)

    def test_weights_sum_to_visible_area(self):
        hier = PatchHierarchy([unit_patch(n=8), trapezoid_patch(0.41)])
        for (i, e), region in hier.visible.items():
            q = hier.element_quadrature(i, e, 4)
            assert abs(q.weights.sum() - region.area) < 1e-10 * max(region.area, 1e-6)


# --------------------------------------------------------------- diagnostics

def square_patch(x0, y0, size, n=3):
    return rect_patch(x0, y0, x0 + size, y0 + size, n=n)


class TestDiagnostics:
    def test_three_squares_and_bar(self):
        # three disjoint squares crossed by one bar on top: the bar overlaps
        # all three below it, each square sees only the bar above it
        patches = [
            square_patch(0.0, 0.0, 0.3),
            square_patch(0.35, 0.0, 0.3),
            square_patch(0.7, 0.0, 0.3),
            rect_patch(0.1, 0.1, 0.9, 0.2, n=4),
        ]
        d = PatchHierarchy(patches).diagnostics
        assert d.n_gamma_down == 3
        assert d.n_gamma_up == 1
        assert d.n_gamma == 3
        assert d.n_overlap == 3
        np.testing.assert_array_equal(d.delta[3, :3], [1, 1, 1])
        np.testing.assert_array_equal(d.delta[2, :2], [0, 0])

    def test_two_disjoint_patches(self):
        d = PatchHierarchy([square_patch(0, 0, 0.3), square_patch(0.6, 0.6, 0.3)]).diagnostics
        assert d.n_gamma == 0 and d.n_overlap == 0

    def test_five_patch_chain_enumeration(self):
        # strips [0.1m, 0.1m+0.6] x [0,1]: every pair overlaps
        patches = [rect_patch(0.1 * m, 0.0, 0.1 * m + 0.6, 1.0, n=5) for m in range(5)]
        hier = PatchHierarchy(patches)
        d = hier.diagnostics
        # enumeration oracle on the interval layout: visible part of strip i is
        # [0.1i, 0.1(i+1)] (the top strip keeps [0.4, 1.0])
        eta_oracle = np.zeros((5, 5), dtype=int)
        for i in range(5):
            vis = (0.1 * i, 0.1 * (i + 1) if i < 4 else 1.0)
            for j in range(i):
                lo = max(vis[0], 0.1 * j)
                hi = min(vis[1], 0.1 * j + 0.6)
                eta_oracle[i, j] = 1 if hi - lo > 1e-12 else 0
        np.testing.assert_array_equal(d.eta, eta_oracle)
        assert d.n_overlap == 4
        # each visible boundary only touches the visible part directly below it
        assert d.n_gamma_down == 1 and d.n_gamma_up == 1 and d.n_gamma == 1

    def test_area_conservation_multilayer(self):
        patches = [rect_patch(0.1 * m, 0.0, 0.1 * m + 0.6, 1.0, n=5) for m in range(5)]
        d = PatchHierarchy(patches).diagnostics
        assert abs(d.visible_area - d.union_area) < 1e-8
        assert abs(d.union_area - 1.0) < 1e-10


class TestDump:
    def test_dump_roundtrip(self, tmp_path):
        import json
        hier = PatchHierarchy([unit_patch(n=4), rect_patch(0.25, 0.25, 0.75, 0.75, n=2)])
        path = tmp_path / "geom.jsonl"
        hier.dump(path)
        types = [json.loads(line)["type"] for line in path.read_text().splitlines()]
        for t in ("patch", "footprint", "element", "interface", "boundary", "diagnostics"):
            assert t in types


class TestRefinement:
    def test_refined_hierarchy_keeps_union(self):
        hier = PatchHierarchy([unit_patch(n=4), trapezoid_patch(0.3, n=3)])
        fine = hier.refine_dyadic()
        assert fine.patches[0].mesh.n_elements == (8, 8)
        assert abs(fine.diagnostics.union_area - hier.diagnostics.union_area) < 1e-12
        assert abs(fine.diagnostics.visible_area - hier.diagnostics.visible_area) < 1e-8
