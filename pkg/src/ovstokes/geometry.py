"""Union of hierarchically overlapping patches: visible regions, cut-cell and
interface quadrature, element classification, and good-neighbor search.

Patches are ordered by hierarchy level: a higher-indexed patch hides the parts
of lower patches it covers. All clipping happens on physical-space polygons
(curved boundaries are chord-approximated to a tolerance), using shapely for
the boolean operations; areas, triangulations, and quadrature rules are built
on the resulting polygons directly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import unary_union
from shapely.prepared import prep

from .quadrature import gauss_01, polygon_rule, tensor_rule
from .splines import GeometryMap, TaylorHoodPair

__all__ = [
    "Patch",
    "PatchHierarchy",
    "VisibleRegion",
    "InterfaceSegment",
    "ElementClass",
    "OverlapDiagnostics",
    "classify",
    "GeometryError",
    "ConfigurationError",
]


class GeometryError(ValueError):
    pass


class ConfigurationError(GeometryError):
    pass


def classify(ratio: float, theta: float) -> bool:
    """True (good) iff the visible-area ratio is >= theta; boundary case is good."""
    if not 0.0 < theta <= 1.0:
        raise GeometryError(f"theta must be in (0, 1], got {theta}")
    return ratio >= theta


@dataclass(frozen=True)
class Patch:
    """One level of the hierarchy: a geometry map plus its Taylor-Hood pair."""

    geometry: GeometryMap
    spaces: TaylorHoodPair
    label: str = ""

    @property
    def mesh(self):
        """The shared Bezier mesh (pressure space carries the breakpoints)."""
        return self.spaces.pressure

    def refine_dyadic(self) -> "Patch":
        return Patch(self.geometry.refine_dyadic(), self.spaces.refine_dyadic(), self.label)


@dataclass(frozen=True)
class Footprint:
    """Chord-sampled image of the patch boundary, traversed counterclockwise.

    ``params[a]`` is the parametric preimage of ``vertices[a]``; between
    consecutive vertices the parametric preimage is the straight segment
    joining them (exact whenever the physical edge piece is straight).
    """

    vertices: np.ndarray  # (M, 2) physical
    params: np.ndarray    # (M, 2) parametric
    polygon: Polygon


@dataclass
class VisibleRegion:
    """Visible part of one active element: K ∩ Ω_i as physical polygons."""

    patch: int
    element: int
    polygons: list[np.ndarray]
    area: float
    element_area: float
    uncut: bool

    @property
    def ratio(self) -> float:
        return 1.0 if self.uncut else self.area / self.element_area


@dataclass(frozen=True)
class ElementClass:
    ratio: float
    good: bool
    neighbor: tuple[int, int] | None  # (patch, element) for bad elements


@dataclass(frozen=True)
class InterfaceSegment:
    """Straight piece of Γ_ij inside exactly one element of each mesh.

    ``patch_j``/``elem_j`` are None for pieces of the outer domain boundary
    (no lower patch behind them). Parametric endpoints refer to mesh i; the
    traversal direction keeps the patch interior on the left, so the outward
    normal is the tangent rotated clockwise by 90 degrees.
    """

    patch_i: int
    elem_i: int
    patch_j: int | None
    elem_j: int | None
    p0: np.ndarray
    p1: np.ndarray
    xi0: np.ndarray
    xi1: np.ndarray
    h_i: float
    h_j: float | None

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p0 + self.p1)


@dataclass(frozen=True)
class OverlapDiagnostics:
    delta: np.ndarray  # delta[i, j] = 1 iff Γ_ij nonempty, j < i
    eta: np.ndarray    # eta[i, j] = 1 iff Ω_i ∩ Ω_j* has positive area, j < i
    n_gamma_down: int
    n_gamma_up: int
    n_gamma: int
    n_overlap: int
    union_area: float
    visible_area: float


@dataclass(frozen=True)
class ElementQuad:
    """Physical quadrature over the visible part of one element."""

    param: np.ndarray    # (m, 2) parametric points
    phys: np.ndarray     # (m, 2) physical points
    weights: np.ndarray  # (m,) physical weights
    jac: np.ndarray      # (m, 2, 2) geometry Jacobians at the points


@dataclass(frozen=True)
class InterfaceQuad:
    """Physical line quadrature on one interface segment."""

    phys: np.ndarray     # (m, 2)
    weights: np.ndarray  # (m,) arc-length weights
    normal: np.ndarray   # (m, 2) outward normal of patch i
    param_i: np.ndarray  # (m, 2) parametric points on patch i
    param_j: np.ndarray | None  # (m, 2) parametric points on patch j


class PatchHierarchy:
    """Immutable union-domain structure built once from an ordered patch list.

    Construction clips every element of every patch against the union of the
    higher patches' footprints, meshes the visible interfaces, classifies
    elements as good/bad against the area-ratio threshold ``theta``, and finds
    a good donor element for every bad one.
    """

    def __init__(self, patches, theta=0.1, chord_tol=None, neighbor_c=2.0,
                 size_ratio_warn=16.0):
        if not patches:
            raise GeometryError("hierarchy needs at least one patch")
        self.patches: list[Patch] = list(patches)
        self.theta = float(theta)
        if not 0.0 < self.theta <= 1.0:
            raise GeometryError(f"theta must be in (0, 1], got {theta}")
        self.neighbor_c = float(neighbor_c)

        ctrl = np.concatenate([p.geometry.control.reshape(-1, 2) for p in self.patches])
        self.diameter = float(np.linalg.norm(ctrl.max(axis=0) - ctrl.min(axis=0)))
        self.chord_tol = chord_tol if chord_tol is not None else 1e-6 * self.diameter
        self.snap = 1e-12 * self.diameter
        self._probe_delta = 1e-9 * self.diameter
        self._quad_cache: dict = {}
        self._poly_cache: dict = {}

        self.footprints = [self._build_footprint(p) for p in self.patches]
        n = len(self.patches)
        self._upper = [unary_union([self.footprints[l].polygon for l in range(i + 1, n)])
                       for i in range(n)]
        self.visible: dict[tuple[int, int], VisibleRegion] = {}
        self._clip_all()
        self.interfaces: dict[tuple[int, int], list[InterfaceSegment]] = {}
        self.boundary: dict[int, list[InterfaceSegment]] = {i: [] for i in range(n)}
        for i in range(n):
            self._build_patch_interfaces(i)
        self.classes: dict[tuple[int, int], ElementClass] = {}
        self._classify_all()
        self.diagnostics = self._diagnostics()
        self._check_size_compatibility(size_ratio_warn)

    # ------------------------------------------------------------------ build

    def _build_footprint(self, patch: Patch) -> Footprint:
        geom = patch.geometry
        bu = patch.mesh.kv_u.breakpoints
        bv = patch.mesh.kv_v.breakpoints
        # parametric boundary corners, counterclockwise, with breakpoints inserted
        path = []
        path += [(u, 0.0) for u in bu[:-1]]
        path += [(1.0, v) for v in bv[:-1]]
        path += [(u, 1.0) for u in bu[::-1][:-1]]
        path += [(0.0, v) for v in bv[::-1][:-1]]
        params = []
        for a in range(len(path)):
            xi0 = np.array(path[a])
            xi1 = np.array(path[(a + 1) % len(path)])
            params.append(xi0)
            params.extend(self._chord_refine(geom, xi0, xi1))
        params = np.array(params)
        verts = geom(params)
        poly = Polygon(verts)
        if not poly.is_valid or poly.area <= 0:
            raise GeometryError(f"patch '{patch.label}' footprint is degenerate or self-intersecting")
        if not poly.exterior.is_ccw:
            raise GeometryError(f"patch '{patch.label}' footprint is negatively oriented")
        return Footprint(verts, params, poly)

    def _chord_refine(self, geom, xi0, xi1, depth=0):
        """Interior parametric sample points so chords track the mapped edge."""
        mid = 0.5 * (xi0 + xi1)
        pts = geom(np.array([xi0, mid, xi1]))
        dev = np.linalg.norm(pts[1] - 0.5 * (pts[0] + pts[2]))
        if dev <= self.chord_tol or depth >= 20:
            return []
        return (self._chord_refine(geom, xi0, mid, depth + 1) + [mid]
                + self._chord_refine(geom, mid, xi1, depth + 1))

    def element_polygon(self, i: int, e: int) -> np.ndarray:
        """Chord-sampled physical polygon of the full element (not its visible part)."""
        key = (i, e)
        if key not in self._poly_cache:
            patch = self.patches[i]
            (u0, v0), (u1, v1) = patch.mesh.element_rect(e)
            corners = [np.array([u0, v0]), np.array([u1, v0]),
                       np.array([u1, v1]), np.array([u0, v1])]
            params = []
            for a in range(4):
                params.append(corners[a])
                params.extend(self._chord_refine(patch.geometry, corners[a], corners[(a + 1) % 4]))
            self._poly_cache[key] = patch.geometry(np.array(params))
        return self._poly_cache[key]

    def element_diameter(self, i: int, e: int) -> float:
        """Full-element diameter (never the visible-part diameter)."""
        v = self.element_polygon(i, e)
        d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(-1)
        return float(np.sqrt(d2.max()))

    def _clip_all(self):
        for i, patch in enumerate(self.patches):
            upper = self._upper[i]
            prepared = prep(upper) if not upper.is_empty else None
            for e in range(patch.mesh.n_elements_total):
                verts = self.element_polygon(i, e)
                poly = Polygon(verts)
                area_k = poly.area
                if prepared is None or not prepared.intersects(poly):
                    self.visible[i, e] = VisibleRegion(i, e, [verts], area_k, area_k, True)
                    continue
                diff = poly.difference(upper)
                if diff.is_empty or diff.area / area_k <= 1e-14:
                    continue  # fully hidden: inactive
                polys = []
                for g in getattr(diff, "geoms", [diff]):
                    if g.area / area_k <= 1e-14:
                        continue
                    polys.extend(self._hole_free(g, area_k))
                area = diff.area
                uncut = area / area_k > 1.0 - 1e-12
                self.visible[i, e] = VisibleRegion(i, e, polys, area, area_k, uncut)

    def _hole_free(self, g, area_ref, depth=0):
        """Simple polygons covering g; polygons with holes are split through
        the hole so each piece's boundary is a single ring."""
        if not list(g.interiors):
            ring = np.asarray(g.exterior.coords[:-1], dtype=float)
            return [ring if g.exterior.is_ccw else ring[::-1]]
        if depth > 8:
            raise GeometryError("could not decompose a multiply-connected visible region")
        from shapely.geometry import box
        cx = g.interiors[0].centroid.x
        minx, miny, maxx, maxy = g.bounds
        pad = 1.0 + self.snap
        out = []
        for part in (box(minx - pad, miny - pad, cx, maxy + pad),
                     box(cx, miny - pad, maxx + pad, maxy + pad)):
            piece = g.intersection(part)
            for sub in getattr(piece, "geoms", [piece]):
                if sub.geom_type == "Polygon" and sub.area / area_ref > 1e-14:
                    out.extend(self._hole_free(sub, area_ref, depth + 1))
        return out

    def is_active(self, i: int, e: int) -> bool:
        return (i, e) in self.visible

    def active_elements(self, i: int):
        return [e for (p, e) in self.visible if p == i]

    # -------------------------------------------------------------- interfaces

    def _build_patch_interfaces(self, i: int):
        fp = self.footprints[i]
        upper = self._upper[i]
        lower_rings = [(l, self.footprints[l].polygon.exterior) for l in range(i)]
        m = len(fp.vertices)
        for a in range(m):
            p0, p1 = fp.vertices[a], fp.vertices[(a + 1) % m]
            xi0, xi1 = fp.params[a], fp.params[(a + 1) % m]
            seglen = np.linalg.norm(p1 - p0)
            if seglen <= self.snap:
                continue
            line = LineString([p0, p1])
            vis = line if upper.is_empty else line.difference(upper)
            if vis.is_empty:
                continue
            for sub in getattr(vis, "geoms", [vis]):
                q = np.asarray(sub.coords, dtype=float)
                s0 = self._fraction_along(p0, p1, q[0])
                s1 = self._fraction_along(p0, p1, q[-1])
                if (s1 - s0) * seglen <= self.snap:
                    continue
                # split where the piece crosses a lower patch boundary
                cuts = {s0, s1}
                for _, ring in lower_rings:
                    hit = sub.intersection(ring)
                    if hit.is_empty:
                        continue
                    for g in getattr(hit, "geoms", [hit]):
                        for c in np.asarray(g.coords, dtype=float):
                            s = self._fraction_along(p0, p1, c)
                            if s0 + self.snap / seglen < s < s1 - self.snap / seglen:
                                cuts.add(s)
                breaks = sorted(cuts)
                for sa, sb in zip(breaks[:-1], breaks[1:]):
                    if (sb - sa) * seglen <= self.snap:
                        continue
                    self._emit_fragment(i, p0, p1, xi0, xi1, sa, sb)

    def _fraction_along(self, p0, p1, q):
        d = p1 - p0
        return float(np.clip(np.dot(q - p0, d) / np.dot(d, d), 0.0, 1.0))

    def _outward_normal(self, i: int, params, dxi):
        """Unit outward normals at parametric boundary points with edge direction dxi."""
        _, J = self.patches[i].geometry.jacobian(params)
        tau = np.einsum("mcd,d->mc", J, dxi)
        speed = np.linalg.norm(tau, axis=1)
        n = np.stack([tau[:, 1], -tau[:, 0]], axis=-1) / speed[:, None]
        return n, speed

    def _emit_fragment(self, i, p0, p1, xi0, xi1, sa, sb):
        """Locate owners for one visible boundary fragment and register segments."""
        geom_i = self.patches[i].geometry
        dxi = xi1 - xi0
        xia, xib = xi0 + sa * dxi, xi0 + sb * dxi
        pa, pb = geom_i(np.array([xia, xib]))
        smid = 0.5 * (sa + sb)
        xim = xi0 + smid * dxi
        (nvec,), _ = self._outward_normal(i, xim[None], dxi)
        mid = geom_i(xim[None])[0]
        probe = Point(mid + self._probe_delta * nvec)
        j = None
        for l in range(i - 1, -1, -1):
            if self.footprints[l].polygon.covers(probe):
                j = l
                break
        elem_i = self.patches[i].mesh.element_of(xim)
        h_i = self.element_diameter(i, elem_i)
        if j is None:
            # outer domain boundary piece
            seg = InterfaceSegment(i, elem_i, None, None, pa, pb, xia, xib, h_i, None)
            self.boundary[i].append(seg)
            return
        # split at mesh lines of patch j, then assign the j-side owner element
        for ta, tb in self._split_at_mesh_lines(i, j, xia, xib):
            xa, xb = xi0 + (sa + ta * (sb - sa)) * dxi, xi0 + (sa + tb * (sb - sa)) * dxi
            qa, qb = geom_i(np.array([xa, xb]))
            if np.linalg.norm(qb - qa) <= self.snap:
                continue
            xmid = 0.5 * (xa + xb)
            pm = geom_i(xmid[None])[0]
            e_i = self.patches[i].mesh.element_of(xmid)
            e_j = self._owner_element(j, pm, nvec)
            seg = InterfaceSegment(i, e_i, j, e_j, qa, qb, xa, xb,
                                   self.element_diameter(i, e_i),
                                   self.element_diameter(j, e_j))
            self.interfaces.setdefault((i, j), []).append(seg)

    def _split_at_mesh_lines(self, i, j, xia, xib):
        """Fractions t in [0,1] splitting the fragment at mesh lines of patch j."""
        geom_i = self.patches[i].geometry
        geom_j = self.patches[j].geometry
        mesh_j = self.patches[j].mesh

        def pull(t, guess=None):
            x = geom_i((xia + t * (xib - xia))[None])[0]
            return geom_j.inverse(x, xi0=guess)

        za, zb = pull(0.0), pull(1.0)
        cuts = set()
        for d, kv in enumerate((mesh_j.kv_u, mesh_j.kv_v)):
            lo, hi = min(za[d], zb[d]), max(za[d], zb[d])
            for z in kv.breakpoints[1:-1]:
                if lo + 1e-13 < z < hi - 1e-13:
                    # bisect on the pulled-back coordinate (monotone on short pieces)
                    ta, tb = 0.0, 1.0
                    fa = za[d] - z
                    guess = za.copy()
                    for _ in range(60):
                        tm = 0.5 * (ta + tb)
                        guess = pull(tm, guess)
                        fm = guess[d] - z
                        if abs(fm) < 1e-14 or tb - ta < 1e-14:
                            break
                        if (fa < 0) == (fm < 0):
                            ta, fa = tm, fm
                        else:
                            tb = tm
                    cuts.add(0.5 * (ta + tb))
        breaks = sorted({0.0, 1.0} | cuts)
        return list(zip(breaks[:-1], breaks[1:]))

    def _owner_element(self, j, point, n_i):
        """Element of mesh j containing ``point``; mesh-line ambiguity is
        resolved toward the visible side (offset along the patch-i normal).

        The ambiguity window must stay below the thinnest sliver the method
        supports (interface offsets of ~1e-12 of an element): a segment that
        lies strictly inside a cut element -- however close to its mesh line --
        is owned by that element, because its visible band is what touches the
        interface. Only segments on the line up to inversion noise fall back
        to the probe.
        """
        mesh = self.patches[j].mesh
        xi = self.patches[j].geometry.inverse(point)
        ambiguous = False
        for d, kv in enumerate((mesh.kv_u, mesh.kv_v)):
            inner = kv.breakpoints[1:-1]
            if inner.size and np.min(np.abs(inner - xi[d])) < 5e-14:
                ambiguous = True
        if ambiguous:
            xi = self.patches[j].geometry.inverse(point + self._probe_delta * n_i, xi0=xi)
        return mesh.element_of(xi)

    # ----------------------------------------------------------- classification

    def _classify_all(self):
        for (i, e), region in self.visible.items():
            good = classify(region.ratio, self.theta)
            self.classes[i, e] = ElementClass(region.ratio, good, None)
        for (i, e), cls in list(self.classes.items()):
            if not cls.good:
                nb = self.find_good_neighbor(i, e)
                self.classes[i, e] = ElementClass(cls.ratio, False, nb)

    def find_good_neighbor(self, i: int, e: int) -> tuple[int, int]:
        """First good element within C·h of K, scanning patches k = i..N;
        C is doubled (up to 5 times) whenever the scan comes up empty.

        Among candidates at equal cell distance (all edge/corner neighbors are
        at distance zero) the donor closest to the visible part of K is taken,
        measured centroid to centroid; this keeps the polynomial extension from
        being evaluated farther from its donor than necessary. Exact ties fall
        back to the lowest element index, so the pick is deterministic.
        """
        h_k = self.element_diameter(i, e)
        poly = Polygon(self.element_polygon(i, e))
        vis_c = np.zeros(2)
        area = 0.0
        for p in self.visible[i, e].polygons:
            sp = Polygon(p)
            vis_c += sp.area * np.asarray(sp.centroid.coords[0])
            area += sp.area
        vis_c /= area
        bb = np.array(poly.bounds)
        c = self.neighbor_c
        for _ in range(6):
            radius = c * h_k
            for k in range(i, len(self.patches)):
                cands = []
                for e2 in self.active_elements(k):
                    if (k, e2) == (i, e) or not self.classes[k, e2].good:
                        continue
                    v = self.element_polygon(k, e2)
                    gap = np.maximum(0.0, np.maximum(v.min(0) - bb[2:], bb[:2] - v.max(0)))
                    if np.hypot(*gap) > radius + self.snap:
                        continue
                    cand = Polygon(v)
                    d = poly.distance(cand)
                    if d <= radius + self.snap:
                        dc = float(np.hypot(*(np.asarray(cand.centroid.coords[0])
                                              - vis_c)))
                        cands.append((d, dc, e2))
                if cands:
                    return k, min(cands)[2]
            c *= 2.0
        raise ConfigurationError(
            f"no good neighbor for element {e} of patch {i} after relaxing C to {c}")

    # ------------------------------------------------------------- diagnostics

    def visible_region_polygon(self, i: int):
        """Shapely polygon of the whole visible part Ω_i."""
        fp = self.footprints[i].polygon
        return fp if self._upper[i].is_empty else fp.difference(self._upper[i])

    def _diagnostics(self) -> OverlapDiagnostics:
        n = len(self.patches)
        delta = np.zeros((n, n), dtype=int)
        eta = np.zeros((n, n), dtype=int)
        for (i, j), segs in self.interfaces.items():
            if segs:
                delta[i, j] = 1
        area_tol = (self.snap) ** 2
        for i in range(1, n):
            omega_i = self.visible_region_polygon(i)
            for j in range(i):
                if omega_i.intersection(self.footprints[j].polygon).area > area_tol:
                    eta[i, j] = 1
        down = int(delta.sum(axis=1).max()) if n > 1 else 0
        up = int(delta.sum(axis=0).max()) if n > 1 else 0
        n_over = int(eta.sum(axis=1).max()) if n > 1 else 0
        union_area = unary_union([f.polygon for f in self.footprints]).area
        vis_area = sum(r.area for r in self.visible.values())
        return OverlapDiagnostics(delta, eta, down, up, max(down, up), n_over,
                                  float(union_area), float(vis_area))

    def _check_size_compatibility(self, ratio_warn):
        worst = 0.0
        for segs in self.interfaces.values():
            for s in segs:
                worst = max(worst, s.h_i / s.h_j, s.h_j / s.h_i)
        if worst > ratio_warn:
            warnings.warn(
                f"interface meshes have incompatible sizes (ratio {worst:.2f} > {ratio_warn})",
                RuntimeWarning)

    # -------------------------------------------------------------- quadrature

    def element_quadrature(self, i: int, e: int, order: int) -> ElementQuad:
        """Quadrature over the visible part of element e of patch i.

        Uncut elements get the parametric tensor Gauss rule scaled by the
        Jacobian determinant; cut elements are triangulated in physical space
        and the points pulled back through the geometry map.
        """
        key = (i, e, order)
        if key in self._quad_cache:
            return self._quad_cache[key]
        region = self.visible.get((i, e))
        if region is None:
            raise GeometryError(f"element {e} of patch {i} is inactive")
        patch = self.patches[i]
        rect = patch.mesh.element_rect(e)
        if region.uncut:
            param, wts = tensor_rule(rect, order)
            phys, jac, det = patch.geometry.eval_with_jacobian(param)
            quad = ElementQuad(param, phys, wts * det, jac)
        else:
            drop = 1e-14 * region.element_area
            pts, wts = [], []
            for poly in region.polygons:
                p, w = polygon_rule(poly, order, drop_area=drop)
                pts.append(p)
                wts.append(w)
            phys = np.concatenate(pts)
            wts = np.concatenate(wts)
            center = 0.5 * (np.asarray(rect[0]) + np.asarray(rect[1]))
            param = np.empty_like(phys)
            guess = center
            for a, x in enumerate(phys):
                guess = patch.geometry.inverse(x, xi0=guess, bounds=rect)
                param[a] = guess
            _, jac = patch.geometry.jacobian(param)
            quad = ElementQuad(param, phys, wts, jac)
        self._quad_cache[key] = quad
        return quad

    def interface_quadrature(self, seg: InterfaceSegment, order: int) -> InterfaceQuad:
        """Gauss rule along one interface (or boundary) segment with outward
        normals of patch i and parametric pullbacks on both sides."""
        s, w = gauss_01(order)
        dxi = seg.xi1 - seg.xi0
        param_i = seg.xi0[None] + s[:, None] * dxi[None]
        normal, speed = self._outward_normal(seg.patch_i, param_i, dxi)
        phys = self.patches[seg.patch_i].geometry(param_i)
        weights = w * speed
        param_j = None
        if seg.patch_j is not None:
            geom_j = self.patches[seg.patch_j].geometry
            rect = self.patches[seg.patch_j].mesh.element_rect(seg.elem_j)
            param_j = np.empty_like(phys)
            guess = 0.5 * (np.asarray(rect[0]) + np.asarray(rect[1]))
            for a, x in enumerate(phys):
                guess = geom_j.inverse(x, xi0=guess, bounds=rect)
                param_j[a] = guess
        return InterfaceQuad(phys, weights, normal, param_i, param_j)

    # ------------------------------------------------------------------- misc

    def refine_dyadic(self) -> "PatchHierarchy":
        return PatchHierarchy([p.refine_dyadic() for p in self.patches],
                              theta=self.theta, chord_tol=self.chord_tol,
                              neighbor_c=self.neighbor_c)

    def dump(self, path):
        """Line-oriented JSON dump of mesh, visible polygons, interfaces, and
        classification for external tooling."""
        with open(path, "w") as f:
            for i, patch in enumerate(self.patches):
                rec = {"type": "patch", "index": i, "label": patch.label,
                       "degree": patch.spaces.degree,
                       "n_elements": list(patch.mesh.n_elements)}
                f.write(json.dumps(rec) + "\n")
                f.write(json.dumps({"type": "footprint", "patch": i,
                                    "vertices": self.footprints[i].vertices.tolist()}) + "\n")
            for (i, e), region in sorted(self.visible.items()):
                cls = self.classes[i, e]
                rec = {"type": "element", "patch": i, "element": e,
                       "ratio": region.ratio, "good": cls.good,
                       "neighbor": list(cls.neighbor) if cls.neighbor else None,
                       "polygons": [p.tolist() for p in region.polygons]}
                f.write(json.dumps(rec) + "\n")
            for (i, j), segs in sorted(self.interfaces.items()):
                for s in segs:
                    rec = {"type": "interface", "patch_i": i, "patch_j": j,
                           "elem_i": s.elem_i, "elem_j": s.elem_j,
                           "p0": s.p0.tolist(), "p1": s.p1.tolist()}
                    f.write(json.dumps(rec) + "\n")
            for i, segs in sorted(self.boundary.items()):
                for s in segs:
                    rec = {"type": "boundary", "patch": i, "elem": s.elem_i,
                           "p0": s.p0.tolist(), "p1": s.p1.tolist()}
                    f.write(json.dumps(rec) + "\n")
            diag = self.diagnostics
            f.write(json.dumps({"type": "diagnostics",
                                "n_gamma_down": diag.n_gamma_down,
                                "n_gamma_up": diag.n_gamma_up,
                                "n_gamma": diag.n_gamma,
                                "n_overlap": diag.n_overlap,
                                "union_area": diag.union_area,
                                "visible_area": diag.visible_area}) + "\n")
