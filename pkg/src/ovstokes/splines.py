"""B-spline spaces, geometry maps, and Taylor-Hood pairs on the unit square.

Univariate bases follow the standard per-span recurrence (values and
derivatives computed together); tensor-product spaces and geometry maps are
built on top of two univariate knot vectors. Degree-1 maps cover the
affine/bilinear patches used by the experiment generators; nothing here is
special-cased for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "KnotVector",
    "TensorSplineSpace",
    "GeometryMap",
    "TaylorHoodPair",
    "find_span",
    "eval_basis",
    "eval_basis_ders",
]


class SplineError(ValueError):
    pass


class SingularGeometryError(SplineError):
    pass


@dataclass(frozen=True)
class KnotVector:
    """An open knot vector on [0, 1] for degree-``degree`` splines."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        kn = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", kn)
        k = self.degree
        if k < 1:
            raise SplineError("degree must be >= 1")
        if kn.ndim != 1 or len(kn) < 2 * (k + 1):
            raise SplineError("knot vector too short")
        if np.any(np.diff(kn) < 0):
            raise SplineError("knots must be non-decreasing")
        if not (np.all(kn[: k + 1] == kn[0]) and np.all(kn[-(k + 1):] == kn[-1])):
            raise SplineError("knot vector is not open (first/last knot must repeat degree+1 times)")
        if kn[k + 1] == kn[0] or kn[-(k + 2)] == kn[-1]:
            raise SplineError("end knots repeated more than degree+1 times")
        bp, mult = np.unique(kn, return_counts=True)
        if np.any(mult[1:-1] > k):
            raise SplineError("internal knot multiplicity exceeds degree")

    @classmethod
    def from_breakpoints(cls, degree, breakpoints, smoothness):
        """Open knot vector with the given internal smoothness at every breakpoint."""
        bp = np.asarray(breakpoints, dtype=float)
        if smoothness < 0 or smoothness > degree - 1:
            raise SplineError("smoothness must be in [0, degree-1]")
        mult = degree - smoothness
        knots = [bp[0]] * (degree + 1)
        for z in bp[1:-1]:
            knots += [z] * mult
        knots += [bp[-1]] * (degree + 1)
        return cls(degree, np.array(knots))

    @classmethod
    def uniform(cls, degree, n_elements, smoothness=None):
        if smoothness is None:
            smoothness = degree - 1
        return cls.from_breakpoints(degree, np.linspace(0.0, 1.0, n_elements + 1), smoothness)

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @cached_property
    def multiplicities(self) -> np.ndarray:
        return np.unique(self.knots, return_counts=True)[1]

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    @cached_property
    def element_spans(self) -> np.ndarray:
        """Knot-span index of each breakpoint interval."""
        mids = 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])
        return np.array([find_span(self, x) for x in mids])

    def element_of(self, x: float) -> int:
        """Breakpoint-interval index containing x (right-closed at 1)."""
        i = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return min(max(i, 0), self.n_elements - 1)

    def refine_dyadic(self):
        """Split every breakpoint interval at its midpoint.

        Returns the refined knot vector and the coefficient transfer matrix T
        (shape new_n x old_n) such that the refined spline with coefficients
        T @ c evaluates identically to the original with coefficients c.
        """
        kv, T = self, np.eye(self.n_basis)
        for z in 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:]):
            kv, Ti = kv.insert_knot(z)
            T = Ti @ T
        return kv, T

    def insert_knot(self, x: float):
        """Single-knot Boehm insertion; returns (new knot vector, transfer matrix)."""
        k = self.degree
        kn = self.knots
        span = find_span(self, x)
        new_knots = np.insert(kn, span + 1, x)
        n_new = self.n_basis + 1
        T = np.zeros((n_new, self.n_basis))
        for i in range(n_new):
            if i <= span - k:
                T[i, i] = 1.0
            elif i > span:
                T[i, i - 1] = 1.0
            else:
                denom = kn[i + k] - kn[i]
                a = (x - kn[i]) / denom if denom > 0 else 0.0
                T[i, i] = a
                T[i, i - 1] = 1.0 - a
        return KnotVector(k, new_knots), T


def find_span(kv: KnotVector, x: float) -> int:
    """Index i with knots[i] <= x < knots[i+1]; x == 1 maps to the last nonempty span."""
    if x < kv.knots[0] or x > kv.knots[-1]:
        raise SplineError(f"parameter {x} outside [{kv.knots[0]}, {kv.knots[-1]}]")
    k, kn = kv.degree, kv.knots
    n = kv.n_basis
    if x >= kn[n]:
        return n - 1
    return int(np.searchsorted(kn, x, side="right")) - 1


def _spans_of(kv: KnotVector, xs) -> np.ndarray:
    """Vectorized find_span with clamping to valid spans."""
    s = np.searchsorted(kv.knots, xs, side="right") - 1
    return np.clip(s, kv.degree, kv.n_basis - 1)


def eval_basis(kv: KnotVector, x: float) -> tuple[int, np.ndarray]:
    """Nonzero basis values at x: returns (span, values of B_{span-k..span})."""
    span, ders = eval_basis_ders(kv, x, 0)
    return span, ders[0]


def eval_basis_ders(kv: KnotVector, x: float, order: int,
                    span: int | None = None) -> tuple[int, np.ndarray]:
    """Values and derivatives up to ``order`` of the k+1 nonzero basis functions at x.

    Returns (span, ders) with ders[r, j] the r-th derivative of B_{span-k+j}.
    Standard inverted-triangle scheme (The NURBS Book, A2.3). A ``span`` may be
    forced to evaluate a specific polynomial piece at its closure (one-sided
    limits on element boundaries).
    """
    k, kn = kv.degree, kv.knots
    if order > k:
        raise SplineError(f"derivative order {order} exceeds degree {k}")
    if span is None:
        span = find_span(kv, x)
    ndu = np.zeros((k + 1, k + 1))
    left = np.zeros(k + 1)
    right = np.zeros(k + 1)
    ndu[0, 0] = 1.0
    for j in range(1, k + 1):
        left[j] = x - kn[span + 1 - j]
        right[j] = kn[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r] if ndu[j, r] != 0.0 else 0.0
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((order + 1, k + 1))
    ders[0] = ndu[:, k]
    a = np.zeros((2, k + 1))
    for r in range(k + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for rr in range(1, order + 1):
            d = 0.0
            rk, pk = r - rr, k - rr
            if r >= rr:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk] if ndu[pk + 1, rk] != 0.0 else 0.0
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = rr - 1 if r - 1 <= pk else k - r
            for j in range(j1, j2 + 1):
                a[s2, j] = ((a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                            if ndu[pk + 1, rk + j] != 0.0 else 0.0)
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, rr] = -a[s1, rr - 1] / ndu[pk + 1, r] if ndu[pk + 1, r] != 0.0 else 0.0
                d += a[s2, rr] * ndu[r, pk]
            ders[rr, r] = d
            s1, s2 = s2, s1
    fac = float(k)
    for rr in range(1, order + 1):
        ders[rr] *= fac
        fac *= k - rr
    return span, ders


class _LocalKnots:
    """Minimal knot-vector view for span-normalized evaluation."""

    __slots__ = ("degree", "knots")

    def __init__(self, degree, knots):
        self.degree = degree
        self.knots = knots


def _span_ders_cached(kv: KnotVector, span: int, xs, order: int) -> np.ndarray:
    """Values/derivatives of the k+1 nonzero bases at many points with a forced
    span, shape (m, order+1, k+1).

    Evaluation happens in span-normalized coordinates on the local knot window
    knots[span-k .. span+k+1], so elements with the same normalized window
    (every interior element of a uniform mesh) share cached per-point results;
    derivatives are rescaled by the span width afterwards. Keys round the
    normalized coordinate at 1e-14, far below any tolerance used downstream.
    """
    k, kn = kv.degree, kv.knots
    k0, k1 = kn[span], kn[span + 1]
    h = k1 - k0
    local = (kn[span - k: span + k + 2] - k0) / h
    sig = (round(float(v), 12) for v in local)
    base = (tuple(sig), order)
    try:
        cache = kv._span_cache
    except AttributeError:
        cache = {}
        object.__setattr__(kv, "_span_cache", cache)
    shim = _LocalKnots(k, local)
    xs = np.asarray(xs, dtype=float)
    t = (xs - k0) / h
    out = np.empty((len(xs), order + 1, k + 1))
    if k == 1:
        # hat functions in closed form; no cache needed (or wanted: arbitrary
        # geometry-map evaluation points would bloat it)
        out[:, 0, 0] = 1.0 - t
        out[:, 0, 1] = t
        if order >= 1:
            out[:, 1, 0] = -1.0 / h
            out[:, 1, 1] = 1.0 / h
        return out
    for m, tm in enumerate(t):
        key = (base, round(float(tm), 14))
        d = cache.get(key)
        if d is None:
            _, d = eval_basis_ders(shim, float(tm), order, span=k)
            cache[key] = d
        out[m] = d
    for r in range(1, order + 1):
        out[:, r] *= h ** -r
    return out


@dataclass(frozen=True)
class TensorSplineSpace:
    """Bivariate tensor-product spline space with its Bezier mesh."""

    kv_u: KnotVector
    kv_v: KnotVector

    @property
    def degrees(self):
        return (self.kv_u.degree, self.kv_v.degree)

    @property
    def n_basis(self):
        return (self.kv_u.n_basis, self.kv_v.n_basis)

    @property
    def n_basis_total(self) -> int:
        return self.kv_u.n_basis * self.kv_v.n_basis

    @property
    def n_elements(self):
        return (self.kv_u.n_elements, self.kv_v.n_elements)

    @property
    def n_elements_total(self) -> int:
        return self.kv_u.n_elements * self.kv_v.n_elements

    def element_index(self, eu: int, ev: int) -> int:
        return ev * self.kv_u.n_elements + eu

    def element_multi_index(self, e: int) -> tuple[int, int]:
        nu = self.kv_u.n_elements
        return e % nu, e // nu

    def element_rect(self, e: int):
        """Parametric rectangle ((u0, v0), (u1, v1)) of element e."""
        eu, ev = self.element_multi_index(e)
        bu, bv = self.kv_u.breakpoints, self.kv_v.breakpoints
        return (bu[eu], bv[ev]), (bu[eu + 1], bv[ev + 1])

    def element_of(self, xi) -> int:
        return self.element_index(self.kv_u.element_of(xi[0]), self.kv_v.element_of(xi[1]))

    def global_index(self, iu, iv):
        return iv * self.kv_u.n_basis + iu

    def element_basis_indices(self, e: int) -> np.ndarray:
        """Global indices of the (ku+1)(kv+1) basis functions supported on element e."""
        eu, ev = self.element_multi_index(e)
        su = self.kv_u.element_spans[eu]
        sv = self.kv_v.element_spans[ev]
        iu = np.arange(su - self.kv_u.degree, su + 1)
        iv = np.arange(sv - self.kv_v.degree, sv + 1)
        return (iv[:, None] * self.kv_u.n_basis + iu[None, :]).ravel()

    def basis_support_elements(self, iu: int, iv: int) -> list[int]:
        """Element indices inside the support of basis function (iu, iv)."""
        out = []
        for kv, i in ((self.kv_u, iu), (self.kv_v, iv)):
            lo, hi = kv.knots[i], kv.knots[i + kv.degree + 1]
            bp = kv.breakpoints
            e0 = int(np.searchsorted(bp, lo, side="right")) - 1
            e1 = int(np.searchsorted(bp, hi, side="left")) - 1
            out.append(range(max(e0, 0), min(e1, kv.n_elements - 1) + 1))
        eus, evs = out
        return [self.element_index(eu, ev) for ev in evs for eu in eus]

    def support_extension(self, e: int) -> set[int]:
        """Elements overlapped by supports of the basis functions active on e."""
        eu, ev = self.element_multi_index(e)
        su = self.kv_u.element_spans[eu]
        sv = self.kv_v.element_spans[ev]
        ext = set()
        for iv in range(sv - self.kv_v.degree, sv + 1):
            for iu in range(su - self.kv_u.degree, su + 1):
                ext.update(self.basis_support_elements(iu, iv))
        return ext

    def eval_basis_grid(self, us, vs, order=1):
        """Tensor evaluation on a grid us x vs.

        Returns (idx_u, idx_v, Du, Dv) where Du[r, j, a] is the r-th derivative of
        the j-th nonzero u-basis at us[a] (likewise Dv); all points must lie in a
        single knot span per direction.
        """
        out = []
        for kv, pts in ((self.kv_u, us), (self.kv_v, vs)):
            spans, vals = [], []
            for x in pts:
                s, d = eval_basis_ders(kv, x, order)
                spans.append(s)
                vals.append(d)
            if len(set(spans)) != 1:
                raise SplineError("grid points cross knot spans")
            idx = np.arange(spans[0] - kv.degree, spans[0] + 1)
            out.append((idx, np.stack(vals, axis=-1)))
        (iu, Du), (iv, Dv) = out
        return iu, iv, Du, Dv

    def eval_fields_at_points(self, pts, order=1):
        """Per-point nonzero basis data for scattered parametric points.

        Returns a list of (global_indices, vals, grads) per point, where vals has
        shape (nloc,) and grads (nloc, 2) (parametric derivatives), nloc =
        (ku+1)(kv+1).
        """
        res = []
        for xi in np.atleast_2d(pts):
            su, du = eval_basis_ders(self.kv_u, xi[0], min(order, self.kv_u.degree))
            sv, dv = eval_basis_ders(self.kv_v, xi[1], min(order, self.kv_v.degree))
            iu = np.arange(su - self.kv_u.degree, su + 1)
            iv = np.arange(sv - self.kv_v.degree, sv + 1)
            gidx = (iv[:, None] * self.kv_u.n_basis + iu[None, :]).ravel()
            vals = (dv[0][:, None] * du[0][None, :]).ravel()
            if order >= 1:
                gx = (dv[0][:, None] * du[1][None, :]).ravel()
                gy = (dv[1][:, None] * du[0][None, :]).ravel()
                grads = np.stack([gx, gy], axis=-1)
            else:
                grads = None
            res.append((gidx, vals, grads))
        return res

    def eval_element_basis(self, e, pts, order=1):
        """Basis data of one element's polynomial pieces at points on its closure.

        Like :meth:`eval_fields_at_points` but with the knot spans forced to
        element ``e``, so points on the element boundary evaluate the one-sided
        limit from inside the element. Returns (gidx, vals (m, nloc),
        grads (m, nloc, 2) or None).
        """
        pts = np.atleast_2d(pts)
        eu, ev = self.element_multi_index(e)
        su = self.kv_u.element_spans[eu]
        sv = self.kv_v.element_spans[ev]
        iu = np.arange(su - self.kv_u.degree, su + 1)
        iv = np.arange(sv - self.kv_v.degree, sv + 1)
        gidx = (iv[:, None] * self.kv_u.n_basis + iu[None, :]).ravel()
        m = len(pts)
        du = _span_ders_cached(self.kv_u, su, pts[:, 0],
                               min(order, self.kv_u.degree))
        dv = _span_ders_cached(self.kv_v, sv, pts[:, 1],
                               min(order, self.kv_v.degree))
        vals = (dv[:, 0, :, None] * du[:, 0, None, :]).reshape(m, -1)
        if not order:
            return gidx, vals, None
        gx = (dv[:, 0, :, None] * du[:, 1, None, :]).reshape(m, -1)
        gy = (dv[:, 1, :, None] * du[:, 0, None, :]).reshape(m, -1)
        return gidx, vals, np.stack([gx, gy], axis=-1)

    def refine_dyadic(self):
        """Refined space plus per-direction transfer matrices (Tu, Tv)."""
        ku, Tu = self.kv_u.refine_dyadic()
        kv, Tv = self.kv_v.refine_dyadic()
        return TensorSplineSpace(ku, kv), Tu, Tv


@dataclass(frozen=True)
class GeometryMap:
    """Spline map F: [0,1]^2 -> R^2 given by a control net on a TensorSplineSpace."""

    space: TensorSplineSpace
    control: np.ndarray  # (n_u, n_v, 2)

    def __post_init__(self):
        c = np.asarray(self.control, dtype=float)
        nu, nv = self.space.n_basis
        if c.shape != (nu, nv, 2):
            raise SplineError(f"control net shape {c.shape} != {(nu, nv, 2)}")
        object.__setattr__(self, "control", c)

    @classmethod
    def bilinear(cls, c00, c10, c01, c11):
        """Degree-1 single-element map with the four corners given in CCW order
        of the parametric square: F(0,0)=c00, F(1,0)=c10, F(0,1)=c01, F(1,1)=c11."""
        kv = KnotVector(1, np.array([0.0, 0.0, 1.0, 1.0]))
        space = TensorSplineSpace(kv, kv)
        control = np.array([[c00, c01], [c10, c11]], dtype=float)
        return cls(space, control)

    @classmethod
    def unit_square(cls):
        return cls.bilinear((0, 0), (1, 0), (0, 1), (1, 1))

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cflat = self.control.transpose(1, 0, 2).reshape(-1, 2)
        out = np.empty((len(pts), 2))
        for mask, gidx, vals, _ in self._grouped_basis(pts, order=0):
            out[mask] = vals @ cflat[gidx]
        return out

    def _grouped_basis(self, pts, order):
        """Evaluate the map's basis grouped by knot-span pair (vectorized)."""
        sp = self.space
        su = _spans_of(sp.kv_u, pts[:, 0])
        sv = _spans_of(sp.kv_v, pts[:, 1])
        ku, kvd = sp.kv_u.degree, sp.kv_v.degree
        for pair in np.unique(su * (10 ** 9) + sv):
            a, b = int(pair) // 10 ** 9, int(pair) % 10 ** 9
            mask = (su == a) & (sv == b)
            du = _span_ders_cached(sp.kv_u, a, pts[mask, 0], min(order, ku))
            dv = _span_ders_cached(sp.kv_v, b, pts[mask, 1], min(order, kvd))
            iu = np.arange(a - ku, a + 1)
            iv = np.arange(b - kvd, b + 1)
            gidx = (iv[:, None] * sp.kv_u.n_basis + iu[None, :]).ravel()
            m = int(mask.sum())
            vals = (dv[:, 0, :, None] * du[:, 0, None, :]).reshape(m, -1)
            grads = None
            if order:
                gx = (dv[:, 0, :, None] * du[:, 1, None, :]).reshape(m, -1)
                gy = (dv[:, 1, :, None] * du[:, 0, None, :]).reshape(m, -1)
                grads = np.stack([gx, gy], axis=-1)
            yield mask, gidx, vals, grads

    def jacobian(self, pts):
        """Physical points and Jacobians at parametric points: (X (m,2), J (m,2,2))."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cflat = self.control.transpose(1, 0, 2).reshape(-1, 2)
        X = np.empty((len(pts), 2))
        J = np.empty((len(pts), 2, 2))
        for mask, gidx, vals, grads in self._grouped_basis(pts, order=1):
            cp = cflat[gidx]
            X[mask] = vals @ cp
            # J[c,d] = dF_c/dxi_d
            J[mask] = np.einsum("mld,lc->mcd", grads, cp)
        return X, J

    def eval_with_jacobian(self, pts, check=True):
        """(points, jacobians, determinants); raises on nonpositive determinant."""
        X, J = self.jacobian(pts)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if check and np.any(det <= 0):
            raise SingularGeometryError(f"nonpositive Jacobian determinant (min {det.min():.3e})")
        return X, J, det

    def inverse(self, x, xi0=None, bounds=None, tol=1e-13, maxit=60):
        """Newton inversion of the map at physical point x.

        ``bounds`` restricts (and clamps) the iteration to a parametric
        rectangle ((u0,v0),(u1,v1)); the default is the full unit square.
        """
        x = np.asarray(x, dtype=float)
        if bounds is None:
            lo, hi = np.zeros(2), np.ones(2)
        else:
            lo, hi = np.asarray(bounds[0], float), np.asarray(bounds[1], float)
        xi = np.array(xi0, dtype=float) if xi0 is not None else 0.5 * (lo + hi)
        for _ in range(maxit):
            X, J = self.jacobian(xi[None, :])
            r = X[0] - x
            if np.dot(r, r) < tol * tol:
                return np.clip(xi, lo, hi)
            step = np.linalg.solve(J[0], r)
            xi = np.clip(xi - step, lo, hi)
        X, _ = self.jacobian(xi[None, :])
        if np.linalg.norm(X[0] - x) > 1e-9:
            raise SplineError(f"map inversion failed at {x} (residual {np.linalg.norm(X[0]-x):.2e})")
        return xi

    def refine_dyadic(self) -> "GeometryMap":
        """Knot-insertion refinement; evaluates pointwise identically."""
        space, Tu, Tv = self.space.refine_dyadic()
        control = np.einsum("ai,bj,ijd->abd", Tu, Tv, self.control)
        return GeometryMap(space, control)


@dataclass(frozen=True)
class TaylorHoodPair:
    """Pressure space of degree k and velocity scalar space of degree k+1 on the
    same Bezier mesh, sharing internal smoothness alpha >= 0."""

    pressure: TensorSplineSpace
    velocity: TensorSplineSpace
    degree: int      # pressure degree k
    smoothness: int  # alpha

    @classmethod
    def build(cls, degree, breakpoints_u, breakpoints_v, smoothness=None):
        if smoothness is None:
            smoothness = degree - 1
        if smoothness < 0:
            raise SplineError("Taylor-Hood requires smoothness >= 0")
        pu = KnotVector.from_breakpoints(degree, breakpoints_u, smoothness)
        pv = KnotVector.from_breakpoints(degree, breakpoints_v, smoothness)
        vu = KnotVector.from_breakpoints(degree + 1, breakpoints_u, smoothness)
        vv = KnotVector.from_breakpoints(degree + 1, breakpoints_v, smoothness)
        return cls(TensorSplineSpace(pu, pv), TensorSplineSpace(vu, vv), degree, smoothness)

    @classmethod
    def uniform(cls, degree, n_u, n_v, smoothness=None):
        return cls.build(degree, np.linspace(0, 1, n_u + 1), np.linspace(0, 1, n_v + 1), smoothness)

    def refine_dyadic(self) -> "TaylorHoodPair":
        bu = _midpoint_refine(self.pressure.kv_u.breakpoints)
        bv = _midpoint_refine(self.pressure.kv_v.breakpoints)
        return TaylorHoodPair.build(self.degree, bu, bv, self.smoothness)


def _midpoint_refine(bp):
    out = np.empty(2 * len(bp) - 1)
    out[0::2] = bp
    out[1::2] = 0.5 * (bp[:-1] + bp[1:])
    return out
