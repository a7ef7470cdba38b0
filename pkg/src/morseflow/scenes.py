"""Concrete scene catalog: surfaces with Morse data and gradient fields.

A scene bundles a surface (flat periodic chart or an implicit surface in
R^3), a real- or circle-valued function with closed-form first and second
derivatives, a vector field (the Euclidean/induced gradient by default),
and the list of critical points with index, value, and orientation data.

Shipped families:

* ``sphere_height``        S^2 in R^3, f = z.
* ``torus_product``        T^2 flat chart, f = a cos(2 pi x) + b cos(2 pi y).
* ``genus2_height``        boundary of a thickened figure-eight, f = x.
* ``torus_circle_valued``  f: T^2 -> S^1 in the class of dx with 2k critical
                           points, k in {0, 1, 2}; k = 0 is the fibration.
* ``mapping_torus``        fiber bundle over S^1 given by its monodromy
                           (an SL2(Z) matrix on T^2 or a degree-d circle
                           map); treated fiberwise, no tracing.

Orientation conventions (fixed here, documented in README): the chart (or
outward normal) orients the surface; each saddle's descending disc is
oriented by its stored negative eigenvector; each maximum's disc by the
chart orientation times the stored sign (+1 unless declared otherwise);
minima are positively oriented points.
"""

import math

import numpy as np

from .config import Numerics
from .errors import EvaluationFailure, SceneError

TWO_PI = 2.0 * math.pi


class CriticalPoint:
    """Position, index, critical value, and descending-disc orientation."""

    __slots__ = ("id", "position", "index", "value", "e_minus", "e_plus",
                 "orientation_sign", "eigenvalues")

    def __init__(self, cid, position, index, value, e_minus=None, e_plus=None,
                 orientation_sign=1, eigenvalues=None):
        self.id = cid
        self.position = tuple(float(v) for v in position)
        self.index = index
        self.value = float(value)
        self.e_minus = None if e_minus is None else tuple(float(v) for v in e_minus)
        self.e_plus = None if e_plus is None else tuple(float(v) for v in e_plus)
        self.orientation_sign = orientation_sign
        self.eigenvalues = eigenvalues

    def as_dict(self):
        return {"id": self.id, "position": list(self.position),
                "index": self.index, "value": self.value,
                "orientation_sign": self.orientation_sign}

    def __repr__(self):
        return "CriticalPoint(%s, index=%d, value=%.6f)" % (
            self.id, self.index, self.value)


class FlowScene:
    """Shared interface for traceable scenes."""

    kind = "real_valued_on_cobordism"
    family = ""
    params = {}
    winding = 0  # f drops by `winding` when x goes up one chart period

    def __init__(self, numerics=None):
        self.numerics = numerics or Numerics()
        self.critical_points = []
        self._base_field = None   # None = gradient of f

    # -- geometry hooks (chart points are tuples; planar points may be
    #    unreduced lifts, embedded points live on the surface) -----------

    def f_lift(self, p):
        raise NotImplementedError

    def f_gradient(self, p):
        raise NotImplementedError

    def f_hessian(self, p):
        raise NotImplementedError

    def field(self, p):
        if self._base_field is not None:
            return self._base_field.value(self, p)
        return self.f_gradient(p)

    def field_jacobian_at(self, cp):
        """Linearization of the field at a critical point (exact: shipped
        perturbations vanish on trap balls, so the base jacobian applies)."""
        if self._base_field is not None:
            return self._base_field.jacobian_at(self, cp)
        return self.f_hessian(cp.position)

    def reduce(self, p):
        return p

    def displacement(self, p, q):
        """Shortest chart vector from q to p (periodic-aware)."""
        return tuple(a - b for a, b in zip(p, q))

    def project(self, p):
        return p

    def orientation(self, p, u, w):
        """Sign of the oriented area/frame (u, w) at p."""
        raise NotImplementedError

    def validation_grid(self):
        raise NotImplementedError

    def crit_by_id(self, cid):
        for cp in self.critical_points:
            if cp.id == cid:
                return cp
        raise SceneError("no critical point %r" % cid)

    def crits_of_index(self, k):
        return [cp for cp in self.critical_points if cp.index == k]

    def with_field(self, field_obj):
        import copy
        clone = copy.copy(self)
        clone._base_field = field_obj
        return clone

    def describe(self):
        return {"family": self.family,
                "kind": self.kind,
                "params": dict(sorted(self.params.items())),
                "critical_points": [cp.as_dict() for cp in self.critical_points]}


# ---------------------------------------------------------------------------
# flat periodic charts


class PlanarScene(FlowScene):
    """Flat chart [0,1)^2; points carried as unreduced lifts in R^2.

    Circle-valued scenes have ``winding = 1``: the lift F satisfies
    F(x - 1, y) = F(x, y) - 1, i.e. the deck generator t is x -> x - 1.
    """

    def reduce(self, p):
        return (p[0] % 1.0, p[1] % 1.0)

    def displacement(self, p, q):
        dx = p[0] - q[0]
        dy = p[1] - q[1]
        dx -= round(dx)
        dy -= round(dy)
        return (dx, dy)

    def deck_offset(self, p, q):
        """Integer k with p ~ q shifted k chart periods in x (p above q)."""
        return round(p[0] - q[0])

    def orientation(self, p, u, w):
        d = u[0] * w[1] - u[1] * w[0]
        return 1 if d > 0 else (-1 if d < 0 else 0)

    def validation_grid(self):
        n = self.numerics.grid_n
        return [((i + 0.5) / n, (j + 0.5) / n) for i in range(n) for j in range(n)]

    def locate_critical(self, p, radius):
        """(CriticalPoint, deck) if the reduced point lies within radius."""
        r2 = radius * radius
        for cp in self.critical_points:
            d = self.displacement(p, cp.position)
            if d[0] * d[0] + d[1] * d[1] < r2:
                return cp, self.deck_offset((p[0] - d[0], p[1] - d[1]), cp.position)
        return None, None


def _classify(h):
    """Index and eigen-data of a symmetric 2x2 Hessian."""
    m = np.array(h, dtype=float)
    m = (m + m.T) / 2
    ev, vec = np.linalg.eigh(m)
    index = int(sum(1 for v in ev if v < 0))
    return index, ev, vec


def _unit_sign_canonical(v):
    """Deterministic sign: largest-|component| entry made positive."""
    v = np.asarray(v, dtype=float)
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    return tuple(v / np.linalg.norm(v))


def find_planar_critical_points(scene, grid_n=64, tol=1e-13):
    """Grid scan + Newton on the analytic gradient/Hessian; deduplicated."""
    found = []
    for i in range(grid_n):
        for j in range(grid_n):
            x, y = i / grid_n, j / grid_n
            gx, gy = scene.f_gradient((x, y))
            if gx * gx + gy * gy > 0.6:
                continue
            ok = True
            for _ in range(80):
                gx, gy = scene.f_gradient((x, y))
                (a, bb), (cc, d) = scene.f_hessian((x, y))
                det = a * d - bb * cc
                if abs(det) < 1e-13:
                    ok = False
                    break
                dx = (d * gx - bb * gy) / det
                dy = (-cc * gx + a * gy) / det
                x, y = x - dx, y - dy
                if dx * dx + dy * dy < 1e-30:
                    break
            gx, gy = scene.f_gradient((x, y))
            if not ok or gx * gx + gy * gy > tol:
                continue
            x, y = x % 1.0, y % 1.0
            if any(_per_d2((x, y), q) < scene.numerics.merge_radius ** 2
                   for q, _ in found):
                continue
            found.append(((x, y), scene.f_hessian((x, y))))
    cps = []
    names = {0: "min", 1: "saddle", 2: "max"}
    counters = {0: 0, 1: 0, 2: 0}
    for pos, h in sorted(found, key=lambda t: (t[0][1], t[0][0])):
        index, ev, vec = _classify(h)
        e_minus = e_plus = None
        if index == 1:
            e_minus = _unit_sign_canonical(vec[:, 0])
            e_plus = _unit_sign_canonical(vec[:, 1])
        counters[index] += 1
        cid = "%s%d" % (names[index], counters[index])
        cps.append(CriticalPoint(cid, pos, index, scene.f_lift(pos),
                                 e_minus=e_minus, e_plus=e_plus,
                                 eigenvalues=tuple(float(v) for v in ev)))
    return cps


def _per_d2(p, q):
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    dx -= round(dx)
    dy -= round(dy)
    return dx * dx + dy * dy


class TorusProductScene(PlanarScene):
    """f = a cos(2 pi x) + b cos(2 pi y) on the flat torus."""

    family = "torus_product"
    kind = "real_valued_on_cobordism"
    winding = 0

    def __init__(self, a=1.0, b=0.6, numerics=None):
        super().__init__(numerics)
        if a == 0 or b == 0:
            raise SceneError("torus_product needs a, b != 0")
        self.params = {"a": a, "b": b}
        self.a, self.b = a, b
        self.critical_points = find_planar_critical_points(self)
        counts = sorted(cp.index for cp in self.critical_points)
        if counts != [0, 1, 1, 2]:
            raise SceneError("torus_product index pattern %r" % counts)

    def f_lift(self, p):
        return self.a * math.cos(TWO_PI * p[0]) + self.b * math.cos(TWO_PI * p[1])

    def f_gradient(self, p):
        return (-TWO_PI * self.a * math.sin(TWO_PI * p[0]),
                -TWO_PI * self.b * math.sin(TWO_PI * p[1]))

    def f_hessian(self, p):
        return ((-TWO_PI ** 2 * self.a * math.cos(TWO_PI * p[0]), 0.0),
                (0.0, -TWO_PI ** 2 * self.b * math.cos(TWO_PI * p[1])))


class TorusCircleValuedScene(PlanarScene):
    """Circle-valued f in the class of dx with 2k critical points.

    k=0: the fibration f = x.
    k=1: f = x + (A(y)/2 pi) sin(2 pi x + theta(y)) with an amplitude-and-
         phase modulation tuned so exactly one saddle and one maximum
         survive (the minimum is swallowed by the winding).
    k=2: f = x + (a/2 pi)(sin(2 pi x) + r sin(4 pi x + chi))(1 + cos(2 pi y))/2,
         giving min/saddle/saddle/max; the second harmonic breaks the
         flow-reversing reflection in x that would otherwise protect a
         deck-crossing saddle self-connection.
    """

    family = "torus_circle_valued"
    kind = "circle_valued_on_closed_surface"
    winding = 1

    K1_PARAMS = {"c": 2.4, "b": 1.3, "s": 0.45}
    K2_PARAMS = {"a": 1.6, "r": 0.35, "chi": 0.7}

    def __init__(self, k=1, numerics=None, **overrides):
        super().__init__(numerics)
        if k not in (0, 1, 2):
            raise SceneError("torus_circle_valued supports k in {0,1,2}")
        self.k = k
        if k == 1:
            p = dict(self.K1_PARAMS)
            p.update(overrides)
            self.c, self.b, self.s = p["c"], p["b"], p["s"]
            self.params = {"k": k, **p}
        elif k == 2:
            p = dict(self.K2_PARAMS)
            p.update(overrides)
            self.a, self.r, self.chi = p["a"], p["r"], p["chi"]
            self.params = {"k": k, **p}
        else:
            self.params = {"k": 0}
        self.critical_points = find_planar_critical_points(self)
        want = {0: 0, 1: 2, 2: 4}[k]
        if len(self.critical_points) != want:
            raise SceneError("expected %d critical points, found %d"
                             % (want, len(self.critical_points)))

    # -- k = 1 helper terms

    def _k1_terms(self, p):
        x, y = p
        w = TWO_PI * y
        A = self.c - self.b * math.cos(w)
        Ap = TWO_PI * self.b * math.sin(w)
        App = TWO_PI ** 2 * self.b * math.cos(w)
        th = w + self.s * math.cos(w)
        thp = TWO_PI - TWO_PI * self.s * math.sin(w)
        thpp = -TWO_PI ** 2 * self.s * math.cos(w)
        beta = TWO_PI * x + th
        return A, Ap, App, thp, thpp, math.sin(beta), math.cos(beta)

    def f_lift(self, p):
        x, y = p
        if self.k == 0:
            return x
        if self.k == 1:
            A, _, _, _, _, sb, _ = self._k1_terms(p)
            return x + A / TWO_PI * sb
        u = TWO_PI * x
        q = (1 + math.cos(TWO_PI * y)) / 2
        amp = math.sin(u) + self.r * math.sin(2 * u + self.chi)
        return x + self.a / TWO_PI * amp * q

    def f_gradient(self, p):
        if self.k == 0:
            return (1.0, 0.0)
        if self.k == 1:
            A, Ap, _, thp, _, sb, cb = self._k1_terms(p)
            return (1 + A * cb, Ap / TWO_PI * sb + A / TWO_PI * cb * thp)
        u = TWO_PI * p[0]
        w = TWO_PI * p[1]
        q = (1 + math.cos(w)) / 2
        amp = math.sin(u) + self.r * math.sin(2 * u + self.chi)
        damp = math.cos(u) + 2 * self.r * math.cos(2 * u + self.chi)
        return (1 + self.a * damp * q,
                -self.a / 2 * amp * math.sin(w))

    def f_hessian(self, p):
        if self.k == 0:
            return ((0.0, 0.0), (0.0, 0.0))
        if self.k == 1:
            A, Ap, App, thp, thpp, sb, cb = self._k1_terms(p)
            fxx = -TWO_PI * A * sb
            fxy = Ap * cb - A * sb * thp
            fyy = (App / TWO_PI * sb + Ap / math.pi * cb * thp
                   - A / TWO_PI * sb * thp * thp + A / TWO_PI * cb * thpp)
            return ((fxx, fxy), (fxy, fyy))
        u = TWO_PI * p[0]
        w = TWO_PI * p[1]
        q = (1 + math.cos(w)) / 2
        amp = math.sin(u) + self.r * math.sin(2 * u + self.chi)
        damp = math.cos(u) + 2 * self.r * math.cos(2 * u + self.chi)
        d2amp = -math.sin(u) - 4 * self.r * math.sin(2 * u + self.chi)
        fxx = TWO_PI * self.a * d2amp * q
        fxy = -math.pi * self.a * damp * math.sin(w)
        fyy = -math.pi * self.a * amp * math.cos(w)
        return ((fxx, fxy), (fxy, fyy))


# ---------------------------------------------------------------------------
# implicit surfaces in R^3


class EmbeddedScene(FlowScene):
    """Surface {F = 0} in R^3 with height function f = <axis, p>.

    The field is the induced (Riemannian) gradient of f: the tangential
    projection of the axis.  Points are kept on the surface by a Newton
    projection after every integrator step.
    """

    winding = 0
    kind = "real_valued_on_cobordism"

    axis = (0.0, 0.0, 1.0)

    def implicit(self, p):
        raise NotImplementedError

    def implicit_gradient(self, p):
        raise NotImplementedError

    def implicit_hessian(self, p):
        raise NotImplementedError

    # -- generic machinery ---------------------------------------------

    def f_lift(self, p):
        e = self.axis
        return e[0] * p[0] + e[1] * p[1] + e[2] * p[2]

    def f_gradient(self, p):
        """Tangential projection of the axis: the induced gradient."""
        g = self.implicit_gradient(p)
        n2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
        e = self.axis
        s = (g[0] * e[0] + g[1] * e[1] + g[2] * e[2]) / n2
        return (e[0] - s * g[0], e[1] - s * g[1], e[2] - s * g[2])

    def normal(self, p):
        g = np.array(self.implicit_gradient(p))
        return g / np.linalg.norm(g)

    def tangent_basis(self, p):
        n = self.normal(p)
        a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        t1 = a - np.dot(a, n) * n
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        return t1, t2, n

    def surface_hessian(self, p):
        """Hessian of f restricted to the surface, in the tangent basis.

        Valid at critical points of f|S (f is linear in the ambient):
        Hess(u, u) = -(e . n) / |dF| * u^T d2F u.
        """
        t1, t2, n = self.tangent_basis(p)
        g = np.array(self.implicit_gradient(p))
        h = np.array(self.implicit_hessian(p))
        e = np.array(self.axis)
        c = -np.dot(e, n) / np.linalg.norm(g)
        m = np.array([[t1 @ h @ t1, t1 @ h @ t2], [t2 @ h @ t1, t2 @ h @ t2]])
        return c * m, (t1, t2, n)

    def f_hessian(self, p):
        m, _ = self.surface_hessian(p)
        return ((m[0][0], m[0][1]), (m[1][0], m[1][1]))

    def ambient_field_jacobian(self, p):
        """3x3 jacobian of the projected-axis field (defined off-surface)."""
        g = np.array(self.implicit_gradient(p))
        h = np.array(self.implicit_hessian(p))
        e = np.array(self.axis)
        n2 = float(g @ g)
        s = float(g @ e) / n2
        grad_s = (h @ e) / n2 - 2 * float(g @ e) / (n2 * n2) * (h @ g)
        return -np.outer(g, grad_s) - s * h

    def field_jacobian_at(self, cp):
        if self._base_field is not None:
            return self._base_field.jacobian_at(self, cp)
        p = cp.position
        j3 = self.ambient_field_jacobian(p)
        t1, t2, n = self.tangent_basis(p)
        return ((float(t1 @ j3 @ t1), float(t1 @ j3 @ t2)),
                (float(t2 @ j3 @ t1), float(t2 @ j3 @ t2)))

    def project(self, p):
        x = np.array(p, dtype=float)
        for _ in range(8):
            v = self.implicit(x)
            if abs(v) < 1e-13:
                break
            g = np.array(self.implicit_gradient(x))
            x = x - v * g / float(g @ g)
        else:
            if abs(self.implicit(x)) > 1e-8:
                raise EvaluationFailure("projection to surface failed at %r" % (p,))
        return tuple(x)

    def orientation(self, p, u, w):
        n = self.normal(p)
        d = float(np.linalg.det(np.array([list(u), list(w), list(n)])))
        return 1 if d > 0 else (-1 if d < 0 else 0)

    def displacement(self, p, q):
        return tuple(a - b for a, b in zip(p, q))

    def locate_critical(self, p, radius):
        r2 = radius * radius
        for cp in self.critical_points:
            d = self.displacement(p, cp.position)
            if sum(x * x for x in d) < r2:
                return cp, 0
        return None, None

    def _make_cp(self, cid, pos):
        m, (t1, t2, n) = self.surface_hessian(pos)
        index, ev, vec = _classify(m)
        e_minus = e_plus = None
        if index == 1:
            # eigenvectors back in ambient coordinates
            em = vec[0, 0] * t1 + vec[1, 0] * t2
            ep = vec[0, 1] * t1 + vec[1, 1] * t2
            e_minus = _unit_sign_canonical(em)
            e_plus = _unit_sign_canonical(ep)
        return CriticalPoint(cid, pos, index, self.f_lift(pos),
                             e_minus=e_minus, e_plus=e_plus,
                             eigenvalues=tuple(float(v) for v in ev))


class SphereScene(EmbeddedScene):
    """Round unit sphere with the height function z."""

    family = "sphere_height"
    axis = (0.0, 0.0, 1.0)

    def __init__(self, numerics=None):
        super().__init__(numerics)
        self.params = {}
        self.critical_points = [
            self._make_cp("min1", (0.0, 0.0, -1.0)),
            self._make_cp("max1", (0.0, 0.0, 1.0)),
        ]

    def implicit(self, p):
        return p[0] ** 2 + p[1] ** 2 + p[2] ** 2 - 1.0

    def implicit_gradient(self, p):
        return (2 * p[0], 2 * p[1], 2 * p[2])

    def implicit_hessian(self, p):
        return ((2.0, 0, 0), (0, 2.0, 0), (0, 0, 2.0))

    def validation_grid(self):
        pts = []
        n = self.numerics.grid_n
        for i in range(1, n):
            th = math.pi * i / n
            for j in range(n):
                ph = TWO_PI * j / n
                pts.append((math.sin(th) * math.cos(ph),
                            math.sin(th) * math.sin(ph),
                            math.cos(th)))
        return pts


class Genus2Scene(EmbeddedScene):
    """Boundary of a thickened figure-eight: ((x^2+y^2)^2 - x^2 + y^2)^2 +
    z^2 = eps, with a slightly tilted height axis.

    The tilt breaks the y -> -y and z -> -z symmetries of the surface;
    with the straight axis every saddle separatrix runs inside a symmetry
    plane and saddle-saddle connections are forced.
    """

    family = "genus2_height"

    def __init__(self, eps=0.02, tilt_y=0.12, tilt_z=0.07, numerics=None):
        # separatrices of the outer saddles pass ~7e-3 from the inner ones;
        # the default 1e-2 trap ball would capture that near-miss
        if numerics is None:
            import dataclasses
            numerics = dataclasses.replace(Numerics(), trap_radius=2.5e-3)
        super().__init__(numerics)
        self.params = {"eps": eps, "tilt_y": tilt_y, "tilt_z": tilt_z}
        self.eps = eps
        n = math.sqrt(1 + tilt_y ** 2 + tilt_z ** 2)
        self.axis = (1.0 / n, tilt_y / n, tilt_z / n)
        r = math.sqrt(eps)
        seeds = sorted(x.real for x in np.roots([1, 0, -1, 0, -r])
                       if abs(x.imag) < 1e-12)
        seeds += sorted(x.real for x in np.roots([1, 0, -1, 0, r])
                        if abs(x.imag) < 1e-12)
        if len(seeds) != 6:
            raise SceneError("genus2_height eps=%r is degenerate" % eps)
        pts = []
        for x0 in seeds:
            p = self._newton_critical((x0, 0.0, 0.0))
            if p is None or any(np.hypot(*(np.array(p) - np.array(q))[:2]) +
                                abs(p[2] - q[2]) < 1e-6 for q in pts):
                raise SceneError("genus2_height critical solve failed at x=%r" % x0)
            pts.append(p)
        cps = [self._make_cp("c%d" % i, p) for i, p in enumerate(pts)]
        idx = sorted(cp.index for cp in cps)
        if idx != [0, 1, 1, 1, 1, 2]:
            raise SceneError("genus2_height index pattern %r" % idx)
        names = {0: "min", 1: "saddle", 2: "max"}
        counters = {0: 0, 1: 0, 2: 0}
        final = []
        for cp in sorted(cps, key=lambda c: (c.index, c.value)):
            counters[cp.index] += 1
            final.append(CriticalPoint("%s%d" % (names[cp.index], counters[cp.index]),
                                       cp.position, cp.index, cp.value,
                                       e_minus=cp.e_minus, e_plus=cp.e_plus,
                                       eigenvalues=cp.eigenvalues))
        self.critical_points = final

    def _newton_critical(self, seed):
        """Solve F(p) = 0, grad F(p) = mu * axis for (p, mu)."""
        e = np.array(self.axis)
        p = np.array(seed, dtype=float)
        g = np.array(self.implicit_gradient(p))
        mu = float(g @ e)
        for _ in range(100):
            g = np.array(self.implicit_gradient(p))
            h = np.array(self.implicit_hessian(p))
            res = np.concatenate([[self.implicit(p)], g - mu * e])
            if np.linalg.norm(res) < 1e-13:
                return tuple(float(v) for v in p)
            jac = np.zeros((4, 4))
            jac[0, :3] = g
            jac[1:, :3] = h
            jac[1:, 3] = -e
            try:
                step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                return None
            p = p + step[:3]
            mu = mu + step[3]
        return None

    def _g(self, x, y):
        return (x * x + y * y) ** 2 - x * x + y * y

    def implicit(self, p):
        x, y, z = p
        return self._g(x, y) ** 2 + z * z - self.eps

    def implicit_gradient(self, p):
        x, y, z = p
        g = self._g(x, y)
        gx = 4 * x * (x * x + y * y) - 2 * x
        gy = 4 * y * (x * x + y * y) + 2 * y
        return (2 * g * gx, 2 * g * gy, 2 * z)

    def implicit_hessian(self, p):
        x, y, z = p
        g = self._g(x, y)
        gx = 4 * x * (x * x + y * y) - 2 * x
        gy = 4 * y * (x * x + y * y) + 2 * y
        gxx = 12 * x * x + 4 * y * y - 2
        gxy = 8 * x * y
        gyy = 4 * x * x + 12 * y * y + 2
        return ((2 * (gx * gx + g * gxx), 2 * (gx * gy + g * gxy), 0.0),
                (2 * (gx * gy + g * gxy), 2 * (gy * gy + g * gyy), 0.0),
                (0.0, 0.0, 2.0))

    def validation_grid(self):
        """Graph samples z = +-sqrt(eps - g^2) over the (x, y) plane."""
        pts = []
        n = self.numerics.grid_n
        for i in range(2 * n):
            for j in range(n):
                x = -1.3 + 2.6 * (i + 0.5) / (2 * n)
                y = -0.8 + 1.6 * (j + 0.5) / n
                g = self._g(x, y)
                z2 = self.eps - g * g
                if z2 > self.eps * 0.05:
                    z = math.sqrt(z2)
                    pts.append((x, y, z))
                    pts.append((x, y, -z))
        return pts


# ---------------------------------------------------------------------------
# mapping tori (treated fiberwise; no flow tracing)


class MappingTorusScene(FlowScene):
    """Fiber bundle over S^1 with declared monodromy.

    The natural circle-valued map has no critical points; the gradient-
    descent return map on a fiber is the monodromy itself, so zeta data and
    the cellular complex of the infinite cyclic covering are exact.
    """

    family = "mapping_torus"
    kind = "mapping_torus"
    winding = 1

    def __init__(self, fiber="torus", matrix=None, degree=None, numerics=None):
        super().__init__(numerics)
        self.fiber = fiber
        if fiber == "torus":
            m = [[2, 1], [1, 1]] if matrix is None else [list(r) for r in matrix]
            if len(m) != 2 or any(len(r) != 2 for r in m):
                raise SceneError("mapping_torus torus fiber needs a 2x2 matrix")
            det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
            if det != 1:
                raise SceneError("monodromy must lie in SL2(Z), det=%d" % det)
            self.matrix = m
            self.params = {"fiber": fiber, "matrix": m}
        elif fiber == "circle":
            if degree is None:
                degree = 2
            self.degree = int(degree)
            self.params = {"fiber": fiber, "degree": self.degree}
        else:
            raise SceneError("unknown fiber %r" % fiber)
        self.critical_points = []

    def monodromy_chain_maps(self):
        """Chain maps induced on the fiber's cellular complex, degree by
        degree, for the standard one-vertex CW structure."""
        if self.fiber == "circle":
            return {0: [[1]], 1: [[self.degree]]}
        a = self.matrix
        return {0: [[1]], 1: [[a[0][0], a[0][1]], [a[1][0], a[1][1]]], 2: [[1]]}

    def fiber_cell_counts(self):
        if self.fiber == "circle":
            return {0: 1, 1: 1}
        return {0: 1, 1: 2, 2: 1}

    def is_degenerate_return_map(self):
        """Identity monodromy: fixed sets are not isolated."""
        if self.fiber == "circle":
            return self.degree == 1
        return self.matrix == [[1, 0], [0, 1]]


# ---------------------------------------------------------------------------
# field wrappers: perturbation, negation, rotated saddle


class FieldWrapper:
    def value(self, scene, p):
        raise NotImplementedError

    def jacobian_at(self, scene, cp):
        raise NotImplementedError


def _smoothstep(t):
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return t * t * t * (t * (6 * t - 15) + 10)


class NegatedField(FieldWrapper):
    def value(self, scene, p):
        g = scene.f_gradient(p)
        return tuple(-x for x in g)

    def jacobian_at(self, scene, cp):
        base = (scene.f_hessian(cp.position) if isinstance(scene, PlanarScene)
                else _embedded_base_jac(scene, cp))
        return tuple(tuple(-x for x in row) for row in base)


def _embedded_base_jac(scene, cp):
    p = cp.position
    j3 = scene.ambient_field_jacobian(p)
    t1, t2, n = scene.tangent_basis(p)
    return ((float(t1 @ j3 @ t1), float(t1 @ j3 @ t2)),
            (float(t2 @ j3 @ t1), float(t2 @ j3 @ t2)))


class RotatedSaddleField(FieldWrapper):
    """Replace the field near one saddle by a rotation: breaks condition B
    (the symmetrized form acquires a negative eigenvalue) while keeping the
    field smooth and unchanged outside 2 rho."""

    def __init__(self, saddle_id, scale=None):
        self.saddle_id = saddle_id
        self.scale = scale

    def _mix(self, scene, p):
        cp = scene.crit_by_id(self.saddle_id)
        d = scene.displacement(p, cp.position)
        r = math.sqrt(sum(x * x for x in d))
        rho = scene.numerics.trap_radius
        m = _smoothstep((r - rho) / rho)  # 0 inside rho, 1 beyond 2 rho
        return cp, d, m

    def value(self, scene, p):
        cp, d, m = self._mix(scene, p)
        base = scene.f_gradient(p)
        scale = self.scale or TWO_PI
        if len(d) == 2:
            rot = (-scale * d[1], scale * d[0])
        else:
            t1, t2, n = scene.tangent_basis(cp.position)
            u = float(np.dot(d, t1))
            w = float(np.dot(d, t2))
            rv = -scale * w * t1 + scale * u * t2
            rot = tuple(rv)
        return tuple((1 - m) * r + m * b for r, b in zip(rot, base))

    def jacobian_at(self, scene, cp):
        if cp.id != self.saddle_id:
            if isinstance(scene, PlanarScene):
                return scene.f_hessian(cp.position)
            return _embedded_base_jac(scene, cp)
        scale = self.scale or TWO_PI
        return ((0.0, -scale), (scale, 0.0))


class PerturbedField(FieldWrapper):
    """Base gradient plus a seeded trigonometric field, bump-masked to
    vanish on trap balls around the critical set, with sup-norm <= delta."""

    N_MODES = 4

    def __init__(self, scene, delta, seed):
        import random as _random
        self.delta = float(delta)
        self.seed = int(seed)
        rng = _random.Random(self.seed)
        dim = 2 if isinstance(scene, PlanarScene) else 3
        self.dim = dim
        self.modes = []
        for _ in range(dim):
            comp = []
            for _ in range(self.N_MODES):
                freq = tuple(rng.randint(-2, 2) for _ in range(dim))
                phase = rng.uniform(0, TWO_PI)
                comp.append((freq, phase))
            self.modes.append(comp)
        # sup |u_i| <= sum of |amplitudes| = 1/sqrt(dim) so |u| <= 1
        self.amp = 1.0 / (self.N_MODES * math.sqrt(dim))
        self._crit = [cp.position for cp in scene.critical_points]
        self._rho = scene.numerics.trap_radius
        self._planar = dim == 2
        self._flat = [[tuple(TWO_PI * fi for fi in freq) + (phase,)
                       for freq, phase in comp] for comp in self.modes]

    def _raw(self, q):
        cos = math.cos
        if self._planar:
            x, y = q
            return [self.amp * sum(cos(ax * x + ay * y + ph)
                                   for ax, ay, ph in comp)
                    for comp in self._flat]
        x, y, z = q
        return [self.amp * sum(cos(ax * x + ay * y + az * z + ph)
                               for ax, ay, az, ph in comp)
                for comp in self._flat]

    def _mask(self, p):
        rho = self._rho
        inner = rho * rho
        outer = 4 * rho * rho
        m = 1.0
        if self._planar:
            x, y = p[0], p[1]
            for cx, cy in self._crit:
                dx = x - cx
                dx -= round(dx)
                dy = y - cy
                dy -= round(dy)
                d2 = dx * dx + dy * dy
                if d2 >= outer:
                    continue
                if d2 <= inner:
                    return 0.0
                m *= _smoothstep((math.sqrt(d2) - rho) / rho)
        else:
            x, y, z = p
            for cx, cy, cz in self._crit:
                dx = x - cx
                dy = y - cy
                dz = z - cz
                d2 = dx * dx + dy * dy + dz * dz
                if d2 >= outer:
                    continue
                if d2 <= inner:
                    return 0.0
                m *= _smoothstep((math.sqrt(d2) - rho) / rho)
        return m

    def value(self, scene, p):
        if self.delta == 0.0:
            return scene.f_gradient(p)
        if self._planar:
            base = scene.f_gradient(p)
            m = self._mask(p)
            if m == 0.0:
                return base
            u = self._raw(scene.reduce(p))
            m *= self.delta
            return (base[0] + m * u[0], base[1] + m * u[1])
        g = scene.implicit_gradient(p)
        n2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
        e = scene.axis
        s = (g[0] * e[0] + g[1] * e[1] + g[2] * e[2]) / n2
        base = (e[0] - s * g[0], e[1] - s * g[1], e[2] - s * g[2])
        m = self._mask(p)
        if m == 0.0:
            return base
        u = self._raw(p)
        dot = (u[0] * g[0] + u[1] * g[1] + u[2] * g[2]) / n2
        m *= self.delta
        return (base[0] + m * (u[0] - dot * g[0]),
                base[1] + m * (u[1] - dot * g[1]),
                base[2] + m * (u[2] - dot * g[2]))

    def jacobian_at(self, scene, cp):
        # the mask vanishes identically on the trap ball
        if isinstance(scene, PlanarScene):
            return scene.f_hessian(cp.position)
        return _embedded_base_jac(scene, cp)


# ---------------------------------------------------------------------------
# registry


FAMILIES = {
    "sphere_height": SphereScene,
    "torus_product": TorusProductScene,
    "genus2_height": Genus2Scene,
    "torus_circle_valued": TorusCircleValuedScene,
    "mapping_torus": MappingTorusScene,
}

#: Named shipped configurations used throughout the verification suite.
SHIPPED = {
    "sphere_height": ("sphere_height", {}),
    "torus_product": ("torus_product", {"a": 1.0, "b": 0.6}),
    "genus2_height": ("genus2_height", {"eps": 0.02}),
    "torus_fibration": ("torus_circle_valued", {"k": 0}),
    "torus_two_points": ("torus_circle_valued", {"k": 1}),
    "torus_four_points": ("torus_circle_valued", {"k": 2}),
    "cat_map_torus": ("mapping_torus", {"fiber": "torus", "matrix": [[2, 1], [1, 1]]}),
    "double_cover_torus": ("mapping_torus", {"fiber": "circle", "degree": 2}),
}


def make_scene(family, params=None, numerics=None):
    params = dict(params or {})
    if family in SHIPPED and family not in FAMILIES:
        fam, base = SHIPPED[family]
        merged = dict(base)
        merged.update(params)
        return FAMILIES[fam](numerics=numerics, **merged)
    if family not in FAMILIES:
        raise SceneError("unknown scene family %r (known: %s)"
                         % (family, ", ".join(sorted(set(FAMILIES) | set(SHIPPED)))))
    return FAMILIES[family](numerics=numerics, **params)


def load_scene(spec, numerics=None):
    """Scene from a name in SHIPPED or a {family, params} mapping."""
    if isinstance(spec, str):
        return make_scene(spec, None, numerics)
    return make_scene(spec["family"], spec.get("params"), numerics)
