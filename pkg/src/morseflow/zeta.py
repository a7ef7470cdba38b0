"""Gradient-descent return maps and the Lefschetz zeta series.

For a circle-valued scene the return map Phi on a regular level V_lam is
gradient descent across one period composed with the deck shift; it is
computed by tracing.  For mapping-torus scenes the return map IS the
declared monodromy and all counts are exact integers.

Fixed points of Phi^n are located by bracketing sign changes of the
displacement along each level component; the index of a nondegenerate
fixed point is sign(1 - (Phi^n)'(x)), which makes L(Phi^n) the Lefschetz
number in the fibered case.
"""

import math

from .config import DEFAULT_ORDER
from .errors import (
    DegenerateFixedPoint,
    EvaluationFailure,
    RegularValueError,
    ResolutionTooCoarse,
    SceneError,
)
from .homalg import smith_normal_form
from .rings import series_exp, zeta_exponent
from .scenes import MappingTorusScene, PlanarScene
from .tracing import level_components, trace_flow
from .novikov import check_regular


class ReturnMap:
    """Partially defined self-map of the level set V_lam (disjoint circles).

    `samples[c]` holds, per component, the precomputed points; traces are
    run lazily per iterate.  Undefined points (descents that fall into a
    trap ball) delimit the domain intervals.
    """

    def __init__(self, scene, lam, resolution=None):
        if not isinstance(scene, PlanarScene) or scene.winding != 1:
            raise SceneError("return maps need a circle-valued scene")
        check_regular(scene, lam)
        self.scene = scene
        self.lam = lam
        self.resolution = resolution or 192
        self.components = level_components(scene, lam)
        if not self.components:
            raise EvaluationFailure("no level components found at %r" % lam)

    def descend(self, p, n=1):
        """Descend n periods and apply the deck shift t^{-n}: a point of
        V_lam again, or None when the trace is trapped."""
        tr = trace_flow(self.scene, p, -1, levels=[self.lam - n],
                        max_length=8.0 * n + 30, record=False)
        t = tr.terminus
        if t.kind != "level":
            return None
        q = t.point
        return (q[0] + n, q[1])

    def locate(self, q):
        """(component index, arclength parameter) of a point on V_lam."""
        best = (None, None, float("inf"))
        for ci, comp in enumerate(self.components):
            pts = comp.points
            for i in range(len(pts) - 1):
                ax, ay = pts[i]
                bx, by = pts[i + 1]
                # periodic-aware: shift q near the segment
                dx = round((q[0] - ax))
                dy = round((q[1] - ay))
                qx, qy = q[0] - dx, q[1] - dy
                vx, vy = bx - ax, by - ay
                L2 = vx * vx + vy * vy
                if L2 == 0:
                    continue
                t = ((qx - ax) * vx + (qy - ay) * vy) / L2
                t = max(0.0, min(1.0, t))
                ex, ey = ax + t * vx - qx, ay + t * vy - qy
                d2 = ex * ex + ey * ey
                if d2 < best[2]:
                    s = comp.arclengths[i] + t * (comp.arclengths[i + 1]
                                                  - comp.arclengths[i])
                    best = (ci, s, d2)
        if best[0] is None or best[2] > 0.25:
            raise ResolutionTooCoarse("point %r not on the level set" % (q,))
        return best[0], best[1]

    def apply_to_param(self, ci, s, n):
        """Phi^n in (component, arclength) coordinates; None if undefined."""
        comp = self.components[ci]
        p = comp.point_at(self.scene, self.lam, s)
        q = self.descend(p, n)
        if q is None:
            return None
        return self.locate(q)

    def describe(self):
        return {"lambda": self.lam,
                "components": [{"length": c.length, "y_winding": c.y_winding}
                               for c in self.components]}


def _wrap(d, length):
    d = d % length
    if d > length / 2:
        d -= length
    return d


def lefschetz_counts(rm, order, tol=None):
    """L(Phi^n) for n = 1..order-1 by displacement-crossing search.

    Raises DegenerateFixedPoint when a located fixed point has |Phi' - 1|
    below tolerance (or when the map looks like the identity).
    """
    scene = rm.scene
    tol = tol or scene.numerics.fixed_point_tol
    counts = []
    locations = []
    for n in range(1, order):
        total = 0
        for ci, comp in enumerate(rm.components):
            res = rm.resolution
            step = comp.length / res
            images = []
            for i in range(res):
                images.append(rm.apply_to_param(ci, i * step, n))
            defined = [im is not None and im[0] == ci for im in images]
            disp = [None] * res
            for i in range(res):
                if defined[i]:
                    disp[i] = _wrap(images[i][1] - i * step, comp.length)
            if all(d is not None and abs(d) < 10 * tol for d in disp):
                raise DegenerateFixedPoint(
                    "return map iterate %d is the identity on component %d"
                    % (n, ci))
            for i in range(res):
                j = (i + 1) % res
                if disp[i] is None or disp[j] is None:
                    continue
                if disp[i] == 0.0:
                    disp[i] = 1e-15
                if (disp[i] < 0) == (disp[j] < 0):
                    continue
                if abs(disp[i]) > comp.length / 4 or abs(disp[j]) > comp.length / 4:
                    continue  # wrap artifact, not a crossing
                s_lo, s_hi = i * step, (i + 1) * step
                d_lo = disp[i]
                for _ in range(48):
                    mid = 0.5 * (s_lo + s_hi)
                    im = rm.apply_to_param(ci, mid, n)
                    if im is None or im[0] != ci:
                        raise DegenerateFixedPoint(
                            "fixed point bracket of Phi^%d hit the domain boundary" % n,
                            location=(ci, mid))
                    dm = _wrap(im[1] - mid, comp.length)
                    if (dm < 0) == (d_lo < 0):
                        s_lo, d_lo = mid, dm
                    else:
                        s_hi = mid
                    if s_hi - s_lo < 1e-9:
                        break
                s_star = 0.5 * (s_lo + s_hi)
                h = max(1e-4 * comp.length, 4.0 * (s_hi - s_lo))
                dplus = _wrap(rm.apply_to_param(ci, s_star + h, n)[1]
                              - (s_star + h), comp.length)
                dminus = _wrap(rm.apply_to_param(ci, s_star - h, n)[1]
                               - (s_star - h), comp.length)
                slope = (dplus - dminus) / (2 * h)  # (Phi^n)' - 1
                if abs(slope) < tol:
                    raise DegenerateFixedPoint(
                        "|Phi^%d' - 1| = %g at fixed point" % (n, abs(slope)),
                        location=(ci, s_star))
                idx = 1 if slope < 0 else -1  # sign(1 - Phi')
                total += idx
                locations.append({"n": n, "component": ci, "s": s_star,
                                  "index": idx})
        counts.append(total)
    return counts, locations


# ---------------------------------------------------------------------------
# mapping tori: exact counts


def _mat_pow(a, n):
    out = [[1, 0], [0, 1]]
    for _ in range(n):
        out = [[out[0][0] * a[0][0] + out[0][1] * a[1][0],
                out[0][0] * a[0][1] + out[0][1] * a[1][1]],
               [out[1][0] * a[0][0] + out[1][1] * a[1][0],
                out[1][0] * a[0][1] + out[1][1] * a[1][1]]]
    return out


def mapping_torus_counts(scene, order, cross_check=True):
    """L(Phi^n) for the monodromy return map, exactly.

    Torus fiber: L = det(I - A^n); the count of solutions of A^n x = x
    mod 1 is cross-checked through the Smith normal form of A^n - I.
    Circle fiber of degree d: L = 1 - d^n.
    """
    if scene.is_degenerate_return_map():
        raise DegenerateFixedPoint(
            "identity monodromy has no isolated fixed points")
    counts = []
    if scene.fiber == "circle":
        d = scene.degree
        for n in range(1, order):
            if d ** n == 1:
                raise DegenerateFixedPoint("degree-1 iterate is degenerate")
            counts.append(1 - d ** n)
        return counts
    a = scene.matrix
    for n in range(1, order):
        an = _mat_pow(a, n)
        m = [[an[0][0] - 1, an[0][1]], [an[1][0], an[1][1] - 1]]
        det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        if det == 0:
            raise DegenerateFixedPoint("monodromy power %d has eigenvalue 1" % n)
        if cross_check:
            diag, _, _ = smith_normal_form(m)
            npoints = 1
            for dd in diag:
                npoints *= abs(dd)
            if npoints != abs(det):
                raise EvaluationFailure("fixed-point enumeration mismatch")
        counts.append(det)
    return counts


# ---------------------------------------------------------------------------


class ZetaReport:
    def __init__(self, counts, series, lam=None, locations=None):
        self.counts = counts
        self.series = series
        self.lam = lam
        self.locations = locations or []

    def as_dict(self):
        return {"lambda": self.lam,
                "counts": list(self.counts),
                "zeta": self.series.to_json()}


def zeta_series(counts, order):
    """zeta = exp(sum L(Phi^n) t^n / n); integer coefficients enforced."""
    return series_exp(zeta_exponent(counts, order))


def gradient_zeta(scene, lam=None, order=DEFAULT_ORDER, resolution=None):
    """End-to-end: return map, counts, and the zeta WittUnit."""
    if isinstance(scene, MappingTorusScene):
        counts = mapping_torus_counts(scene, order)
        return ZetaReport(counts, zeta_series(counts, order))
    rm = ReturnMap(scene, lam, resolution=resolution)
    counts, locations = lefschetz_counts(rm, order)
    return ZetaReport(counts, zeta_series(counts, order), lam=lam,
                      locations=locations)
