"""Trajectory tracing, separatrix extraction, and gradient validation.

All tracing runs on the unit-speed field v/|v| with an adaptive RK4
(step-doubling error estimate), so arclength is the curve parameter.
Critical points are detected by trap balls of radius rho; level crossings
are refined by bisecting the last step.
"""

import math

import numpy as np

from .errors import (
    EvaluationFailure,
    MaxLengthExceeded,
    StepCollapse,
    TransversalityFailure,
)
from .scenes import PlanarScene

# ---------------------------------------------------------------------------
# integrator


def _rk4_step(fld, p, h):
    k1 = fld(p)
    k2 = fld(tuple(x + 0.5 * h * k for x, k in zip(p, k1)))
    k3 = fld(tuple(x + 0.5 * h * k for x, k in zip(p, k2)))
    k4 = fld(tuple(x + h * k for x, k in zip(p, k3)))
    return tuple(x + h / 6.0 * (a + 2 * b + 2 * c + d)
                 for x, a, b, c, d in zip(p, k1, k2, k3, k4))


def _nearest_crit_dist(scene, p):
    best = float("inf")
    for cp in scene.critical_points:
        d = scene.displacement(p, cp.position)
        r = math.sqrt(sum(x * x for x in d))
        if r < best:
            best = r
    return best


class Terminus:
    """How a trace ended: at a critical point, a level crossing, or a cap."""

    def __init__(self, kind, **data):
        self.kind = kind  # "critical" | "level" | "max_length"
        self.data = data

    def __getattr__(self, name):
        try:
            return self.data[name]
        except KeyError:
            raise AttributeError(name)

    def as_dict(self):
        out = {"kind": self.kind}
        for k, v in self.data.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    def __repr__(self):
        return "Terminus(%s, %r)" % (self.kind, self.data)


class Trace:
    def __init__(self, samples, f_values, arclengths, terminus):
        self.samples = samples
        self.f_values = f_values
        self.arclengths = arclengths
        self.terminus = terminus

    @property
    def end(self):
        return self.samples[-1]

    def length(self):
        return self.arclengths[-1]


def trace_flow(scene, start, direction, levels=(), origin_id=None,
               max_length=None, record=True):
    """Integrate the unit field `direction * v / |v|` from `start`.

    Stops when a trap ball is entered (the ball of the `origin_id` point is
    suppressed until the trace has left 3 rho), when the lifted value of f
    crosses one of `levels`, or when `max_length` arclength is exceeded
    (raising MaxLengthExceeded).  Level crossings are refined to ~1e-12 by
    bisecting the final step.
    """
    num = scene.numerics
    rho = num.trap_radius
    max_length = max_length if max_length is not None else num.max_arc_length
    sgn = 1.0 if direction > 0 else -1.0

    def unit_field(p):
        v = scene.field(p)
        n = math.sqrt(sum(x * x for x in v))
        if n < 1e-14:
            raise EvaluationFailure("field vanished off the critical set at %r" % (p,))
        s = sgn / n
        return tuple(s * x for x in v)

    p = scene.project(start)
    fval = scene.f_lift(p)
    arclen = 0.0
    armed = origin_id is None
    h = num.max_step
    samples = [p]
    fvals = [fval]
    arcs = [0.0]
    levels = sorted(levels)

    hit, deck = scene.locate_critical(p, rho)
    if hit is not None and (origin_id is None or hit.id != origin_id):
        return Trace(samples, fvals, arcs,
                     Terminus("critical", id=hit.id, deck=deck, point=p))

    while arclen < max_length:
        # never step far enough to hop over a trap ball
        near = _nearest_crit_dist(scene, p)
        h = min(h, max(0.5 * rho, 0.5 * near))
        # adaptive step: full vs two halves, PI-style update
        while True:
            if h < num.min_step:
                raise StepCollapse("step underflow", location=p)
            try:
                full = _rk4_step(unit_field, p, h)
                half = _rk4_step(unit_field, p, h / 2)
                half = _rk4_step(unit_field, half, h / 2)
            except EvaluationFailure:
                h *= 0.25
                continue
            err = math.sqrt(sum((a - b) ** 2 for a, b in zip(full, half)))
            if err <= num.rk_tol:
                break
            h = max(num.min_step,
                    0.9 * h * (num.rk_tol / err) ** 0.2)
        q = scene.project(half)
        fq = scene.f_lift(q)

        # level-crossing stop: refine by bisection on the step size
        crossed = None
        for lam in levels:
            if (fval - lam) * (fq - lam) < 0:
                crossed = lam
                break
        if crossed is not None:
            lo, hi = 0.0, h
            plo = p
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                pm = scene.project(_rk4_step(unit_field, p, mid))
                if (scene.f_lift(pm) - crossed) * (fval - crossed) >= 0:
                    lo = mid
                    plo = pm
                else:
                    hi = mid
                if hi - lo < 1e-13:
                    break
            pc = scene.project(_rk4_step(unit_field, p, 0.5 * (lo + hi)))
            arclen += 0.5 * (lo + hi)
            if record:
                samples.append(pc)
                fvals.append(scene.f_lift(pc))
                arcs.append(arclen)
            return Trace(samples if record else [p, pc],
                         fvals if record else [fval, scene.f_lift(pc)],
                         arcs if record else [0.0, arclen],
                         Terminus("level", level=crossed, point=pc))

        p, fval = q, fq
        arclen += h
        if record:
            samples.append(p)
            fvals.append(fval)
            arcs.append(arclen)
        if err > 0:
            h = min(num.max_step, 0.9 * h * (num.rk_tol / err) ** 0.2)
        else:
            h = min(num.max_step, 2.0 * h)

        if not armed:
            cp0 = scene.crit_by_id(origin_id)
            d = scene.displacement(p, cp0.position)
            if sum(x * x for x in d) > (3 * rho) ** 2:
                armed = True
        hit, deck = scene.locate_critical(p, rho)
        if hit is not None and (armed or hit.id != origin_id):
            return Trace(samples if record else [p],
                         fvals if record else [fval],
                         arcs if record else [arclen],
                         Terminus("critical", id=hit.id, deck=deck, point=p))
    return Trace(samples, fvals, arcs, Terminus("max_length", point=p))


# ---------------------------------------------------------------------------
# separatrices


class Separatrix:
    """One saddle branch: origin, descending/ascending, branch sign, the
    traced polyline, the terminus, and the orientation sign data."""

    def __init__(self, origin, direction, branch, trace, sign):
        self.origin = origin          # saddle id
        self.direction = direction    # "descending" | "ascending"
        self.branch = branch          # +1 / -1: side of the eigenaxis
        self.trace = trace
        self.sign = sign              # branch orientation sign (see morse)

    @property
    def terminus(self):
        return self.trace.terminus

    def as_rows(self, scene):
        rows = []
        for p, f, s in zip(self.trace.samples, self.trace.f_values,
                           self.trace.arclengths):
            rows.append(list(p) + [f, s])
        return rows


def saddle_branch_start(scene, cp, axis_vec, branch):
    eps = scene.numerics.seed_offset
    return tuple(x + branch * eps * e for x, e in zip(cp.position, axis_vec))


def extract_separatrices(scene, levels=(), depth=None, max_length=None,
                         record=True):
    """Both descending and both ascending branches of every saddle.

    Descending branches carry the boundary-orientation sign (+1 on the
    +e_minus branch, -1 on the other: the oriented 1-cell runs toward
    +e_minus).  Ascending branches carry branch = the side of the e_plus
    axis; their incidence sign is computed where they are consumed.

    `depth` (for circle-valued scenes) stops each branch once its lifted
    value has moved `depth` past the saddle value: an honest truncation.
    """
    out = []
    for cp in scene.critical_points:
        if cp.index != 1:
            continue
        for direction, axis in (("descending", cp.e_minus), ("ascending", cp.e_plus)):
            sgn = -1 if direction == "descending" else 1
            stop_levels = list(levels)
            length_cap = max_length
            if depth is not None:
                stop_levels.append(cp.value + sgn * depth)
                if length_cap is None:
                    length_cap = 4.0 * depth + 20
            for branch in (1, -1):
                start = saddle_branch_start(scene, cp, axis, branch)
                tr = trace_flow(scene, start, sgn,
                                levels=stop_levels, origin_id=cp.id,
                                max_length=length_cap, record=record)
                sign = branch if direction == "descending" else 0
                out.append(Separatrix(cp.id, direction, branch, tr, sign))
    return out


def separatrices_to_csv(scene, separatrices, path):
    dim = len(scene.critical_points[0].position) if scene.critical_points else 2
    cols = ["x", "y", "z"][:dim] + ["f", "arclength"]
    with open(path, "w") as fh:
        fh.write("origin,direction,branch," + ",".join(cols) + "\n")
        for sep in separatrices:
            for row in sep.as_rows(scene):
                fh.write("%s,%s,%d," % (sep.origin, sep.direction, sep.branch)
                         + ",".join("%.12g" % v for v in row) + "\n")


# ---------------------------------------------------------------------------
# gradient validation (conditions A and B)


class ValidationReport:
    def __init__(self, passed_a, passed_b, a_witnesses, b_reports):
        self.passed_a = passed_a
        self.passed_b = passed_b
        self.a_witnesses = a_witnesses
        self.b_reports = b_reports

    @property
    def passed(self):
        return self.passed_a and self.passed_b

    def as_dict(self):
        return {
            "passed": self.passed,
            "condition_a": {"passed": self.passed_a,
                            "witnesses": [
                                {"point": list(p), "value": v}
                                for p, v in self.a_witnesses[:5]]},
            "condition_b": {"passed": self.passed_b,
                            "per_point": self.b_reports},
        }


def validate_f_gradient(scene, max_witnesses=32):
    """Check the two defining conditions of an f-gradient.

    (A) <df(x), v(x)> > 0 on a deterministic grid away from critical balls;
    (B) at each critical point the symmetrized form of
        h |-> f''(p)(v'(p) h, h) is positive definite.
    """
    num = scene.numerics
    rho = num.trap_radius
    a_witnesses = []
    for p in scene.validation_grid():
        near = False
        for cp in scene.critical_points:
            d = scene.displacement(p, cp.position)
            if sum(x * x for x in d) < (2 * rho) ** 2:
                near = True
                break
        if near:
            continue
        df = scene.f_gradient(p)
        v = scene.field(p)
        val = sum(a * b for a, b in zip(df, v))
        if val <= 0:
            a_witnesses.append((p, val))
            if len(a_witnesses) >= max_witnesses:
                break
    b_reports = {}
    passed_b = True
    for cp in scene.critical_points:
        hf = np.array(scene.f_hessian(cp.position), dtype=float)
        jv = np.array(scene.field_jacobian_at(cp), dtype=float)
        form = jv.T @ hf
        sym = (form + form.T) / 2
        eigs = sorted(float(x) for x in np.linalg.eigvalsh(sym))
        ok = eigs[0] > 0
        passed_b = passed_b and ok
        b_reports[cp.id] = {"eigenvalues": eigs, "passed": ok}
    return ValidationReport(not a_witnesses, passed_b, a_witnesses, b_reports)


# ---------------------------------------------------------------------------
# almost transversality


class Diagnosis:
    def __init__(self, passed, offending):
        self.passed = passed
        self.offending = offending

    def as_dict(self):
        return {"passed": self.passed,
                "saddle_connections": [list(p) for p in self.offending]}


def check_almost_transversality(scene, separatrices=None, levels=()):
    """On surfaces the condition is the absence of saddle-to-saddle
    connections: no descending saddle separatrix may end in a saddle trap."""
    if separatrices is None:
        separatrices = extract_separatrices(scene, levels=levels, record=False)
    offending = []
    for sep in separatrices:
        if sep.direction != "descending":
            continue
        t = sep.terminus
        if t.kind == "critical":
            target = scene.crit_by_id(t.id)
            if target.index == 1:
                offending.append((sep.origin, t.id))
    return Diagnosis(not offending, offending)


# ---------------------------------------------------------------------------
# perturbation with revalidation


def perturb(scene, seed, delta):
    """Seeded bump-masked perturbation of the gradient with sup-norm <= delta.

    The perturbed field is revalidated; failing condition A or B raises
    ValidationLost (callers may shrink delta).
    """
    from .errors import ValidationLost
    from .scenes import PerturbedField

    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return scene
    pert = scene.with_field(PerturbedField(scene, delta, seed))
    report = validate_f_gradient(pert)
    if not report.passed:
        raise ValidationLost(
            "perturbation delta=%g seed=%d fails validation" % (delta, seed))
    return pert


# ---------------------------------------------------------------------------
# level curves of circle-valued planar scenes


class LevelComponent:
    """A closed component of {f = lam}, traced with arclength parameter."""

    def __init__(self, points, arclengths, length, y_winding):
        self.points = points          # unreduced lifts, F = lam exactly
        self.arclengths = arclengths
        self.length = length
        self.y_winding = y_winding

    def point_at(self, scene, lam, s):
        """Point at arclength s (mod length), Newton-corrected to the level."""
        s = s % self.length
        arr = self.arclengths
        lo, hi = 0, len(arr) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if arr[mid] <= s:
                lo = mid
            else:
                hi = mid
        p0, p1 = self.points[lo], self.points[hi]
        seg = arr[hi] - arr[lo]
        t = (s - arr[lo]) / seg if seg > 0 else 0.0
        p = tuple(a + t * (b - a) for a, b in zip(p0, p1))
        return _newton_to_level(scene, p, lam)

    def tangent_at(self, scene, p):
        g = scene.f_gradient(p)
        n = math.hypot(g[0], g[1])
        return (-g[1] / n, g[0] / n)


def _newton_to_level(scene, p, lam):
    for _ in range(12):
        r = scene.f_lift(p) - lam
        if abs(r) < 1e-13:
            return p
        g = scene.f_gradient(p)
        n2 = g[0] * g[0] + g[1] * g[1]
        p = (p[0] - r * g[0] / n2, p[1] - r * g[1] / n2)
    if abs(scene.f_lift(p) - lam) > 1e-9:
        raise EvaluationFailure("level correction failed near %r" % (p,))
    return p


def level_components(scene, lam, resolution=None):
    """All components of the level set {f = lam} of a circle-valued scene.

    Traced by integrating the rotated unit gradient with per-step Newton
    correction; seeds come from sign changes of F - lam on x-scanlines.
    """
    if not isinstance(scene, PlanarScene) or scene.winding != 1:
        raise EvaluationFailure("level curves need a circle-valued planar scene")
    res = resolution or scene.numerics.level_resolution
    seeds = []
    ny, nx = 64, 256
    for j in range(ny):
        y = (j + 0.5) / ny
        xs = [lam - 0.75 + 1.5 * i / nx for i in range(nx + 1)]
        vals = [scene.f_lift((x, y)) - lam for x in xs]
        for i in range(nx):
            if vals[i] == 0.0 or (vals[i] < 0) != (vals[i + 1] < 0):
                lo, hi = xs[i], xs[i + 1]
                flo = vals[i]
                for _ in range(50):
                    mid = 0.5 * (lo + hi)
                    fm = scene.f_lift((mid, y)) - lam
                    if (fm < 0) == (flo < 0):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                seeds.append((0.5 * (lo + hi), y))
    comps = []
    used = []

    def mark_used(pts):
        used.extend(scene.reduce(p) for p in pts[::2])

    def is_used(p):
        rp = scene.reduce(p)
        for q in used:
            if _per_dist2(rp, q) < (2.0 / res) ** 2:
                return True
        return False

    for seed in seeds:
        if is_used(seed):
            continue
        comp = _trace_level_loop(scene, seed, lam, res)
        if comp is not None:
            comps.append(comp)
            mark_used(comp.points)
    comps.sort(key=lambda c: (round(c.points[0][1] % 1.0, 6), c.points[0][0]))
    return comps


def _per_dist2(p, q):
    dx = p[0] - q[0]
    dx -= round(dx)
    dy = p[1] - q[1]
    dy -= round(dy)
    return dx * dx + dy * dy


def _trace_level_loop(scene, seed, lam, res):
    h = 1.0 / res
    p = _newton_to_level(scene, seed, lam)
    start = p
    pts = [p]
    arcs = [0.0]
    total = 0.0

    def tangent(q):
        g = scene.f_gradient(q)
        n = math.hypot(g[0], g[1])
        return (-g[1] / n, g[0] / n)

    for step in range(int(60 / h)):
        q = _rk4_step(tangent, p, h)
        q = _newton_to_level(scene, q, lam)
        total += math.sqrt(sum((a - b) ** 2 for a, b in zip(q, p)))
        p = q
        pts.append(p)
        arcs.append(total)
        if step > 3 and _per_dist2(scene.reduce(p), scene.reduce(start)) < (0.5 * h) ** 2:
            y_wind = round(p[1] - start[1])
            return LevelComponent(pts, arcs, total, y_wind)
    return None
