"""Morse complexes from separatrix data, the C0-stability experiment, and
induced chain maps of surface self-maps.

Sign conventions (fixed; see README):

* the chart (or outward normal) orients the surface, Omega;
* a saddle's descending 1-cell is oriented toward its stored +e_minus;
  the boundary of that cell is (+e_minus terminus) - (-e_minus terminus),
  so a descending branch contributes its branch sign;
* a maximum's 2-cell is oriented eps_m * Omega (eps_m stored, +1 default);
  a gradient line from the maximum m into a saddle s arriving on the
  ascending side a = b * e_plus contributes -eps_m * Omega_s(a, e_minus).
  (Walk the positively oriented link circle of m; transport of the crossing
  frame along the line is orientation-stable, which localizes the sign at s.)
* the ascending 1-cell of a saddle q is co-oriented by its descending
  orientation: it is traversed by c = Omega_q(e_minus, e_plus) * e_plus.
"""

import math

from .errors import (
    ChainMapViolation,
    EvaluationFailure,
    SignInconsistency,
    TransversalityFailure,
    ValidationLost,
)
from .homalg import RING_Z, BasedComplex, ChainMap, mat_is_zero, mat_mul, zeros
from .scenes import PlanarScene
from .tracing import (
    check_almost_transversality,
    extract_separatrices,
    perturb,
    trace_flow,
    validate_f_gradient,
)


def sorted_basis(scene, index):
    cps = [cp for cp in scene.critical_points if cp.index == index]
    cps.sort(key=lambda c: (c.value, c.id))
    return cps


def ascending_arrival_sign(scene, saddle, branch, eps_max=1):
    """Sign contributed to n(max, saddle) by the ascending branch
    `branch * e_plus` of `saddle` that reaches the maximum."""
    a = tuple(branch * x for x in saddle.e_plus)
    omega = scene.orientation(saddle.position, a, saddle.e_minus)
    return -eps_max * omega


def build_morse_complex(scene, separatrices=None, check_validation=True):
    """The chain complex on critical points with incidence boundary.

    Preconditions (checked): the field validates as an f-gradient and the
    scene is almost transverse.  d^2 = 0 is asserted; a violation is a
    sign-convention bug and raises SignInconsistency.
    """
    if check_validation:
        rep = validate_f_gradient(scene)
        if not rep.passed:
            raise ValidationLost("field fails f-gradient validation")
    if separatrices is None:
        separatrices = extract_separatrices(scene)
    diag = check_almost_transversality(scene, separatrices)
    if not diag.passed:
        raise TransversalityFailure(
            "saddle connections: %r" % (diag.offending,))

    basis = {k: sorted_basis(scene, k) for k in (0, 1, 2)}
    row_of = {k: {cp.id: i for i, cp in enumerate(basis[k])} for k in (0, 1, 2)}

    d1 = zeros(len(basis[0]), len(basis[1]))
    d2 = zeros(len(basis[1]), len(basis[2]))
    for sep in separatrices:
        t = sep.terminus
        if t.kind != "critical":
            raise EvaluationFailure(
                "separatrix of %s ended without a terminus: %r" % (sep.origin, t.kind))
        saddle = scene.crit_by_id(sep.origin)
        target = scene.crit_by_id(t.id)
        if sep.direction == "descending":
            if target.index != 0:
                raise TransversalityFailure(
                    "descending branch of %s hit index-%d point %s"
                    % (sep.origin, target.index, target.id))
            i = row_of[0][target.id]
            j = row_of[1][sep.origin]
            d1[i][j] += sep.branch
        else:
            if target.index != 2:
                raise TransversalityFailure(
                    "ascending branch of %s hit index-%d point %s"
                    % (sep.origin, target.index, target.id))
            i = row_of[1][sep.origin]
            j = row_of[2][target.id]
            d2[i][j] += ascending_arrival_sign(
                scene, saddle, sep.branch, target.orientation_sign)

    degrees = {k: [cp.id for cp in basis[k]] for k in (0, 1, 2) if basis[k]}
    boundary = {}
    if basis[0] and basis[1]:
        boundary[1] = d1
    if basis[1] and basis[2]:
        boundary[2] = d2
    if basis[0] and basis[1] and basis[2]:
        if not mat_is_zero(mat_mul(d1, d2)):
            raise SignInconsistency("d1 d2 != 0: %r %r" % (d1, d2))
    return BasedComplex(RING_Z, degrees, boundary)


# ---------------------------------------------------------------------------
# stability experiment


class StabilityReport:
    def __init__(self, scene_name, delta, trials, seed, outcomes):
        self.scene_name = scene_name
        self.delta = delta
        self.trials = trials
        self.seed = seed
        self.outcomes = outcomes  # list of {"seed", "identical", "detail"}

    @property
    def passes(self):
        return sum(1 for o in self.outcomes if o["identical"])

    def all_identical(self):
        return self.passes == len(self.outcomes)

    def as_dict(self):
        return {"scene": self.scene_name, "delta": self.delta,
                "trials": self.trials, "base_seed": self.seed,
                "passes": self.passes, "outcomes": self.outcomes}


def complexes_identical(a, b):
    """Basis-preserving equality: same labels, same integer entries."""
    if a.degrees != b.degrees:
        return False
    for k in set(a.boundary) | set(b.boundary):
        if a.d(k) != b.d(k):
            return False
    return True


def stability_experiment(scene, delta, trials, seed, scene_name=""):
    """Perturb the gradient `trials` times and compare incidence matrices
    entrywise under the label identification (similar orientations are kept:
    the perturbation preserves the stored eigenbasis data)."""
    base = build_morse_complex(scene)
    outcomes = []
    for i in range(trials):
        trial_seed = seed + i
        detail = ""
        try:
            pert = perturb(scene, trial_seed, delta)
            cx = build_morse_complex(pert, check_validation=False)
            same = complexes_identical(base, cx)
            if not same:
                detail = "incidence matrices differ"
        except Exception as exc:  # failures are data here
            same = False
            detail = "%s: %s" % (type(exc).__name__, exc)
        outcomes.append({"seed": trial_seed, "identical": same, "detail": detail})
    return StabilityReport(scene_name or scene.family, delta, trials, seed, outcomes)


def escalate_delta(scene, deltas, trials, seed):
    """Informational: the largest delta in the list with a perfect score."""
    best = None
    results = []
    for d in deltas:
        rep = stability_experiment(scene, d, trials, seed)
        results.append({"delta": d, "passes": rep.passes, "trials": trials})
        if rep.all_identical():
            best = d
        else:
            break
    return {"largest_all_pass": best, "ladder": results}


# ---------------------------------------------------------------------------
# induced maps of torus self-maps (the A-flat intersection formula)


class TorusAffineMap:
    """x -> M x + c on the flat torus chart, with integer matrix M."""

    def __init__(self, matrix, shift=(0.0, 0.0)):
        self.matrix = [[int(matrix[0][0]), int(matrix[0][1])],
                       [int(matrix[1][0]), int(matrix[1][1])]]
        self.shift = (float(shift[0]), float(shift[1]))
        self.det = (self.matrix[0][0] * self.matrix[1][1]
                    - self.matrix[0][1] * self.matrix[1][0])
        if self.det == 0:
            raise ValueError("degenerate torus map")

    def value(self, p):
        m, c = self.matrix, self.shift
        return (m[0][0] * p[0] + m[0][1] * p[1] + c[0],
                m[1][0] * p[0] + m[1][1] * p[1] + c[1])

    def jacobian(self):
        return self.matrix

    def preimages(self, q):
        """All solutions of A(x) = q mod 1 in the unit square."""
        m, c = self.matrix, self.shift
        det = self.det
        inv = ((m[1][1], -m[0][1]), (-m[1][0], m[0][0]))  # adj, divide by det
        out = []
        b0 = q[0] - c[0]
        b1 = q[1] - c[1]
        bound = abs(m[0][0]) + abs(m[0][1]) + abs(m[1][0]) + abs(m[1][1]) + 2
        for i in range(-bound, bound + 1):
            for j in range(-bound, bound + 1):
                x = (inv[0][0] * (b0 + i) + inv[0][1] * (b1 + j)) / det
                y = (inv[1][0] * (b0 + i) + inv[1][1] * (b1 + j)) / det
                x, y = x % 1.0, y % 1.0
                if not any(abs(x - u) % 1.0 < 1e-9 and abs(y - v) % 1.0 < 1e-9
                           for u, v in out):
                    out.append((x, y))
        if len(out) != abs(det):
            raise EvaluationFailure(
                "expected %d preimages, found %d" % (abs(det), len(out)))
        return out

    def describe(self):
        return {"matrix": self.matrix, "shift": list(self.shift)}


def oriented_image_polyline(scene_map, sep):
    """The A-image of one descending branch, oriented along the traversal
    of the oriented 1-cell (outward on the +branch, inward on the -branch)."""
    pts = [scene_map.value(p) for p in sep.trace.samples]
    if sep.branch == -1:
        pts = list(reversed(pts))
    return pts


def segment_crossings(scene, ppts, qpts, graze_tol, exclude_center=None,
                      exclude_radius=0.0):
    """Signed transverse crossings of two polylines on the torus.

    Returns a list of (sign, deck_dx) where sign = Omega(p-dir, q-dir) and
    deck_dx is the x-period shift applied to the q-polyline at the crossing
    (the deck power for circle-valued bookkeeping).  Near-parallel or
    near-endpoint hits raise TransversalityFailure.
    """
    hits = []
    for a0, a1 in zip(ppts, ppts[1:]):
        amx = (a0[0] + a1[0]) / 2
        amy = (a0[1] + a1[1]) / 2
        for b0, b1 in zip(qpts, qpts[1:]):
            dx = round(amx - (b0[0] + b1[0]) / 2)
            dy = round(amy - (b0[1] + b1[1]) / 2)
            c0 = (b0[0] + dx, b0[1] + dy)
            c1 = (b1[0] + dx, b1[1] + dy)
            if abs(c0[0] - amx) > 0.2 or abs(c0[1] - amy) > 0.2:
                continue
            u = (a1[0] - a0[0], a1[1] - a0[1])
            w = (c1[0] - c0[0], c1[1] - c0[1])
            denom = u[0] * w[1] - u[1] * w[0]
            r = (c0[0] - a0[0], c0[1] - a0[1])
            if denom == 0:
                continue
            t = (r[0] * w[1] - r[1] * w[0]) / denom
            s = (r[0] * u[1] - r[1] * u[0]) / denom
            if -graze_tol < t < 1 + graze_tol and -graze_tol < s < 1 + graze_tol:
                inside_t = graze_tol < t < 1 - graze_tol
                inside_s = graze_tol < s < 1 - graze_tol
                half_open = (0.0 <= t < 1.0) and (0.0 <= s < 1.0)
                if not half_open:
                    continue
                if not (inside_t and inside_s):
                    # crossing at a shared vertex: legitimate for polylines,
                    # counted once by the half-open convention, but only when
                    # clearly transverse
                    ulen = math.hypot(*u)
                    wlen = math.hypot(*w)
                    if abs(denom) < 1e-6 * ulen * wlen:
                        raise TransversalityFailure(
                            "grazing crossing near %r" % ((amx, amy),))
                px = a0[0] + t * u[0]
                py = a0[1] + t * u[1]
                if exclude_center is not None:
                    d = scene.displacement((px, py), exclude_center)
                    if d[0] * d[0] + d[1] * d[1] < exclude_radius ** 2:
                        continue
                sign = 1 if denom > 0 else -1
                hits.append((sign, -dx))
    return hits


def ascending_curve(scene, separatrices, saddle_id):
    """The two ascending branches of a saddle, each oriented outward, with
    the outward-traversal sign relative to the co-orientation c."""
    saddle = scene.crit_by_id(saddle_id)
    omega = scene.orientation(saddle.position, saddle.e_minus, saddle.e_plus)
    out = []
    for sep in separatrices:
        if sep.origin == saddle_id and sep.direction == "ascending":
            out.append((sep.trace.samples, sep.branch * omega))
    return out


def induced_map(scene_map, src, dst, src_seps=None, dst_seps=None):
    """Chain map of an affine torus map via intersection indices:
    n(p, q) = A(descending cell of p) . (ascending cell of q)."""
    if not isinstance(src, PlanarScene) or not isinstance(dst, PlanarScene):
        raise EvaluationFailure("induced maps are computed on flat torus scenes")
    if src_seps is None:
        src_seps = extract_separatrices(src)
    if dst_seps is None:
        dst_seps = extract_separatrices(dst)
    graze = src.numerics.graze_tol
    rho = dst.numerics.trap_radius

    src_basis = {k: sorted_basis(src, k) for k in (0, 1, 2)}
    dst_basis = {k: sorted_basis(dst, k) for k in (0, 1, 2)}
    comps = {}

    # degree 0: image of a minimum lands in exactly one attracting basin
    if src_basis[0]:
        m = zeros(len(dst_basis[0]), len(src_basis[0]))
        for j, p in enumerate(src_basis[0]):
            z = scene_map.value(p.position)
            _check_clear_of_skeleton(dst, dst_seps, z, 0)
            tr = trace_flow(dst, z, -1)
            if tr.terminus.kind != "critical":
                raise EvaluationFailure("image of %s did not descend to a minimum" % p.id)
            q = dst.crit_by_id(tr.terminus.id)
            if q.index != 0:
                raise TransversalityFailure(
                    "image of minimum %s flows to %s" % (p.id, q.id))
            i = [c.id for c in dst_basis[0]].index(q.id)
            m[i][j] += 1
        comps[0] = m

    # degree 1: crossings of image descending cells with ascending cells
    if src_basis[1]:
        m = zeros(len(dst_basis[1]), len(src_basis[1]))
        for j, p in enumerate(src_basis[1]):
            branches = [s for s in src_seps
                        if s.origin == p.id and s.direction == "descending"]
            for i, q in enumerate(dst_basis[1]):
                total = 0
                a_pos = scene_map.value(p.position)
                d = dst.displacement(a_pos, q.position)
                at_q = d[0] * d[0] + d[1] * d[1] < rho * rho
                cq = dst.orientation(q.position, q.e_minus, q.e_plus)
                for sepp in branches:
                    img = oriented_image_polyline(scene_map, sepp)
                    traversal = 1  # already reversed for the -branch
                    for qpts, out_sign in ascending_curve(dst, dst_seps, q.id):
                        hits = segment_crossings(
                            dst, img, qpts, graze,
                            exclude_center=q.position if at_q else None,
                            exclude_radius=3 * rho)
                        for sign, _ in hits:
                            total += traversal * out_sign * sign
                if at_q:
                    da = scene_map.jacobian()
                    em = p.e_minus
                    img_dir = (da[0][0] * em[0] + da[0][1] * em[1],
                               da[1][0] * em[0] + da[1][1] * em[1])
                    chat = tuple(cq * x for x in q.e_plus)
                    o = dst.orientation(q.position, img_dir, chat)
                    if o == 0:
                        raise TransversalityFailure(
                            "image of %s tangent to ascending cell of %s" % (p.id, q.id))
                    total += o
                m[i][j] = total
        comps[1] = m

    # degree 2: local degree of the image of the open 2-cell over each max
    if src_basis[2]:
        m = zeros(len(dst_basis[2]), len(src_basis[2]))
        det_sign = 1 if scene_map.det > 0 else -1
        for i, q in enumerate(dst_basis[2]):
            for x in scene_map.preimages(q.position):
                _check_clear_of_skeleton(src, src_seps, x, 2)
                tr = trace_flow(src, x, +1)
                if tr.terminus.kind != "critical":
                    raise EvaluationFailure("preimage did not ascend to a maximum")
                p = src.crit_by_id(tr.terminus.id)
                if p.index != 2:
                    raise TransversalityFailure(
                        "preimage of %s ascends to %s" % (q.id, p.id))
                j = [c.id for c in src_basis[2]].index(p.id)
                m[i][j] += det_sign * p.orientation_sign * q.orientation_sign
        comps[2] = m

    src_cx = build_morse_complex(src, src_seps, check_validation=False)
    dst_cx = build_morse_complex(dst, dst_seps, check_validation=False)
    try:
        return ChainMap(src_cx, dst_cx, comps)
    except ChainMapViolation:
        raise


def _check_clear_of_skeleton(scene, separatrices, z, target_index):
    """Transversality of a 0-dimensional intersection problem: the point z
    must avoid the stable set of the flow used to resolve it, except for
    the open cell of a point of `target_index` itself."""
    tol = 2 * scene.numerics.seed_offset
    bad_direction = "ascending" if target_index == 0 else "descending"
    for cp in scene.critical_points:
        if cp.index == target_index:
            continue
        d = scene.displacement(z, cp.position)
        if d[0] * d[0] + d[1] * d[1] < tol * tol:
            raise TransversalityFailure(
                "image point %r sits on critical point %s" % (z, cp.id))
    for sep in separatrices:
        if sep.direction != bad_direction:
            continue
        for p in sep.trace.samples[::4]:
            d = scene.displacement(z, p)
            if d[0] * d[0] + d[1] * d[1] < tol * tol:
                raise TransversalityFailure(
                    "image point %r grazes a %s cell of %s"
                    % (z, bad_direction, sep.origin))


def homology_map_on_top(chain_map):
    """The induced matrix on top homology when boundaries vanish there."""
    k = max(chain_map.target.degrees)
    return chain_map.f(k)
