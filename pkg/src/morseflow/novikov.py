"""Novikov complexes of circle-valued scenes over truncated Z((t)).

The infinite cyclic covering is realized concretely on the lifted chart
(x unreduced, F(x - 1, y) = F(x, y) - 1; the deck generator t is x -> x-1).
Boundary entries gather signed flow-line counts per deck power: the
coefficient of t^k in the (q, p) entry counts flow lines from the basis
lift of p to t^k times the basis lift of q.

Basis lifts are chosen with value in (lambda - 1, lambda]; all counting is
done on one representative per orbit and is t-equivariant by construction.
"""

import math

from .config import DEFAULT_ORDER
from .errors import (
    EvaluationFailure,
    MismatchError,
    RegularValueError,
    SceneError,
    TransversalityFailure,
)
from .homalg import RING_NOVIKOV, RING_Z, BasedComplex, ChainMap, zeros
from .morse import ascending_arrival_sign, sorted_basis
from .rings import NovikovSeries
from .scenes import PlanarScene
from .tracing import saddle_branch_start, trace_flow, validate_f_gradient

#: extra winding traced beyond the requested order so that every
#: coefficient of t^k, k <= order, is complete
DEPTH_MARGIN = 2


def require_circle_valued(scene):
    if not isinstance(scene, PlanarScene) or scene.winding != 1:
        raise SceneError("need a circle-valued planar scene")


def check_regular(scene, lam, tol=1e-3):
    for cp in scene.critical_points:
        d = (lam - cp.value) % 1.0
        d = min(d, 1.0 - d)
        if d < tol:
            raise RegularValueError(
                "lambda=%r is within %g of the critical value of %s"
                % (lam, d, cp.id))


def basis_shift(cp, lam):
    """a with F(t^a p) = value - a in (lambda - 1, lambda]."""
    return math.ceil(cp.value - lam - 1e-12)


def regular_interval(scene, lam):
    """The component of regular values containing lam (an arc mod 1)."""
    vals = sorted(set((cp.value - lam) % 1.0 for cp in scene.critical_points))
    if not vals:
        return (lam, lam + 1.0)
    lo = vals[-1] - 1.0
    hi = vals[0]
    return (lam + lo, lam + hi)


# ---------------------------------------------------------------------------
# flow-line counting on the cover


def _branch_contributions(scene, max_depth):
    """Trace all saddle branches on the cover, far enough to resolve deck
    powers up to max_depth.

    Returns (down, up): down[saddle_id] = list of (branch, min_id, j, sign)
    meaning a flow line from the position lift of the saddle to t^j (position
    lift of the minimum); up[saddle_id] = list of (branch, max_id, j, sign)
    meaning a flow line from t^{-j}... recorded as n(max, t^j saddle).
    Branches that leave the window are honest truncations.
    """
    down = {}
    up = {}
    for cp in scene.critical_points:
        if cp.index != 1:
            continue
        down[cp.id] = []
        up[cp.id] = []
        for branch in (1, -1):
            start = saddle_branch_start(scene, cp, cp.e_minus, branch)
            tr = trace_flow(scene, start, -1, origin_id=cp.id,
                            levels=[cp.value - max_depth],
                            max_length=4.0 * max_depth + 20)
            t = tr.terminus
            if t.kind == "critical":
                target = scene.crit_by_id(t.id)
                if target.index == 1:
                    raise TransversalityFailure(
                        "saddle connection %s -> %s (deck %d)"
                        % (cp.id, t.id, -t.deck))
                if target.index != 0:
                    raise EvaluationFailure(
                        "descending branch of %s ended at %s" % (cp.id, t.id))
                down[cp.id].append((branch, t.id, -t.deck, branch))
            # terminus "level": truncated below max_depth, contributes nothing
            start = saddle_branch_start(scene, cp, cp.e_plus, branch)
            tr = trace_flow(scene, start, +1, origin_id=cp.id,
                            levels=[cp.value + max_depth],
                            max_length=4.0 * max_depth + 20)
            t = tr.terminus
            if t.kind == "critical":
                target = scene.crit_by_id(t.id)
                if target.index == 1:
                    raise TransversalityFailure(
                        "saddle connection %s -> %s (deck %d)"
                        % (t.id, cp.id, t.deck))
                if target.index != 2:
                    raise EvaluationFailure(
                        "ascending branch of %s ended at %s" % (cp.id, t.id))
                sign = ascending_arrival_sign(scene, cp, branch,
                                              target.orientation_sign)
                up[cp.id].append((branch, t.id, t.deck, sign))
    return down, up


def build_novikov_complex(scene, lam, order=DEFAULT_ORDER, validate=True):
    """The free Z((t))-complex on the critical orbits, to precision order."""
    require_circle_valued(scene)
    check_regular(scene, lam)
    if validate:
        rep = validate_f_gradient(scene)
        if not rep.passed:
            raise EvaluationFailure("field fails f-gradient validation")
    basis = {k: sorted_basis(scene, k) for k in (0, 1, 2)}
    shifts = {cp.id: basis_shift(cp, lam) for cp in scene.critical_points}
    if not scene.critical_points:
        return BasedComplex(RING_NOVIKOV, {}, {}, order=order)

    down, up = _branch_contributions(scene, order + DEPTH_MARGIN)

    def entry_counts(pairs):
        counts = {}
        for _branch, _tid, j, sign in pairs:
            counts[j] = counts.get(j, 0) + sign
        return counts

    boundary = {}
    if basis[0] and basis[1]:
        d1 = [[NovikovSeries.zero() for _ in basis[1]] for _ in basis[0]]
        for jcol, s in enumerate(basis[1]):
            per_min = {}
            for branch, tid, j, sign in down[s.id]:
                k = j + shifts[s.id] - shifts[tid]
                per_min.setdefault(tid, {}).setdefault(k, 0)
                per_min[tid][k] += sign
            for irow, q in enumerate(basis[0]):
                if q.id in per_min:
                    d1[irow][jcol] = NovikovSeries.from_poly(
                        per_min[q.id], order=order)
        boundary[1] = d1
    if basis[1] and basis[2]:
        d2 = [[NovikovSeries.zero() for _ in basis[2]] for _ in basis[1]]
        for irow, s in enumerate(basis[1]):
            per_max = {}
            for branch, tid, j, sign in up[s.id]:
                k = j + shifts[tid] - shifts[s.id]
                per_max.setdefault(tid, {}).setdefault(k, 0)
                per_max[tid][k] += sign
            for jcol, m in enumerate(basis[2]):
                if m.id in per_max:
                    d2[irow][jcol] = NovikovSeries.from_poly(
                        per_max[m.id], order=order)
        boundary[2] = d2
    degrees = {k: [cp.id for cp in basis[k]] for k in (0, 1, 2) if basis[k]}
    return BasedComplex(RING_NOVIKOV, degrees, boundary, order=order)


# ---------------------------------------------------------------------------
# the unrolled cobordism W_n and the truncation tower


def strip_lifts(scene, lam, n):
    """Lifted critical points with value in (lambda - n, lambda), indexed by
    (id, d) where d in [0, n) counts decks below the basis lift."""
    out = {}
    for cp in scene.critical_points:
        a0 = basis_shift(cp, lam)
        out[cp.id] = [(d, a0 + d) for d in range(n)]
    return out


def strip_morse_complex(scene, lam, n):
    """Morse complex of the cobordism F^{-1}([lambda - n, lambda]), built by
    tracing each lifted saddle branch inside the strip (boundary exits drop
    out).  This is the independent side of the tower check."""
    require_circle_valued(scene)
    check_regular(scene, lam)
    basis = {k: sorted_basis(scene, k) for k in (0, 1, 2)}
    shifts = {cp.id: basis_shift(cp, lam) for cp in scene.critical_points}

    labels = {}
    for k in (0, 1, 2):
        labels[k] = [(cp.id, d) for cp in basis[k] for d in range(n)]
    index_of = {k: {lab: i for i, lab in enumerate(labels[k])} for k in (0, 1, 2)}

    d1 = zeros(len(labels[0]), len(labels[1]))
    d2 = zeros(len(labels[1]), len(labels[2]))
    for s in basis[1]:
        for d in range(n):
            a = shifts[s.id] + d
            lifted = (s.position[0] - a, s.position[1])
            for branch in (1, -1):
                eps = scene.numerics.seed_offset
                start = tuple(x + branch * eps * e
                              for x, e in zip(lifted, s.e_minus))
                tr = trace_flow(scene, start, -1, origin_id=s.id,
                                levels=[lam - n], max_length=4.0 * n + 20)
                t = tr.terminus
                if t.kind == "critical":
                    q = scene.crit_by_id(t.id)
                    if q.index != 0:
                        raise TransversalityFailure(
                            "strip saddle connection %s -> %s" % (s.id, t.id))
                    dq = -t.deck - shifts[t.id]
                    if 0 <= dq < n:
                        d1[index_of[0][(t.id, dq)]][index_of[1][(s.id, d)]] += branch
                start = tuple(x + branch * eps * e
                              for x, e in zip(lifted, s.e_plus))
                tr = trace_flow(scene, start, +1, origin_id=s.id,
                                levels=[lam], max_length=4.0 * n + 20)
                t = tr.terminus
                if t.kind == "critical":
                    m = scene.crit_by_id(t.id)
                    if m.index != 2:
                        raise TransversalityFailure(
                            "strip saddle connection %s -> %s" % (t.id, s.id))
                    dm = -t.deck - shifts[t.id]
                    if 0 <= dm < n:
                        sign = ascending_arrival_sign(scene, s, branch,
                                                      m.orientation_sign)
                        d2[index_of[1][(s.id, d)]][index_of[2][(t.id, dm)]] += sign
    degrees = {k: [_strip_label(l) for l in labels[k]] for k in (0, 1, 2) if labels[k]}
    boundary = {}
    if labels[0] and labels[1]:
        boundary[1] = d1
    if labels[1] and labels[2]:
        boundary[2] = d2
    return BasedComplex(RING_Z, degrees, boundary)


def _strip_label(lab):
    return "%s@%d" % lab


def truncate_novikov_to_z(ncx, n):
    """N^lam / t^n N^lam as a based Z-complex on labels (id, d), d < n."""
    degrees = {}
    boundary = {}
    for k, labs in ncx.degrees.items():
        degrees[k] = ["%s@%d" % (lab, d) for lab in labs for d in range(n)]
    for k in ncx.boundary:
        rows = ncx.degrees.get(k - 1, [])
        cols = ncx.degrees.get(k, [])
        mat = ncx.d(k)
        out = zeros(len(rows) * n, len(cols) * n)
        for i in range(len(rows)):
            for j in range(len(cols)):
                s = mat[i][j]
                if not isinstance(s, NovikovSeries) or s.is_zero():
                    continue
                for d in range(n):
                    for k2 in range(0, n - d):
                        try:
                            c = s.coeff(k2)
                        except Exception:
                            break
                        if c:
                            out[i * n + (d + k2)][j * n + d] = c
        boundary[k] = out
    return BasedComplex(RING_Z, {k: v for k, v in degrees.items() if v},
                        {k: v for k, v in boundary.items() if v and v[0]})


def truncation_tower_check(scene, lam, n, order=None, ncx=None):
    """Prop-4.1 consequence: the truncated boundary equals the Morse
    boundary of the unrolled cobordism W_n, entrywise under (id, deck)."""
    order = order or (n + DEPTH_MARGIN)
    if ncx is None:
        ncx = build_novikov_complex(scene, lam, order=max(order, n + 1))
    truncated = truncate_novikov_to_z(ncx, n)
    strip = strip_morse_complex(scene, lam, n)
    if n == 0:
        return {"n": 0, "equal": True, "generators": 0}
    if truncated.degrees != strip.degrees:
        raise MismatchError("tower n=%d: label mismatch %r vs %r"
                            % (n, truncated.degrees, strip.degrees))
    for k in set(truncated.boundary) | set(strip.boundary):
        a = truncated.d(k)
        b = strip.d(k)
        for i in range(len(a)):
            for j in range(len(a[0]) if a else 0):
                if a[i][j] != b[i][j]:
                    raise MismatchError(
                        "tower n=%d: first differing entry degree %d (%d,%d): %r vs %r"
                        % (n, k, i, j, a[i][j], b[i][j]),
                        first_diff=(k, i, j))
    return {"n": n, "equal": True,
            "generators": sum(len(v) for v in strip.degrees.values())}


# ---------------------------------------------------------------------------
# induced maps over the Novikov ring


def novikov_induced_map(scene_map, src, dst, lam, order=DEFAULT_ORDER,
                        src_cx=None, dst_cx=None):
    """Chain map of a circle-compatible torus map over truncated Z((t)).

    The affine chart formula IS the chosen lift of the map (its basepoint
    image is explicit); composing with t^k is a different lift and scales
    the matrix by t^k.  Entries gather intersection counts per deck power;
    the chain-map identity is asserted to the stated order.
    """
    from .morse import (ascending_curve, oriented_image_polyline,
                        segment_crossings)
    from .tracing import extract_separatrices

    require_circle_valued(src)
    require_circle_valued(dst)
    _check_class_compatible(scene_map, src, dst)
    if src_cx is None:
        src_cx = build_novikov_complex(src, lam, order=order)
    if dst_cx is None:
        dst_cx = build_novikov_complex(dst, lam, order=order)
    depth = order + DEPTH_MARGIN
    src_seps = extract_separatrices(src, depth=depth)
    dst_seps = extract_separatrices(dst, depth=depth)
    src_basis = {k: sorted_basis(src, k) for k in (0, 1, 2)}
    dst_basis = {k: sorted_basis(dst, k) for k in (0, 1, 2)}
    s_shift = {cp.id: basis_shift(cp, lam) for cp in src.critical_points}
    d_shift = {cp.id: basis_shift(cp, lam) for cp in dst.critical_points}
    graze = src.numerics.graze_tol
    rho = dst.numerics.trap_radius
    comps = {}

    def series(counts):
        return NovikovSeries.from_poly(counts, order=order)

    # degree 0
    if src_basis[0]:
        m = [[NovikovSeries.zero() for _ in src_basis[0]]
             for _ in dst_basis[0]]
        for j, p in enumerate(src_basis[0]):
            z = scene_map.value(p.position)
            tr = trace_flow(dst, z, -1, levels=[dst.f_lift(z) - depth])
            t = tr.terminus
            if t.kind != "critical" or dst.crit_by_id(t.id).index != 0:
                raise TransversalityFailure(
                    "image of %s has no minimum within depth" % p.id)
            i = [c.id for c in dst_basis[0]].index(t.id)
            k = -t.deck + s_shift[p.id] - d_shift[t.id]
            m[i][j] = series({k: 1})
        comps[0] = m

    # degree 1: crossings per deck power
    if src_basis[1]:
        m = [[NovikovSeries.zero() for _ in src_basis[1]]
             for _ in dst_basis[1]]
        for j, p in enumerate(src_basis[1]):
            branches = [s for s in src_seps
                        if s.origin == p.id and s.direction == "descending"]
            for i, q in enumerate(dst_basis[1]):
                counts = {}
                a_pos = scene_map.value(p.position)
                dproj = dst.displacement(a_pos, q.position)
                at_q = dproj[0] ** 2 + dproj[1] ** 2 < rho * rho
                at_q_deck = dst.deck_offset(
                    (a_pos[0] - dproj[0], a_pos[1] - dproj[1]), q.position) if at_q else 0
                cq = dst.orientation(q.position, q.e_minus, q.e_plus)
                for sepp in branches:
                    img = oriented_image_polyline(scene_map, sepp)
                    for qpts, out_sign in ascending_curve(dst, dst_seps, q.id):
                        hits = segment_crossings(
                            dst, img, qpts, graze,
                            exclude_center=q.position if at_q else None,
                            exclude_radius=3 * rho)
                        for sign, deck in hits:
                            k = deck + s_shift[p.id] - d_shift[q.id]
                            counts[k] = counts.get(k, 0) + out_sign * sign
                if at_q:
                    da = scene_map.jacobian()
                    em = p.e_minus
                    img_dir = (da[0][0] * em[0] + da[0][1] * em[1],
                               da[1][0] * em[0] + da[1][1] * em[1])
                    chat = tuple(cq * x for x in q.e_plus)
                    o = dst.orientation(q.position, img_dir, chat)
                    if o == 0:
                        raise TransversalityFailure(
                            "image of %s tangent to ascending cell of %s"
                            % (p.id, q.id))
                    k = -at_q_deck + s_shift[p.id] - d_shift[q.id]
                    counts[k] = counts.get(k, 0) + o
                m[i][j] = series(counts)
        comps[1] = m

    # degree 2
    if src_basis[2]:
        m = [[NovikovSeries.zero() for _ in src_basis[2]]
             for _ in dst_basis[2]]
        det_sign = 1 if scene_map.det > 0 else -1
        for i, q in enumerate(dst_basis[2]):
            counts_by_col = {}
            for x in scene_map.preimages(q.position):
                ax = scene_map.value(x)
                ishift = round(ax[0] - q.position[0])
                tr = trace_flow(src, x, +1, levels=[src.f_lift(x) + depth])
                t = tr.terminus
                if t.kind != "critical" or src.crit_by_id(t.id).index != 2:
                    continue  # preimage ascends out of the window
                pmax = src.crit_by_id(t.id)
                jcol = [c.id for c in src_basis[2]].index(t.id)
                k = t.deck - ishift + s_shift[t.id] - d_shift[q.id]
                counts_by_col.setdefault(jcol, {}).setdefault(k, 0)
                counts_by_col[jcol][k] += (det_sign * pmax.orientation_sign
                                           * q.orientation_sign)
            for jcol, counts in counts_by_col.items():
                m[i][jcol] = series(counts)
        comps[2] = m

    return ChainMap(src_cx, dst_cx, comps, order=order)


def _check_class_compatible(scene_map, src, dst):
    """cond: f2 o A homotopic to f1, i.e. the difference is bounded."""
    samples = [(0.13 + 0.61 * i, 0.29 + 0.37 * i) for i in range(5)]
    base = None
    for p in samples:
        d = dst.f_lift(scene_map.value(p)) - src.f_lift(p)
        if base is None:
            base = d
        elif abs(d - base) > 2.5:
            raise SceneError(
                "map does not satisfy f2 o A ~ f1 (winding mismatch)")
    m = scene_map.matrix
    if m[0][0] != 1 or m[0][1] != 0:
        raise SceneError("lifted map must preserve the S^1 class: "
                         "x-row of the matrix must be (1, 0)")
