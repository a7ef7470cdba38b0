"""Based chain complexes, Smith normal form, homology, cones, and torsion.

Complexes are finitely generated and free with a labeled basis per degree.
Entries of boundary matrices are plain ints (over Z) or NovikovSeries (over
truncated Z((t))); the matrix helpers are duck-typed over both.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .config import DEFAULT_ORDER
from .errors import (
    BoundarySquareNonzero,
    ChainMapViolation,
    NotAcyclic,
    NotAUnit,
)
from .rings import NovikovSeries, normalize_torsion

RING_Z = "Z"
RING_NOVIKOV = "Z((t))"


# ---------------------------------------------------------------------------
# generic matrix helpers (entries: int | Fraction | NovikovSeries)


def is_zero_entry(e):
    if isinstance(e, NovikovSeries):
        return e.is_zero()
    return e == 0


def zeros(rows, cols):
    return [[0] * cols for _ in range(rows)]

def identity(n):
    m = zeros(n, n)
    for i in range(n):
        m[i][i] = 1
    return m


def mat_mul(a, b):
    if not a or not b:
        return zeros(len(a), len(b[0]) if b else 0)
    rows, inner, cols = len(a), len(b), len(b[0])
    out = zeros(rows, cols)
    for i in range(rows):
        ai = a[i]
        for k in range(inner):
            x = ai[k]
            if is_zero_entry(x):
                continue
            bk = b[k]
            oi = out[i]
            for j in range(cols):
                y = bk[j]
                if not is_zero_entry(y):
                    oi[j] = oi[j] + x * y
    return out


def mat_neg(a):
    return [[-x for x in row] for row in a]


def mat_is_zero(a):
    return all(is_zero_entry(x) for row in a for x in row)


def mat_eq(a, b):
    if len(a) != len(b) or (a and len(a[0]) != len(b[0])):
        return False
    for ra, rb in zip(a, b):
        for x, y in zip(ra, rb):
            if isinstance(x, NovikovSeries) or isinstance(y, NovikovSeries):
                if NovikovSeries.promote(x) != NovikovSeries.promote(y):
                    return False
            elif x != y:
                return False
    return True


def entry_to_json(e):
    if isinstance(e, NovikovSeries):
        return e.to_json()
    return e


# ---------------------------------------------------------------------------


@dataclass
class HomologyReport:
    """Free rank and torsion coefficients (a divisibility chain) per degree."""

    ranks: dict
    torsion: dict

    def rank_tuple(self, top_degree=None):
        top = top_degree if top_degree is not None else (max(self.ranks) if self.ranks else 0)
        return tuple(self.ranks.get(k, 0) for k in range(top + 1))

    def as_dict(self):
        return {"ranks": {str(k): v for k, v in sorted(self.ranks.items())},
                "torsion": {str(k): list(v) for k, v in sorted(self.torsion.items())}}


class BasedComplex:
    """Free based chain complex; d^2 = 0 is enforced at construction.

    degrees: {k: [labels]}; boundary: {k: matrix} where boundary[k] maps
    degree k to degree k-1 (rows indexed by the (k-1)-basis).
    """

    def __init__(self, ring, degrees, boundary, order=DEFAULT_ORDER, check=True):
        self.ring = ring
        self.order = order
        self.degrees = {k: list(v) for k, v in degrees.items() if v}
        self.boundary = {}
        for k, mat in boundary.items():
            if not mat or not any(len(r) for r in mat):
                continue
            self.boundary[k] = [list(r) for r in mat]
        if check:
            self._check_shapes()
            self._check_d_squared()

    def dim(self, k):
        return len(self.degrees.get(k, []))

    def top_degree(self):
        return max(self.degrees) if self.degrees else 0

    def d(self, k):
        """Boundary matrix degree k -> k-1, materialized with correct shape."""
        mat = self.boundary.get(k)
        if mat is None:
            return zeros(self.dim(k - 1), self.dim(k))
        return mat

    def _check_shapes(self):
        for k, mat in self.boundary.items():
            rows, cols = self.dim(k - 1), self.dim(k)
            if len(mat) != rows or any(len(r) != cols for r in mat):
                raise BoundarySquareNonzero(
                    "boundary[%d] has shape %dx%s, expected %dx%d"
                    % (k, len(mat), len(mat[0]) if mat else 0, rows, cols))

    def _check_d_squared(self):
        for k in list(self.degrees):
            if self.dim(k) and self.dim(k - 1) and self.dim(k - 2):
                sq = mat_mul(self.d(k - 1), self.d(k))
                if not mat_is_zero(sq):
                    raise BoundarySquareNonzero(
                        "d^2 != 0 from degree %d" % k)

    def relabel(self, fn):
        return BasedComplex(self.ring,
                            {k: [fn(x) for x in v] for k, v in self.degrees.items()},
                            self.boundary, order=self.order, check=False)

    def to_json(self):
        return {
            "ring": self.ring,
            "order": self.order,
            "degrees": {str(k): list(v) for k, v in sorted(self.degrees.items())},
            "boundary": {
                str(k): [[i, j, entry_to_json(mat[i][j])]
                         for i in range(len(mat)) for j in range(len(mat[0]))
                         if not is_zero_entry(mat[i][j])]
                for k, mat in sorted(self.boundary.items())
            },
        }


class ChainMap:
    """Degreewise matrices commuting with the boundaries."""

    def __init__(self, source, target, components, check=True, order=None):
        self.source = source
        self.target = target
        self.order = order or min(source.order, target.order)
        self.components = {}
        for k, mat in components.items():
            if mat and any(len(r) for r in mat):
                self.components[k] = [list(r) for r in mat]
        if check:
            self._check_chain_identity()

    def f(self, k):
        mat = self.components.get(k)
        if mat is None:
            return zeros(self.target.dim(k), self.source.dim(k))
        return mat

    def _check_chain_identity(self):
        degs = set(self.source.degrees) | set(self.target.degrees)
        for k in degs:
            lhs = mat_mul(self.target.d(k), self.f(k))
            rhs = mat_mul(self.f(k - 1), self.source.d(k))
            if not _agree_to_order(lhs, rhs, self.order):
                raise ChainMapViolation(
                    "dF != Fd in degree %d" % k)

    def compose(self, other):
        """self after other (other: A -> B, self: B -> C)."""
        comps = {}
        for k in set(self.components) | set(other.components):
            comps[k] = mat_mul(self.f(k), other.f(k))
        return ChainMap(other.source, self.target, comps, check=False,
                        order=min(self.order, other.order))

    @classmethod
    def identity(cls, cx):
        return cls(cx, cx, {k: identity(cx.dim(k)) for k in cx.degrees}, check=False)


def _agree_to_order(a, b, order):
    for ra, rb in zip(a, b):
        for x, y in zip(ra, rb):
            if isinstance(x, NovikovSeries) or isinstance(y, NovikovSeries):
                if not NovikovSeries.promote(x).agrees_with(
                        NovikovSeries.promote(y), order):
                    return False
            elif x != y:
                return False
    return True


# ---------------------------------------------------------------------------
# Smith normal form over Z


def smith_normal_form(m):
    """(diag, left, right) with left*m*right diagonal, divisibility chain,
    and left, right unimodular.  Entries must be ints."""
    a = [list(map(int, row)) for row in m]
    rows = len(a)
    cols = len(a[0]) if rows else 0
    left = identity(rows)
    right = identity(cols)

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        left[i], left[j] = left[j], left[i]

    def swap_cols(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in right:
            r[i], r[j] = r[j], r[i]

    def add_row(src, dst, c):
        a[dst] = [x + c * y for x, y in zip(a[dst], a[src])]
        left[dst] = [x + c * y for x, y in zip(left[dst], left[src])]

    def add_col(src, dst, c):
        for r in a:
            r[dst] += c * r[src]
        for r in right:
            r[dst] += c * r[src]

    def negate_row(i):
        a[i] = [-x for x in a[i]]
        left[i] = [-x for x in left[i]]

    def nearest_q(x, p):
        # nearest-integer quotient keeps remainders in [-|p|/2, |p|/2];
        # floor division leaves r with the sign of p, so the correction is
        # always q+1 (r - p flips r across zero and shrinks it)
        q, r = divmod(x, p)
        if 2 * abs(r) > abs(p):
            q += 1
        return q

    t = 0
    while True:
        pivot = None
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                v = abs(a[i][j])
                if v and (best is None or v < best):
                    best, pivot = v, (i, j)
        if pivot is None:
            break
        pi, pj = pivot
        swap_rows(t, pi)
        swap_cols(t, pj)
        p = a[t][t]
        dirty = False
        for i in range(t + 1, rows):
            if a[i][t]:
                add_row(t, i, -nearest_q(a[i][t], p))
                dirty = dirty or bool(a[i][t])
        for j in range(t + 1, cols):
            if a[t][j]:
                add_col(t, j, -nearest_q(a[t][j], p))
                dirty = dirty or bool(a[t][j])
        if dirty:
            continue  # re-select a (strictly smaller) pivot
        bad = None
        for i in range(t + 1, rows):
            for j in range(t + 1, cols):
                if a[i][j] % p:
                    bad = i
                    break
            if bad is not None:
                break
        if bad is not None:
            add_row(bad, t, 1)
            continue
        if p < 0:
            negate_row(t)
        t += 1
    diag = [a[i][i] for i in range(min(rows, cols)) if a[i][i]]
    return diag, left, right


def homology(cx):
    """Homology of a complex over Z from SNF of consecutive boundaries."""
    if cx.ring != RING_Z:
        raise ValueError("homology over Z needs an integer complex")
    ranks = {}
    torsion = {}
    top = cx.top_degree()
    for k in range(0, top + 1):
        nk = cx.dim(k)
        if nk == 0:
            continue
        rk_in = _int_rank(cx.d(k)) if cx.dim(k - 1) else 0
        d_up = cx.d(k + 1)
        diag_up, _, _ = smith_normal_form(d_up) if cx.dim(k + 1) else ([], None, None)
        rk_up = len(diag_up)
        ranks[k] = nk - rk_in - rk_up
        tors = [d for d in diag_up if abs(d) > 1]
        if tors:
            torsion[k] = tors
    return HomologyReport(ranks=ranks, torsion=torsion)


def _int_rank(m):
    diag, _, _ = smith_normal_form(m)
    return len(diag)


def integer_rank(m):
    return _int_rank(m)


# ---------------------------------------------------------------------------
# linear algebra over the field Q((t)) (truncated)


def _as_series(e, order):
    s = NovikovSeries.promote(e, order)
    return s


def _pivot_priority(e):
    """Sort key: prefer low valuation, then unit (+-1) leading coefficient."""
    lead = e.leading()
    unit = 0 if lead in (1, -1) else 1
    return (e.valuation, unit)


def series_row_reduce(mat, order, rng=None):
    """In-place Gaussian elimination over Q((t)); returns pivot columns.

    Rows are combined with rational multiples; the reduction is deterministic
    unless ``rng`` is given, which shuffles among equally ranked pivots (used
    to randomize chain contractions).
    """
    rows = len(mat)
    cols = len(mat[0]) if rows else 0
    a = [[_as_series(x, order) for x in row] for row in mat]
    piv_rows = []
    r = 0
    for c in range(cols):
        candidates = [(i, a[i][c]) for i in range(r, rows) if not a[i][c].is_zero()]
        if not candidates:
            continue
        candidates.sort(key=lambda t: (_pivot_priority(t[1]), t[0]))
        if rng is not None and len(candidates) > 1:
            k0 = _pivot_priority(candidates[0][1])
            tied = [t for t in candidates if _pivot_priority(t[1]) == k0]
            candidates[0] = tied[rng.randrange(len(tied))]
        i0 = candidates[0][0]
        a[r], a[i0] = a[i0], a[r]
        inv = a[r][c].inverse(field=True)
        for i in range(rows):
            if i != r and not a[i][c].is_zero():
                factor = a[i][c] * inv
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        piv_rows.append(c)
        r += 1
        if r == rows:
            break
    return a, piv_rows


def series_rank(mat, order):
    if not mat or not mat[0]:
        return 0
    _, piv = series_row_reduce(mat, order)
    return len(piv)


def series_solve(amat, bmat, order, rng=None):
    """One solution X of A X = B over Q((t)); raises NotAcyclic if none."""
    rows = len(amat)
    acols = len(amat[0]) if rows else 0
    bcols = len(bmat[0]) if bmat and bmat[0] else 0
    if rows == 0:
        return zeros(acols, bcols)
    aug = [[_as_series(x, order) for x in arow] + [_as_series(y, order) for y in brow]
           for arow, brow in zip(amat, bmat)]
    red, piv = series_row_reduce(aug, order, rng=rng)
    piv = [c for c in piv if c < acols]
    # consistency: no pivot may sit in the RHS block
    rr = len(piv)
    for i in range(rr, rows):
        if any(not red[i][j].is_zero() for j in range(acols, acols + bcols)):
            raise NotAcyclic("linear system A X = B has no solution")
    x = zeros(acols, bcols)
    for r, c in enumerate(piv):
        inv = red[r][c].inverse(field=True)
        for j in range(bcols):
            rhs = red[r][acols + j]
            # subtract contributions of later pivot columns (already reduced
            # to zero above/below by full reduction, so rhs is final)
            x[c][j] = rhs * inv if not rhs.is_zero() else 0
    return x


def series_det(mat, order):
    """Determinant over Q((t)) via elimination with valuation pivoting."""
    n = len(mat)
    if n == 0:
        return NovikovSeries.const(1, order)
    a = [[_as_series(x, order) for x in row] for row in mat]
    sign = 1
    det = NovikovSeries.const(1, order)
    for c in range(n):
        cand = [i for i in range(c, n) if not a[i][c].is_zero()]
        if not cand:
            return NovikovSeries.zero()
        cand.sort(key=lambda i: (_pivot_priority(a[i][c]), i))
        i0 = cand[0]
        if i0 != c:
            a[c], a[i0] = a[i0], a[c]
            sign = -sign
        pivot = a[c][c]
        det = det * pivot
        inv = pivot.inverse(field=True)
        for i in range(c + 1, n):
            if not a[i][c].is_zero():
                factor = a[i][c] * inv
                a[i] = [x - factor * y for x, y in zip(a[i], a[c])]
    return det * sign


def novikov_homology_ranks(cx, order=None):
    """Per-degree homology ranks of a Z((t)) complex over the field Q((t))."""
    if cx.ring != RING_NOVIKOV:
        raise ValueError("novikov ranks need a Z((t)) complex")
    order = order or cx.order
    ranks = {}
    top = cx.top_degree()
    for k in range(0, top + 1):
        nk = cx.dim(k)
        if nk == 0:
            continue
        r_in = series_rank(cx.d(k), order) if cx.dim(k - 1) else 0
        r_up = series_rank(cx.d(k + 1), order) if cx.dim(k + 1) else 0
        ranks[k] = nk - r_in - r_up
    return ranks


def truncated_snf_units(mat, n):
    """Unit-pivot elimination over Z[t]/t^n.

    Returns (num_unit_pivots, residual_nonzero): a nonzero residual after all
    unit pivots are exhausted flags torsion (the cokernel over the truncated
    ring is not free).  Entries are NovikovSeries with valuation >= 0.
    """
    a = [[NovikovSeries.promote(x).truncate(n) for x in row] for row in mat]
    rows = len(a)
    cols = len(a[0]) if rows else 0
    pivots = 0
    used_r, used_c = set(), set()
    while True:
        found = None
        for i in range(rows):
            if i in used_r:
                continue
            for j in range(cols):
                if j in used_c:
                    continue
                e = a[i][j]
                if not e.is_zero() and e.valuation == 0 and e.leading() in (1, -1):
                    found = (i, j)
                    break
            if found:
                break
        if not found:
            break
        i0, j0 = found
        inv = a[i0][j0].inverse()
        for i in range(rows):
            if i != i0 and not a[i][j0].is_zero():
                f = (a[i][j0] * inv).truncate(n)
                a[i] = [(x - f * y).truncate(n) for x, y in zip(a[i], a[i0])]
        for j in range(cols):
            if j != j0 and not a[i0][j].is_zero():
                f = (a[i0][j] * inv).truncate(n)
                for i in range(rows):
                    a[i][j] = (a[i][j] - f * a[i][j0]).truncate(n)
        used_r.add(i0)
        used_c.add(j0)
        pivots += 1
    residual = any(not a[i][j].is_zero()
                   for i in range(rows) if i not in used_r
                   for j in range(cols) if j not in used_c)
    return pivots, residual


# ---------------------------------------------------------------------------
# cones and torsion


def mapping_cone(f):
    """Standard cone of a chain map; basis = shifted source + target."""
    src, tgt = f.source, f.target
    degrees = {}
    boundary = {}
    degs = sorted(set(k + 1 for k in src.degrees) | set(tgt.degrees) | {0})
    ring = tgt.ring if tgt.degrees else src.ring
    for k in degs:
        labels = [("cone-src", x) for x in src.degrees.get(k - 1, [])] + \
                 [("cone-tgt", x) for x in tgt.degrees.get(k, [])]
        if labels:
            degrees[k] = labels
    for k in degrees:
        rows_s = src.dim(k - 2)
        rows_t = tgt.dim(k - 1)
        cols_s = src.dim(k - 1)
        cols_t = tgt.dim(k)
        if rows_s + rows_t == 0 or cols_s + cols_t == 0:
            continue
        mat = zeros(rows_s + rows_t, cols_s + cols_t)
        ds = src.d(k - 1)
        dt = tgt.d(k)
        fk = f.f(k - 1)
        for i in range(rows_s):
            for j in range(cols_s):
                mat[i][j] = -ds[i][j]
        for i in range(rows_t):
            for j in range(cols_s):
                mat[rows_s + i][j] = fk[i][j]
            for j in range(cols_t):
                mat[rows_s + i][cols_s + j] = dt[i][j]
        boundary[k] = mat
    order = min(src.order, tgt.order)
    return BasedComplex(ring, degrees, boundary, order=order)


def chain_contraction(cx, order=None, rng=None):
    """Maps Gamma_k: C_k -> C_{k+1} with d Gamma + Gamma d = id.

    Exists iff the complex is acyclic over Q((t)); built degree by degree by
    solving d_{k+1} Gamma_k = id - Gamma_{k-1} d_k.
    """
    order = order or cx.order
    gamma = {}
    prev = None
    top = cx.top_degree()
    for k in range(0, top + 1):
        nk = cx.dim(k)
        if nk == 0:
            prev = None
            continue
        rhs = identity(nk)
        if prev is not None and cx.dim(k - 1):
            corr = mat_mul(prev, cx.d(k))
            rhs = [[rhs[i][j] - corr[i][j] for j in range(nk)] for i in range(nk)]
        if cx.dim(k + 1) == 0:
            if not mat_is_zero(rhs):
                raise NotAcyclic("no contraction in top degree %d" % k)
            prev = None
            continue
        gamma[k] = series_solve(cx.d(k + 1), rhs, order, rng=rng)
        prev = gamma[k]
    return gamma


def torsion(cx, order=None, rng=None):
    """Whitehead-type torsion of an acyclic based complex over Z((t)).

    Computes det(d + Gamma): C_odd -> C_even for a chain contraction Gamma
    and projects to W = 1 + t Z[[t]].  The class is independent of the
    contraction; ``rng`` randomizes the contraction to exercise exactly that.
    """
    order = order or cx.order
    ranks = novikov_homology_ranks(cx, order) if cx.ring == RING_NOVIKOV else None
    if ranks is not None and any(v != 0 for v in ranks.values()):
        raise NotAcyclic("complex has nonzero homology ranks %r" % (ranks,))
    gamma = chain_contraction(cx, order, rng=rng)
    top = cx.top_degree()
    odd = [k for k in range(1, top + 2, 2) if cx.dim(k)]
    even = [k for k in range(0, top + 2, 2) if cx.dim(k)]
    n_odd = sum(cx.dim(k) for k in odd)
    n_even = sum(cx.dim(k) for k in even)
    if n_odd != n_even:
        raise NotAcyclic("odd/even ranks differ (%d vs %d)" % (n_odd, n_even))
    row_off = {}
    off = 0
    for k in even:
        row_off[k] = off
        off += cx.dim(k)
    col_off = {}
    off = 0
    for k in odd:
        col_off[k] = off
        off += cx.dim(k)
    m = zeros(n_even, n_odd)
    for k in odd:
        dk = cx.d(k)
        if k - 1 in row_off:
            for i in range(cx.dim(k - 1)):
                for j in range(cx.dim(k)):
                    m[row_off[k - 1] + i][col_off[k] + j] = dk[i][j]
        if k in gamma and (k + 1) in row_off:
            g = gamma[k]
            for i in range(cx.dim(k + 1)):
                for j in range(cx.dim(k)):
                    e = g[i][j]
                    m[row_off[k + 1] + i][col_off[k] + j] = \
                        m[row_off[k + 1] + i][col_off[k] + j] + e
    det = series_det(m, order)
    if det.is_zero():
        raise NotAcyclic("contraction determinant vanished")
    if not det.is_integral():
        det = _clear_rational(det)
    return normalize_torsion(det)


def _clear_rational(s):
    """A rational det with unit class differs from its integral representative
    by a rational in the contraction's GL factors; torsion over Z((t)) must
    still have +-1 lead after clearing, else NotAUnit."""
    coeffs = [Fraction(c) for c in s.body.coeffs]
    lead = coeffs[0]
    if lead != 0 and abs(lead) == 1:
        ints = []
        for c in coeffs:
            if c.denominator != 1:
                raise NotAUnit("torsion determinant has non-integer coefficient %s" % c)
            ints.append(int(c))
        return NovikovSeries.from_coeffs(s.valuation, ints)
    raise NotAUnit("torsion determinant lead %s is not +-1" % lead)
