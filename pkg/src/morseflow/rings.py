"""Exact truncated-series arithmetic.

Three layers:

* ``TruncatedSeries`` -- an element of Z[[t]] (or Q[[t]]) known to a finite
  order N: the coefficients of t^0 .. t^(N-1).
* ``NovikovSeries``  -- an element of the Novikov ring Z((t)) = Z[[t]][t^-1]:
  a valuation (lowest t-exponent, possibly negative) plus a truncated body.
  Finitely supported elements double as Z[t, t^-1].
* ``WittUnit``       -- the torsion group W = 1 + t Z[[t]]: power series with
  free term 1, a group under multiplication.

Precision bookkeeping: a series with valuation v and order n has known
coefficients on (-inf, v + n): exactly zero below v, stored on [v, v + n).
Sums know a coefficient when both operands do; products know min(n_a, n_b)
coefficients past the (added) valuations.  When every known coefficient of a
result cancels, the result collapses to the canonical zero -- an exact zero,
so that matrix algebra over the ring works; window-sensitive decisions
(pivoting, comparisons to a stated order) raise PrecisionExhausted instead
of silently using a window that is too short.
"""

from fractions import Fraction

from .config import DEFAULT_ORDER
from .errors import NonIntegralSeries, NotAUnit, PrecisionError, PrecisionExhausted


def _norm_coeff(c):
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c)
    if isinstance(c, bool):
        return int(c)
    return c


class TruncatedSeries:
    """Coefficients of t^0..t^(order-1); immutable."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order=None):
        coeffs = tuple(_norm_coeff(c) for c in coeffs)
        if order is None:
            order = len(coeffs)
        if len(coeffs) < order:
            coeffs = coeffs + (0,) * (order - len(coeffs))
        elif len(coeffs) > order:
            coeffs = coeffs[:order]
        if order < 0:
            raise PrecisionError("series order must be >= 0")
        self.coeffs = coeffs
        self.order = order

    @classmethod
    def zero(cls, order=DEFAULT_ORDER):
        return cls((), order)

    @classmethod
    def one(cls, order=DEFAULT_ORDER):
        return cls((1,), order)

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def truncate(self, order):
        return TruncatedSeries(self.coeffs[:order], order)

    def __add__(self, other):
        n = min(self.order, other.order)
        return TruncatedSeries(
            tuple(a + b for a, b in zip(self.coeffs[:n], other.coeffs[:n])), n)

    def __sub__(self, other):
        n = min(self.order, other.order)
        return TruncatedSeries(
            tuple(a - b for a, b in zip(self.coeffs[:n], other.coeffs[:n])), n)

    def __neg__(self):
        return TruncatedSeries(tuple(-a for a in self.coeffs), self.order)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return TruncatedSeries(tuple(other * a for a in self.coeffs), self.order)
        n = min(self.order, other.order)
        out = [0] * n
        for i, a in enumerate(self.coeffs[:n]):
            if a == 0:
                continue
            for j in range(n - i):
                b = other.coeffs[j]
                if b != 0:
                    out[i + j] += a * b
        return TruncatedSeries(out, n)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, TruncatedSeries)
                and self.order == other.order and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.coeffs, self.order))

    def __repr__(self):
        return "TruncatedSeries(%r, order=%d)" % (list(self.coeffs), self.order)

    def is_integral(self):
        return all(isinstance(c, int) for c in self.coeffs)


class NovikovSeries:
    """Element of Z((t)) (or Q((t))) with normalized valuation.

    Invariants: a nonzero element has ``coeffs[0] != 0``; the zero element is
    the canonical ``NovikovSeries.zero()`` with empty body and valuation 0.
    """

    __slots__ = ("valuation", "body")

    def __init__(self, valuation, body):
        if not isinstance(body, TruncatedSeries):
            body = TruncatedSeries(body)
        # normalize: strip leading zeros, shrinking the known window
        coeffs = body.coeffs
        k = 0
        while k < len(coeffs) and coeffs[k] == 0:
            k += 1
        if k == len(coeffs):
            self.valuation = 0
            self.body = TruncatedSeries((), 0)
        else:
            self.valuation = valuation + k
            self.body = TruncatedSeries(coeffs[k:], body.order - k)

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls):
        return cls(0, TruncatedSeries((), 0))

    @classmethod
    def from_coeffs(cls, valuation, coeffs, order=None):
        coeffs = tuple(coeffs)
        if order is None:
            order = len(coeffs)
        return cls(valuation, TruncatedSeries(coeffs, max(order, len(coeffs))))

    @classmethod
    def const(cls, c, order=DEFAULT_ORDER):
        if c == 0:
            return cls.zero()
        return cls(0, TruncatedSeries((c,), order))

    @classmethod
    def monomial(cls, c, power, order=DEFAULT_ORDER):
        if c == 0:
            return cls.zero()
        return cls(power, TruncatedSeries((c,), order))

    @classmethod
    def from_poly(cls, coeff_by_power, order=DEFAULT_ORDER):
        """Finitely supported element from a {power: coeff} dict."""
        nz = {k: v for k, v in coeff_by_power.items() if v != 0}
        if not nz:
            return cls.zero()
        v = min(nz)
        top = max(max(nz) + 1, v + order)
        coeffs = [nz.get(k, 0) for k in range(v, top)]
        return cls(v, TruncatedSeries(coeffs, top - v))

    @classmethod
    def promote(cls, x, order=DEFAULT_ORDER):
        if isinstance(x, NovikovSeries):
            return x
        if isinstance(x, (int, Fraction)):
            return cls.const(x, order)
        if isinstance(x, TruncatedSeries):
            return cls(0, x)
        raise TypeError("cannot promote %r to NovikovSeries" % (x,))

    # -- structure ----------------------------------------------------

    def is_zero(self):
        return self.body.order == 0

    @property
    def order(self):
        return self.body.order

    def top(self):
        """Exclusive upper end of the known-coefficient window."""
        if self.is_zero():
            return None  # exact zero: known everywhere
        return self.valuation + self.body.order

    def coeff(self, k):
        """Coefficient of t^k; raises PrecisionExhausted if unknown."""
        if self.is_zero():
            return 0
        if k < self.valuation:
            return 0
        if k >= self.valuation + self.body.order:
            raise PrecisionExhausted(
                "coefficient of t^%d beyond known order (window [%d, %d))"
                % (k, self.valuation, self.valuation + self.body.order))
        return self.body.coeffs[k - self.valuation]

    def known_to(self, k):
        """True when all coefficients of t^j, j <= k are known."""
        return self.is_zero() or self.valuation + self.body.order > k

    def leading(self):
        if self.is_zero():
            raise NotAUnit("zero series has no leading coefficient")
        return self.body.coeffs[0]

    def is_integral(self):
        return self.body.is_integral()

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        other = NovikovSeries.promote(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        v = min(self.valuation, other.valuation)
        top = min(self.top(), other.top())
        if top <= v:
            raise PrecisionError(
                "sum window empty: valuations %d, %d with tops %d, %d"
                % (self.valuation, other.valuation, self.top(), other.top()))
        coeffs = [self.coeff(k) + other.coeff(k) for k in range(v, top)]
        return NovikovSeries(v, TruncatedSeries(coeffs, top - v))

    __radd__ = __add__

    def __neg__(self):
        return NovikovSeries(self.valuation, -self.body)

    def __sub__(self, other):
        return self + (-NovikovSeries.promote(other))

    def __rsub__(self, other):
        return NovikovSeries.promote(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return NovikovSeries.zero()
            return NovikovSeries(self.valuation, self.body * other)
        other = NovikovSeries.promote(other)
        if self.is_zero() or other.is_zero():
            return NovikovSeries.zero()
        return NovikovSeries(self.valuation + other.valuation,
                             self.body * other.body)

    __rmul__ = __mul__

    def inverse(self, field=False):
        """Two-sided inverse; requires an invertible leading coefficient.

        Over Z((t)) the leading coefficient must be +-1.  With ``field=True``
        the element is inverted in Q((t)) instead (any nonzero lead).
        """
        if self.is_zero():
            raise NotAUnit("zero is not invertible")
        lead = self.body.coeffs[0]
        if lead in (1, -1):
            linv = 1 if lead == 1 else -1
        elif field:
            linv = Fraction(1, 1) / lead
        else:
            raise NotAUnit("leading coefficient %r is not a unit of Z" % (lead,))
        n = self.body.order
        a = self.body.coeffs
        inv = [0] * n
        inv[0] = linv
        for k in range(1, n):
            acc = 0
            for j in range(1, k + 1):
                acc += a[j] * inv[k - j]
            inv[k] = -acc * linv
        return NovikovSeries(-self.valuation, TruncatedSeries(inv, n))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = NovikovSeries.const(other, self.order or DEFAULT_ORDER)
        if not isinstance(other, NovikovSeries):
            return NotImplemented
        return (self.valuation == other.valuation
                and self.body.coeffs == other.body.coeffs)

    def __hash__(self):
        return hash((self.valuation, self.body.coeffs))

    def agrees_with(self, other, order):
        """Coefficientwise equality of t^k for all k < order.

        Raises PrecisionExhausted when either side knows too little.
        """
        other = NovikovSeries.promote(other)
        for k in range(min(self.valuation if not self.is_zero() else 0,
                           other.valuation if not other.is_zero() else 0,
                           0), order):
            if self.coeff(k) != other.coeff(k):
                return False
        return True

    def truncate(self, order):
        """Drop all knowledge of t^k for k >= order (an element of N/t^n N)."""
        if self.is_zero() or self.valuation >= order:
            return NovikovSeries.zero()
        keep = min(self.body.order, order - self.valuation)
        return NovikovSeries(self.valuation, TruncatedSeries(self.body.coeffs[:keep], keep))

    def shift(self, power):
        """Multiply by t^power."""
        if self.is_zero():
            return self
        return NovikovSeries(self.valuation + power, self.body)

    def __repr__(self):
        if self.is_zero():
            return "NovikovSeries(0)"
        terms = []
        for i, c in enumerate(self.body.coeffs[:6]):
            if c:
                terms.append("%s*t^%d" % (c, self.valuation + i))
        tail = " + O(t^%d)" % self.top()
        return "NovikovSeries(%s%s)" % (" + ".join(terms) or "0", tail)

    # -- serialization ------------------------------------------------

    def to_json(self):
        return {"valuation": self.valuation,
                "coeffs": [c if isinstance(c, int) else [c.numerator, c.denominator]
                           for c in self.body.coeffs],
                "order": self.body.order}

    @classmethod
    def from_json(cls, d):
        coeffs = [c if isinstance(c, int) else Fraction(c[0], c[1]) for c in d["coeffs"]]
        return cls(d["valuation"], TruncatedSeries(coeffs, d["order"]))


class WittUnit:
    """Element of W = 1 + t Z[[t]]; the group the torsion lives in."""

    __slots__ = ("series",)

    def __init__(self, series):
        if not isinstance(series, TruncatedSeries):
            series = TruncatedSeries(series)
        if series.order < 1 or series.coeffs[0] != 1:
            raise NotAUnit("free term must be 1, got %r" % (series.coeffs[:1],))
        self.series = series

    @classmethod
    def one(cls, order=DEFAULT_ORDER):
        return cls(TruncatedSeries.one(order))

    @property
    def order(self):
        return self.series.order

    def __mul__(self, other):
        return WittUnit(self.series * other.series)

    def inverse(self):
        return WittUnit(novikov(self).inverse().body)

    def __pow__(self, n):
        if n == 0:
            return WittUnit.one(self.order)
        base = self if n > 0 else self.inverse()
        out = WittUnit.one(self.order)
        for _ in range(abs(n)):
            out = out * base
        return out

    def __eq__(self, other):
        return isinstance(other, WittUnit) and self.series == other.series

    def __hash__(self):
        return hash(self.series)

    def agrees_with(self, other, order):
        if self.order < order or other.order < order:
            raise PrecisionExhausted("WittUnit comparison to order %d" % order)
        return self.series.coeffs[:order] == other.series.coeffs[:order]

    def __repr__(self):
        return "WittUnit(%r)" % (list(self.series.coeffs),)

    def to_json(self):
        return {"valuation": 0, "coeffs": list(self.series.coeffs),
                "order": self.series.order}


def novikov(x, order=DEFAULT_ORDER):
    """Coerce ints, TruncatedSeries, or WittUnit into NovikovSeries."""
    if isinstance(x, WittUnit):
        return NovikovSeries(0, x.series)
    return NovikovSeries.promote(x, order)


# ---------------------------------------------------------------------------
# module-level operations (the public surface mirrors these names)


def series_add(a, b):
    return novikov(a) + novikov(b)


def series_mul(a, b):
    return novikov(a) * novikov(b)


def series_invert(a):
    return novikov(a).inverse()


def series_exp(a, require_integral=True):
    """exp of a series with zero free term, as an element of 1 + t Q[[t]].

    Computed over Q via the ODE recurrence e' = a' e.  With the default
    ``require_integral`` a non-integer output coefficient raises: for the
    zeta pipeline that signals an inconsistent fixed-point count.
    """
    if not isinstance(a, TruncatedSeries):
        a = TruncatedSeries(a)
    if a.order >= 1 and a.coeffs[0] != 0:
        raise NonIntegralSeries("exp needs zero constant term, got %r" % (a.coeffs[0],))
    n = a.order
    e = [Fraction(1)] + [Fraction(0)] * (n - 1)
    for k in range(1, n):
        acc = Fraction(0)
        for j in range(1, k + 1):
            acc += Fraction(j) * Fraction(a.coeffs[j]) * e[k - j]
        e[k] = acc / k
    if require_integral:
        out = []
        for c in e:
            if c.denominator != 1:
                raise NonIntegralSeries("exp coefficient %s is not an integer" % (c,))
            out.append(int(c))
        return WittUnit(TruncatedSeries(out, n))
    return WittUnit(TruncatedSeries(e, n))


def series_log(w):
    """log of a WittUnit, a rational TruncatedSeries with zero free term."""
    a = w.series.coeffs
    n = w.series.order
    lg = [Fraction(0)] * n
    for k in range(1, n):
        acc = Fraction(k) * Fraction(a[k])
        for j in range(1, k):
            acc -= Fraction(j) * lg[j] * Fraction(a[k - j])
        lg[k] = acc / k
    return TruncatedSeries(lg, n)


def normalize_torsion(u):
    """Project a unit of Z((t)) to W = 1 + t Z[[t]] by dividing out +-t^n.

    This realizes the quotient by the subgroup T = {+-t^n}; representatives
    are canonicalized to leading coefficient +1 (a convention).
    """
    u = novikov(u)
    if u.is_zero():
        raise NotAUnit("zero has no torsion class")
    lead = u.leading()
    if lead not in (1, -1):
        raise NotAUnit("leading coefficient %r is not +-1" % (lead,))
    body = u.body if lead == 1 else -u.body
    if not body.is_integral():
        raise NotAUnit("torsion representative has non-integer coefficients")
    return WittUnit(body)


def zeta_exponent(counts, order):
    """The series sum_{n>=1} counts[n-1]/n * t^n as a rational TruncatedSeries."""
    if len(counts) < order - 1:
        raise PrecisionExhausted(
            "need %d counts for order %d" % (order - 1, order))
    coeffs = [Fraction(0)] + [Fraction(counts[n - 1], n) for n in range(1, order)]
    return TruncatedSeries(coeffs, order)
