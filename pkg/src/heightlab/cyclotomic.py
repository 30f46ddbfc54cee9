"""Exact arithmetic in cyclotomic fields Q(zeta_M).

Elements are sparse Q-linear combinations of roots of unity.  Exponents are
kept in a canonical power basis per prime-power factor of M, so equality is
literal dict comparison after normalization.  All values that arise in the
local Whittaker machinery (additive character values, quadratic Gauss sums,
square roots of rational primes) live here.
"""

from fractions import Fraction
from math import gcd
import cmath


def _factor_prime_powers(m):
    """Return {p: a} with m = prod p^a."""
    out = {}
    d = 2
    while d * d <= m:
        while m % d == 0:
            out[d] = out.get(d, 0) + 1
            m //= d
        d += 1
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


def _lcm(a, b):
    return a // gcd(a, b) * b


class Cyc:
    """An element of Q(zeta_M), M the `modulus`.

    Internal form: dict {exponent: Fraction} with every exponent e satisfying,
    for each prime power p^a || M, (e mod p^a) < phi(p^a).  That set of
    monomials is a Q-basis of Q(zeta_M), so the representation is canonical.
    """

    __slots__ = ("modulus", "coeffs")

    def __init__(self, modulus, coeffs=None, _normalized=False):
        self.modulus = modulus
        if coeffs is None:
            coeffs = {}
        if _normalized:
            self.coeffs = coeffs
        else:
            self.coeffs = _normalize(modulus, coeffs)

    # -- constructors -------------------------------------------------

    @staticmethod
    def rational(value, modulus=1):
        value = Fraction(value)
        if value == 0:
            return Cyc(modulus, {}, _normalized=True)
        return Cyc(modulus, {0: value}, _normalized=True)

    @staticmethod
    def root_of_unity(num, den, coeff=1):
        """coeff * e(num/den) = coeff * exp(2*pi*i*num/den)."""
        g = gcd(num % den if num % den else den, den)
        num, den = (num % den) // g, den // g
        return Cyc(den, {num * 1: Fraction(coeff)})

    @staticmethod
    def e(frac, coeff=1):
        """coeff * e(frac) for a Fraction frac."""
        frac = Fraction(frac)
        return Cyc.root_of_unity(frac.numerator, frac.denominator, coeff)

    # -- ring structure -----------------------------------------------

    def _lift(self, modulus):
        if modulus == self.modulus:
            return self
        assert modulus % self.modulus == 0
        k = modulus // self.modulus
        return Cyc(modulus, {e * k: c for e, c in self.coeffs.items()})

    def __add__(self, other):
        if not isinstance(other, Cyc):
            other = Cyc.rational(other, self.modulus)
        m = _lcm(self.modulus, other.modulus)
        a, b = self._lift(m), other._lift(m)
        out = dict(a.coeffs)
        for e, c in b.coeffs.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Cyc(m, out, _normalized=True)

    __radd__ = __add__

    def __neg__(self):
        return Cyc(self.modulus, {e: -c for e, c in self.coeffs.items()},
                   _normalized=True)

    def __sub__(self, other):
        if not isinstance(other, Cyc):
            other = Cyc.rational(other, self.modulus)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Cyc):
            c = Fraction(other)
            if c == 0:
                return Cyc(self.modulus, {}, _normalized=True)
            return Cyc(self.modulus,
                       {e: v * c for e, v in self.coeffs.items()},
                       _normalized=True)
        m = _lcm(self.modulus, other.modulus)
        a, b = self._lift(m), other._lift(m)
        out = {}
        for e1, c1 in a.coeffs.items():
            for e2, c2 in b.coeffs.items():
                e = (e1 + e2) % m
                s = out.get(e, 0) + c1 * c2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return Cyc(m, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Cyc):
            other = Cyc.rational(other, self.modulus)
        m = _lcm(self.modulus, other.modulus)
        return self._lift(m).coeffs == other._lift(m).coeffs

    def __hash__(self):
        red = self.reduce_modulus()
        return hash((red.modulus, tuple(sorted(red.coeffs.items()))))

    def __bool__(self):
        return bool(self.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return "Cyc(0)"
        parts = [f"{c}*z{self.modulus}^{e}" if e else f"{c}"
                 for e, c in sorted(self.coeffs.items())]
        return "Cyc(" + " + ".join(parts) + ")"

    # -- structure queries ----------------------------------------------

    def conjugate(self):
        m = self.modulus
        return Cyc(m, {(-e) % m: c for e, c in self.coeffs.items()})

    def is_rational(self):
        return not self.coeffs or set(self.coeffs) == {0}

    def rational_value(self):
        if not self.coeffs:
            return Fraction(0)
        if set(self.coeffs) != {0}:
            raise ValueError(f"not rational: {self}")
        return self.coeffs[0]

    def reduce_modulus(self):
        """Rewrite over the smallest modulus actually used (up to divisors)."""
        if not self.coeffs:
            return Cyc(1, {}, _normalized=True)
        m = self.modulus
        g = 0
        for e in self.coeffs:
            g = gcd(g, e)
        g = gcd(g, m)
        if g <= 1:
            return self
        return Cyc(m // g, {e // g: c for e, c in self.coeffs.items()})

    def complex(self):
        return sum(complex(c) * cmath.exp(2j * cmath.pi * e / self.modulus)
                   for e, c in self.coeffs.items())

    def abs_squared(self):
        """|self|^2 as a Cyc (rational when self lies in a CM subfield)."""
        return self * self.conjugate()


def _normalize(modulus, coeffs):
    """Reduce all exponents to the canonical basis, merging coefficients."""
    fac = _factor_prime_powers(modulus)
    shifts = {}
    for p, a in fac.items():
        q = p ** a
        cof = modulus // q
        shifts[p] = (q, cof * pow(cof, -1, q) % modulus)
    work = [(e % modulus, Fraction(c)) for e, c in coeffs.items() if c]
    out = {}
    while work:
        e, c = work.pop()
        bad = None
        for p, (q, unit) in shifts.items():
            r = e % q
            if r >= q - q // p:  # exponent >= phi(p^a): apply Phi_{p^a} relation
                bad = (p, q, unit, r)
                break
        if bad is None:
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
            continue
        p, q, unit, r = bad
        step = q // p
        d = r // step  # == p-1 here
        base = e - (d * step % q) * unit % modulus
        for j in range(p - 1):
            work.append(((base + (j * step % q) * unit) % modulus, -c))
    return out


def sqrt_prime(p):
    """Exact sqrt(p) in Q(zeta_{8p}) via the quadratic Gauss sum."""
    if p == 2:
        return Cyc(8, {1: Fraction(1), 7: Fraction(1)})
    g = Cyc(p, {})
    for a in range(1, p):
        ls = pow(a, (p - 1) // 2, p)
        sign = 1 if ls == 1 else -1
        g = g + Cyc(p, {a: Fraction(sign)})
    if p % 4 == 1:
        return g
    # g = i*sqrt(p) for p = 3 mod 4
    minus_i = Cyc(4, {3: Fraction(1)})
    return minus_i * g


def sqrt_positive_int(n):
    """Exact sqrt(n) for a positive integer n, as a Cyc element."""
    if n <= 0:
        raise ValueError("need n > 0")
    out = Cyc.rational(1)
    for p, a in _factor_prime_powers(n).items():
        out = out * Fraction(p ** (a // 2))
        if a % 2:
            out = out * sqrt_prime(p)
    return out


I = Cyc(4, {1: Fraction(1)})
