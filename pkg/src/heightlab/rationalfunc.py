"""Rational functions in X = N(p)^{-s} and exact log-linear numbers.

A `RationalFuncX` stores a Whittaker value as num(X)/den(X) with Fraction
coefficients, remembering the residue norm q it abbreviates.  A
`LogLinearNumber` is an exact value c0 + sum_i c_i * log(p_i) over rational
primes; these are linearly independent over Q, so equality is decidable.
"""

import math
from fractions import Fraction


def _poly_trim(d):
    return {e: Fraction(c) for e, c in d.items() if c}


def _poly_add(a, b):
    out = dict(a)
    for e, c in b.items():
        s = out.get(e, 0) + c
        if s:
            out[e] = s
        else:
            out.pop(e, None)
    return out


def _poly_mul(a, b):
    out = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            e = e1 + e2
            s = out.get(e, 0) + c1 * c2
            if s:
                out[e] = s
            else:
                out.pop(e, None)
    return out


def _poly_scale(a, c):
    c = Fraction(c)
    if not c:
        return {}
    return {e: v * c for e, v in a.items()}


def _poly_eval(a, x):
    return sum(c * Fraction(x) ** e for e, c in a.items())


class RationalFuncX:
    """num(X)/den(X), Laurent polynomials over Q, X = q^{-s}."""

    __slots__ = ("num", "den", "q")

    def __init__(self, num, den=None, q=None):
        if isinstance(num, dict):
            self.num = _poly_trim(num)
        else:
            self.num = _poly_trim({0: Fraction(num)})
        if den is None:
            den = {0: Fraction(1)}
        if isinstance(den, dict):
            self.den = _poly_trim(den)
        else:
            self.den = _poly_trim({0: Fraction(den)})
        if not self.den:
            raise ZeroDivisionError("zero denominator")
        self.q = q
        self._canonicalize()

    def _canonicalize(self):
        # shift so den has min exponent 0 and leading coefficient 1
        if not self.num:
            self.den = {0: Fraction(1)}
            return
        shift = min(self.den)
        if shift:
            self.den = {e - shift: c for e, c in self.den.items()}
            self.num = {e - shift: c for e, c in self.num.items()}
        lead = self.den[min(self.den)]
        if lead != 1:
            self.den = {e: c / lead for e, c in self.den.items()}
            self.num = {e: c / lead for e, c in self.num.items()}

    @staticmethod
    def zero(q=None):
        return RationalFuncX({}, q=q)

    @staticmethod
    def one(q=None):
        return RationalFuncX({0: Fraction(1)}, q=q)

    @staticmethod
    def monomial(coeff, exp, q=None):
        return RationalFuncX({exp: Fraction(coeff)}, q=q)

    def _q_join(self, other):
        if self.q is None:
            return other.q
        if other.q is None or other.q == self.q:
            return self.q
        raise ValueError("mixing rational functions with different q")

    def __add__(self, other):
        if not isinstance(other, RationalFuncX):
            other = RationalFuncX(Fraction(other))
        num = _poly_add(_poly_mul(self.num, other.den),
                        _poly_mul(other.num, self.den))
        return RationalFuncX(num, _poly_mul(self.den, other.den),
                             q=self._q_join(other))

    __radd__ = __add__

    def __neg__(self):
        return RationalFuncX(_poly_scale(self.num, -1), dict(self.den), q=self.q)

    def __sub__(self, other):
        if not isinstance(other, RationalFuncX):
            other = RationalFuncX(Fraction(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, RationalFuncX):
            return RationalFuncX(_poly_scale(self.num, other), dict(self.den),
                                 q=self.q)
        return RationalFuncX(_poly_mul(self.num, other.num),
                             _poly_mul(self.den, other.den),
                             q=self._q_join(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, RationalFuncX):
            return self * Fraction(1, 1) / RationalFuncX(Fraction(other))
        if not other.num:
            raise ZeroDivisionError
        return RationalFuncX(_poly_mul(self.num, other.den),
                             _poly_mul(self.den, other.num),
                             q=self._q_join(other))

    def __eq__(self, other):
        if not isinstance(other, RationalFuncX):
            other = RationalFuncX(Fraction(other))
        return _poly_mul(self.num, other.den) == _poly_mul(other.num, self.den)

    def __hash__(self):
        raise TypeError("unhashable")

    def __repr__(self):
        def fmt(d):
            if not d:
                return "0"
            return " + ".join(f"{c}*X^{e}" if e else f"{c}"
                              for e, c in sorted(d.items()))
        if self.den == {0: Fraction(1)}:
            return f"RF({fmt(self.num)})"
        return f"RF(({fmt(self.num)}) / ({fmt(self.den)}))"

    def __bool__(self):
        return bool(self.num)

    # -- evaluation ------------------------------------------------------

    def eval_X(self, x):
        den = _poly_eval(self.den, x)
        if den == 0:
            raise ZeroDivisionError(f"pole at X={x}")
        return _poly_eval(self.num, x) / den

    def eval_s(self, s):
        """Exact value at integer s >= 0 (where X = q^{-s})."""
        if self.q is None:
            raise ValueError("no q attached")
        return self.eval_X(Fraction(1, self.q ** s))

    def value_at_0(self):
        return self.eval_X(Fraction(1))

    def x_dlog_derivative(self):
        """X * d/dX of self, as a RationalFuncX."""
        dnum = {e: c * e for e, c in self.num.items() if e}
        dden = {e: c * e for e, c in self.den.items() if e}
        num = _poly_add(_poly_mul(dnum, self.den),
                        _poly_scale(_poly_mul(self.num, dden), -1))
        return RationalFuncX(num, _poly_mul(self.den, self.den), q=self.q)

    def ds_at_0(self):
        """d/ds at s=0, i.e. -log(q) * (X d/dX)(1), as a LogLinearNumber."""
        if self.q is None:
            raise ValueError("no q attached")
        coeff = -self.x_dlog_derivative().eval_X(Fraction(1))
        return LogLinearNumber.log_term(self.q, coeff)

    def as_json(self):
        num = {str(e): str(c) for e, c in sorted(self.num.items())}
        den = {str(e): str(c) for e, c in sorted(self.den.items())}
        return {"num": num, "den": den, "q": self.q}


class LogLinearNumber:
    """c0 + sum c_p * log p, exact over Q."""

    __slots__ = ("const", "logs")

    def __init__(self, const=0, logs=None):
        self.const = Fraction(const)
        self.logs = {}
        if logs:
            for p, c in logs.items():
                c = Fraction(c)
                if c:
                    self.logs[p] = c

    @staticmethod
    def log_term(n, coeff=1):
        """coeff * log(n) for a positive integer n, split into prime logs."""
        coeff = Fraction(coeff)
        logs = {}
        d, m = 2, n
        while d * d <= m:
            while m % d == 0:
                logs[d] = logs.get(d, 0) + coeff
                m //= d
            d += 1
        if m > 1:
            logs[m] = logs.get(m, 0) + coeff
        return LogLinearNumber(0, logs)

    def __add__(self, other):
        if not isinstance(other, LogLinearNumber):
            other = LogLinearNumber(other)
        logs = dict(self.logs)
        for p, c in other.logs.items():
            s = logs.get(p, 0) + c
            if s:
                logs[p] = s
            else:
                logs.pop(p, None)
        return LogLinearNumber(self.const + other.const, logs)

    __radd__ = __add__

    def __neg__(self):
        return LogLinearNumber(-self.const, {p: -c for p, c in self.logs.items()})

    def __sub__(self, other):
        if not isinstance(other, LogLinearNumber):
            other = LogLinearNumber(other)
        return self + (-other)

    def __mul__(self, scalar):
        scalar = Fraction(scalar)
        return LogLinearNumber(self.const * scalar,
                               {p: c * scalar for p, c in self.logs.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LogLinearNumber):
            other = LogLinearNumber(other)
        return self.const == other.const and self.logs == other.logs

    def __hash__(self):
        return hash((self.const, tuple(sorted(self.logs.items()))))

    def __bool__(self):
        return bool(self.const) or bool(self.logs)

    def __repr__(self):
        parts = [str(self.const)] if self.const else []
        parts += [f"{c}*log({p})" for p, c in sorted(self.logs.items())]
        return "LogLin(" + (" + ".join(parts) if parts else "0") + ")"

    def __float__(self):
        return float(self.const) + sum(float(c) * math.log(p)
                                       for p, c in self.logs.items())

    def as_json(self):
        return {"const": str(self.const),
                "terms": [{"q": p, "coeff": str(c)}
                          for p, c in sorted(self.logs.items())]}
