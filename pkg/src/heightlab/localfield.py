"""Truncated models of p-adic fields and quadratic extensions.

A `LocalField` models the valuation ring of a finite extension F/Q_p as
Z[y]/(g(y), p^T) with g monic and either unramified or Eisenstein, so
valuations read off exactly from power-basis coordinates.  A `QuadExt`
models a quadratic extension E/F in a two-coordinate basis {1, w}.

`LocalHermitianData` packages the hermitian line (O_E, xi * x * conj(y))
together with everything the Whittaker machinery consumes: the additive
character psi_F, self-dual volumes, and an exact description of norm images
Nm(1 + pi_q^t O_E) as finite unions of balls in F.  Norm images are pinned
by the square-root Hensel bound (1 + pi^c consists of unit squares once
c > 2 ord_pi(2)), plus a bounded enumeration at p = 2; no character theory
is assumed, so this layer can serve as ground truth for closed formulas.
"""

from .cyclotomic import Cyc


class LocalFieldError(ValueError):
    pass


def _ord_int(n, p, cap):
    if n % (p ** cap) == 0:
        return cap
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


class LocalField:
    """O_F for F/Q_p of degree d, monogenic model Z[y]/(g, p^T).

    g must be unramified (e=1) or Eisenstein (e=d).  Elements are tuples of
    ints mod p^T in the power basis of y.  All ball levels below are powers
    of the maximal ideal (pi), not of p.
    """

    def __init__(self, p, g, e, T):
        self.p = p
        self.T = T
        self.pT = p ** T
        self.g = tuple(int(c) % self.pT for c in g[:-1]) + (1,)
        self.d = len(self.g) - 1
        self.e = e
        self.f = self.d // e
        self.q = p ** self.f  # residue field size
        self._build_mul_table()
        self._build_traces()
        self.zero = (0,) * self.d
        self.one = self.int_elem(1)
        if e == 1:
            self.uniformizer = self.int_elem(p)
        else:
            assert e == self.d, "mixed towers are modeled via QuadExt"
            self.uniformizer = self.gen()
        self._res_reps = None
        if self.d == 1:
            self.m = 0
        else:
            gp = [0] * self.d
            for i in range(1, self.d + 1):
                gp[i - 1] = (i * self.g[i]) % self.pT
            self.m = self.val(self._poly_at_gen(gp))

    # -- construction helpers -----------------------------------------

    def gen(self):
        if self.d == 1:
            return (0,)
        return tuple(1 if i == 1 else 0 for i in range(self.d))

    def int_elem(self, n):
        return ((n % self.pT),) + (0,) * (self.d - 1)

    def elem(self, coords):
        assert len(coords) == self.d
        return tuple(int(c) % self.pT for c in coords)

    def _build_mul_table(self):
        self.ypow = []
        if self.d == 1:
            return
        cur = [(-self.g[i]) % self.pT for i in range(self.d)]  # y^d
        self.ypow.append(tuple(cur))
        for _ in range(self.d - 2):
            carry = cur[self.d - 1]
            nxt = [0] + cur[: self.d - 1]
            for i in range(self.d):
                nxt[i] = (nxt[i] - carry * self.g[i]) % self.pT
            cur = nxt
            self.ypow.append(tuple(cur))

    def _build_traces(self):
        d = self.d
        s = [d % self.pT]
        for k in range(1, d):
            acc = -k * self.g[d - k]
            for i in range(1, k):
                acc -= self.g[d - i] * s[k - i]
            s.append(acc % self.pT)
        self.trace_pows = s

    def _poly_at_gen(self, coeffs):
        out = [0] * self.d
        for i, c in enumerate(coeffs):
            if c % self.pT == 0:
                continue
            if i < self.d:
                out[i] = (out[i] + c) % self.pT
            else:
                red = self.ypow[i - self.d]
                for j in range(self.d):
                    out[j] = (out[j] + c * red[j]) % self.pT
        return tuple(out)

    # -- ring operations ------------------------------------------------

    def add(self, a, b):
        return tuple((x + y) % self.pT for x, y in zip(a, b))

    def sub(self, a, b):
        return tuple((x - y) % self.pT for x, y in zip(a, b))

    def neg(self, a):
        return tuple((-x) % self.pT for x in a)

    def mul(self, a, b):
        d = self.d
        if d == 1:
            return ((a[0] * b[0]) % self.pT,)
        prod = [0] * (2 * d - 1)
        for i, x in enumerate(a):
            if not x:
                continue
            for j, y in enumerate(b):
                if y:
                    prod[i + j] += x * y
        return self._poly_at_gen([c % self.pT for c in prod])

    def scal(self, n, a):
        return tuple((n * x) % self.pT for x in a)

    def powm(self, a, k):
        out = self.one
        base = a
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def trace(self, a):
        return sum(c * s for c, s in zip(a, self.trace_pows)) % self.pT

    # -- valuation (exact, capped at e*T) --------------------------------

    def val(self, a):
        cap = self.e * self.T
        best = cap
        if self.e == 1:
            for c in a:
                if c % self.pT:
                    best = min(best, _ord_int(c, self.p, self.T))
            return best
        for i, c in enumerate(a):
            if c % self.pT:
                best = min(best, self.e * _ord_int(c, self.p, self.T) + i)
        return best

    def is_unit(self, a):
        return self.val(a) == 0

    def inverse(self, a):
        if not self.is_unit(a):
            raise LocalFieldError("not a unit")
        # Fermat inverse at residue level, then Newton lifting
        res = tuple(c % self.p for c in a)
        z = self.powm(self.elem(res), self.q ** self.e - 2)
        z = tuple(c % self.p for c in z)
        steps = 0
        while True:
            err = self.sub(self.one, self.mul(a, z))
            if all(c == 0 for c in err):
                return z
            z = self.add(z, self.mul(z, err))
            steps += 1
            if steps > self.T + 4:
                raise LocalFieldError("inverse did not converge")

    def _residue_reps(self):
        if self._res_reps is not None:
            return self._res_reps
        p = self.p
        if self.e > 1 or self.d == 1:
            reps = [self.int_elem(i) for i in range(p)]
        else:
            reps = []
            stack = [[]]
            for _ in range(self.d):
                stack = [pre + [c] for pre in stack for c in range(p)]
            reps = [self.elem(coords) for coords in stack]
        self._res_reps = reps
        return reps

    def residue_key(self, a):
        p = self.p
        if self.e > 1:
            return a[0] % p
        return tuple(c % p for c in a)

    def unit_shift(self, a, v):
        """a / uniformizer^v for val(a) >= v, exactly."""
        if v == 0:
            return a
        if self.e == 1:
            pv = self.p ** v
            assert all(c % pv == 0 for c in a)
            return tuple(c // pv for c in a)
        out = a
        for _ in range(v):
            out = self._div_uniformizer(out)
        return out

    def div_p_power(self, a, k):
        pk = self.p ** k
        assert all(c % pk == 0 for c in a), "not divisible by p^k"
        return tuple(c // pk for c in a)

    def _div_uniformizer(self, a):
        # y * h(y) = -g0 with h = y^{d-1} + g_{d-1} y^{d-2} + ... + g_1
        h = [self.g[i + 1] % self.pT for i in range(self.d)]
        num = self.mul(a, self._poly_at_gen(h))
        g0 = self.g[0] if self.g[0] < self.pT // 2 else self.g[0] - self.pT
        u0 = (-g0) // self.p
        assert (-g0) % self.p == 0 and u0 % self.p != 0
        num = self.div_p_power(num, 1)
        return self.mul(num, self.int_elem(pow(u0, -1, self.pT)))


class FElt:
    """A fractional element p^{-dp} * elem of F, elem in the O_F model."""

    __slots__ = ("K", "elem", "dp")

    def __init__(self, K, elem, dp=0):
        self.K = K
        self.elem = elem
        self.dp = dp

    def _align(self, other):
        assert self.K is other.K
        dp = max(self.dp, other.dp)
        a = self.K.scal(self.K.p ** (dp - self.dp), self.elem)
        b = self.K.scal(self.K.p ** (dp - other.dp), other.elem)
        return a, b, dp

    def __add__(self, other):
        a, b, dp = self._align(other)
        return FElt(self.K, self.K.add(a, b), dp)

    def __sub__(self, other):
        a, b, dp = self._align(other)
        return FElt(self.K, self.K.sub(a, b), dp)

    def __neg__(self):
        return FElt(self.K, self.K.neg(self.elem), self.dp)

    def __mul__(self, other):
        assert self.K is other.K
        return FElt(self.K, self.K.mul(self.elem, other.elem),
                    self.dp + other.dp)

    def ord(self):
        """pi-adic valuation; values near the cap mean 'looks like 0'."""
        return self.K.val(self.elem) - self.K.e * self.dp

    def ord_cap(self):
        return self.K.e * (self.K.T - self.dp)

    def is_zero_to_precision(self):
        return self.K.val(self.elem) >= self.K.e * self.K.T

    def unit_value(self):
        """For ord()==0: the element p^{-dp} * elem itself, as a ring unit."""
        assert self.ord() == 0
        return self.K.div_p_power(self.elem, self.dp)

    def psi(self):
        """psi_F(self) as an exact root of unity (Cyc)."""
        K = self.K
        if self.dp == 0:
            return Cyc.rational(1)
        tr = K.trace(self.elem)
        den = K.p ** self.dp
        return Cyc.root_of_unity(tr % den, den)


class QuadExt:
    """Quadratic extension E = F[x]/(x^2 + A x + B), basis {1, w}."""

    def __init__(self, F, A, B, kind):
        self.F = F
        self.A = A
        self.B = B
        self.kind = kind
        self.eEF = 1 if kind == "inert" else 2
        self.zero = (F.zero, F.zero)
        self.one = (F.one, F.zero)
        self.w = (F.zero, F.one)
        if kind == "ramified":
            self.pi_q = self.w
            self.pi_cal = B  # convention Nm(pi_q) = pi_cal
            assert F.val(B) == 1, "ramified model must be Eisenstein over F"
        else:
            self.pi_q = (F.uniformizer, F.zero)
            self.pi_cal = F.uniformizer
        gprime = self.add(self.scalF(F.int_elem(2), self.w), (A, F.zero))
        self.n = self.val_q(gprime) if kind == "ramified" else 0
        self._reps_cache = {}

    def add(self, x, y):
        return (self.F.add(x[0], y[0]), self.F.add(x[1], y[1]))

    def sub(self, x, y):
        return (self.F.sub(x[0], y[0]), self.F.sub(x[1], y[1]))

    def neg(self, x):
        return (self.F.neg(x[0]), self.F.neg(x[1]))

    def mul(self, x, y):
        F = self.F
        a, b = x
        c, d = y
        bd = F.mul(b, d)
        re = F.sub(F.mul(a, c), F.mul(bd, self.B))
        im = F.sub(F.add(F.mul(a, d), F.mul(b, c)), F.mul(bd, self.A))
        return (re, im)

    def scalF(self, c, x):
        return (self.F.mul(c, x[0]), self.F.mul(c, x[1]))

    def conj(self, x):
        a, b = x
        return (self.F.sub(a, self.F.mul(self.A, b)), self.F.neg(b))

    def norm(self, x):
        a, b = x
        F = self.F
        return F.add(F.sub(F.mul(a, a), F.mul(self.A, F.mul(a, b))),
                     F.mul(self.B, F.mul(b, b)))

    def trace(self, x):
        a, b = x
        return self.F.sub(self.F.scal(2, a), self.F.mul(self.A, b))

    def powm(self, x, k):
        out = self.one
        base = x
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def val_q(self, x):
        vF = self.F.val
        if self.kind == "inert":
            return min(vF(x[0]), vF(x[1]))
        return min(2 * vF(x[0]), 2 * vF(x[1]) + 1)

    def residue_reps(self):
        F = self.F
        if self.kind == "ramified":
            return [(r, F.zero) for r in F._residue_reps()]
        return [(r, s) for r in F._residue_reps() for s in F._residue_reps()]

    def reps_mod(self, t):
        """Representatives of O_E / pi_q^t."""
        if t <= 0:
            return [self.zero]
        if t in self._reps_cache:
            return self._reps_cache[t]
        base = self.residue_reps()
        reps = [self.zero]
        piq_pow = self.one
        for _ in range(t):
            reps = [self.add(r, self.mul(piq_pow, b))
                    for r in reps for b in base]
            piq_pow = self.mul(piq_pow, self.pi_q)
        self._reps_cache[t] = reps
        return reps


class LocalHermitianData:
    """Hermitian line (O_E, xi x conj(y)) and its nearby twin.

    xi = beta * pi^{-m} with beta a unit (1 when inert); the nearby form
    rescales by pi (inert) or by a non-norm delta = 1 mod pi^{n-1} (ramified).
    """

    def __init__(self, F, E, beta_plus=None):
        self.F = F
        self.E = E
        self.kind = E.kind
        self.p = F.p
        self.q = F.q
        self.m = F.m
        self.n = E.n
        self.f = self.m + self.n
        self.pi = E.pi_cal
        self.beta = beta_plus if beta_plus is not None else F.one
        assert F.is_unit(self.beta)
        self._norm_unit_cache = {}
        self._ball_cache = {}
        self._residue_norm_table = None
        self.e2 = F.val(F.int_elem(2))
        self.jstar = 2 * self.e2 + 1
        self._delta = None
        pie = F.powm(self.pi, F.e)
        self._u_pi_inv = F.inverse(F.unit_shift(pie, F.e))
        self._sanity()

    # -- basic values -----------------------------------------------------

    def pi_power(self, k):
        F = self.F
        if k >= 0:
            return FElt(F, F.powm(self.pi, k))
        c = (-k + F.e - 1) // F.e
        num = F.mul(F.powm(self.pi, F.e * c + k), F.powm(self._u_pi_inv, c))
        return FElt(F, num, c)

    def xi(self, nearby=False):
        if self.kind == "inert":
            exp = -self.m + 1 if nearby else -self.m
            return self.pi_power(exp)
        u = self.beta
        if nearby:
            u = self.F.mul(u, self.delta())
        out = self.pi_power(-self.m)
        return FElt(self.F, self.F.mul(out.elem, u), out.dp)

    def delta(self):
        if self._delta is not None:
            return self._delta
        assert self.kind == "ramified"
        F = self.F
        lvl = max(self.n - 1, 0)
        cap = self.jstar + 2 if self.p == 2 else 2
        if lvl == 0:
            cands = _unit_reps_mod(F, cap)
        else:
            pi_lvl = F.powm(self.pi, lvl)
            cands = [F.add(F.one, F.mul(pi_lvl, r))
                     for r in _ball_reps(F, 0, cap)]
        for u in cands:
            if F.is_unit(u) and not self.is_norm_unit(u):
                self._delta = u
                return u
        raise LocalFieldError("no non-norm unit found at level n-1")

    def vol_lambda_h(self, nearby=False):
        """Vol(Lambda) = q^{h/2}: returns h (self-dual normalization)."""
        if self.kind == "inert":
            return -2 if nearby else 0
        return -self.n

    def dual_depth(self, nearby=False):
        """Lambda^* = pi_q^{-D} Lambda: returns D."""
        if self.kind == "inert":
            return 1 if nearby else 0
        return self.n

    def norm_q(self):
        return self.q ** 2 if self.kind == "inert" else self.q

    def ord_piq_norm(self):
        return 2 if self.kind == "inert" else 1

    # -- chi and norm membership -------------------------------------------

    def residue_norm_table(self):
        if self._residue_norm_table is None:
            table = set()
            F = self.F
            for z in self.E.residue_reps():
                nm = self.E.norm(z)
                if F.is_unit(nm):
                    table.add(F.residue_key(nm))
            self._residue_norm_table = table
        return self._residue_norm_table

    def is_norm_unit(self, u):
        F = self.F
        assert F.is_unit(u), "chi of a non-unit class"
        if self.p != 2:
            return F.residue_key(u) in self.residue_norm_table()
        pc = F.p ** min(F.T, self.jstar + 2)
        key = tuple(c % pc for c in u)
        if key in self._norm_unit_cache:
            return self._norm_unit_cache[key]
        out = self._norm_search(u, 0)
        self._norm_unit_cache[key] = out
        return out

    def _norm_search(self, u, t):
        """Is u in Nm(1 + pi_q^t O_E) (t>0) or Nm(O_E^x) (t=0)?

        Sound and complete by the Hensel bound: agreement of norms to
        pi-precision jstar = 2 ord(2) + 1 forces exact representability.
        """
        E, F = self.E, self.F
        slack = 1 if self.kind == "inert" else self.e2
        B = t + E.eEF * (self.jstar + slack)
        jst_val = F.e and self.jstar  # pi-adic target level
        if t > 0:
            piq_t = E.powm(E.pi_q, t)
            for z0 in E.reps_mod(B - t):
                z = E.add(E.one, E.mul(piq_t, z0))
                if F.val(F.sub(E.norm(z), u)) >= self.jstar:
                    return True
            return False
        for z in E.reps_mod(B):
            if E.val_q(z) != 0:
                continue
            if F.val(F.sub(E.norm(z), u)) >= self.jstar:
                return True
        return False

    def chi_unit(self, u):
        return 1 if self.is_norm_unit(u) else -1

    def chi_pi(self):
        return -1 if self.kind == "inert" else 1

    def chi(self, z):
        """chi(z) for a nonzero FElt z."""
        v = z.ord()
        w = self.pi_power(-v) * z
        assert w.ord() == 0
        return (self.chi_pi() ** (v & 1)) * self.chi_unit(w.unit_value())

    def chi_minus1(self):
        return self.chi_unit(self.F.neg(self.F.one))

    # -- ball decompositions of norm images ---------------------------------

    def ball_norm_level(self, t):
        """c with 1 + pi^c inside Nm(1 + pi_q^t O_E) (certified via squares)."""
        base = (t + self.E.eEF - 1) // self.E.eEF
        if self.p != 2:
            return max(base, 1)
        return max(self.jstar, self.e2 + base)

    def ball_norm_image(self, t):
        """Nm(1 + pi_q^t O_E) as a list of (unit rep, level c); equal masses.

        Each (u, c) stands for the ball u + pi^c O_F.
        """
        assert t >= 1
        if t in self._ball_cache:
            return self._ball_cache[t]
        F = self.F
        c = self.ball_norm_level(t)
        if self.p != 2:
            out = [(F.one, c)]
        else:
            amin = (t + self.E.eEF - 1) // self.E.eEF  # image is 1 mod pi^amin
            out = []
            for r in _ball_reps(F, amin, c):
                cand = F.add(F.one, r)
                if self._norm_search(cand, t):
                    out.append((cand, c))
            assert out, "norm image of a principal ball cannot be empty"
        self._ball_cache[t] = out
        return out

    def unit_norm_balls(self):
        """Nm(O_E^x) as a list of (unit rep, level c); equal masses."""
        if "units" in self._ball_cache:
            return self._ball_cache["units"]
        F = self.F
        if self.p != 2:
            c = 1
            out = []
            seen = set()
            for z in self.E.residue_reps():
                nm = self.E.norm(z)
                if not F.is_unit(nm):
                    continue
                k = F.residue_key(nm)
                if k not in seen:
                    seen.add(k)
                    out.append((nm, c))
        else:
            c = self.jstar
            out = [(u, c) for u in _unit_reps_mod(F, c)
                   if self.is_norm_unit(u)]
            assert out
        self._ball_cache["units"] = out
        return out

    # -- sanity --------------------------------------------------------------

    def _sanity(self):
        F = self.F
        if self.kind == "inert":
            assert self.n == 0
            assert len(self.residue_norm_table()) == self.q - 1
        else:
            assert self.n >= 1
            assert F.val(self.E.pi_cal) == 1
            if self.p != 2:
                assert self.n == 1
                assert len(self.residue_norm_table()) == (self.q - 1) // 2


def _unit_reps_mod(F, c):
    return [r for r in _ball_reps(F, 0, c) if F.is_unit(r)]


def _ball_reps(F, lo, hi):
    """Representatives of pi^{lo} O_F / pi^{hi} O_F."""
    if hi <= lo:
        return [F.zero]
    reps = [F.zero]
    pw = F.powm(F.uniformizer, lo)
    for _ in range(lo, hi):
        reps = [F.add(r, F.mul(pw, b))
                for r in reps for b in F._residue_reps()]
        pw = F.mul(pw, F.uniformizer)
    return reps


# ---------------------------------------------------------------------------
# standard models for the test grid
# ---------------------------------------------------------------------------

def make_local_field(p, fres=1, e=1, T=24, variant=0):
    """A standard model of F/Q_p with the given residue degree and e."""
    if e == 1 and fres == 1:
        return LocalField(p, [0, 1], 1, T)
    if e == 1 and fres == 2:
        if p == 2:
            return LocalField(2, [1, 1, 1], 1, T)
        c = _least_nonresidue(p)
        return LocalField(p, [-c, 0, 1], 1, T)
    if e == 2 and fres == 1:
        if p != 2:
            u = 1 if variant == 0 else _least_nonresidue(p)
            return LocalField(p, [-p * u, 0, 1], 2, T)  # y^2 = p*u, m = 1
        table = {0: [2, 2, 1],   # y^2+2y+2: Q_2(i),      m = 2
                 1: [-2, 0, 1],  # y^2 = 2:  Q_2(sqrt2),  m = 3
                 2: [2, 0, 1]}   # y^2 = -2,              m = 3
        return LocalField(2, table[variant], 2, T)
    raise LocalFieldError(f"no standard model for p={p} fres={fres} e={e}")


def _least_nonresidue(p):
    for c in range(2, p):
        if pow(c, (p - 1) // 2, p) == p - 1:
            return c
    raise LocalFieldError("no quadratic non-residue")


def make_quad_ext(F, kind, variant=0):
    """E/F quadratic: 'inert', or 'ramified' with variant selecting n at p=2."""
    if kind == "inert":
        if F.p == 2:
            c = _artin_schreier_unit(F)
            return QuadExt(F, F.one, c, "inert")
        c = _residue_nonsquare(F)
        return QuadExt(F, F.zero, F.neg(c), "inert")  # x^2 = c
    if kind != "ramified":
        raise LocalFieldError(f"unknown kind {kind}")
    pi = F.uniformizer
    if F.p != 2:
        u = F.one if variant == 0 else _residue_nonsquare(F)
        return QuadExt(F, F.zero, F.neg(F.mul(pi, u)), "ramified")
    if F.e == 2:
        # ramified over ramified 2-adic: x^2 = pi_F, n = 5
        return QuadExt(F, F.zero, F.neg(pi), "ramified")
    two = F.int_elem(2)
    table = {
        0: (two, two),            # x^2+2x+2: n=2, Nm(pi_q) = 2
        1: (two, F.neg(two)),     # x^2+2x-2: n=2 (sqrt 3)
        2: (F.zero, F.neg(two)),  # x^2 = 2:  n=3
        3: (F.zero, two),         # x^2 = -2: n=3
    }
    A, B = table[variant]
    return QuadExt(F, A, B, "ramified")


def _residue_nonsquare(F):
    squares = set()
    for r in F._residue_reps():
        squares.add(F.residue_key(F.mul(r, r)))
    for r in F._residue_reps():
        if F.is_unit(r) and F.residue_key(r) not in squares:
            return r
    raise LocalFieldError("no residue non-square")


def _artin_schreier_unit(F):
    """c with x^2 + x + c irreducible over the residue field (p = 2)."""
    for c in F._residue_reps():
        if not F.is_unit(c):
            continue
        if all(F.val(F.add(F.add(F.mul(r, r), r), c)) == 0
               for r in F._residue_reps()):
            return c
    raise LocalFieldError("no Artin-Schreier unit")
