"""Exact sparse arithmetic in the ring of differential polynomials.

Elements live in Q[u^a_0][u^a_{>=1}, theta_{a,k}, E_j^{+-1}][eps] where the
theta variables are odd and the E_j are exponential generators
E_j = exp(sum_a c_{j,a} u^a_0).  A monomial is stored as the tuple key

    (eps_power, ((field, order, exp), ...), ((field, order), ...), (k_1, ..., k_m))

with the commuting factors sorted by (field, order), the odd factors sorted
ascending (the sign of the reordering goes into the coefficient) and one
exponent per generator.  Field indices are 0-based; printing is 1-based.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Mapping

from gmpy2 import mpq

QQ = mpq


def Q(x) -> mpq:
    """Coerce ints, strings like ``"3/4"``, Fractions and mpq to an mpq."""
    if isinstance(x, str):
        return mpq(x.strip())
    return mpq(x)


class SignatureError(ValueError):
    pass


class ExpGen:
    """Exponential generator ``exp(sum_a weights[a] * u^a_0)``."""

    __slots__ = ("name", "weights")

    def __init__(self, name: str, weights: Mapping[int, object]):
        self.name = name
        self.weights = tuple(sorted((int(a), Q(c)) for a, c in weights.items() if c != 0))

    def weight(self, field: int) -> mpq:
        for a, c in self.weights:
            if a == field:
                return c
        return mpq(0)

    def _key(self):
        return (self.name, self.weights)

    def __eq__(self, other):
        return isinstance(other, ExpGen) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"ExpGen({self.name!r}, {dict(self.weights)})"


class Ring:
    """Signature of a differential polynomial ring.

    ``eps_order`` is the highest retained power of eps (``None`` = no
    truncation).
    """

    def __init__(self, n_fields: int, eps_order: int | None = 6,
                 gens: Iterable[ExpGen] = (), names: Iterable[str] | None = None):
        self.n = int(n_fields)
        self.eps_order = eps_order
        self.gens = tuple(gens)
        if names is None:
            names = ("u",) if self.n == 1 else tuple(f"u{a + 1}" for a in range(self.n))
        self.names = tuple(names)
        if len(self.names) != self.n:
            raise SignatureError("one name per field required")
        for g in self.gens:
            for a, _ in g.weights:
                if not 0 <= a < self.n:
                    raise SignatureError(f"generator {g.name} refers to field {a}")
        self._sig = (self.n, self.eps_order, self.gens)
        self._dx_cache: dict = {}
        self._ng = len(self.gens)
        self._zero_g = (0,) * self._ng

    def __eq__(self, other):
        return isinstance(other, Ring) and self._sig == other._sig

    def __hash__(self):
        return hash(self._sig)

    def __repr__(self):
        return f"Ring(n={self.n}, eps_order={self.eps_order}, gens={[g.name for g in self.gens]})"

    def with_eps_order(self, eps_order):
        return Ring(self.n, eps_order, self.gens, self.names)

    def with_names(self, names):
        return Ring(self.n, self.eps_order, self.gens, names)

    # constructors -------------------------------------------------------
    def zero(self) -> "DiffPoly":
        return DiffPoly(self, {})

    def const(self, c) -> "DiffPoly":
        c = Q(c)
        return DiffPoly(self, {(0, (), (), self._zero_g): c} if c else {})

    def one(self) -> "DiffPoly":
        return self.const(1)

    def u(self, a: int, i: int = 0) -> "DiffPoly":
        if not 0 <= a < self.n:
            raise SignatureError(f"field {a} outside 0..{self.n - 1}")
        return DiffPoly(self, {(0, ((a, i, 1),), (), self._zero_g): mpq(1)})

    def theta(self, a: int, k: int = 0) -> "DiffPoly":
        if not 0 <= a < self.n:
            raise SignatureError(f"field {a} outside 0..{self.n - 1}")
        return DiffPoly(self, {(0, (), ((a, k),), self._zero_g): mpq(1)})

    def eps(self, power: int = 1) -> "DiffPoly":
        return DiffPoly(self, {(power, (), (), self._zero_g): mpq(1)})._truncated()

    def gen(self, which, power: int = 1) -> "DiffPoly":
        j = self.gen_index(which)
        g = list(self._zero_g)
        g[j] = power
        return DiffPoly(self, {(0, (), (), tuple(g)): mpq(1)})

    def gen_index(self, which) -> int:
        if isinstance(which, int):
            return which
        for j, g in enumerate(self.gens):
            if g.name == which:
                return j
        raise SignatureError(f"no generator named {which!r}")

    def monomial(self, coeff=1, uvars=(), thetas=(), gens=None, eps=0) -> "DiffPoly":
        """Build ``coeff * prod u^a_i^e * prod theta * E^k * eps^p`` from parts."""
        p = self.const(coeff)
        for a, i, e in uvars:
            p = p * self.u(a, i) ** e
        for a, k in thetas:
            p = p * self.theta(a, k)
        if gens:
            for name, k in gens.items():
                p = p * self.gen(name, k)
        if eps:
            p = p * self.eps(eps)
        return p

    def var_name(self, a: int, i: int) -> str:
        return self.names[a] if i == 0 else f"{self.names[a]}_{i}"


def _merge_u(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = {}
    for f, o, e in a:
        d[(f, o)] = e
    for f, o, e in b:
        d[(f, o)] = d.get((f, o), 0) + e
    return tuple(sorted((f, o, e) for (f, o), e in d.items()))


def _merge_theta(a: tuple, b: tuple):
    """Concatenate two sorted odd words; return (sorted word, sign) or None."""
    if not a:
        return b, 1
    if not b:
        return a, 1
    sa = set(a)
    for t in b:
        if t in sa:
            return None
    inv = 0
    for t in b:
        inv += sum(1 for s in a if s > t)
    return tuple(sorted(a + b)), (-1 if inv & 1 else 1)


def _sort_theta(word: list):
    """Sort an odd word by bubble passes; return (tuple, sign) or None on repeats."""
    if len(set(word)) != len(word):
        return None
    w = list(word)
    sign = 1
    for i in range(len(w)):
        for j in range(len(w) - 1 - i):
            if w[j] > w[j + 1]:
                w[j], w[j + 1] = w[j + 1], w[j]
                sign = -sign
    return tuple(w), sign


@lru_cache(maxsize=1 << 20)
def _mono_mul(k1: tuple, k2: tuple):
    th = _merge_theta(k1[2], k2[2])
    if th is None:
        return None
    word, sign = th
    g1, g2 = k1[3], k2[3]
    g = tuple(x + y for x, y in zip(g1, g2)) if g1 else g1
    return (k1[0] + k2[0], _merge_u(k1[1], k2[1]), word, g), sign


def _remove_u(uv: tuple, idx: int) -> tuple:
    f, o, e = uv[idx]
    if e == 1:
        return uv[:idx] + uv[idx + 1:]
    return uv[:idx] + ((f, o, e - 1),) + uv[idx + 1:]


class DiffPoly:
    """Immutable sparse element of the ring; ``terms`` maps keys to mpq."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: Ring, terms: dict):
        self.ring = ring
        self.terms = terms

    # basic protocol -------------------------------------------------------
    def _coerce(self, other) -> "DiffPoly":
        if isinstance(other, DiffPoly):
            if other.ring is not self.ring and other.ring != self.ring:
                raise SignatureError(f"ring mismatch: {self.ring} vs {other.ring}")
            return other
        return self.ring.const(other)

    def _truncated(self) -> "DiffPoly":
        m = self.ring.eps_order
        if m is None:
            return self
        if all(k[0] <= m for k in self.terms):
            return self
        return DiffPoly(self.ring, {k: c for k, c in self.terms.items() if k[0] <= m})

    def __add__(self, other):
        other = self._coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        t = dict(self.terms)
        for k, c in other.terms.items():
            v = t.get(k)
            if v is None:
                t[k] = c
            else:
                v = v + c
                if v:
                    t[k] = v
                else:
                    del t[k]
        return DiffPoly(self.ring, t)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly(self.ring, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c) -> "DiffPoly":
        c = Q(c)
        if not c:
            return self.ring.zero()
        return DiffPoly(self.ring, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, DiffPoly):
            return self.scale(other)
        other = self._coerce(other)
        if not self.terms or not other.terms:
            return self.ring.zero()
        m = self.ring.eps_order
        t: dict = {}
        for k1, c1 in self.terms.items():
            e1 = k1[0]
            for k2, c2 in other.terms.items():
                if m is not None and e1 + k2[0] > m:
                    continue
                r = _mono_mul(k1, k2)
                if r is None:
                    continue
                k, s = r
                c = c1 * c2 if s > 0 else -(c1 * c2)
                v = t.get(k)
                if v is None:
                    t[k] = c
                else:
                    v = v + c
                    if v:
                        t[k] = v
                    else:
                        del t[k]
        return DiffPoly(self.ring, t)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(1 / Q(c))

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not available")
        out = self.ring.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        if isinstance(other, DiffPoly):
            return self.ring == other.ring and self.terms == other.terms
        if isinstance(other, (int, mpq)) or type(other).__name__ == "Fraction":
            return self.terms == self.ring.const(other).terms
        return NotImplemented

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    __hash__ = None

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self):
        return f"DiffPoly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms, key=_order_key):
            c = self.terms[k]
            body = self._mono_str(k)
            if not body:
                parts.append(str(c))
            elif c == 1:
                parts.append(body)
            elif c == -1:
                parts.append("-" + body)
            else:
                parts.append(f"{c}*{body}")
        s = " + ".join(parts)
        return s.replace("+ -", "- ")

    def _mono_str(self, k) -> str:
        eps, uv, th, gv = k
        out = []
        if eps:
            out.append("eps" if eps == 1 else f"eps^{eps}")
        for f, o, e in uv:
            v = self.ring.var_name(f, o)
            out.append(v if e == 1 else f"{v}^{e}")
        for j, e in enumerate(gv):
            if e:
                n = self.ring.gens[j].name
                out.append(n if e == 1 else f"{n}^{e}")
        for f, o in th:
            out.append(f"th{f + 1}_{o}")
        return "*".join(out)

    # structure queries ----------------------------------------------------
    def theta_degree(self) -> int:
        """Common theta degree; raises if the element is not super-homogeneous."""
        degs = {len(k[2]) for k in self.terms}
        if not degs:
            return 0
        if len(degs) > 1:
            raise ValueError("element is not homogeneous in theta")
        return degs.pop()

    def has_gens(self) -> bool:
        return any(any(k[3]) for k in self.terms)

    def max_order(self, field: int | None = None) -> int:
        """Highest jet order of a commuting variable (of ``field``), -1 if none."""
        best = -1
        for k in self.terms:
            for f, o, _ in k[1]:
                if (field is None or f == field) and o > best:
                    best = o
        return best

    def max_eps(self) -> int:
        return max((k[0] for k in self.terms), default=0)

    def constant_term(self) -> mpq:
        return self.terms.get((0, (), (), self.ring._zero_g), mpq(0))

    def eps_part(self, power: int) -> "DiffPoly":
        """Coefficient of eps^power (as an eps-free element)."""
        return DiffPoly(self.ring, {(0,) + k[1:]: c for k, c in self.terms.items() if k[0] == power})

    def eps_truncate(self, power: int) -> "DiffPoly":
        return DiffPoly(self.ring, {k: c for k, c in self.terms.items() if k[0] <= power})

    def at_eps_zero(self) -> "DiffPoly":
        return self.eps_part(0)

    def coefficient(self, key) -> mpq:
        return self.terms.get(key, mpq(0))

    def map_coeffs(self, fn) -> "DiffPoly":
        t = {}
        for k, c in self.terms.items():
            v = fn(k, c)
            if v:
                t[k] = Q(v)
        return DiffPoly(self.ring, t)

    def filter(self, pred) -> "DiffPoly":
        return DiffPoly(self.ring, {k: c for k, c in self.terms.items() if pred(k)})

    def with_ring(self, ring: Ring) -> "DiffPoly":
        """Reinterpret in a ring with the same field/generator layout."""
        if ring.n != self.ring.n or len(ring.gens) != len(self.ring.gens):
            raise SignatureError("incompatible layouts")
        return DiffPoly(ring, dict(self.terms))._truncated()

    # calculus -------------------------------------------------------------
    def dx(self) -> "DiffPoly":
        """Total x-derivative (Leibniz rule, odd factors and generators included)."""
        ring = self.ring
        cache = ring._dx_cache
        m = ring.eps_order
        t: dict = {}
        for k, c in self.terms.items():
            img = cache.get(k)
            if img is None:
                img = _dx_mono(ring, k)
                cache[k] = img
            for k2, c2 in img:
                if m is not None and k2[0] > m:
                    continue
                v = t.get(k2)
                w = c * c2
                if v is None:
                    t[k2] = w
                else:
                    v = v + w
                    if v:
                        t[k2] = v
                    else:
                        del t[k2]
        return DiffPoly(ring, t)

    def dxn(self, n: int) -> "DiffPoly":
        p = self
        for _ in range(n):
            p = p.dx()
        return p

    def diff_u(self, a: int, i: int) -> "DiffPoly":
        """Partial derivative with respect to u^a_i (generators via chain rule at i = 0)."""
        ring = self.ring
        t: dict = {}

        def put(k, c):
            v = t.get(k)
            if v is None:
                t[k] = c
            else:
                v = v + c
                if v:
                    t[k] = v
                else:
                    del t[k]

        gw = [g.weight(a) for g in ring.gens] if i == 0 else None
        for k, c in self.terms.items():
            eps, uv, th, gv = k
            for idx, (f, o, e) in enumerate(uv):
                if f == a and o == i:
                    put((eps, _remove_u(uv, idx), th, gv), c * e)
                    break
            if gw:
                for j, w in enumerate(gw):
                    if w and gv[j]:
                        put(k, c * w * gv[j])
        return DiffPoly(ring, t)

    def diff_theta(self, a: int, k: int) -> "DiffPoly":
        """Left derivative with respect to theta_{a,k}."""
        t: dict = {}
        target = (a, k)
        for key, c in self.terms.items():
            th = key[2]
            if target in th:
                pos = th.index(target)
                nk = (key[0], key[1], th[:pos] + th[pos + 1:], key[3])
                t[nk] = t.get(nk, 0) + (c if pos % 2 == 0 else -c)
        return DiffPoly(self.ring, {k2: v for k2, v in t.items() if v})

    def diff_eps(self) -> "DiffPoly":
        return DiffPoly(self.ring, {(k[0] - 1,) + k[1:]: c * k[0] for k, c in self.terms.items() if k[0]})

    def theta_orders(self, a: int) -> set:
        return {o for k in self.terms for f, o in k[2] if f == a}

    def u_orders(self, a: int) -> set:
        return {o for k in self.terms for f, o, _ in k[1] if f == a}

    def depends_on_u0(self, a: int) -> bool:
        if 0 in self.u_orders(a):
            return True
        return any(g.weight(a) and any(k[3][j] for k in self.terms)
                   for j, g in enumerate(self.ring.gens))


def _order_key(k):
    return (k[0], len(k[2]), k[2], sum(e for _, _, e in k[1]), k[1], k[3])


def _dx_mono(ring: Ring, k) -> list:
    eps, uv, th, gv = k
    out: dict = {}
    for idx, (f, o, e) in enumerate(uv):
        nk = (eps, _merge_u(_remove_u(uv, idx), ((f, o + 1, 1),)), th, gv)
        out[nk] = out.get(nk, 0) + e
    for pos, (f, o) in enumerate(th):
        w = list(th)
        w[pos] = (f, o + 1)
        r = _sort_theta(w)
        if r is None:
            continue
        word, s = r
        nk = (eps, uv, word, gv)
        out[nk] = out.get(nk, 0) + s
    for j, kj in enumerate(gv):
        if not kj:
            continue
        for a, w in ring.gens[j].weights:
            nk = (eps, _merge_u(uv, ((a, 1, 1),)), th, gv)
            out[nk] = out.get(nk, 0) + w * kj
    return [(nk, mpq(c)) for nk, c in out.items() if c]


# gradings and Euler-type operators ----------------------------------------

def standard_degree(key) -> int:
    eps, uv, th, _ = key
    return sum(o * e for _, o, e in uv) + sum(o for _, o in th) - eps


def gradations(p: DiffPoly) -> list:
    """(standard degree, theta degree) of every term, in canonical term order."""
    return [(standard_degree(k), len(k[2])) for k in sorted(p.terms, key=_order_key)]


def is_homogeneous(p: DiffPoly) -> bool:
    return len(set(gradations(p))) <= 1


def standard_degree_of(p: DiffPoly) -> int | None:
    degs = {standard_degree(k) for k in p.terms}
    if len(degs) > 1:
        raise ValueError("element is not homogeneous in the standard degree")
    return degs.pop() if degs else None


def field_euler(p: DiffPoly, a: int) -> DiffPoly:
    """sum_n u^a_n d/du^a_n applied to p."""
    ring = p.ring
    gen_part = ring.zero()
    t = {}
    for k, c in p.terms.items():
        d = sum(e for f, _, e in k[1] if f == a)
        if d:
            t[k] = c * d
    out = DiffPoly(ring, t)
    for j, g in enumerate(ring.gens):
        w = g.weight(a)
        if not w:
            continue
        sel = DiffPoly(ring, {k: c * k[3][j] for k, c in p.terms.items() if k[3][j]})
        gen_part = gen_part + sel * ring.u(a).scale(w)
    return out + gen_part


def euler_Ehat(p: DiffPoly, h) -> DiffPoly:
    """Apply E^ = sum((1-q_a) u^a_n + delta_{n0} r^a) d/du^a_n + (1-delta)/2 eps d/deps.

    ``h`` is anything with ``q``, ``r`` (length-N sequences) and ``delta``.
    """
    if any(k[2] for k in p.terms):
        raise ValueError("E^ is defined on theta-degree 0 elements only")
    ring = p.ring
    out = ring.zero()
    for a in range(ring.n):
        qa = Q(h.q[a])
        if qa != 1:
            out = out + field_euler(p, a).scale(1 - qa)
        ra = Q(h.r[a])
        if ra:
            out = out + p.diff_u(a, 0).scale(ra)
    half = (1 - Q(h.delta)) / 2
    if half:
        out = out + DiffPoly(ring, {k: c * k[0] * half for k, c in p.terms.items() if k[0]})
    return out


def dilation_D(p: DiffPoly) -> DiffPoly:
    """D = sum_n (n+1) u^a_n d/du^a_n."""
    if any(k[2] for k in p.terms):
        raise ValueError("D is defined on theta-degree 0 elements only")
    ring = p.ring
    t = {}
    for k, c in p.terms.items():
        w = sum((o + 1) * e for _, o, e in k[1])
        if w:
            t[k] = c * w
    out = DiffPoly(ring, t)
    for j, g in enumerate(ring.gens):
        sel = DiffPoly(ring, {k: c * k[3][j] for k, c in p.terms.items() if k[3][j]})
        if not sel:
            continue
        for a, w in g.weights:
            out = out + sel * ring.u(a).scale(w)
    return out


def total_poly_degree(key) -> int:
    return sum(e for _, _, e in key[1])


def substitute(p: DiffPoly, images, gen_images=None, target: Ring | None = None) -> DiffPoly:
    """Replace u^a_i by dx^i(images[a]) and generator j by gen_images[j].

    ``images`` may be shorter than the field count or contain ``None`` to keep
    a field unchanged.  ``gen_images[j]`` replaces E_j (its powers are taken by
    repeated multiplication; negative powers need ``gen_images`` entries of the
    form ``(E, E_inverse)``).  Odd variables are left untouched.
    """
    ring = p.ring
    target = target or ring
    jet_cache: dict = {}

    def var(a, i):
        key = (a, i)
        v = jet_cache.get(key)
        if v is None:
            img = images[a] if a < len(images) else None
            if img is None:
                v = target.u(a, i)
            elif i == 0:
                v = img
            else:
                v = var(a, i - 1).dx()
            jet_cache[key] = v
        return v

    pow_cache: dict = {}

    def vpow(a, i, e):
        key = (a, i, e)
        v = pow_cache.get(key)
        if v is None:
            v = var(a, i) ** e
            pow_cache[key] = v
        return v

    def gpow(j, e):
        key = ("g", j, e)
        v = pow_cache.get(key)
        if v is None:
            img = gen_images[j] if gen_images else None
            if img is None:
                v = target.gen(j, e)
            elif e >= 0:
                v = (img[0] if isinstance(img, tuple) else img) ** e
            else:
                if not isinstance(img, tuple):
                    raise ValueError("negative generator power needs an inverse image")
                v = img[1] ** (-e)
            pow_cache[key] = v
        return v

    out = target.zero()
    for k, c in p.terms.items():
        eps, uv, th, gv = k
        term = DiffPoly(target, {(eps, (), th, target._zero_g): c})._truncated()
        if not term:
            continue
        for f, o, e in uv:
            term = term * vpow(f, o, e)
            if not term:
                break
        for j, e in enumerate(gv):
            if e and term:
                term = term * gpow(j, e)
        out = out + term
    return out


def exp_series(x: DiffPoly) -> DiffPoly:
    """exp(x) for x with every term of positive eps order (terminates by truncation)."""
    ring = x.ring
    if ring.eps_order is None:
        raise ValueError("exp_series needs a truncated ring")
    if any(k[0] == 0 for k in x.terms):
        raise ValueError("exp_series argument must be O(eps)")
    out = ring.one()
    term = ring.one()
    n = 1
    while True:
        term = (term * x).scale(mpq(1, n))
        if not term:
            break
        out = out + term
        n += 1
    return out
