"""Pseudo-differential operators and the Gelfand-Dickey bihamiltonian
structure, with the r-spin normalisation and the eps-embedding.

Square roots of -r in the r-spin scalings are tracked as powers of a
symbol lam with lam^2 = -r attached to each monomial; every quantity that is
compared is checked to carry an even power, so the arithmetic stays in Q.
"""
from __future__ import annotations

from functools import lru_cache

from gmpy2 import mpq

from .algebra import DiffPoly, Ring, substitute
from .operators import MatDiffOp, MiuraMap, ScalarDiffOp, miura_op
from .variational import var_gradient


class TruncationError(ValueError):
    pass


@lru_cache(maxsize=None)
def gbinom(k: int, l: int) -> mpq:
    """Generalised binomial k(k-1)...(k-l+1)/l! for integer k."""
    out = mpq(1)
    for i in range(l):
        out = out * (k - i) / (i + 1)
    return out


class PseudoDiffOp:
    """sum_n terms[n] dx^n, known exactly for orders >= ``low`` (None: exact)."""

    __slots__ = ("ring", "terms", "low")

    def __init__(self, ring: Ring, terms: dict, low: int | None = None):
        self.ring = ring
        self.low = low
        self.terms = {n: c for n, c in terms.items() if c and (low is None or n >= low)}

    @classmethod
    def d(cls, ring: Ring, n: int = 1) -> "PseudoDiffOp":
        return cls(ring, {n: ring.one()})

    @classmethod
    def mult(cls, p: DiffPoly) -> "PseudoDiffOp":
        return cls(p.ring, {0: p})

    def top(self) -> int:
        return max(self.terms, default=-(10 ** 9))

    def __getitem__(self, n: int) -> DiffPoly:
        if self.low is not None and n < self.low:
            raise TruncationError(f"order {n} below certified order {self.low}")
        return self.terms.get(n, self.ring.zero())

    def __add__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        low = _max_low(self.low, other.low)
        t = dict(self.terms)
        for n, c in other.terms.items():
            t[n] = t[n] + c if n in t else c
        return PseudoDiffOp(self.ring, t, low)

    def __neg__(self):
        return PseudoDiffOp(self.ring, {n: -c for n, c in self.terms.items()}, self.low)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "PseudoDiffOp":
        return PseudoDiffOp(self.ring, {n: v.scale(c) for n, v in self.terms.items()}, self.low)

    def compose(self, other: "PseudoDiffOp", cutoff: int | None = None) -> "PseudoDiffOp":
        """self o other, computed for orders >= cutoff."""
        if (not self.terms and self.low is None) or (not other.terms and other.low is None):
            return PseudoDiffOp(self.ring, {})
        # unknown tails of either factor only reach orders below this bound
        bounds = []
        if self.low is not None:
            bounds.append(self.low + _top_bound(other))
        if other.low is not None:
            bounds.append(_top_bound(self) + other.low)
        low = max(bounds) if bounds else None
        bound = _max_low(low, cutoff)
        if bound is None and any(n < 0 for n in self.terms):
            raise TruncationError("composition with a negative-order factor needs a cutoff")
        out: dict = {}
        jets: dict = {}
        for i, a in self.terms.items():
            for j, b in other.terms.items():
                l = 0
                while True:
                    s = i - l + j
                    if bound is not None and s < bound:
                        break
                    if i >= 0 and l > i:
                        break
                    key = (j, l)
                    db = jets.get(key)
                    if db is None:
                        db = b if l == 0 else jets[(j, l - 1)].dx()
                        jets[key] = db
                    if db:
                        term = (a * db).scale(gbinom(i, l))
                        out[s] = out[s] + term if s in out else term
                    l += 1
        return PseudoDiffOp(self.ring, out, bound)

    def __matmul__(self, other):
        return self.compose(other)

    def plus(self) -> "PseudoDiffOp":
        if self.low is not None and self.low > 0:
            raise TruncationError("positive part not certified")
        return PseudoDiffOp(self.ring, {n: c for n, c in self.terms.items() if n >= 0})

    def res(self) -> DiffPoly:
        return self[-1]

    def truncate(self, low: int) -> "PseudoDiffOp":
        return PseudoDiffOp(self.ring, self.terms, _max_low(self.low, low))

    def eq_to(self, other: "PseudoDiffOp") -> bool:
        """Equality on the common certified range."""
        low = _max_low(self.low, other.low)
        keys = set(self.terms) | set(other.terms)
        return all(self.terms.get(n, self.ring.zero()) == other.terms.get(n, self.ring.zero())
                   for n in keys if low is None or n >= low)

    def to_scalar_op(self) -> ScalarDiffOp:
        if any(n < 0 for n in self.terms):
            raise ValueError("not a differential operator")
        return ScalarDiffOp(self.ring, dict(self.terms))

    def __repr__(self):
        body = " + ".join(f"({self.terms[n]})*d^{n}" for n in sorted(self.terms, reverse=True))
        return f"PDO[{body or '0'}; low={self.low}]"


def _top_bound(X: PseudoDiffOp) -> int:
    """Largest order X can reach, including its unknown tail."""
    return max(X.terms) if X.terms else X.low - 1


def _max_low(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def pdo_compose(A: PseudoDiffOp, B: PseudoDiffOp, cutoff: int | None = None) -> PseudoDiffOp:
    return A.compose(B, cutoff)


def pdo_power(A: PseudoDiffOp, k: int, cutoff: int) -> PseudoDiffOp:
    out = PseudoDiffOp(A.ring, {0: A.ring.one()})
    top = A.top()
    for i in range(k):
        out = out.compose(A, cutoff - top * (k - 1 - i))
    return out


class GDContext:
    """Lax operator L = dx^r + f_{r-2} dx^{r-2} + ... + f_0.

    With ``aux=True`` the ring also carries fields X_0..X_{r-1} used to read
    off Poisson operators; field index j < r-1 is f_j, index r-1+j is X_j.
    """

    def __init__(self, r: int, aux: bool = False):
        if r < 2:
            raise ValueError("r must be at least 2")
        self.r = r
        self.nf = r - 1
        names = [f"f{j}" for j in range(r - 1)]
        if aux:
            names += [f"X{j}" for j in range(r)]
        self.ring = Ring(len(names), None, names=names)
        self.aux = aux
        terms = {r: self.ring.one()}
        for j in range(r - 1):
            terms[j] = self.ring.u(j)
        self.L = PseudoDiffOp(self.ring, terms)
        self._root = None
        self.f_ring = Ring(r - 1, None, names=names[: r - 1])

    def f(self, j: int) -> DiffPoly:
        if j == self.r:
            return self.ring.one()
        if j == self.r - 1:
            return self.ring.zero()
        return self.ring.u(j)

    def X(self, j: int, i: int = 0) -> DiffPoly:
        if not self.aux:
            raise ValueError("context has no auxiliary fields")
        return self.ring.u(self.nf + j, i)

    def root(self, depth: int) -> PseudoDiffOp:
        """L^{1/r} = dx + sum_{n=1}^{depth} c_n dx^{-n} with orders >= -depth certified."""
        if self._root is not None and self._root.low <= -depth:
            return self._root.truncate(-depth)
        r = self.r
        ring = self.ring
        terms = {1: ring.one()}
        start = 1
        if self._root is not None:
            terms = dict(self._root.terms)
            start = -self._root.low + 1
        for n in range(start, depth + 1):
            cut = r - 1 - n
            P = pdo_power(PseudoDiffOp(ring, terms), r, cut)
            diff = P[cut] - self.L.terms.get(cut, ring.zero())
            c = diff.scale(mpq(-1, r))
            if c:
                terms[-n] = c
        self._root = PseudoDiffOp(ring, terms, -depth)
        return self._root

    def frac_power(self, k: int, cutoff: int) -> PseudoDiffOp:
        """L^{k/r} certified for orders >= cutoff."""
        r = self.r
        a, alpha = divmod(k, r)
        # (L^{1/r})^alpha needs depth so that L^a o it is certified at cutoff
        need = r * a + alpha - cutoff
        R1 = self.root(max(need, 1))
        B = pdo_power(R1, alpha, cutoff - r * a)
        out = B
        for i in range(a):
            out = self.L.compose(out, cutoff - r * (a - 1 - i))
        return out

    def res_power(self, k: int) -> DiffPoly:
        return self.frac_power(k, -1).res()

    def to_f_ring(self, p: DiffPoly) -> DiffPoly:
        """Drop to the ring of f-variables (p must not involve auxiliary fields)."""
        if not self.aux:
            return p
        nf = self.nf
        t = {}
        for k, c in p.terms.items():
            if any(f >= nf for f, _, _ in k[1]):
                raise ValueError("expression involves auxiliary fields")
            t[k] = c
        return DiffPoly(self.f_ring, t)


def gd_hamiltonian(ctx: GDContext, alpha: int, a: int) -> DiffPoly:
    """Density of h^GD_{alpha,a} = -r/((a+1)r+alpha) int res L^{a+1+alpha/r}."""
    r = ctx.r
    k = (a + 1) * r + alpha
    return ctx.to_f_ring(ctx.res_power(k).scale(mpq(-r, k)))


def _extract(ctx: GDContext, coeffs: dict, alphas, betas) -> MatDiffOp:
    """Read K^{ab} from sum_a (sum_b K^{ab} X_b) dx^a given as {a: DiffPoly}."""
    R = ctx.f_ring
    nf = ctx.nf
    rows = []
    for al in alphas:
        c = coeffs.get(al, ctx.ring.zero())
        per = {b: {} for b in betas}
        for k, v in c.terms.items():
            xs = [(i, f, o, e) for i, (f, o, e) in enumerate(k[1]) if f >= nf]
            if len(xs) != 1 or xs[0][3] != 1:
                raise ValueError("expression is not linear in the auxiliary fields")
            i, f, o, _ = xs[0]
            b = f - nf
            if b not in per:
                raise ValueError(f"unexpected auxiliary field X{b}")
            nk = (k[0], k[1][:i] + k[1][i + 1:], k[2], k[3])
            per[b].setdefault(o, {})[nk] = v
        rows.append([ScalarDiffOp(R, {s: DiffPoly(R, t) for s, t in per[b].items()}) for b in betas])
    return MatDiffOp(R, rows)


def gd_k1(ctx: GDContext) -> MatDiffOp:
    """K1^GD read off from [X, L]_+ with X = sum_j dx^{-(j+1)} o X_j."""
    if not ctx.aux:
        ctx = GDContext(ctx.r, aux=True)
    r = ctx.r
    ring = ctx.ring
    X = PseudoDiffOp(ring, {})
    for j in range(r - 1):
        X = X + PseudoDiffOp.d(ring, -(j + 1)).compose(PseudoDiffOp.mult(ctx.X(j)), -r - 1)
    X = X.truncate(-r - 1)
    C = X.compose(ctx.L, 0) - ctx.L.compose(X, 0)
    return _extract(ctx, C.plus().terms, range(r - 1), range(r - 1))


def gd_k2(ctx: GDContext) -> MatDiffOp:
    """K2^GD from (L o X~)_+ o L - L o (X~ o L)_+ with X_{r-1} eliminated."""
    if not ctx.aux:
        ctx = GDContext(ctx.r, aux=True)
    r = ctx.r
    ring = ctx.ring
    Xt = PseudoDiffOp(ring, {})
    for j in range(r):
        Xt = Xt + PseudoDiffOp.d(ring, -(j + 1)).compose(PseudoDiffOp.mult(ctx.X(j)), -2 * r - 1)
    Xt = Xt.truncate(-2 * r - 1)
    left = ctx.L.compose(Xt, 0).plus().compose(ctx.L)
    right = ctx.L.compose(Xt.compose(ctx.L, 0).plus())
    P = left - right
    # X_{r-1} = (1/r) sum_{j<=r-2, 1<=a<=r-j} C(-j-1, a) dx^{a-1}(f_{j+a} X_j)
    fX = ring.zero()
    for j in range(r - 1):
        for a in range(1, r - j + 1):
            fj = ctx.f(j + a)
            if not fj:
                continue
            fX = fX + (fj * ctx.X(j)).dxn(a - 1).scale(gbinom(-j - 1, a))
    fX = fX.scale(mpq(1, r))
    images = [None] * ring.n
    images[ctx.nf + r - 1] = fX
    coeffs = {s: substitute(c, images) for s, c in P.terms.items()}
    leftover = coeffs.get(r - 1)
    if leftover:
        raise AssertionError("residue of [X~, L] does not vanish after elimination")
    return _extract(ctx, coeffs, range(r - 1), range(r - 1))


def degree_zero_part(K: MatDiffOp) -> MatDiffOp:
    """Terms c dx^s with s + (jet order of c) = 0, i.e. s = 0 and c jet-free."""
    def part(op):
        c = op.coeffs.get(0)
        if c is None:
            return ScalarDiffOp(op.ring)
        return ScalarDiffOp(op.ring, {0: c.filter(lambda k: all(o == 0 for _, o, _ in k[1]))})
    return K.map_entries(part)


# --------------------------------------------------------------------------
# r-spin normalisation


def factorial_r(n: int, r: int, d: int) -> int:
    """(n)!_r for n = alpha + r d: prod_{i=0}^{d} (alpha + r i), 1 when d = -1."""
    if d == -1:
        return 1
    alpha = n - r * d
    out = 1
    for i in range(d + 1):
        out *= alpha + r * i
    return out


class RSpin:
    """The r-spin package: GD operators and Hamiltonians in the w-variables."""

    def __init__(self, r: int):
        if r not in (2, 3, 4, 5):
            raise ValueError("r-spin package supports r = 2..5")
        self.r = r
        self.ctx = GDContext(r)
        self.ring = Ring(r - 1, None, names=[f"w{a + 1}" for a in range(r - 1)])
        self._miura = None
        self._cache = {}

    # w^a = lam^{-(r-a-1)} what^a with what^a = res L^{(r-a)/r} / (r-a), a = 1..r-1
    def lam_exp(self, field: int) -> int:
        """lam-exponent e with what = lam^e w for the 0-based field index."""
        return self.r - (field + 1) - 1

    def miura_f_to_what(self) -> MiuraMap:
        if self._miura is None:
            r = self.r
            ims = []
            for a in range(1, r):
                ims.append(self.ctx.res_power(r - a).scale(mpq(1, r - a)))
            self._miura = MiuraMap([self.ctx.to_f_ring(x) for x in ims])
        return self._miura

    def _rescale(self, p: DiffPoly, base: int) -> DiffPoly:
        """Substitute what = lam^e w and multiply by lam^base; lam^2 = -r."""
        r = self.r
        t = {}
        for k, c in p.terms.items():
            e = base + sum(self.lam_exp(f) * x for f, _, x in k[1])
            if e & 1:
                raise ValueError("odd power of sqrt(-r) survives: result is not rational")
            t[k] = c * mpq(-r) ** (e // 2)
        return DiffPoly(self.ring, t)

    def _rescale_op(self, K: MatDiffOp, base: int) -> MatDiffOp:
        n = self.r - 1
        rows = []
        for a in range(n):
            row = []
            for b in range(n):
                shift = base - self.lam_exp(a) - self.lam_exp(b)
                row.append(K.entries[a][b].map(lambda c, s=shift: self._rescale(c, s)))
            rows.append(row)
        return MatDiffOp(self.ring, rows)

    def k1_what(self) -> MatDiffOp:
        if "k1" not in self._cache:
            self._cache["k1"] = miura_op(gd_k1(self.ctx), self.miura_f_to_what())
        return self._cache["k1"]

    def k2_what(self) -> MatDiffOp:
        if "k2" not in self._cache:
            self._cache["k2"] = miura_op(gd_k2(self.ctx), self.miura_f_to_what())
        return self._cache["k2"]

    def K1(self) -> MatDiffOp:
        """(-r)^{r/2} K1^GD in w-variables (eps-free)."""
        return self._rescale_op(self.k1_what(), self.r)

    def K2(self) -> MatDiffOp:
        return self._rescale_op(self.k2_what(), 0)

    def hamiltonian(self, alpha: int, d: int) -> DiffPoly:
        """h^{r-spin}_{alpha,d} density in w-variables (eps-free), alpha = 1..r-1."""
        r = self.r
        key = ("h", alpha, d)
        if key not in self._cache:
            h = self.miura_f_to_what().to_new(gd_hamiltonian(self.ctx, alpha, d))
            h = DiffPoly(self.ring, h.terms)
            # divide by (-r)^{(alpha-1+r(d+1))/2 - d} (alpha+rd)!_r
            base = -(alpha - 1 + r * (d + 1)) + 2 * d
            self._cache[key] = self._rescale(h, base).scale(mpq(1, factorial_r(alpha + r * d, r, d)))
        return self._cache[key]


def eps_embed_op(K: MatDiffOp, ring: Ring) -> MatDiffOp:
    """Insert eps^{s+j-1} in front of each term c dx^s whose coefficient has j derivatives."""
    def emb(op):
        out = {}
        for s, c in op.coeffs.items():
            t = {}
            for k, v in c.terms.items():
                j = sum(o * e for _, o, e in k[1])
                p = s + j - 1
                if p < 0:
                    raise ValueError("operator has a degree-zero part")
                if ring.eps_order is not None and p > ring.eps_order:
                    continue
                t[(p,) + k[1:]] = v
            if t:
                out[s] = DiffPoly(ring, t)
        return ScalarDiffOp(ring, out)
    return MatDiffOp(ring, [[emb(e) for e in row] for row in K.entries])


def eps_embed(p: DiffPoly, ring: Ring, shift: int = 0) -> DiffPoly:
    """eps^{j + shift} in front of each term with j derivatives."""
    t = {}
    for k, v in p.terms.items():
        e = sum(o * x for _, o, x in k[1]) + shift
        if e < 0:
            raise ValueError("negative eps power")
        if ring.eps_order is not None and e > ring.eps_order:
            continue
        t[(e,) + k[1:]] = v
    return DiffPoly(ring, t)


def rspin_package(r: int, eps_order=None, d_max: int = 0):
    """(K1, K2, {(alpha, d): density}) for the r-spin theory with eps inserted."""
    pkg = RSpin(r)
    ring = Ring(r - 1, eps_order, names=pkg.ring.names)
    K1 = eps_embed_op(pkg.K1(), ring)
    K2 = eps_embed_op(pkg.K2(), ring)
    hams = {}
    for alpha in range(1, r):
        for d in range(-1, d_max + 2):
            hams[(alpha, d)] = eps_embed(pkg.hamiltonian(alpha, d), ring)
    return K1, K2, hams


def dz_recursion_residual(K1: MatDiffOp, K2: MatDiffOp, hams: dict, r: int, alpha: int, d: int) -> list:
    """K2 grad h_{alpha,d} - (alpha+(d+1)r)/r K1 grad h_{alpha,d+1}."""
    lhs = K2.apply(var_gradient(hams[(alpha, d)]))
    rhs = K1.apply(var_gradient(hams[(alpha, d + 1)]))
    fac = mpq(alpha + (d + 1) * r, r)
    return [x - y.scale(fac) for x, y in zip(lhs, rhs)]


def miura_to_dr(r: int, ring: Ring) -> MiuraMap:
    """w in terms of the DR variables u for r = 3, 4, 5."""
    u = ring.u
    e2 = ring.eps(2)
    if r == 3:
        ims = [u(0), u(1)]
    elif r == 4:
        ims = [u(0) + (e2 * u(2, 2)) / 96, u(1), u(2)]
    elif r == 5:
        ims = [u(0) + (e2 * u(2, 2)) / 60, u(1) + (e2 * u(3, 2)) / 60, u(2), u(3)]
    else:
        raise ValueError("Miura maps to the DR variables are known for r = 3, 4, 5")
    return MiuraMap(ims)


def apply_miura_to_dr(r: int, K: MatDiffOp) -> MatDiffOp:
    """Transform an operator in DR variables to the w-variables."""
    return miura_op(K, miura_to_dr(r, K.ring))
