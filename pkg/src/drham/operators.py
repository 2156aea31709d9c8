"""Matrix differential operators with jet-ring coefficients, their
composition, adjoints and action, the induced Poisson bracket, and Miura
changes of variables."""
from __future__ import annotations

from math import comb

from gmpy2 import mpq

from .algebra import DiffPoly, Ring, Q, exp_series, substitute
from .variational import var_gradient


class ScalarDiffOp:
    """sum_s coeffs[s] * dx^s with DiffPoly coefficients."""

    __slots__ = ("ring", "coeffs")

    def __init__(self, ring: Ring, coeffs: dict | None = None):
        self.ring = ring
        self.coeffs = {s: c for s, c in (coeffs or {}).items() if c}

    @classmethod
    def const(cls, ring: Ring, c, order: int = 0) -> "ScalarDiffOp":
        return cls(ring, {order: ring.const(c)})

    @classmethod
    def mult(cls, p: DiffPoly) -> "ScalarDiffOp":
        return cls(p.ring, {0: p})

    def order(self) -> int:
        return max(self.coeffs, default=-1)

    def __bool__(self):
        return bool(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, ScalarDiffOp):
            return NotImplemented
        return self.coeffs.keys() == other.coeffs.keys() and all(
            self.coeffs[s] == other.coeffs[s] for s in self.coeffs)

    __hash__ = None

    def __add__(self, other: "ScalarDiffOp") -> "ScalarDiffOp":
        c = dict(self.coeffs)
        for s, v in other.coeffs.items():
            c[s] = c[s] + v if s in c else v
        return ScalarDiffOp(self.ring, c)

    def __neg__(self):
        return ScalarDiffOp(self.ring, {s: -v for s, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "ScalarDiffOp":
        c = Q(c)
        return ScalarDiffOp(self.ring, {s: v.scale(c) for s, v in self.coeffs.items()})

    def lmul(self, p: DiffPoly) -> "ScalarDiffOp":
        """p * self (multiplication on the left by a function)."""
        return ScalarDiffOp(self.ring, {s: p * v for s, v in self.coeffs.items()})

    def __mul__(self, other: "ScalarDiffOp") -> "ScalarDiffOp":
        """Composition self o other."""
        if not self.coeffs or not other.coeffs:
            return ScalarDiffOp(self.ring, {})
        top = self.order()
        jets = {}
        for l, b in other.coeffs.items():
            js = [b]
            for _ in range(top):
                js.append(js[-1].dx())
            jets[l] = js
        out: dict = {}
        for k, a in self.coeffs.items():
            for l, js in jets.items():
                for j in range(k + 1):
                    d = js[j]
                    if not d:
                        continue
                    term = (a * d).scale(comb(k, j))
                    s = k - j + l
                    out[s] = out[s] + term if s in out else term
        return ScalarDiffOp(self.ring, out)

    def adjoint(self) -> "ScalarDiffOp":
        """sum_j (-dx)^j o a_j."""
        out: dict = {}
        for j, a in self.coeffs.items():
            d = a
            for l in range(j + 1):
                if l:
                    d = d.dx()
                if not d:
                    break
                term = d.scale(comb(j, l) * (-1 if j & 1 else 1))
                s = j - l
                out[s] = out[s] + term if s in out else term
        return ScalarDiffOp(self.ring, out)

    def apply(self, v: DiffPoly) -> DiffPoly:
        out = self.ring.zero()
        if not self.coeffs:
            return out
        d = v
        for s in range(self.order() + 1):
            if s:
                d = d.dx()
            c = self.coeffs.get(s)
            if c is not None:
                out = out + c * d
        return out

    def map(self, fn) -> "ScalarDiffOp":
        return ScalarDiffOp(self.ring, {s: fn(c) for s, c in self.coeffs.items()})

    def eps_part(self, k: int) -> "ScalarDiffOp":
        return self.map(lambda c: c.eps_part(k))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"({self.coeffs[s]})*d^{s}" for s in sorted(self.coeffs))


class MatDiffOp:
    """N x M matrix of ScalarDiffOp."""

    __slots__ = ("ring", "entries")

    def __init__(self, ring: Ring, entries):
        self.ring = ring
        self.entries = [list(row) for row in entries]

    @classmethod
    def zeros(cls, ring: Ring, n: int | None = None, m: int | None = None) -> "MatDiffOp":
        n = ring.n if n is None else n
        m = n if m is None else m
        return cls(ring, [[ScalarDiffOp(ring) for _ in range(m)] for _ in range(n)])

    @classmethod
    def constant(cls, ring: Ring, matrix, order: int = 0) -> "MatDiffOp":
        """Constant matrix times dx^order."""
        return cls(ring, [[ScalarDiffOp(ring, {order: ring.const(x)} if x else {}) for x in row]
                          for row in matrix])

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def _zip(self, other, fn):
        return MatDiffOp(self.ring, [[fn(a, b) for a, b in zip(r1, r2)]
                                     for r1, r2 in zip(self.entries, other.entries)])

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return self.map_entries(lambda e: -e)

    def scale(self, c):
        return self.map_entries(lambda e: e.scale(c))

    def map_entries(self, fn):
        return MatDiffOp(self.ring, [[fn(e) for e in row] for row in self.entries])

    def map_coeffs(self, fn):
        return self.map_entries(lambda e: e.map(fn))

    def __eq__(self, other):
        if not isinstance(other, MatDiffOp):
            return NotImplemented
        return self.shape == other.shape and all(
            a == b for r1, r2 in zip(self.entries, other.entries) for a, b in zip(r1, r2))

    __hash__ = None

    def is_zero(self) -> bool:
        return all(not e for row in self.entries for e in row)

    def __matmul__(self, other: "MatDiffOp") -> "MatDiffOp":
        return op_compose(self, other)

    def adjoint(self) -> "MatDiffOp":
        return op_adjoint(self)

    def is_skew(self) -> bool:
        return op_adjoint(self) == -self

    def apply(self, vec: list) -> list:
        return op_apply(self, vec)

    def eps_part(self, k: int) -> "MatDiffOp":
        return op_degree_part(self, k)

    def left_mul(self, matrix) -> "MatDiffOp":
        """Constant matrix times self."""
        n, m = self.shape
        rows = []
        for i in range(len(matrix)):
            row = []
            for j in range(m):
                acc = ScalarDiffOp(self.ring)
                for k in range(n):
                    if matrix[i][k]:
                        acc = acc + self.entries[k][j].scale(matrix[i][k])
                row.append(acc)
            rows.append(row)
        return MatDiffOp(self.ring, rows)

    def right_mul(self, matrix) -> "MatDiffOp":
        """self times a constant matrix."""
        n, m = self.shape
        rows = []
        for i in range(n):
            row = []
            for j in range(len(matrix[0])):
                acc = ScalarDiffOp(self.ring)
                for k in range(m):
                    if matrix[k][j]:
                        acc = acc + self.entries[i][k].scale(matrix[k][j])
                row.append(acc)
            rows.append(row)
        return MatDiffOp(self.ring, rows)

    def max_order(self) -> int:
        return max((e.order() for row in self.entries for e in row), default=-1)

    def __repr__(self):
        return "MatDiffOp(" + "; ".join(
            "[" + ", ".join(repr(e) for e in row) + "]" for row in self.entries) + ")"


def op_compose(A: MatDiffOp, B: MatDiffOp) -> MatDiffOp:
    n, m = A.shape
    m2, p = B.shape
    if m != m2:
        raise ValueError("incompatible operator shapes")
    rows = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = ScalarDiffOp(A.ring)
            for k in range(m):
                a, b = A.entries[i][k], B.entries[k][j]
                if a and b:
                    acc = acc + a * b
            row.append(acc)
        rows.append(row)
    return MatDiffOp(A.ring, rows)


def op_adjoint(K: MatDiffOp) -> MatDiffOp:
    n, m = K.shape
    return MatDiffOp(K.ring, [[K.entries[j][i].adjoint() for j in range(n)] for i in range(m)])


def op_apply(K: MatDiffOp, vec: list) -> list:
    n, m = K.shape
    if len(vec) != m:
        raise ValueError("vector length does not match operator")
    jets: dict = {}
    top = K.max_order()
    for j, v in enumerate(vec):
        js = [v]
        for _ in range(max(top, 0)):
            js.append(js[-1].dx() if js[-1] else js[-1])
        jets[j] = js
    out = []
    for i in range(n):
        acc = K.ring.zero()
        for j in range(m):
            for s, c in K.entries[i][j].coeffs.items():
                d = jets[j][s]
                if d:
                    acc = acc + c * d
        out.append(acc)
    return out


def op_degree_part(K: MatDiffOp, eps_order: int) -> MatDiffOp:
    """The eps^k part K^{[k]} (coefficients without the eps factor)."""
    return K.map_coeffs(lambda c: c.eps_part(eps_order))


def coeff_extract(K: MatDiffOp, k: int, a: int, b: int, s: int) -> DiffPoly:
    """K^{[k],ab}_s: coefficient of eps^k dx^s in entry (a, b)."""
    c = K.entries[a][b].coeffs.get(s)
    return c.eps_part(k) if c is not None else K.ring.zero()


class NotSkew(ValueError):
    pass


def poisson_bracket(f: DiffPoly, g: DiffPoly, K: MatDiffOp, check_skew: bool = True) -> DiffPoly:
    """Density of {f, g}_K = int delta f/delta u^m K^{mn} delta g/delta u^n."""
    if check_skew and not K.is_skew():
        raise NotSkew("Poisson bracket needs a skew-symmetric operator")
    df = var_gradient(f)
    Kg = op_apply(K, var_gradient(g))
    out = f.ring.zero()
    for a, b in zip(df, Kg):
        out = out + a * b
    return out


def hamiltonian_vector(K: MatDiffOp, grad: list) -> list:
    """Components of the flow K(grad)."""
    return op_apply(K, grad)


# --------------------------------------------------------------------------
# Miura transformations


class MiuraError(ValueError):
    pass


class MiuraMap:
    """New variables as differential polynomials in the old ones.

    ``images[a]`` expresses the new variable a in terms of the old variables;
    both sets of variables share the same ring layout.
    """

    def __init__(self, images: list, max_iter: int = 50):
        self.ring = images[0].ring
        self.images = list(images)
        self.max_iter = max_iter
        n = self.ring.n
        self._lin = [[mpq(0)] * n for _ in range(n)]
        for a, im in enumerate(self.images):
            for b in range(n):
                self._lin[a][b] = im.coefficient((0, ((b, 0, 1),), (), self.ring._zero_g))
        self._lin_inv = _invert(self._lin)
        self._inverse = None

    @classmethod
    def identity(cls, ring: Ring) -> "MiuraMap":
        return cls([ring.u(a) for a in range(ring.n)])

    def is_close_to_identity(self) -> bool:
        n = self.ring.n
        return all(
            self.images[a].at_eps_zero() == self.ring.u(a) for a in range(n))

    def _gen_images(self, psi: list):
        """Images of the exponential generators under old = psi(new)."""
        ring = self.ring
        if not ring.gens:
            return None
        out = []
        for j, g in enumerate(ring.gens):
            shift = ring.zero()
            for a, w in g.weights:
                shift = shift + (psi[a] - ring.u(a)).scale(w)
            if shift.at_eps_zero():
                raise MiuraError(f"generator {g.name} is not preserved at eps = 0")
            if not shift:
                out.append(None)
            else:
                out.append(ring.gen(j) * exp_series(shift))
        return out

    def _gen_images_forward(self):
        """Images of generators under old -> new written in old variables."""
        return self._gen_images(self.images)

    def inverse_images(self) -> list:
        """Old variables as differential polynomials in the new ones."""
        if self._inverse is not None:
            return self._inverse
        ring = self.ring
        n = ring.n
        lin = [sum((ring.u(b).scale(self._lin[a][b]) for b in range(n)), ring.zero())
               for a in range(n)]
        rest = [self.images[a] - lin[a] for a in range(n)]
        if any(r.has_gens() for r in rest):
            raise MiuraError("Miura maps with generator-valued images are not supported")

        def solve(psi):
            rhs = [ring.u(a) - (substitute(rest[a], psi) if rest[a] else ring.zero()) for a in range(n)]
            return [sum((rhs[b].scale(self._lin_inv[a][b]) for b in range(n)), ring.zero())
                    for a in range(n)]

        psi = solve([ring.u(a) for a in range(n)])
        for _ in range(self.max_iter):
            nxt = solve(psi)
            if all(x == y for x, y in zip(nxt, psi)):
                self._inverse = psi
                return psi
            psi = nxt
        raise MiuraError("Miura inversion did not stabilise")

    def to_new(self, p: DiffPoly) -> DiffPoly:
        """Rewrite an expression in old variables in terms of the new ones."""
        psi = self.inverse_images()
        return substitute(p, psi, self._gen_images(psi))

    def to_old(self, p: DiffPoly) -> DiffPoly:
        """Rewrite an expression in new variables in terms of the old ones."""
        return substitute(p, self.images, self._gen_images(self.images))

    def then(self, other: "MiuraMap") -> "MiuraMap":
        """Composite map: first self, then other."""
        return MiuraMap([self.to_old(im) for im in other.images], self.max_iter)


def _invert(M):
    n = len(M)
    A = [[mpq(x) for x in row] + [mpq(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col]), None)
        if piv is None:
            raise MiuraError("linear part of the Miura map is not invertible")
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [x / p for x in A[col]]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [row[n:] for row in A]


def invert_matrix(M):
    """Exact inverse of a rational matrix."""
    try:
        return _invert(M)
    except MiuraError as e:
        raise ValueError("singular matrix") from e


def miura_op(K: MatDiffOp, m: MiuraMap) -> MatDiffOp:
    """L_m(new^a) o K^{mn} o L_n(new^b)^dagger, coefficients rewritten in new variables."""
    from .variational import frechet

    J = frechet(m.images, K.ring)
    out = op_compose(op_compose(J, K), op_adjoint(J))
    return out.map_coeffs(m.to_new)
