"""The second Poisson operator K2 built from a generating density and
homogeneity data, the vector field R whose commutator with B_{K1} gives
B_{K2}, and the bihamiltonian recursion (checks, generation, genus 0)."""
from __future__ import annotations

from dataclasses import dataclass, field

from gmpy2 import mpq

from .algebra import DiffPoly, Q, Ring, euler_Ehat
from .operators import MatDiffOp, ScalarDiffOp, invert_matrix, op_apply
from .variational import (NotExact, Unsupported, functional_equal, functional_from_variational,
                          helmholtz_ok, higher_euler, integrate_dx, integrate_gradient_u0,
                          omega_hat, value_at_zero, var_derivative, var_gradient)


class InvalidModel(ValueError):
    pass


def _qmat(M):
    return [[Q(x) for x in row] for row in M]


def _matmul(A, B):
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), mpq(0)) for j in range(len(B[0]))]
            for i in range(len(A))]


class HomogeneityData:
    """(eta, unit, q, r, delta, A) with derived mu, eta^{-1} and A^b_a."""

    def __init__(self, eta, q, r, delta, A=None, unit=None, validate: bool = True):
        self.eta = _qmat(eta)
        n = len(self.eta)
        self.n = n
        self.q = [Q(x) for x in q]
        self.r = [Q(x) for x in r]
        self.delta = Q(delta)
        self.A = _qmat(A) if A is not None else [[mpq(0)] * n for _ in range(n)]
        self.unit = [Q(x) for x in unit] if unit is not None else [mpq(int(a == 0)) for a in range(n)]
        try:
            self.eta_inv = invert_matrix(self.eta)
        except ValueError as e:
            raise InvalidModel("metric eta is singular") from e
        self.mu = [qa - self.delta / 2 for qa in self.q]
        # A_up[b][a] = A^b_a = eta^{b n} A_{n a}
        self.A_up = _matmul(self.eta_inv, self.A)
        if validate:
            self.validate()

    def validate(self):
        n = self.n
        for name, vec in (("q", self.q), ("r", self.r), ("unit", self.unit)):
            if len(vec) != n:
                raise InvalidModel(f"{name} has length {len(vec)}, expected {n}")
        if len(self.A) != n or any(len(row) != n for row in self.A):
            raise InvalidModel("A must be an N x N matrix")
        for a in range(n):
            for b in range(n):
                if self.eta[a][b] != self.eta[b][a]:
                    raise InvalidModel("eta is not symmetric")
                if self.A[a][b] != self.A[b][a]:
                    raise InvalidModel("A is not symmetric")
                if (self.mu[a] + self.mu[b]) * self.eta[a][b]:
                    raise InvalidModel(f"mu eta + eta mu != 0 at ({a + 1},{b + 1})")
        if not any(self.unit):
            raise InvalidModel("unit vector vanishes")

    @property
    def half_minus_mu(self):
        n = self.n
        return [[(mpq(1, 2) - self.mu[a]) if a == b else mpq(0) for b in range(n)] for a in range(n)]

    def recursion_factor(self, a: int, d: int) -> mpq:
        return d + mpq(3, 2) + self.mu[a]

    def euler_coefficient(self, ring: Ring, a: int) -> DiffPoly:
        """E^a = (1 - q_a) u^a + r^a."""
        return ring.u(a).scale(1 - self.q[a]) + ring.const(self.r[a])

    def __eq__(self, other):
        return isinstance(other, HomogeneityData) and all(
            getattr(self, k) == getattr(other, k) for k in ("eta", "q", "r", "delta", "A", "unit"))

    __hash__ = None

    def __repr__(self):
        def fmt(v):
            return "[" + ", ".join(fmt(x) if isinstance(x, list) else str(x) for x in v) + "]"
        return (f"HomogeneityData(eta={fmt(self.eta)}, q={fmt(self.q)}, r={fmt(self.r)}, delta={self.delta}, "
                f"A={fmt(self.A)}, unit={fmt(self.unit)})")


@dataclass
class CohFTModel:
    name: str
    hom: HomogeneityData
    gbar: DiffPoly
    F: DiffPoly | None = None
    hamiltonians: dict = field(default_factory=dict)

    @property
    def ring(self) -> Ring:
        return self.gbar.ring

    def __eq__(self, other):
        if not isinstance(other, CohFTModel):
            return NotImplemented
        return (self.name == other.name and self.hom == other.hom and self.gbar == other.gbar
                and (self.F is None) == (other.F is None)
                and (self.F is None or self.F == other.F))


# --------------------------------------------------------------------------
# K1, K2 and homogeneity

def build_K1(hom: HomogeneityData, ring: Ring) -> MatDiffOp:
    return MatDiffOp.constant(ring, hom.eta_inv, 1)


def check_homogeneity(m: CohFTModel, g: DiffPoly | None = None) -> bool:
    """E^ g = (3 - delta) g + 1/2 int A_ab u^a u^b in the space of functionals."""
    g = m.gbar if g is None else g
    return functional_equal(homogeneity_defect(m.hom, g), 0)


def homogeneity_defect(hom: HomogeneityData, g: DiffPoly) -> DiffPoly:
    ring = g.ring
    quad = ring.zero()
    for a in range(ring.n):
        for b in range(ring.n):
            if hom.A[a][b]:
                quad = quad + (ring.u(a) * ring.u(b)).scale(hom.A[a][b] / 2)
    return euler_Ehat(g, hom) - g.scale(3 - hom.delta) - quad


def _d_op(ring):
    return ScalarDiffOp(ring, {1: ring.one()})


def _diag_op(ring, n, diag):
    return MatDiffOp(ring, [[ScalarDiffOp(ring, {0: ring.const(diag[a])} if a == b and diag[a] else {})
                             for b in range(n)] for a in range(n)])


def build_K2(m: CohFTModel, form: str = "alternative", g: DiffPoly | None = None) -> MatDiffOp:
    """K2 from the generating density, in the defining or the alternative form."""
    hom = m.hom
    g = m.gbar if g is None else g
    return build_K2_from(hom, g, form)


def build_K2_from(hom: HomogeneityData, g: DiffPoly, form: str = "alternative") -> MatDiffOp:
    ring = g.ring
    n = ring.n
    D = MatDiffOp(ring, [[_d_op(ring) if a == b else ScalarDiffOp(ring) for b in range(n)]
                         for a in range(n)])
    Om = omega_hat(g, 0, hom.eta_inv)
    Om1 = omega_hat(g, 1, hom.eta_inv)
    hm = [mpq(1, 2) - x for x in hom.mu]
    third = D @ Om1 @ D
    if form == "defining":
        E_om = Om.map_coeffs(lambda c: euler_Ehat(c, hom))
        Om_x = Om.map_coeffs(lambda c: c.dx())
        return (E_om @ D) + Om_x.right_mul(_diag(hm)) + third
    if form == "alternative":
        M = _matmul(_matmul(hom.eta_inv, hom.A), hom.eta_inv)
        first = (D @ Om).right_mul(_diag(hm)) + (Om @ D).left_mul(_diag(hm))
        return first + MatDiffOp.constant(ring, M, 1) + third
    raise ValueError(f"unknown form {form!r}")


def _diag(v):
    n = len(v)
    return [[v[a] if a == b else mpq(0) for b in range(n)] for a in range(n)]


def r_vector_field(m: CohFTModel, g: DiffPoly | None = None) -> list:
    """R^a = eta^{ab}((-1/2 - mu_b) dg/du^b - 1/2 A_bc u^c + dx T_{b,1}(g))."""
    return r_vector_field_from(m.hom, m.gbar if g is None else g)


def r_vector_field_from(hom: HomogeneityData, g: DiffPoly) -> list:
    ring = g.ring
    n = ring.n
    inner = []
    grads = var_gradient(g)
    for b in range(n):
        t = grads[b].scale(-mpq(1, 2) - hom.mu[b])
        for c in range(n):
            if hom.A[b][c]:
                t = t - ring.u(c).scale(hom.A[b][c] / 2)
        t = t + higher_euler(g, b, 1).dx()
        inner.append(t)
    return [sum((inner[b].scale(hom.eta_inv[a][b]) for b in range(n) if hom.eta_inv[a][b]), ring.zero())
            for a in range(n)]


# --------------------------------------------------------------------------
# bihamiltonian recursion

@dataclass
class RecursionResult:
    alpha: int
    d: int
    ok: bool
    residual: list

    def witness(self) -> str:
        return "; ".join(str(r) for r in self.residual if r)


def casimir_gradient(hom: HomogeneityData, ring: Ring, a: int) -> list:
    """delta/delta u of int eta_{ab} u^b."""
    return [ring.const(hom.eta[a][b]) for b in range(ring.n)]


def _as_gradient(h) -> list:
    if isinstance(h, DiffPoly):
        return var_gradient(h)
    return list(h)


def recursion_residual(hom: HomogeneityData, K2: MatDiffOp, grads: dict, a: int, d: int) -> list:
    """K2 Y_{a,d} - (d+3/2+mu_a) K1 Y_{a,d+1} - A^b_a K1 Y_{b,d} componentwise."""
    ring = K2.ring
    n = ring.n
    K1 = build_K1(hom, ring)
    lhs = op_apply(K2, _as_gradient(grads[(a, d)]))
    rhs = [c.scale(hom.recursion_factor(a, d)) for c in op_apply(K1, _as_gradient(grads[(a, d + 1)]))]
    for b in range(n):
        coef = hom.A_up[b][a]
        if coef:
            rhs = [x + y.scale(coef) for x, y in zip(rhs, op_apply(K1, _as_gradient(grads[(b, d)])))]
    return [x - y for x, y in zip(lhs, rhs)]


def recursion_check(hom: HomogeneityData, K2: MatDiffOp, grads: dict, levels) -> list:
    """Check the recursion for each (a, d) in ``levels``; grads maps (a, d) to a density or gradient."""
    out = []
    for a, d in levels:
        res = recursion_residual(hom, K2, grads, a, d)
        out.append(RecursionResult(a, d, all(not r for r in res), res))
    return out


class RecursionFailure(ValueError):
    def __init__(self, alpha, d, reason):
        super().__init__(f"recursion generation failed at (alpha={alpha + 1}, d={d}): {reason}")
        self.alpha = alpha
        self.d = d
        self.reason = reason


def level0_gradient(g: DiffPoly, a: int) -> list:
    """Gradient of g_{a,0} = d g / d u^a: the u^a-derivative of the gradient of g."""
    return [var_derivative(g, b).diff_u(a, 0) for b in range(g.ring.n)]


def recursion_generate(hom: HomogeneityData, K2: MatDiffOp, d_max: int,
                       reconstruct: bool = True, start: dict | None = None,
                       skip_degenerate: bool = False) -> dict:
    """Solve the recursion level by level starting from the Casimirs.

    Returns a dict mapping (a, d) to a dict with ``grad`` (list) and, when the
    gradient is polynomial and ``reconstruct`` is set, ``density``.
    Gradients are normalised to vanish at u = 0 (generators set to 1).
    Entries in ``start`` are taken as given. A vanishing recursion factor
    raises, or with ``skip_degenerate`` stops generation for that component.
    """
    ring = K2.ring
    n = ring.n
    K1 = build_K1(hom, ring)
    table = {}
    for a in range(n):
        table[(a, -1)] = {"grad": casimir_gradient(hom, ring, a), "density": None}
        table[(a, -1)]["density"] = sum((ring.u(b).scale(hom.eta[a][b]) for b in range(n)), ring.zero())
    if start:
        table.update(start)
    dropped = set()
    for d in range(-1, d_max):
        K1Y = {b: op_apply(K1, table[(b, d)]["grad"]) for b in range(n) if (b, d) in table}
        for a in range(n):
            if (a, d + 1) in table or a in dropped:
                continue
            fac = hom.recursion_factor(a, d)
            if not fac:
                if skip_degenerate:
                    dropped.add(a)
                    continue
                raise RecursionFailure(a, d, "vanishing recursion factor")
            if any(hom.A_up[b][a] and b not in K1Y for b in range(n)):
                raise RecursionFailure(a, d, "a lower level needed by the recursion is missing")
            W = op_apply(K2, table[(a, d)]["grad"])
            for b in range(n):
                coef = hom.A_up[b][a]
                if coef:
                    W = [x - y.scale(coef) for x, y in zip(W, K1Y[b])]
            W = [w.scale(1 / fac) for w in W]
            # eta^{-1} dx Y = W  =>  dx Y = eta W
            try:
                prims = [integrate_dx(w) if w else ring.zero() for w in W]
            except NotExact as e:
                raise RecursionFailure(a, d, f"right-hand side not in Im dx ({e})") from e
            Y = [sum((prims[c].scale(hom.eta[b][c]) for c in range(n) if hom.eta[b][c]), ring.zero())
                 for b in range(n)]
            Y = [y - value_at_zero(y) for y in Y]
            if not helmholtz_ok(Y):
                raise RecursionFailure(a, d, "Helmholtz condition fails")
            entry = {"grad": Y, "density": None}
            if reconstruct and not any(y.has_gens() for y in Y):
                try:
                    entry["density"] = functional_from_variational(Y, check=False)
                except Unsupported:
                    pass
            table[(a, d + 1)] = entry
    return table


def mutual_commutativity(table: dict, K: MatDiffOp) -> list:
    """Pairs ((a,i),(b,j)) whose bracket under K does not vanish."""
    keys = sorted(table)
    bad = []
    fields = {k: op_apply(K, table[k]["grad"]) for k in keys}
    for i, k1 in enumerate(keys):
        for k2 in keys[i + 1:]:
            dens = sum((x * y for x, y in zip(table[k1]["grad"], fields[k2])), K.ring.zero())
            if not functional_equal(dens, 0):
                bad.append((k1, k2))
    return bad


# --------------------------------------------------------------------------
# genus 0

def _hessian(F: DiffPoly, a: int, b: int) -> DiffPoly:
    return F.diff_u(a, 0).diff_u(b, 0)


def omega_tables(hom: HomogeneityData, F: DiffPoly, d_max: int) -> dict:
    """Two-point functions Omega[(g, a, d)] = Omega_{g,0;a,d} for d = -1..d_max+1.

    Built from F by the topological recursion: the u^b-gradient of
    Omega_{g,0;a,d+1} is Omega_{a,d;m,0} eta^{mn} F_{nbg}, integrated with the
    normalisation Omega(0) = 0.
    """
    ring = F.ring
    n = ring.n
    third = {}
    for x in range(n):
        for y in range(n):
            for z in range(n):
                third[(x, y, z)] = _hessian(F, x, y).diff_u(z, 0)
    om = {}
    for g in range(n):
        for a in range(n):
            om[(g, a, -1)] = ring.const(hom.eta[g][a])
            om[(g, a, 0)] = _hessian(F, g, a)
    for d in range(0, d_max + 1):
        for g in range(n):
            for a in range(n):
                grad = []
                for b in range(n):
                    t = ring.zero()
                    for mm in range(n):
                        base = om[(mm, a, d)]
                        if not base:
                            continue
                        for nn in range(n):
                            e = hom.eta_inv[mm][nn]
                            if e and third[(nn, b, g)]:
                                t = t + (base * third[(nn, b, g)]).scale(e)
                    grad.append(t)
                P = integrate_gradient_u0(grad) if any(grad) else ring.zero()
                om[(g, a, d + 1)] = P - value_at_zero(P)
    return om


def unit_omega(hom: HomogeneityData, om: dict, a: int, d: int, ring: Ring) -> DiffPoly:
    """Omega_{1,0;a,d} = A^g Omega_{g,0;a,d}."""
    return sum((om[(g, a, d)].scale(hom.unit[g]) for g in range(ring.n) if hom.unit[g]), ring.zero())


def genus0_K2(hom: HomogeneityData, F: DiffPoly) -> MatDiffOp:
    """g^{ab} dx + dx(Omega^{ab}) (1/2 - mu_b), with upper-index g and Omega from F."""
    ring = F.ring
    n = ring.n
    Ecoef = [hom.euler_coefficient(ring, c) for c in range(n)]
    low_g = [[sum((F.diff_u(c, 0).diff_u(x, 0).diff_u(y, 0) * Ecoef[c] for c in range(n)), ring.zero())
              for y in range(n)] for x in range(n)]
    low_om = [[_hessian(F, x, y) for y in range(n)] for x in range(n)]

    def raise_(M):
        out = [[ring.zero() for _ in range(n)] for _ in range(n)]
        for a in range(n):
            for b in range(n):
                t = ring.zero()
                for x in range(n):
                    for y in range(n):
                        c = hom.eta_inv[a][x] * hom.eta_inv[b][y]
                        if c and M[x][y]:
                            t = t + M[x][y].scale(c)
                out[a][b] = t
        return out

    gup = raise_(low_g)
    omup = raise_(low_om)
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            row.append(ScalarDiffOp(ring, {1: gup[a][b], 0: omup[a][b].dx().scale(mpq(1, 2) - hom.mu[b])}))
        rows.append(row)
    return MatDiffOp(ring, rows)


@dataclass
class Genus0Report:
    recursion: list
    string_ok: bool
    homogeneity_ok: bool
    k2_matches: bool | None
    failures: list

    @property
    def ok(self) -> bool:
        return (all(r.ok for r in self.recursion) and self.string_ok and self.homogeneity_ok
                and self.k2_matches is not False)


def genus0_check(hom: HomogeneityData, F: DiffPoly, d_max: int, K2_full: MatDiffOp | None = None) -> Genus0Report:
    """Genus-0 recursion for d = -1..d_max, the string relation and the homogeneity identity."""
    if F is None:
        raise InvalidModel("genus-0 check needs a potential F")
    ring = F.ring
    n = ring.n
    om = omega_tables(hom, F, d_max + 1)
    failures = []
    string_ok = True
    for a in range(n):
        for d in range(-1, d_max + 1):
            top = unit_omega(hom, om, a, d + 1, ring)
            for g in range(n):
                if top.diff_u(g, 0) != om[(g, a, d)]:
                    string_ok = False
                    failures.append(f"string relation at (g={g + 1}, a={a + 1}, d={d})")
    homog_ok = True
    for g in range(n):
        for a in range(n):
            for d in range(-1, d_max + 1):
                lhs = sum((om[(g, a, d + 1)].diff_u(v, 0) * hom.euler_coefficient(ring, v) for v in range(n)),
                          ring.zero())
                rhs = om[(g, a, d + 1)].scale(d + 2 + hom.mu[a] + hom.mu[g])
                for mm in range(n):
                    if hom.A_up[mm][a]:
                        rhs = rhs + om[(g, mm, d)].scale(hom.A_up[mm][a])
                if lhs != rhs:
                    homog_ok = False
                    failures.append(f"homogeneity identity at (g={g + 1}, a={a + 1}, d={d + 1})")
    K20 = genus0_K2(hom, F)
    k2_matches = None
    if K2_full is not None:
        k2_matches = K2_full.map_coeffs(lambda c: c.at_eps_zero()) == K20
        if not k2_matches:
            failures.append("K2 at eps = 0 differs from the genus-0 formula")
    grads = {}
    for a in range(n):
        for d in range(-1, d_max + 2):
            grads[(a, d)] = [om[(g, a, d)] for g in range(n)]
    rec = recursion_check(hom, K20, grads, [(a, d) for a in range(n) for d in range(-1, d_max + 1)])
    for r in rec:
        if not r.ok:
            failures.append(f"genus-0 recursion at (a={r.alpha + 1}, d={r.d})")
    return Genus0Report(rec, string_ok, homog_ok, k2_matches, failures)
