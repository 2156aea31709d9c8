"""Seeded random property suites with greedy counterexample shrinking.

Each suite is a list of properties; a property draws inputs from a
``random.Random`` and returns True when the identity holds. Runs are
deterministic for a given seed.
"""
from __future__ import annotations

import contextlib
import json
import random
from dataclasses import dataclass
from math import comb
from typing import Callable

from gmpy2 import mpq

from . import drk2, gd, models
from .algebra import DiffPoly, Ring, dilation_D, euler_Ehat, standard_degree_of
from .drk2 import CohFTModel, HomogeneityData, build_K1, build_K2
from .multivector import (bivector_of_op, commutator_VQ_BK, schouten, theta_operator,
                          vector_field)
from .operators import MatDiffOp, MiuraMap, ScalarDiffOp, miura_op, poisson_bracket
from .report import CheckResult, check
from .variational import (L_op, functional_equal, functional_from_variational, higher_euler,
                          omega_hat, var_derivative, var_gradient)

# ---------------------------------------------------------------- generators


def rand_q(rng: random.Random, num: int = 3) -> mpq:
    return mpq(rng.choice([i for i in range(-num, num + 1) if i]), rng.choice((1, 2, 3)))


def rand_poly(rng: random.Random, ring: Ring, terms: int = 3, order: int = 2, deg: int = 3,
              eps: int = 0, theta: int = 0, theta_order: int = 2, min_deg: int = 1) -> DiffPoly:
    """Random element with the given theta-degree; u-degree between min_deg and deg."""
    p = ring.zero()
    for _ in range(rng.randint(1, terms)):
        uv = [(rng.randrange(ring.n), rng.randint(0, order), 1) for _ in range(rng.randint(min_deg, deg))]
        th = set()
        while len(th) < theta:
            th.add((rng.randrange(ring.n), rng.randint(0, theta_order)))
        e = rng.randint(0, eps) if eps else 0
        p = p + ring.monomial(rand_q(rng), uv, sorted(th), None, e)
    return p


def rand_op(rng: random.Random, ring: Ring, order: int = 2, deg: int = 1, eps: int = 0) -> ScalarDiffOp:
    coeffs = {}
    for s in range(order + 1):
        if rng.random() < 0.6:
            c = rand_poly(rng, ring, 2, 1, deg, eps, min_deg=0)
            if c:
                coeffs[s] = c
    return ScalarDiffOp(ring, coeffs)


def rand_matop(rng: random.Random, ring: Ring, order: int = 2, deg: int = 1, eps: int = 0) -> MatDiffOp:
    return MatDiffOp(ring, [[rand_op(rng, ring, order, deg, eps) for _ in range(ring.n)] for _ in range(ring.n)])


def rand_skew(rng: random.Random, ring: Ring, order: int = 2, deg: int = 1, eps: int = 0) -> MatDiffOp:
    A = rand_matop(rng, ring, order, deg, eps)
    return A - A.adjoint()


def rand_eta(rng: random.Random, n: int):
    if n == 1:
        return [[rand_q(rng)]]
    if rng.random() < 0.5:
        c = rand_q(rng)
        return [[0, c], [c, 0]]
    a, b, c = rand_q(rng), rand_q(rng), rand_q(rng)
    while a * c - b * b == 0:
        c = c + 1
    return [[a, b], [b, c]]


def rand_hom(rng: random.Random, n: int) -> HomogeneityData:
    """Random valid data: diagonal mu with mu eta + eta mu = 0, random symmetric A."""
    if n == 1:
        eta = [[rand_q(rng)]]
        mu = [mpq(0)]
    else:
        c = rand_q(rng)
        eta = [[0, c], [c, 0]]
        m = rand_q(rng)
        mu = [m, -m]
    delta = rand_q(rng)
    q = [x + delta / 2 for x in mu]
    r = [rand_q(rng) if rng.random() < 0.5 else 0 for _ in range(n)]
    A = [[mpq(0)] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            if rng.random() < 0.5:
                A[a][b] = A[b][a] = rand_q(rng)
    return HomogeneityData(eta, q, r, delta, A)


def rand_gbar(rng: random.Random, ring: Ring) -> DiffPoly:
    """Random density of standard degree 0 (jets <= 2, eps <= 2)."""
    p = rand_poly(rng, ring, 3, 0, 4, 0, min_deg=2)
    for _ in range(rng.randint(0, 2)):
        # eps^2 times a degree-2 differential monomial
        a, b = rng.randrange(ring.n), rng.randrange(ring.n)
        if rng.random() < 0.5:
            mono = ring.u(a, 1) * ring.u(b, 1)
        else:
            mono = ring.u(a) * ring.u(b, 2)
        extra = ring.u(rng.randrange(ring.n)) if rng.random() < 0.5 else ring.one()
        p = p + (ring.eps(2) * mono * extra).scale(rand_q(rng))
    return p


# ---------------------------------------------------------------- properties


@dataclass
class Prop:
    name: str
    gen: Callable
    pred: Callable
    cases: int | None = None  # fixed case count (None: use the run's count)


def _fails(pred, args) -> bool:
    try:
        return not pred(*args)
    except Exception:
        return True


def shrink(pred, args: tuple, rounds: int = 50) -> tuple:
    """Greedily drop terms from DiffPoly arguments while the property still fails."""
    args = list(args)
    for _ in range(rounds):
        progress = False
        for i, x in enumerate(args):
            if not isinstance(x, DiffPoly) or len(x.terms) <= 1:
                continue
            for k in sorted(x.terms, key=repr):
                smaller = DiffPoly(x.ring, {kk: c for kk, c in x.terms.items() if kk != k})
                trial = args[:i] + [smaller] + args[i + 1:]
                if _fails(pred, trial):
                    args = trial
                    progress = True
                    break
            if progress:
                break
        if not progress:
            break
    return tuple(args)


def _fmt(x) -> str:
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(y) for y in x) + "]"
    return str(x)


def _describe(args) -> str:
    return " | ".join(_fmt(a) for a in args)


def run_prop(prop: Prop, rng: random.Random, cases: int, suite: str) -> CheckResult:
    n = prop.cases if prop.cases is not None else cases
    for i in range(n):
        args = prop.gen(rng)
        try:
            ok = prop.pred(*args)
            err = ""
        except Exception as e:  # counts as a failing case
            ok = False
            err = f"{type(e).__name__}: {e}; "
        if not ok:
            small = shrink(prop.pred, args)
            return check(f"{suite}: {prop.name}", "exact", False,
                         f"{err}case {i + 1}/{n}; counterexample: {_describe(small)}")
    return check(f"{suite}: {prop.name} ({n} cases)", "exact", True)


# algebra ------------------------------------------------------------------

def _alg_ring(rng):
    return Ring(rng.randint(1, 2), None)


def _two_polys(rng, theta_max=1, eps=0):
    R = _alg_ring(rng)
    return (rand_poly(rng, R, eps=eps, theta=rng.randint(0, theta_max)),
            rand_poly(rng, R, eps=eps, theta=rng.randint(0, theta_max)))


def _three_polys(rng):
    R = _alg_ring(rng)
    return tuple(rand_poly(rng, R, 2, 2, 2, theta=rng.randint(0, 1)) for _ in range(3))


def _tdeg(p):
    return p.theta_degree() if p else 0


def _supercomm(a, b):
    s = -1 if (_tdeg(a) * _tdeg(b)) & 1 else 1
    return a * b == (b * a).scale(s)


def _trunc_hom(a, b):
    k = 2
    return (a * b).eps_truncate(k) == (a.eps_truncate(k) * b.eps_truncate(k)).eps_truncate(k)


def _dx_degree(a):
    d = a.dx()
    return not d or standard_degree_of(d) == standard_degree_of(a) + 1


def _gen_monomial(rng):
    R = _alg_ring(rng)
    return (rand_poly(rng, R, 1, 3, 3, eps=2, theta=rng.randint(0, 2)),)


def _gen_ehat(rng):
    R = _alg_ring(rng)
    h = rand_hom(rng, R.n)
    return rand_poly(rng, R, eps=2), rand_poly(rng, R, eps=2), h


ALGEBRA = [
    Prop("dx is a derivation", lambda r: _two_polys(r), lambda a, b: (a * b).dx() == a.dx() * b + a * b.dx()),
    Prop("supercommutativity", lambda r: _two_polys(r, 2), _supercomm),
    Prop("associativity", _three_polys, lambda a, b, c: (a * b) * c == a * (b * c)),
    Prop("eps truncation is a homomorphism", lambda r: _two_polys(r, 0, eps=3), _trunc_hom),
    Prop("dx raises the standard degree by one", _gen_monomial, _dx_degree),
    Prop("E^ is a derivation", _gen_ehat,
         lambda a, b, h: euler_Ehat(a * b, h) == euler_Ehat(a, h) * b + a * euler_Ehat(b, h)),
    Prop("D is a derivation", lambda r: _two_polys(r, 0),
         lambda a, b: dilation_D(a * b) == dilation_D(a) * b + a * dilation_D(b)),
]


# variational --------------------------------------------------------------

def _gen_f(rng, eps=0):
    R = Ring(rng.randint(1, 3), None)
    return (rand_poly(rng, R, 3, 3, 3, eps=eps),)


def _gen_f_k(rng):
    (f,) = _gen_f(rng)
    return f, rng.randrange(f.ring.n), rng.randint(0, 3)


def _homotopy(f):
    g = functional_from_variational(var_gradient(f))
    return functional_equal(g, f)


def _commutation(f, mu, nu, t):
    lhs = var_derivative(f, nu).diff_u(mu, t)
    dmu = var_derivative(f, mu)
    top = max(dmu.max_order(nu), 0) if dmu else 0
    rhs = f.ring.zero()
    for l in range(0, top - t + 1):
        term = dmu.diff_u(nu, t + l)
        if term:
            rhs = rhs + term.dxn(l).scale(comb(l + t, t) * (-1) ** l)
    return lhs == rhs.scale((-1) ** t)


def _gen_comm(rng):
    (f,) = _gen_f(rng)
    n = f.ring.n
    return f, rng.randrange(n), rng.randrange(n), rng.randint(0, 2)


VARIATIONAL = [
    Prop("delta/delta u kills dx-images", lambda r: _gen_f(r, 2),
         lambda f: not any(var_gradient(f.dx()))),
    Prop("homotopy reconstruction round-trip", _gen_f, _homotopy),
    Prop("T_{a,0} = delta/delta u^a", _gen_f_k, lambda f, a, k: higher_euler(f, a, 0) == var_derivative(f, a)),
    Prop("T_{a,k+1} o dx = T_{a,k}", _gen_f_k, lambda f, a, k: higher_euler(f.dx(), a, k + 1) == higher_euler(f, a, k)),
    Prop("L^k(dx f) = dx o L^k(f) + L^{k-1}(f)", _gen_f_k,
         lambda f, a, k: L_op(f.dx(), a, k + 1) == ScalarDiffOp(f.ring, {1: f.ring.one()}) * L_op(f, a, k + 1)
         + L_op(f, a, k)),
    Prop("d/du^mu_t o delta/delta u^nu commutation identity", _gen_comm, _commutation),
]


# omega --------------------------------------------------------------------

def _gen_omega(rng):
    R = Ring(rng.randint(1, 3), None)
    h = rand_poly(rng, R, 3, 3, 3, eps=2)
    eta = [[mpq(0)] * R.n for _ in range(R.n)]
    for a in range(R.n):
        eta[a][R.n - 1 - a] = rand_q(rng)
    for a in range(R.n):
        eta[R.n - 1 - a][a] = eta[a][R.n - 1 - a]
    from .operators import invert_matrix
    return h, invert_matrix(eta)


def _omega_sym(h, eta_inv):
    for k in range(3):
        W = omega_hat(h, k, eta_inv)
        if W.adjoint() != W.scale((-1) ** k):
            return False
    return True


OMEGA = [Prop("Omega^k adjoint = (-1)^k Omega^k for k <= 2", _gen_omega, _omega_sym, cases=50)]


# operators ----------------------------------------------------------------

def _gen_two_ops(rng):
    R = Ring(rng.randint(1, 2), None)
    return rand_matop(rng, R), rand_matop(rng, R)


def _gen_bracket(rng):
    R = Ring(rng.randint(1, 2), None)
    return rand_poly(rng, R), rand_poly(rng, R), rand_skew(rng, R)


def _rand_miura(rng, R):
    ims = []
    for a in range(R.n):
        tail = rand_poly(rng, R, 2, 1, 2) * R.eps(rng.randint(1, 2))
        ims.append(R.u(a) + tail)
    return MiuraMap(ims)


def _gen_miura(rng):
    R = Ring(rng.randint(1, 2), 3)
    K = rand_skew(rng, R, 1, 1)
    return K, _rand_miura(rng, R), _rand_miura(rng, R)


OPERATORS = [
    Prop("(A o B)^+ = B^+ o A^+", _gen_two_ops, lambda A, B: (A @ B).adjoint() == B.adjoint() @ A.adjoint()),
    Prop("adjoint is an involution", _gen_two_ops, lambda A, B: A.adjoint().adjoint() == A),
    Prop("Poisson bracket antisymmetry", _gen_bracket,
         lambda f, g, K: functional_equal(poisson_bracket(f, g, K) + poisson_bracket(g, f, K), 0)),
    Prop("Miura functoriality", _gen_miura,
         lambda K, m1, m2: miura_op(K, m1.then(m2)) == miura_op(miura_op(K, m1), m2), cases=10),
]


# schouten -----------------------------------------------------------------

def _rand_mv(rng, R, p):
    return rand_poly(rng, R, 2, 1, 2, theta=p, theta_order=1, min_deg=0 if p else 1)


def _gen_pq(rng):
    R = Ring(rng.randint(1, 2), None)
    p, q = rng.randint(0, 2), rng.randint(0, 2)
    return _rand_mv(rng, R, p), _rand_mv(rng, R, q), p, q


def _graded_sym(P, Q, p, q):
    return functional_equal(schouten(P, Q, p) - schouten(Q, P, q).scale((-1) ** (p * q)), 0)


def _gen_pqr(rng):
    R = Ring(1, None)
    p, q, r = (rng.randint(0, 2) for _ in range(3))
    return _rand_mv(rng, R, p), _rand_mv(rng, R, q), _rand_mv(rng, R, r), p, q, r


def _jacobi(P, Q, R, p, q, r):
    t1 = schouten(schouten(P, Q, p), R, p + q - 1).scale((-1) ** (p * r))
    t2 = schouten(schouten(R, P, r), Q, r + p - 1).scale((-1) ** (r * q))
    t3 = schouten(schouten(Q, R, q), P, q + r - 1).scale((-1) ** (q * p))
    return functional_equal(t1 + t2 + t3, 0)


def _gen_fK(rng):
    R = Ring(rng.randint(1, 2), None)
    return rand_poly(rng, R), rand_skew(rng, R)


def _ham_vector(f, K):
    P = K.apply(var_gradient(f))
    return functional_equal(schouten(f, bivector_of_op(K), 0) + vector_field(P), 0)


def _gen_QK(rng):
    R = Ring(rng.randint(1, 2), None)
    return [rand_poly(rng, R, 2, 2, 2) for _ in range(R.n)], rand_skew(rng, R)


def _vq_bk(Q, K):
    Kt = commutator_VQ_BK(Q, K)
    direct = schouten(vector_field(Q), bivector_of_op(K), 1, None, theta_operator(K))
    return functional_equal(direct + bivector_of_op(Kt, check_skew=False), 0)


def _gen_double(rng):
    R = Ring(rng.randint(1, 2), None)
    p = rng.randint(0, 2)
    eta = rand_eta(rng, R.n)
    from .operators import invert_matrix
    K = MatDiffOp.constant(R, invert_matrix([[mpq(x) for x in row] for row in eta]), 1)
    return _rand_mv(rng, R, p), p, K


def _double(Rm, p, K):
    B = bivector_of_op(K)
    inner = schouten(Rm, B, p, None, theta_operator(K))
    return functional_equal(schouten(inner, B, p + 1, None, theta_operator(K)), 0)


SCHOUTEN = [
    Prop("graded symmetry", _gen_pq, _graded_sym),
    Prop("graded Jacobi identity", _gen_pqr, _jacobi),
    Prop("[f, B_K] = -V_{K grad f}", _gen_fK, _ham_vector),
    Prop("[V_Q, B_K] = -B_K~ agrees with the direct bracket", _gen_QK, _vq_bk),
    Prop("[[R, B_K], B_K] = 0 for constant K", _gen_double, _double),
]


# lemma --------------------------------------------------------------------

def _gen_lemma(rng):
    n = rng.randint(1, 2)
    R = Ring(n, None)
    return rand_gbar(rng, R), rand_hom(rng, n)


def _lemma(g, hom):
    m = CohFTModel("random", hom, g)
    K2 = build_K2(m)
    K1 = build_K1(hom, g.ring)
    Kt = commutator_VQ_BK(drk2.r_vector_field(m), K1)
    B2 = bivector_of_op(K2, check_skew=False)
    return functional_equal(B2 + bivector_of_op(Kt, check_skew=False), 0)


def _compat(g, hom):
    m = CohFTModel("random", hom, g)
    K2 = build_K2(m)
    K1 = build_K1(hom, g.ring)
    from .multivector import compatible
    return compatible(K1, K2, check_poisson=False)


LEMMA = [
    Prop("K2 skew for every input", _gen_lemma,
         lambda g, h: build_K2(CohFTModel("random", h, g)).is_skew(), cases=30),
    Prop("B_K2 = [V_R, B_K1]", _gen_lemma, _lemma, cases=30),
    Prop("[B_K2, B_K1] = 0", _gen_lemma, _compat, cases=30),
]


# pseudo-differential operators --------------------------------------------

def _rand_pdo(rng, R, low=-4):
    terms = {}
    for s in range(-3, 3):
        if rng.random() < 0.5:
            terms[s] = rand_poly(rng, R, 2, 1, 1, min_deg=0)
    return gd.PseudoDiffOp(R, terms, low)


def _gen_pdo3(rng):
    R = Ring(1, None)
    return tuple(_rand_pdo(rng, R) for _ in range(3))


def _pdo_assoc(A, B, C):
    cut = -4
    left = A.compose(B, cut - 3).compose(C, cut)
    right = A.compose(B.compose(C, cut - 3), cut)
    return left.eq_to(right)


def _root_repower(r, depth):
    ctx = gd.GDContext(r)
    root = ctx.root(depth)
    cut = r - depth
    P = gd.pdo_power(root, r, cut)
    return P.eq_to(ctx.L.truncate(cut)) and P.low <= cut


PDO = [
    Prop("composition is associative to certified order", _gen_pdo3, _pdo_assoc),
    Prop("(L^(1/r))^r = L to certified order, r <= 5", lambda rng: (rng.randint(2, 5), rng.randint(3, 8)),
         _root_repower),
]


# shift series -------------------------------------------------------------

def _gen_shift(rng):
    return Ring(1, 2 * rng.randint(1, 3)), rand_q(rng), rand_q(rng)


SHIFT = [
    Prop("exp(a eps dx) o exp(b eps dx) = exp((a+b) eps dx)", _gen_shift,
         lambda R, a, b: models.shift_operator(R, a) * models.shift_operator(R, b) == models.shift_operator(R, a + b)),
]


# files --------------------------------------------------------------------

def _gen_model(rng):
    if rng.random() < 0.3:
        return (rng.choice([models.trivial_model(), models.rspin3_model(), models.rspin4_model(),
                            models.cp1_model(rng.randint(1, 3))]),)
    n = rng.randint(1, 2)
    R = Ring(n, rng.choice([None, 2, 4]))
    g = rand_gbar(rng, R)
    return (CohFTModel(f"random{n}", rand_hom(rng, n), g, g.at_eps_zero()),)


def _roundtrip(m):
    text = json.dumps(models.model_to_json(m), sort_keys=True)
    return models.model_from_json(json.loads(text)) == m


FILES = [Prop("model file round-trip", _gen_model, _roundtrip)]


SUITES = {
    "algebra": ALGEBRA,
    "variational": VARIATIONAL,
    "omega": OMEGA,
    "operators": OPERATORS,
    "schouten": SCHOUTEN,
    "lemma": LEMMA,
    "pdo": PDO,
    "shift": SHIFT,
    "files": FILES,
}


# ---------------------------------------------------------------- mutations


@contextlib.contextmanager
def mutation(name: str | None):
    """Temporarily break a primitive to confirm the suites notice."""
    if name is None:
        yield
        return
    if name != "adjoint-sign":
        raise ValueError(f"unknown mutation {name!r}; available: adjoint-sign")
    original = ScalarDiffOp.adjoint
    ScalarDiffOp.adjoint = lambda self: original(self).scale(-1)
    try:
        yield
    finally:
        ScalarDiffOp.adjoint = original


MUTATIONS = ("adjoint-sign",)


def run_suite(name: str, seed: int, cases: int, mutate: str | None = None) -> list:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    rng = random.Random(f"{seed}:{name}")
    with mutation(mutate):
        return [run_prop(p, rng, cases, name) for p in SUITES[name]]
