"""Local multivector fields in the theta formalism: the correspondences
between skew operators and bivectors and between tuples and vector fields,
the Schouten-Nijenhuis bracket, and Poisson / compatibility tests."""
from __future__ import annotations

from gmpy2 import mpq

from .algebra import DiffPoly
from .operators import MatDiffOp, NotSkew, ScalarDiffOp
from .variational import functional_equal, var_derivative


def bivector_of_op(K: MatDiffOp, check_skew: bool = True) -> DiffPoly:
    """B_K = 1/2 int sum K^{ab}_s theta_{a,0} theta_{b,s}."""
    if check_skew and not K.is_skew():
        raise NotSkew("bivector correspondence needs a skew-symmetric operator")
    ring = K.ring
    out = ring.zero()
    n = ring.n
    for a in range(n):
        ta = ring.theta(a, 0)
        for b in range(n):
            for s, c in K.entries[a][b].coeffs.items():
                out = out + c * (ta * ring.theta(b, s))
    return out.scale(mpq(1, 2))


def theta_operator(K: MatDiffOp) -> list:
    """delta B_K / delta theta_a = sum_b sum_s K^{ab}_s theta_{b,s}, read off directly."""
    ring = K.ring
    out = []
    for a in range(ring.n):
        acc = ring.zero()
        for b in range(ring.n):
            for s, c in K.entries[a][b].coeffs.items():
                acc = acc + c * ring.theta(b, s)
        out.append(acc)
    return out


def op_of_bivector(B: DiffPoly) -> MatDiffOp:
    """The unique skew operator K with B = B_K in the quotient."""
    ring = B.ring
    if B and B.theta_degree() != 2:
        raise ValueError("not a bivector density")
    rows = []
    for a in range(ring.n):
        d = var_derivative(B, a, "theta")
        row = [dict() for _ in range(ring.n)]
        for k, c in d.terms.items():
            (b, s), = k[2]
            nk = (k[0], k[1], (), k[3])
            row[b].setdefault(s, {})[nk] = c
        rows.append([ScalarDiffOp(ring, {s: DiffPoly(ring, t) for s, t in r.items()}) for r in row])
    return MatDiffOp(ring, rows)


def vector_field(Q: list) -> DiffPoly:
    """V_Q = int Q^a theta_{a,0}."""
    ring = Q[0].ring
    out = ring.zero()
    for a, q in enumerate(Q):
        if q:
            out = out + q * ring.theta(a, 0)
    return out


def components_of_vector_field(V: DiffPoly) -> list:
    """Q with V = V_Q in the quotient."""
    return [_strip_theta(var_derivative(V, a, "theta")) for a in range(V.ring.n)]


def _strip_theta(p: DiffPoly) -> DiffPoly:
    if any(k[2] for k in p.terms):
        raise ValueError("expected a theta-free element")
    return p


def schouten(P: DiffPoly, Q: DiffPoly, p: int | None = None, dP_theta=None, dQ_theta=None) -> DiffPoly:
    """[P, Q] = int (dP/dtheta_a dQ/du^a + (-1)^p dP/du^a dQ/dtheta_a).

    ``dP_theta`` / ``dQ_theta`` optionally supply precomputed theta-variational
    derivatives (for bivectors of known operators these are read off directly).
    """
    ring = P.ring
    if p is None:
        p = P.theta_degree() if P else 0
    sign = -1 if p & 1 else 1
    out = ring.zero()
    for a in range(ring.n):
        pt = dP_theta[a] if dP_theta is not None else var_derivative(P, a, "theta")
        if pt:
            qu = var_derivative(Q, a)
            if qu:
                out = out + pt * qu
        qt = dQ_theta[a] if dQ_theta is not None else var_derivative(Q, a, "theta")
        if qt:
            pu = var_derivative(P, a)
            if pu:
                term = pu * qt
                out = out + (term if sign > 0 else -term)
    return out


def bivector_bracket(K1: MatDiffOp, K2: MatDiffOp) -> DiffPoly:
    """Trivector density of [B_{K1}, B_{K2}]."""
    B1 = bivector_of_op(K1, check_skew=False)
    B2 = bivector_of_op(K2, check_skew=False) if K2 is not K1 else B1
    return schouten(B1, B2, 2, theta_operator(K1), theta_operator(K2))


def is_poisson(K: MatDiffOp) -> bool:
    if not K.is_skew():
        raise NotSkew("Poisson test needs a skew-symmetric operator")
    return functional_equal(bivector_bracket(K, K), 0)


def compatible(K1: MatDiffOp, K2: MatDiffOp, check_poisson: bool = True) -> bool:
    """Mixed Schouten bracket test for a pair of Poisson operators."""
    if check_poisson:
        for K in (K1, K2):
            if not is_poisson(K):
                raise ValueError("compatibility needs Poisson operators")
    elif not (K1.is_skew() and K2.is_skew()):
        raise NotSkew("compatibility needs skew-symmetric operators")
    return functional_equal(bivector_bracket(K1, K2), 0)


def commutator_VQ_BK(Q: list, K: MatDiffOp) -> MatDiffOp:
    """K~ with [V_Q, B_K] = -B_{K~}."""
    from .variational import L_op

    ring = K.ring
    n = ring.n
    L = [[L_op(Q[a], m) for m in range(n)] for a in range(n)]
    Ladj = [[L[b][m].adjoint() for m in range(n)] for b in range(n)]
    jets: dict = {}

    def qjet(g, p):
        key = (g, p)
        if key not in jets:
            jets[key] = Q[g] if p == 0 else qjet(g, p - 1).dx()
        return jets[key]

    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            acc = ScalarDiffOp(ring)
            for m in range(n):
                if L[a][m] and K.entries[m][b]:
                    acc = acc + L[a][m] * K.entries[m][b]
                if K.entries[a][m] and Ladj[b][m]:
                    acc = acc + K.entries[a][m] * Ladj[b][m]
            lie = {}
            for s, c in K.entries[a][b].coeffs.items():
                t = ring.zero()
                for g in range(n):
                    orders = c.u_orders(g)
                    if c.depends_on_u0(g):
                        orders.add(0)
                    for p in orders:
                        dc = c.diff_u(g, p)
                        if dc:
                            t = t + qjet(g, p) * dc
                if t:
                    lie[s] = t
            row.append(acc - ScalarDiffOp(ring, lie))
        rows.append(row)
    return MatDiffOp(ring, rows)
