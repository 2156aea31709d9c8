"""Central invariants of a Poisson pencil: the scalar evaluation and the
eps^2 tensor identity for the second operator built from a model."""
from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import mpq

from .algebra import DiffPoly
from .drk2 import CohFTModel, build_K2
from .operators import MatDiffOp, ScalarDiffOp


class DegenerateSymbol(ValueError):
    pass


@dataclass
class CentralInvariant:
    """c(u^) = numerator / denominator, both functions of the single field."""
    numerator: DiffPoly
    denominator: DiffPoly

    def is_constant(self) -> bool:
        return (self.denominator.constant_term() == self.denominator
                and self.numerator.constant_term() == self.numerator)

    def value(self) -> mpq:
        if not self.is_constant():
            raise ValueError("central invariant is not constant")
        return self.numerator.constant_term() / self.denominator.constant_term()

    def __eq__(self, other) -> bool:
        if isinstance(other, CentralInvariant):
            return self.numerator * other.denominator == other.numerator * self.denominator
        return self.numerator == self.denominator.scale(mpq(other))


def _scalar(P) -> ScalarDiffOp:
    if isinstance(P, MatDiffOp):
        if P.shape != (1, 1):
            raise ValueError("scalar central invariant needs a 1x1 operator")
        return P.entries[0][0]
    return P


def _coeff(P: ScalarDiffOp, eps: int, s: int) -> DiffPoly:
    c = P.coeffs.get(s)
    return c.eps_part(eps) if c is not None else P.ring.zero()


def _is_function_of_u(p: DiffPoly) -> bool:
    return all(o == 0 for k in p.terms for _, o, _ in k[1]) and not any(k[2] for k in p.terms)


def central_invariant_scalar(P1, P2) -> CentralInvariant:
    """c = (P2^{[2]}_3 - u^ P1^{[2]}_3) / (3 f^2) for a one-component pencil.

    The canonical coordinate is u^ = g2/g1 with g_a the leading dx coefficient
    at eps^0; u^ must be affine in u (so that no series reparametrisation is
    needed), and f = g1 rescaled to the u^ frame.
    """
    P1, P2 = _scalar(P1), _scalar(P2)
    ring = P1.ring
    if ring.n != 1:
        raise ValueError("scalar central invariant needs one field")
    g1 = _coeff(P1, 0, 1)
    g2 = _coeff(P2, 0, 1)
    if not g1 or not _is_function_of_u(g1) or not _is_function_of_u(g2):
        raise DegenerateSymbol("leading symbols must be nonzero functions of u")
    # u^ = a u + b with g2 = u^ g1
    a = mpq(0)
    b = mpq(0)
    found = False
    for cand_a in _candidate_slopes(g1, g2):
        cand_b = _intercept(g1, g2, cand_a)
        if cand_b is not None:
            a, b, found = cand_a, cand_b, True
            break
    if not found or a == 0:
        raise DegenerateSymbol("canonical coordinate is not an affine function of u")
    uhat = ring.u(0).scale(a) + ring.const(b)
    num = _coeff(P2, 2, 3) - uhat * _coeff(P1, 2, 3)
    # in the u^ frame every component picks up a^2 and f = a^2 g1
    den = (g1 * g1).scale(3 * a * a)
    return CentralInvariant(num, den)


def _candidate_slopes(g1: DiffPoly, g2: DiffPoly):
    """Slope a matching the top u-powers of g2 and u g1."""
    def top(p):
        return max((sum(e for _, _, e in k[1]), c) for k, c in p.terms.items())
    d1, c1 = top(g1)
    d2, c2 = top(g2)
    return [c2 / c1] if d2 == d1 + 1 else []


def _intercept(g1: DiffPoly, g2: DiffPoly, a: mpq):
    """b with g2 - a u g1 = b g1, or None."""
    rest = g2 - (g1 * g1.ring.u(0)).scale(a)
    if not rest:
        return mpq(0)
    k = next(iter(rest.terms))
    if k not in g1.terms:
        return None
    b = rest.terms[k] / g1.terms[k]
    return b if rest == g1.scale(b) else None


def eps2_tensor_sides(m: CohFTModel):
    """(lhs, rhs): the eps^2 dx^3 coefficients of K2 and (1/24)(3-mu_a-mu_b) c^t_{tx} c^{xab}."""
    if m.F is None:
        raise ValueError("tensor identity needs a potential F")
    K2 = build_K2(m)
    hom = m.hom
    F = m.F
    ring = K2.ring
    n = ring.n
    if ring.eps_order is not None and ring.eps_order < 2:
        raise ValueError("eps^2 data is truncated away")
    einv = hom.eta_inv
    third = {}
    for x in range(n):
        fx = F.diff_u(x, 0)
        for y in range(n):
            fxy = fx.diff_u(y, 0)
            for z in range(n):
                third[(x, y, z)] = fxy.diff_u(z, 0)

    def c_up(a, b, g):  # c^a_{bg}
        return sum((third[(mm, b, g)].scale(einv[a][mm]) for mm in range(n) if einv[a][mm]), ring.zero())

    trace = [sum((c_up(t, t, x) for t in range(n)), ring.zero()) for x in range(n)]
    lhs = [[_coeff(K2.entries[a][b], 2, 3) for b in range(n)] for a in range(n)]
    rhs = []
    for a in range(n):
        row = []
        for b in range(n):
            t = ring.zero()
            for x in range(n):
                if not trace[x]:
                    continue
                # c^{x a b} = eta^{a m} eta^{b v} c^x_{m v}
                cxab = ring.zero()
                for mm in range(n):
                    for v in range(n):
                        e = einv[a][mm] * einv[b][v]
                        if e:
                            cxab = cxab + c_up(x, mm, v).scale(e)
                if cxab:
                    t = t + trace[x] * cxab
            row.append(t.scale((3 - hom.mu[a] - hom.mu[b]) / 24))
        rhs.append(row)
    return lhs, rhs


def eps2_tensor_check(m: CohFTModel) -> bool:
    lhs, rhs = eps2_tensor_sides(m)
    return all(x == y for lr, rr in zip(lhs, rhs) for x, y in zip(lr, rr))
