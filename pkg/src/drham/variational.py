"""Variational calculus on the jet ring: Euler-Lagrange operators, the
operator families L^k and Omega^k, equality in the space of local
functionals and the inverse problems (antiderivatives, potentials)."""
from __future__ import annotations

from math import comb

from gmpy2 import mpq

from .algebra import DiffPoly, Ring, _remove_u


class NotExact(ValueError):
    """Raised when an element is not a total x-derivative."""


class NotGradient(ValueError):
    """Raised when a tuple fails the Helmholtz condition."""


class Unsupported(ValueError):
    pass


def _alternating_sum(parts: list) -> DiffPoly:
    """sum_i (-dx)^i parts[i] evaluated by Horner's rule."""
    acc = parts[-1]
    for p in reversed(parts[:-1]):
        acc = p - acc.dx()
    return acc


def var_derivative(f: DiffPoly, a: int, kind: str = "u") -> DiffPoly:
    """delta f / delta u^a (``kind="u"``) or delta f / delta theta_a (``kind="theta"``)."""
    if kind == "u":
        orders = f.u_orders(a)
        if f.depends_on_u0(a):
            orders.add(0)
        if not orders:
            return f.ring.zero()
        parts = [f.diff_u(a, i) if i in orders else f.ring.zero() for i in range(max(orders) + 1)]
    elif kind == "theta":
        orders = f.theta_orders(a)
        if not orders:
            return f.ring.zero()
        parts = [f.diff_theta(a, i) for i in range(max(orders) + 1)]
    else:
        raise ValueError(f"unknown variable kind {kind!r}")
    return _alternating_sum(parts)


def var_gradient(f: DiffPoly, kind: str = "u") -> list:
    return [var_derivative(f, a, kind) for a in range(f.ring.n)]


def higher_euler(f: DiffPoly, a: int, k: int) -> DiffPoly:
    """T_{a,k} f = sum_{n>=k} C(n,k) (-dx)^{n-k} df/du^a_n."""
    orders = f.u_orders(a)
    if f.depends_on_u0(a):
        orders.add(0)
    top = max(orders, default=-1)
    if top < k:
        return f.ring.zero()
    parts = [f.diff_u(a, n).scale(comb(n, k)) for n in range(k, top + 1)]
    return _alternating_sum(parts)


def functional_equal(f: DiffPoly, g) -> bool:
    """Equality of local (multi)vector densities modulo constants and Im dx."""
    d = f - g
    if not d:
        return True
    p = d.theta_degree()
    n = d.ring.n
    if p == 0:
        return all(not var_derivative(d, a) for a in range(n))
    # Euler identity: p*d = sum theta_a * delta d/delta theta_a  mod Im dx
    return all(not var_derivative(d, a, "theta") for a in range(n))


def is_total_derivative(f: DiffPoly) -> bool:
    try:
        integrate_dx(f)
    except NotExact:
        return False
    return True


# --------------------------------------------------------------------------
# operator families

def L_op(f: DiffPoly, a: int, k: int = 0):
    """L_a^k(f) = sum_{i>=k} C(i,k) (df/du^a_i) dx^{i-k} as a ScalarDiffOp."""
    from .operators import ScalarDiffOp

    orders = f.u_orders(a)
    if f.depends_on_u0(a):
        orders.add(0)
    coeffs = {}
    for i in orders:
        if i < k:
            continue
        c = f.diff_u(a, i)
        if c:
            coeffs[i - k] = coeffs.get(i - k, f.ring.zero()) + c.scale(comb(i, k))
    return ScalarDiffOp(f.ring, coeffs)


def frechet(vec: list, ring: Ring | None = None):
    """Matrix of Frechet derivatives: entry (a, b) = L_b(vec[a])."""
    from .operators import MatDiffOp

    ring = ring or vec[0].ring
    return MatDiffOp(ring, [[L_op(vec[a], b) for b in range(ring.n)] for a in range(len(vec))])


def omega_hat(h: DiffPoly, k: int, eta_inv) -> "MatDiffOp":
    """Omega^k(h)^{ab} = eta^{am} eta^{bn} L^k_n(delta h / delta u^m).

    ``eta_inv`` is the inverse metric as a nested sequence of rationals.
    """
    from .operators import MatDiffOp, ScalarDiffOp

    ring = h.ring
    n = ring.n
    grads = var_gradient(h)
    inner = [[L_op(grads[m], nu, k) for nu in range(n)] for m in range(n)]
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            acc = ScalarDiffOp(ring, {})
            for m in range(n):
                em = eta_inv[a][m]
                if not em:
                    continue
                for nu in range(n):
                    en = eta_inv[b][nu]
                    if en:
                        acc = acc + inner[m][nu].scale(mpq(em) * mpq(en))
            row.append(acc)
        rows.append(row)
    return MatDiffOp(ring, rows)


# --------------------------------------------------------------------------
# inverse problems

def helmholtz_ok(vec: list) -> bool:
    """Self-adjointness of the Frechet derivative of ``vec``."""
    D = frechet(vec)
    return D.adjoint() == D


def functional_from_variational(vec: list, check: bool = True) -> DiffPoly:
    """Density h with delta h / delta u^m = vec[m], vanishing at u = 0.

    Uses the homotopy h = sum_m u^m int_0^1 vec[m](lambda u) d lambda.
    """
    ring = vec[0].ring
    if any(v.has_gens() for v in vec):
        raise Unsupported("homotopy reconstruction needs polynomial input")
    if any(k[2] for v in vec for k in v.terms):
        raise Unsupported("theta-dependent input")
    if check and not helmholtz_ok(vec):
        raise NotGradient("Frechet derivative is not self-adjoint")
    out = ring.zero()
    for m, v in enumerate(vec):
        scaled = DiffPoly(ring, {k: c / (sum(e for _, _, e in k[1]) + 1) for k, c in v.terms.items()})
        out = out + ring.u(m) * scaled
    return out


def _scaled_homotopy(ring: Ring, P: list, order: int) -> DiffPoly:
    """Potential of the gradient P[a] (in the variables u^a_order, order >= 1)."""
    out = ring.zero()
    for a, pa in enumerate(P):
        if not pa:
            continue
        t = {}
        for k, c in pa.terms.items():
            d = sum(e for f, o, e in k[1] if o == order)
            t[k] = c / (d + 1)
        out = out + DiffPoly(ring, t) * ring.u(a, order)
    return out


def _antiderivative_u0(p: DiffPoly, a: int) -> DiffPoly:
    """A primitive of p in the variable u^a_0 (other variables as parameters)."""
    ring = p.ring
    weights = [g.weight(a) for g in ring.gens]
    t: dict = {}
    for key, c in p.terms.items():
        eps, uv, th, gv = key
        s = sum((w * e for w, e in zip(weights, gv)), mpq(0))
        kpow = 0
        rest = uv
        for idx, (f, o, e) in enumerate(uv):
            if f == a and o == 0:
                kpow = e
                rest = uv[:idx] + uv[idx + 1:]
                break
        if not s:
            nk = (eps, _with_u0(rest, a, kpow + 1), th, gv)
            t[nk] = t.get(nk, 0) + c / (kpow + 1)
            continue
        # int x^k e^{s x} dx = e^{s x} sum_j (-1)^j k!/(k-j)! x^{k-j} / s^{j+1}
        fall = mpq(1)
        for j in range(kpow + 1):
            coef = c * fall / s ** (j + 1)
            if j & 1:
                coef = -coef
            nk = (eps, _with_u0(rest, a, kpow - j), th, gv)
            t[nk] = t.get(nk, 0) + coef
            fall *= kpow - j
    return DiffPoly(ring, {k: v for k, v in t.items() if v})


def _with_u0(uv: tuple, a: int, e: int) -> tuple:
    if e == 0:
        return uv
    return tuple(sorted(uv + ((a, 0, e),)))


def integrate_gradient_u0(P: list) -> DiffPoly:
    """Q(u_0, generators) with dQ/du^a_0 = P[a]; raises NotExact otherwise."""
    ring = P[0].ring
    Q = ring.zero()
    for a in range(ring.n):
        rem = P[a] - Q.diff_u(a, 0)
        if not rem:
            continue
        for b in range(a):
            if rem.diff_u(b, 0):
                raise NotExact("gradient field is not closed")
        Q = Q + _antiderivative_u0(rem, a)
    for a in range(ring.n):
        if Q.diff_u(a, 0) != P[a]:
            raise NotExact("gradient field is not closed")
    return Q


def integrate_dx(p: DiffPoly) -> DiffPoly:
    """q with dx(q) = p, or NotExact.  Works on theta-degree 0 elements."""
    ring = p.ring
    if any(k[2] for k in p.terms):
        raise Unsupported("antiderivative of theta-dependent elements")
    out = ring.zero()
    rem = p
    while rem:
        n = rem.max_order()
        if n <= 0:
            raise NotExact(f"remainder of order {max(n, 0)} is not a total derivative")
        P = [ring.zero() for _ in range(ring.n)]
        low = {}
        for k, c in rem.terms.items():
            top = [(i, f, e) for i, (f, o, e) in enumerate(k[1]) if o == n]
            if not top:
                low[k] = c
                continue
            if len(top) > 1 or top[0][2] > 1:
                raise NotExact("nonlinear in the highest jet variables")
            i, f, _ = top[0]
            nk = (k[0], k[1][:i] + k[1][i + 1:], k[2], k[3])
            P[f] = P[f] + DiffPoly(ring, {nk: c})
        if n - 1 >= 1:
            Q = _scaled_homotopy(ring, P, n - 1)
        else:
            Q = integrate_gradient_u0(P)
        new_rem = rem - Q.dx()
        if new_rem.max_order() >= n and new_rem:
            raise NotExact("coefficient of the top jet is not a gradient")
        out = out + Q
        rem = new_rem
    return out


def value_at_zero(p: DiffPoly) -> DiffPoly:
    """Set every u-variable to 0 and every generator to 1 (eps kept)."""
    ring = p.ring
    t = {}
    for k, c in p.terms.items():
        if k[1]:
            continue
        nk = (k[0], (), k[2], ring._zero_g)
        t[nk] = t.get(nk, 0) + c
    return DiffPoly(ring, {k: v for k, v in t.items() if v})
