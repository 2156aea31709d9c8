"""Built-in example theories, the genus-one generating density from a
potential, shift-operator series, and JSON (de)serialisation."""
from __future__ import annotations

import json
from functools import lru_cache
from math import factorial

from gmpy2 import mpq

from .algebra import DiffPoly, ExpGen, Q, Ring, exp_series
from .drk2 import CohFTModel, HomogeneityData, InvalidModel
from .operators import MatDiffOp, MiuraMap, ScalarDiffOp

MODEL_SCHEMA = "drham-model/1"


class UnknownModel(KeyError):
    pass


class ModelFileError(ValueError):
    pass


# --------------------------------------------------------------------------
# numbers and series

@lru_cache(maxsize=None)
def bernoulli(n: int) -> mpq:
    """Bernoulli number B_n (B_1 = -1/2) from sum_{k<=n} C(n+1,k) B_k = 0."""
    if n == 0:
        return mpq(1)
    from math import comb
    return -sum((comb(n + 1, k) * bernoulli(k) for k in range(n)), mpq(0)) / (n + 1)


def s_coeff(g: int) -> mpq:
    """Coefficient of z^{2g} in S(z) = (e^{z/2} - e^{-z/2}) / z."""
    return mpq(1, 4 ** g * factorial(2 * g + 1))


def stilde_coeff(g: int) -> mpq:
    """Coefficient of z^{2g} in cosh(z/2)."""
    return mpq(1, 4 ** g * factorial(2 * g))


def series_inverse(c: list) -> list:
    """Power series 1/f from the coefficient list of f (f[0] != 0)."""
    out = [1 / mpq(c[0])]
    for k in range(1, len(c)):
        out.append(-sum((c[j] * out[k - j] for j in range(1, k + 1) if j < len(c)), mpq(0)) / c[0])
    return out


def series_operator(ring: Ring, coeffs: list, shift: int = 0) -> ScalarDiffOp:
    """sum_k coeffs[k] eps^(k - shift) dx^k for k >= shift, truncated by the ring."""
    out = {}
    for k, c in enumerate(coeffs):
        if not c or k < shift:
            continue
        term = ring.eps(k - shift).scale(c)
        if term:
            out[k] = term
    return ScalarDiffOp(ring, out)


def shift_operator(ring: Ring, a) -> ScalarDiffOp:
    """exp(a eps dx) truncated at the ring's eps order."""
    if ring.eps_order is None:
        raise ValueError("shift operators need a truncated ring")
    a = Q(a)
    return series_operator(ring, [a ** k / factorial(k) for k in range(ring.eps_order + 1)])


def S_operator(ring: Ring) -> ScalarDiffOp:
    G = ring.eps_order // 2
    c = [mpq(0)] * (2 * G + 1)
    for g in range(G + 1):
        c[2 * g] = s_coeff(g)
    return series_operator(ring, c)


def Stilde_operator(ring: Ring) -> ScalarDiffOp:
    G = ring.eps_order // 2
    c = [mpq(0)] * (2 * G + 1)
    for g in range(G + 1):
        c[2 * g] = stilde_coeff(g)
    return series_operator(ring, c)


# --------------------------------------------------------------------------
# potentials and homogeneity data

def antidiagonal(n: int):
    return [[mpq(int(a + b == n - 1)) for b in range(n)] for a in range(n)]


def rspin_hom(r: int) -> HomogeneityData:
    n = r - 1
    return HomogeneityData(antidiagonal(n), [mpq(a, r) for a in range(n)], [0] * n, mpq(r - 2, r))


def genus1_g_from_potential(F: DiffPoly, eta) -> DiffPoly:
    """F - eps^2/48 c^t_{t x} c^x_{ab} u^a_1 u^b_1 with c^a_{bg} = eta^{am} F_{mbg}."""
    from .operators import invert_matrix

    ring = F.ring
    if ring.eps_order is not None and ring.eps_order < 2:
        raise ValueError("the genus-one term needs eps order >= 2")
    n = ring.n
    eta_inv = invert_matrix([[Q(x) for x in row] for row in eta])
    third = {}
    for x in range(n):
        fx = F.diff_u(x, 0)
        for y in range(n):
            fxy = fx.diff_u(y, 0)
            for z in range(n):
                third[(x, y, z)] = fxy.diff_u(z, 0)

    def c_up(a, b, g):
        return sum((third[(m, b, g)].scale(eta_inv[a][m]) for m in range(n) if eta_inv[a][m]), ring.zero())

    trace = [sum((c_up(t, t, x) for t in range(n)), ring.zero()) for x in range(n)]
    corr = ring.zero()
    for a in range(n):
        for b in range(n):
            t = sum((trace[x] * c_up(x, a, b) for x in range(n) if trace[x]), ring.zero())
            if t:
                corr = corr + t * ring.u(a, 1) * ring.u(b, 1)
    return F - (corr * ring.eps(2)).scale(mpq(1, 48))


def _kdv_ring(eps_order=None):
    return Ring(1, eps_order, names=("u",))


def trivial_model(eps_order=None) -> CohFTModel:
    R = _kdv_ring(eps_order)
    u = R.u(0)
    g = u ** 3 / 6 + (R.eps(2) * u * R.u(0, 2)) / 48
    hom = HomogeneityData([[1]], [0], [0], 0, unit=[1])
    return CohFTModel("trivial", hom, g, u ** 3 / 6)


def rspin3_model(eps_order=None) -> CohFTModel:
    R = Ring(2, eps_order, names=("u1", "u2"))
    u1, u2 = R.u(0), R.u(1)
    e2, e4 = R.eps(2), R.eps(4)
    F = u1 ** 2 * u2 / 2 + u2 ** 4 / 72
    g = (F + e2 * ((u2 ** 2 * R.u(1, 2)) / 144 + (u1 * R.u(0, 2)) / 24)
         + (e4 * u2 * R.u(1, 4)) / 1728)
    return CohFTModel("3spin", rspin_hom(3), g, F)


def rspin4_model(eps_order=None) -> CohFTModel:
    R = Ring(3, eps_order, names=("u1", "u2", "u3"))
    u1, u2, u3 = R.u(0), R.u(1), R.u(2)

    def j(a, i):
        return R.u(a, i)

    F = u1 ** 2 * u3 / 2 + u1 * u2 ** 2 / 2 + u2 ** 2 * u3 ** 2 / 16 + u3 ** 5 / 960
    g2 = (u1 * j(0, 2) / 16 + j(2, 2) * u2 ** 2 / 192 + u3 * u2 * j(1, 2) / 48
          + j(0, 2) * u3 ** 2 / 192 + u3 ** 3 * j(2, 2) / 768)
    g4 = u2 * j(1, 4) / 640 + u3 ** 2 * j(2, 4) / 4096 + (u1 * j(2, 4)).scale(mpq(3, 2560))
    g6 = u3 * j(2, 6) / 49152
    g = F + R.eps(2) * g2 + R.eps(4) * g4 + R.eps(6) * g6
    return CohFTModel("4spin", rspin_hom(4), g, F)


CP1_GEN = ExpGen("E", {1: 1})


def cp1_ring(genus: int = 3) -> Ring:
    return Ring(2, 2 * genus, (CP1_GEN,), ("u1", "u2"))


def cp1_hom() -> HomogeneityData:
    return HomogeneityData([[0, 1], [1, 0]], [0, 1], [0, 2], 1, A=[[2, 0], [0, 2]], unit=[1, 0])


def cp1_exp_S(R: Ring) -> DiffPoly:
    """exp(S(eps dx) u^2) = E * exp(sum_{g>=1} s_g eps^{2g} u^2_{2g})."""
    G = R.eps_order // 2
    tail = R.zero()
    for g in range(1, G + 1):
        tail = tail + (R.eps(2 * g) * R.u(1, 2 * g)).scale(s_coeff(g))
    return R.gen("E") * (exp_series(tail) if tail else R.one())


def cp1_potential(R: Ring) -> DiffPoly:
    u1, u2 = R.u(0), R.u(1)
    return u1 ** 2 * u2 / 2 + R.gen("E") - 1 - u2 - u2 ** 2 / 2


def cp1_model(genus: int = 3) -> CohFTModel:
    R = cp1_ring(genus)
    u1, u2 = R.u(0), R.u(1)
    g = u1 ** 2 * u2 / 2 + cp1_exp_S(R) - u2 - u2 ** 2 / 2
    for gg in range(1, genus + 1):
        c = bernoulli(2 * gg) / (2 * gg * factorial(2 * gg))
        g = g + (R.eps(2 * gg) * u1 * R.u(0, 2 * gg)).scale(c)
    return CohFTModel("cp1", cp1_hom(), g, cp1_potential(R))


def cp1_unit_level1(R: Ring) -> DiffPoly:
    """Closed form of g_{1,1} for CP1 (the unit Hamiltonian at level one)."""
    G = R.eps_order // 2
    u1, u2 = R.u(0), R.u(1)
    st = R.zero()
    for g in range(G + 1):
        st = st + (R.eps(2 * g) * R.u(1, 2 * g)).scale(stilde_coeff(g))
    out = u1 ** 2 * u2 / 2 + (st - 2) * cp1_exp_S(R) + u2
    for g in range(1, G + 1):
        out = out + (R.eps(2 * g) * u1 * R.u(0, 2 * g)).scale(bernoulli(2 * g) / factorial(2 * g))
    return out


def cp1_K2_closed(R: Ring) -> MatDiffOp:
    """Closed-form K2 for CP1 as a shift-operator matrix truncated at the ring's eps order."""
    G = R.eps_order // 2
    S = S_operator(R)
    St = Stilde_operator(R)
    d = ScalarDiffOp(R, {1: R.one()})
    Eop = ScalarDiffOp.mult(cp1_exp_S(R))
    Sd = S * d
    e11 = Sd * Eop * St + St * Eop * Sd
    e12 = ScalarDiffOp(R, {1: R.u(0)})
    e21 = d * ScalarDiffOp.mult(R.u(0))
    c = {}
    for g in range(G + 1):
        c[2 * g + 1] = R.eps(2 * g).scale(2 * bernoulli(2 * g) / factorial(2 * g))
    e22 = ScalarDiffOp(R, c)
    return MatDiffOp(R, [[e11, e12], [e21, e22]])


def toda_pair(genus: int = 3):
    """(K1, K2) of the extended Toda hierarchy in the variables (v1, v2)."""
    R = Ring(2, 2 * genus, (CP1_GEN,), ("v1", "v2"))
    top = 2 * genus + 1
    plus = series_operator(R, [mpq(0)] + [mpq(1, factorial(k)) for k in range(1, top + 1)], shift=1)
    minus = series_operator(R, [mpq(0)] + [mpq((-1) ** (k + 1), factorial(k)) for k in range(1, top + 1)],
                            shift=1)
    K1 = MatDiffOp(R, [[ScalarDiffOp(R), plus], [minus, ScalarDiffOp(R)]])
    E = R.gen("E")
    e11 = {}
    for k in range(1, top + 1):
        dk = ScalarDiffOp(R, {k: R.one()})
        left = dk * ScalarDiffOp.mult(E)
        right = ScalarDiffOp(R, {k: E.scale((-1) ** k)})
        term = (left - right).map(lambda c, k=k: (c * R.eps(k - 1)).scale(mpq(1, factorial(k))))
        for s, c in term.coeffs.items():
            e11[s] = e11[s] + c if s in e11 else c
    v1 = ScalarDiffOp.mult(R.u(0))
    e12 = v1 * plus
    e21 = minus * v1
    e22 = series_operator(R, [mpq(0)] + [mpq(2 * (k & 1), factorial(k)) for k in range(1, top + 1)], shift=1)
    K2 = MatDiffOp(R, [[ScalarDiffOp(R, e11), e12], [e21, e22]])
    return K1, K2


def toda_to_dr_miura(genus: int = 3) -> MiuraMap:
    """u^1 = exp(-eps dx / 2) v^1, u^2 = (1 / S(eps dx)) v^2."""
    R = Ring(2, 2 * genus, (CP1_GEN,), ("v1", "v2"))
    top = 2 * genus
    im1 = R.zero()
    for k in range(top + 1):
        im1 = im1 + (R.eps(k) * R.u(0, k)).scale(mpq(-1, 2) ** k / factorial(k))
    S = [mpq(0)] * (top + 1)
    for g in range(genus + 1):
        S[2 * g] = s_coeff(g)
    inv = series_inverse(S)
    im2 = R.zero()
    for k, c in enumerate(inv):
        if c:
            im2 = im2 + (R.eps(k) * R.u(1, k)).scale(c)
    return MiuraMap([im1, im2])


BUILTINS = ("trivial", "3spin", "4spin", "cp1", "toda_pair")


def builtin(name: str, genus: int = 3, eps_order=None):
    if name in ("trivial", "kdv"):
        return trivial_model(eps_order)
    if name == "3spin":
        return rspin3_model(eps_order)
    if name == "4spin":
        return rspin4_model(eps_order)
    if name == "cp1":
        return cp1_model(genus)
    if name == "toda_pair":
        return toda_pair(genus)
    raise UnknownModel(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")


# --------------------------------------------------------------------------
# serialisation

def _qstr(x) -> str:
    return str(mpq(x))


def poly_to_json(p: DiffPoly) -> list:
    ring = p.ring
    out = []
    for k in sorted(p.terms, key=lambda k: (k[0], k[1], k[2], k[3])):
        eps, uv, th, gv = k
        item = {"vars": [[f + 1, o, e] for f, o, e in uv],
                "gens": {ring.gens[j].name: e for j, e in enumerate(gv) if e},
                "eps": eps, "coeff": _qstr(p.terms[k])}
        if th:
            item["thetas"] = [[f + 1, o] for f, o in th]
        out.append(item)
    return out


def _fail(where, msg):
    raise ModelFileError(f"{where}: {msg}")


def _parse_q(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        _fail(where, f"expected a rational string 'p/q' or an integer, got {x!r}")
    try:
        return Q(x)
    except (ValueError, ZeroDivisionError):
        _fail(where, f"malformed rational {x!r}")


def poly_from_json(ring: Ring, data, where: str) -> DiffPoly:
    if not isinstance(data, list):
        _fail(where, "expected a list of monomials")
    out = ring.zero()
    for i, item in enumerate(data):
        w = f"{where}[{i}]"
        if not isinstance(item, dict):
            _fail(w, "monomial must be an object")
        extra = set(item) - {"vars", "gens", "eps", "coeff", "thetas"}
        if extra:
            _fail(w, f"unknown keys {sorted(extra)}")
        if "coeff" not in item:
            _fail(w, "missing 'coeff'")
        c = _parse_q(item["coeff"], w + ".coeff")
        eps = item.get("eps", 0)
        if not isinstance(eps, int) or eps < 0:
            _fail(w + ".eps", "must be a non-negative integer")
        uvars = []
        for j, v in enumerate(item.get("vars", [])):
            if (not isinstance(v, list) or len(v) != 3 or not all(isinstance(x, int) for x in v)):
                _fail(f"{w}.vars[{j}]", "expected [field, order, exponent]")
            a, o, e = v
            if not 1 <= a <= ring.n:
                _fail(f"{w}.vars[{j}]", f"field index {a} outside 1..{ring.n}")
            if o < 0 or e < 1:
                _fail(f"{w}.vars[{j}]", "order must be >= 0 and exponent >= 1")
            uvars.append((a - 1, o, e))
        thetas = []
        for j, v in enumerate(item.get("thetas", [])):
            if not isinstance(v, list) or len(v) != 2:
                _fail(f"{w}.thetas[{j}]", "expected [field, order]")
            thetas.append((v[0] - 1, v[1]))
        gens = item.get("gens", {})
        if not isinstance(gens, dict):
            _fail(w + ".gens", "expected an object")
        for name in gens:
            try:
                ring.gen_index(name)
            except Exception:
                _fail(w + ".gens", f"undeclared generator {name!r}")
        out = out + ring.monomial(c, uvars, thetas, gens, eps)
    return out


def model_to_json(m: CohFTModel) -> dict:
    ring = m.ring
    h = m.hom
    return {
        "schema": MODEL_SCHEMA,
        "name": m.name,
        "n": ring.n,
        "names": list(ring.names),
        "eps_order": ring.eps_order,
        "gens": [{"name": g.name, "weights": {str(a + 1): _qstr(c) for a, c in g.weights}} for g in ring.gens],
        "hom": {
            "eta": [[_qstr(x) for x in row] for row in h.eta],
            "q": [_qstr(x) for x in h.q],
            "r": [_qstr(x) for x in h.r],
            "delta": _qstr(h.delta),
            "A": [[_qstr(x) for x in row] for row in h.A],
            "unit": [_qstr(x) for x in h.unit],
        },
        "gbar": poly_to_json(m.gbar),
        "F": poly_to_json(m.F) if m.F is not None else None,
    }


def _matrix(data, n, where):
    if not isinstance(data, list) or len(data) != n or any(not isinstance(r, list) or len(r) != n for r in data):
        _fail(where, f"expected a {n}x{n} matrix")
    return [[_parse_q(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(data)]


def _vector(data, n, where):
    if not isinstance(data, list) or len(data) != n:
        _fail(where, f"expected a list of length {n}")
    return [_parse_q(x, f"{where}[{i}]") for i, x in enumerate(data)]


def model_from_json(data: dict) -> CohFTModel:
    if not isinstance(data, dict):
        _fail("<root>", "expected an object")
    if data.get("schema") != MODEL_SCHEMA:
        _fail("schema", f"expected {MODEL_SCHEMA!r}, got {data.get('schema')!r}")
    for key in ("name", "n", "hom", "gbar"):
        if key not in data:
            _fail(key, "missing required field")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        _fail("n", "must be a positive integer")
    eps_order = data.get("eps_order")
    if eps_order is not None and (not isinstance(eps_order, int) or eps_order < 0):
        _fail("eps_order", "must be null or a non-negative integer")
    gens = []
    for i, g in enumerate(data.get("gens", [])):
        if not isinstance(g, dict) or "name" not in g or not isinstance(g.get("weights"), dict):
            _fail(f"gens[{i}]", "expected {name, weights}")
        w = {}
        for a, c in g["weights"].items():
            try:
                ai = int(a)
            except ValueError:
                _fail(f"gens[{i}].weights", f"bad field index {a!r}")
            if not 1 <= ai <= n:
                _fail(f"gens[{i}].weights", f"field index {ai} outside 1..{n}")
            w[ai - 1] = _parse_q(c, f"gens[{i}].weights.{a}")
        gens.append(ExpGen(g["name"], w))
    names = data.get("names")
    if names is not None and (not isinstance(names, list) or len(names) != n):
        _fail("names", f"expected {n} names")
    ring = Ring(n, eps_order, gens, names)
    h = data["hom"]
    if not isinstance(h, dict):
        _fail("hom", "expected an object")
    for key in ("eta", "q", "r", "delta"):
        if key not in h:
            _fail(f"hom.{key}", "missing required field")
    try:
        hom = HomogeneityData(
            _matrix(h["eta"], n, "hom.eta"), _vector(h["q"], n, "hom.q"), _vector(h["r"], n, "hom.r"),
            _parse_q(h["delta"], "hom.delta"),
            _matrix(h["A"], n, "hom.A") if h.get("A") is not None else None,
            _vector(h["unit"], n, "hom.unit") if h.get("unit") is not None else None)
    except InvalidModel as e:
        _fail("hom", f"invariant violated: {e}")
    gbar = poly_from_json(ring, data["gbar"], "gbar")
    F = poly_from_json(ring, data["F"], "F") if data.get("F") is not None else None
    if gbar and gbar.theta_degree() != 0:
        _fail("gbar", "density must be theta-free")
    return CohFTModel(data["name"], hom, gbar, F)


def save_model(path, m: CohFTModel) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_json(m), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> CohFTModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"{path}: not valid JSON ({e})") from e
    except OSError as e:
        raise ModelFileError(f"{path}: {e.strerror}") from e
    return model_from_json(data)


def save_report(path, report) -> None:
    from .report import write_report
    write_report(path, report)
