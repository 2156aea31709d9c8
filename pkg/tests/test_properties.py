"""Algebraic invariants checked on generated inputs."""
import json

from gmpy2 import mpq
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from drham import gd, models
from drham.algebra import Ring, dilation_D, euler_Ehat
from drham.drk2 import CohFTModel, build_K1, build_K2, r_vector_field
from drham.multivector import bivector_of_op, commutator_VQ_BK, compatible, schouten
from drham.operators import MiuraMap, ScalarDiffOp, invert_matrix, miura_op, poisson_bracket
from drham.variational import (L_op, functional_equal, functional_from_variational, higher_euler, omega_hat,
                               var_derivative, var_gradient)

from strategies import (degree_zero_densities, homogeneity, mat_ops, nonzero_q, pdos, polys, rationals,
                        ring_and_polys, rings, skew_ops)

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _tdeg(p):
    return p.theta_degree() if p else 0


# ---------------------------------------------------------------- algebra

@FAST
@given(ring_and_polys(2, max_theta=1, max_eps=2))
def test_dx_is_a_derivation(data):
    _, a, b = data
    assert (a * b).dx() == a.dx() * b + a * b.dx()


@FAST
@given(ring_and_polys(2, max_theta=2))
def test_supercommutativity(data):
    _, a, b = data
    sign = -1 if (_tdeg(a) * _tdeg(b)) & 1 else 1
    assert a * b == (b * a).scale(sign)


@FAST
@given(ring_and_polys(3, max_theta=1, max_order=1, max_deg=2))
def test_associativity(data):
    _, a, b, c = data
    assert (a * b) * c == a * (b * c)


@FAST
@given(ring_and_polys(2, eps_order=None, max_eps=3))
def test_truncation_is_a_homomorphism(data):
    _, a, b = data
    assert (a * b).eps_truncate(2) == (a.eps_truncate(2) * b.eps_truncate(2)).eps_truncate(2)


@FAST
@given(st.data())
def test_euler_operators_are_derivations(data):
    R = data.draw(rings())
    a, b = data.draw(polys(R, max_eps=2)), data.draw(polys(R, max_eps=2))
    h = data.draw(homogeneity(R.n))
    assert euler_Ehat(a * b, h) == euler_Ehat(a, h) * b + a * euler_Ehat(b, h)
    assert dilation_D(a * b) == dilation_D(a) * b + a * dilation_D(b)


# ---------------------------------------------------------------- variational

@FAST
@given(ring_and_polys(1, max_n=3, max_order=3, max_eps=2))
def test_variational_derivative_kills_total_derivatives(data):
    _, f = data
    assert not any(var_gradient(f.dx()))


@FAST
@given(ring_and_polys(1, max_n=3, max_order=3, min_deg=1))
def test_homotopy_round_trip(data):
    _, f = data
    assert functional_equal(functional_from_variational(var_gradient(f)), f)


@FAST
@given(st.data())
def test_higher_euler_shift(data):
    R, f = data.draw(ring_and_polys(1, max_n=3, max_order=3))
    a, k = data.draw(st.integers(0, R.n - 1)), data.draw(st.integers(0, 3))
    assert higher_euler(f.dx(), a, k + 1) == higher_euler(f, a, k)
    assert higher_euler(f, a, 0) == var_derivative(f, a)


@FAST
@given(st.data())
def test_L_shift_identity(data):
    R, f = data.draw(ring_and_polys(1, max_n=3, max_order=3))
    a, k = data.draw(st.integers(0, R.n - 1)), data.draw(st.integers(0, 3))
    d = ScalarDiffOp(R, {1: R.one()})
    assert L_op(f.dx(), a, k + 1) == d * L_op(f, a, k + 1) + L_op(f, a, k)


@FAST
@given(st.data())
def test_functional_equality_ignores_total_derivatives(data):
    R, f, g = data.draw(ring_and_polys(2, max_n=2, max_order=2))
    c = data.draw(rationals)
    assert functional_equal(f + g.dx() + R.const(c), f)


@FAST
@given(st.data())
def test_omega_adjoint_symmetry(data):
    R = data.draw(rings(3))
    h = data.draw(polys(R, 3, 3, 3, max_eps=2))
    eta = [[mpq(0)] * R.n for _ in range(R.n)]
    for a in range((R.n + 1) // 2):
        eta[a][R.n - 1 - a] = eta[R.n - 1 - a][a] = data.draw(nonzero_q)
    eta_inv = invert_matrix(eta)
    for k in range(3):
        W = omega_hat(h, k, eta_inv)
        assert W.adjoint() == W.scale((-1) ** k)


# ---------------------------------------------------------------- operators

@FAST
@given(st.data())
def test_adjoint_reverses_composition(data):
    R = data.draw(rings())
    A, B = data.draw(mat_ops(R)), data.draw(mat_ops(R))
    assert (A @ B).adjoint() == B.adjoint() @ A.adjoint()
    assert A.adjoint().adjoint() == A


@FAST
@given(st.data())
def test_bracket_is_antisymmetric(data):
    R = data.draw(rings())
    f, g = data.draw(polys(R)), data.draw(polys(R))
    K = data.draw(skew_ops(R))
    assert functional_equal(poisson_bracket(f, g, K) + poisson_bracket(g, f, K), 0)


@SLOW
@given(st.data())
def test_miura_round_trip(data):
    R = Ring(data.draw(st.integers(1, 2)), 3)
    ims = [R.u(a) + (R.eps(2) * data.draw(polys(R, 2, 2, 2, min_deg=1))) for a in range(R.n)]
    m = MiuraMap(ims)
    p = data.draw(polys(R, 2, 2, 2))
    assert m.to_old(m.to_new(p)) == p


@settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.data())
def test_miura_functoriality(data):
    R = Ring(1, 3)
    m1 = MiuraMap([R.u(0) + (R.eps(1) * R.u(0, 1)).scale(data.draw(nonzero_q))])
    m2 = MiuraMap([R.u(0) + (R.eps(2) * R.u(0) * R.u(0, 2)).scale(data.draw(nonzero_q))])
    K = data.draw(skew_ops(R, max_order=1))
    assert miura_op(miura_op(K, m1), m2) == miura_op(K, m1.then(m2))


# ---------------------------------------------------------------- multivectors

@FAST
@given(st.data())
def test_schouten_graded_symmetry(data):
    R = data.draw(rings())
    p, q = data.draw(st.integers(0, 2)), data.draw(st.integers(0, 2))
    P, Q = data.draw(polys(R, 2, 2, 2, theta=p)), data.draw(polys(R, 2, 2, 2, theta=q))
    assert functional_equal(schouten(P, Q, p), schouten(Q, P, q).scale((-1) ** (p * q)))


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.data())
def test_schouten_jacobi(data):
    R = Ring(1, None)
    ps = [data.draw(st.integers(0, 2)) for _ in range(3)]
    P, Q, S = (data.draw(polys(R, 2, 2, 2, theta=k)) for k in ps)
    p, q, s = ps
    t1 = schouten(schouten(P, Q, p), S, p + q - 1).scale((-1) ** (p * s))
    t2 = schouten(schouten(S, P, s), Q, s + p - 1).scale((-1) ** (s * q))
    t3 = schouten(schouten(Q, S, q), P, q + s - 1).scale((-1) ** (q * p))
    assert functional_equal(t1 + t2 + t3, 0)


@SLOW
@given(st.data())
def test_universal_lemma_and_compatibility(data):
    n = data.draw(st.integers(1, 2))
    R = Ring(n, None)
    g = data.draw(degree_zero_densities(R))
    hom = data.draw(homogeneity(n))
    m = CohFTModel("generated", hom, g)
    K2 = build_K2(m)
    K1 = build_K1(hom, R)
    assert K2.is_skew()
    Kt = commutator_VQ_BK(r_vector_field(m), K1)
    assert functional_equal(bivector_of_op(K2) + bivector_of_op(Kt, check_skew=False), 0)
    assert compatible(K1, K2, check_poisson=False)


@SLOW
@given(st.data())
def test_lemma_independent_of_density_representative(data):
    n = data.draw(st.integers(1, 2))
    R = Ring(n, None)
    g = data.draw(degree_zero_densities(R))
    h = data.draw(polys(R, 2, 1, 2, min_deg=1))
    hom = data.draw(homogeneity(n))
    m = CohFTModel("generated", hom, g)
    K1 = build_K1(hom, R)
    a = commutator_VQ_BK(r_vector_field(m), K1)
    b = commutator_VQ_BK(r_vector_field(m, g + h.dx()), K1)
    assert functional_equal(bivector_of_op(a, check_skew=False), bivector_of_op(b, check_skew=False))


# ---------------------------------------------------------------- pseudo-differential operators

@FAST
@given(st.data())
def test_pdo_associativity(data):
    R = Ring(1, None)
    A, B, C = (data.draw(pdos(R)) for _ in range(3))
    left = A.compose(B, -7).compose(C, -4)
    right = A.compose(B.compose(C, -7), -4)
    assert left.eq_to(right)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 5), st.integers(3, 7))
def test_root_repowering(r, depth):
    ctx = gd.GDContext(r)
    P = gd.pdo_power(ctx.root(depth), r, r - depth)
    assert P.eq_to(ctx.L.truncate(r - depth)) and P.low <= r - depth


# ---------------------------------------------------------------- models

@FAST
@given(st.integers(1, 3), rationals, rationals)
def test_shift_group_law(G, a, b):
    R = Ring(1, 2 * G)
    assert models.shift_operator(R, a) * models.shift_operator(R, b) == models.shift_operator(R, a + b)


@FAST
@given(st.data())
def test_model_file_round_trip(data):
    n = data.draw(st.integers(1, 2))
    R = Ring(n, data.draw(st.sampled_from([None, 2, 4])))
    g = data.draw(degree_zero_densities(R))
    m = CohFTModel(f"generated{n}", data.draw(homogeneity(n)), g, g.at_eps_zero())
    text = json.dumps(models.model_to_json(m), sort_keys=True)
    assert models.model_from_json(json.loads(text)) == m
