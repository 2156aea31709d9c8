import pytest
from gmpy2 import mpq

from drham import gd
from drham.drk2 import build_K1, build_K2
from drham.gd import (GDContext, PseudoDiffOp, RSpin, TruncationError, apply_miura_to_dr, degree_zero_part,
                      dz_recursion_residual, factorial_r, gd_hamiltonian, gd_k1, gd_k2, pdo_power, rspin_package)
from drham.models import rspin3_model, rspin4_model
from drham.multivector import compatible, is_poisson
from drham.operators import MatDiffOp, ScalarDiffOp, poisson_bracket
from drham.variational import functional_equal, var_gradient

from displayed import rspin3_K2, rspin4_K2

CTX2 = GDContext(2)
R2 = CTX2.ring
f0 = R2.u(0)


def test_inverse_dx_times_function():
    Dm1 = PseudoDiffOp.d(R2, -1)
    P = Dm1.compose(PseudoDiffOp.mult(f0), -4)
    expect = PseudoDiffOp(R2, {-1: f0, -2: -R2.u(0, 1), -3: R2.u(0, 2), -4: -R2.u(0, 3)}, -4)
    assert P.eq_to(expect) and P.low == -4


def test_dx_inverse_cancels():
    P = PseudoDiffOp.d(R2, 1).compose(PseudoDiffOp.d(R2, -1), -6)
    assert P.eq_to(PseudoDiffOp(R2, {0: R2.one()}))


def test_res_and_plus():
    assert PseudoDiffOp.d(R2, -1).res() == R2.one()
    A = PseudoDiffOp(R2, {2: R2.one(), -1: f0})
    assert A.plus().eq_to(PseudoDiffOp.d(R2, 2))


def test_reading_below_certified_order_fails():
    P = PseudoDiffOp(R2, {0: f0}, -2)
    with pytest.raises(TruncationError):
        P[-3]


def test_negative_factor_needs_cutoff():
    with pytest.raises(TruncationError):
        PseudoDiffOp.d(R2, -1).compose(PseudoDiffOp.mult(f0))


def test_square_root_r2():
    root = GDContext(2).root(3)
    assert root[1] == R2.one()
    assert root[0] == R2.zero()
    assert root[-1] == f0 / 2
    assert root[-2] == -R2.u(0, 1) / 4
    assert root[-3] == (R2.u(0, 2) - f0 ** 2) / 8


@pytest.mark.parametrize("r", [2, 3, 4, 5])
def test_root_repowers_to_L(r):
    ctx = GDContext(r)
    depth = 6
    P = pdo_power(ctx.root(depth), r, r - 1 - depth)
    assert P.eq_to(ctx.L)


def test_residue_of_half_power():
    assert GDContext(2).res_power(1) == f0 / 2


def test_r2_hamiltonians():
    ctx = GDContext(2)
    assert gd_hamiltonian(ctx, 1, -1) == -ctx.f_ring.u(0)
    # res L^{3/2} = f0_xx/8 + 3 f0^2/8, so h_{1,0} = -f0^2/4 up to total derivatives
    x = ctx.f_ring.u(0)
    assert functional_equal(gd_hamiltonian(ctx, 1, 0), -x ** 2 / 4)


def test_r2_operators():
    ctx = GDContext(2, aux=True)
    F = ctx.f_ring
    K1 = gd_k1(ctx)
    K2 = gd_k2(ctx)
    assert K1 == MatDiffOp(F, [[ScalarDiffOp(F, {1: F.const(-2)})]])
    assert K2 == MatDiffOp(F, [[ScalarDiffOp(F, {0: F.u(0, 1), 1: F.u(0).scale(2), 3: F.const(mpq(1, 2))})]])


def test_factorial_r():
    assert factorial_r(1 + 3 * 1, 3, 1) == 4
    assert factorial_r(2 - 3, 3, -1) == 1
    assert factorial_r(2 + 4 * 2, 4, 2) == 2 * 6 * 10


@pytest.mark.parametrize("r", [2, 3, 4])
def test_gd_pair_structure(r):
    ctx = GDContext(r, aux=True)
    K1, K2 = gd_k1(ctx), gd_k2(ctx)
    zero = MatDiffOp.zeros(K1.ring, r - 1)
    assert K1.is_skew() and K2.is_skew()
    assert degree_zero_part(K1) == zero and degree_zero_part(K2) == zero
    assert is_poisson(K1) and is_poisson(K2)
    assert compatible(K1, K2)


@pytest.mark.parametrize("r", [2, 3, 4])
def test_casimirs(r):
    ctx = GDContext(r, aux=True)
    K1 = gd_k1(ctx)
    for alpha in range(1, r):
        h = gd_hamiltonian(ctx, alpha, -1)
        assert not any(K1.apply(var_gradient(h)))


@pytest.mark.parametrize("r", [3, 4])
@pytest.mark.parametrize("a", [-1, 0])
def test_gd_recursion(r, a):
    ctx = GDContext(r, aux=True)
    K1, K2 = gd_k1(ctx), gd_k2(ctx)
    for alpha in range(1, r):
        lhs = K2.apply(var_gradient(gd_hamiltonian(ctx, alpha, a)))
        rhs = K1.apply(var_gradient(gd_hamiltonian(ctx, alpha, a + 1)))
        assert all(x == -y for x, y in zip(lhs, rhs))


@pytest.mark.parametrize("r", [2, 3, 4])
def test_gd_hamiltonians_commute(r):
    ctx = GDContext(r, aux=True)
    K1 = gd_k1(ctx)
    hams = [gd_hamiltonian(ctx, alpha, a) for a in range(-1, 3) for alpha in range(1, r)]
    for i, f in enumerate(hams):
        for g in hams[i + 1:]:
            assert functional_equal(poisson_bracket(f, g, K1), 0)


def test_rspin3_display():
    _, K2, _ = rspin_package(3)
    assert K2 == rspin3_K2(K2.ring)


def test_rspin4_display():
    _, K2, _ = rspin_package(4)
    assert K2 == rspin4_K2(K2.ring)
    assert K2.entries[0][0].coeffs[7] == K2.ring.eps(6).scale(mpq(17, 36864))


@pytest.mark.parametrize("r,make", [(3, rspin3_model), (4, rspin4_model)])
def test_miura_to_dr(r, make):
    m = make()
    K1w, K2w, _ = rspin_package(r)
    relabel = lambda K: K.map_coeffs(lambda c: c.with_ring(K2w.ring))  # noqa: E731
    assert relabel(apply_miura_to_dr(r, build_K2(m))) == K2w
    assert relabel(apply_miura_to_dr(r, build_K1(m.hom, m.ring))) == K1w


def test_rspin3_miura_is_identity():
    m = rspin3_model()
    K = build_K2(m)
    assert apply_miura_to_dr(3, K) == K


@pytest.mark.parametrize("r", [3, 4, 5])
def test_dz_recursion(r):
    K1, K2, hams = rspin_package(r, None, 0)
    for d in (-1, 0):
        for alpha in range(1, r):
            assert not any(dz_recursion_residual(K1, K2, hams, r, alpha, d))


def test_rspin_package_bounds():
    with pytest.raises(ValueError):
        RSpin(6)
    with pytest.raises(ValueError):
        gd.miura_to_dr(6, rspin3_model().ring)
