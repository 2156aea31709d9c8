import pytest
from gmpy2 import mpq

from drham.algebra import Ring
from drham.models import trivial_model
from drham.drk2 import build_K2
from drham.variational import functional_equal
from drham.operators import (MatDiffOp, MiuraMap, NotSkew, ScalarDiffOp, coeff_extract, miura_op,
                             poisson_bracket)

R = Ring(1, None)
u, u1, u2 = R.u(0), R.u(0, 1), R.u(0, 2)
d = ScalarDiffOp(R, {1: R.one()})
U = ScalarDiffOp.mult(u)


def test_composition():
    assert d * U == ScalarDiffOp(R, {1: u, 0: u1})
    assert d * d * U == ScalarDiffOp(R, {2: u, 1: u1.scale(2), 0: u2})
    uD = ScalarDiffOp(R, {1: u})
    assert uD * uD == ScalarDiffOp(R, {2: u ** 2, 1: u * u1})


def test_adjoint():
    assert ScalarDiffOp(R, {1: u}).adjoint() == ScalarDiffOp(R, {1: -u, 0: -u1})
    assert ScalarDiffOp(R, {3: R.one()}).adjoint() == ScalarDiffOp(R, {3: -R.one()})


def test_adjoint_is_involution():
    A = ScalarDiffOp(R, {2: u ** 2, 1: u2, 0: u1 * u})
    assert A.adjoint().adjoint() == A


def test_apply_kdv_K2_to_one():
    m = trivial_model()
    K2 = build_K2(m)
    assert K2.apply([m.ring.one()]) == [m.ring.u(0, 1) / 2]


def test_poisson_bracket_of_kdv_hamiltonians():
    K1 = MatDiffOp(R, [[d]])
    assert functional_equal(poisson_bracket(u ** 3 / 6, u ** 2 / 2, K1), 0)
    assert not functional_equal(poisson_bracket(u ** 3, u * R.u(0, 1) ** 2, K1), 0)


def test_poisson_bracket_rejects_non_skew():
    sym = MatDiffOp(R, [[ScalarDiffOp(R, {0: u})]])
    with pytest.raises(NotSkew):
        poisson_bracket(u, u ** 2, sym)


def test_coeff_extract():
    K2 = build_K2(trivial_model())
    assert coeff_extract(K2, 2, 0, 0, 3).constant_term() == mpq(1, 8)


def test_miura_round_trip():
    Re = Ring(1, 4)
    v = Re.u(0)
    m = MiuraMap([v + (Re.eps(2) * Re.u(0, 2)).scale(mpq(1, 3))])
    p = v ** 2 * Re.u(0, 1)
    assert m.to_old(m.to_new(p)) == p


def test_miura_identity_leaves_operator():
    Re = Ring(1, 4)
    K = MatDiffOp(Re, [[ScalarDiffOp(Re, {1: Re.u(0), 0: Re.u(0, 1) / 2})]])
    assert miura_op(K, MiuraMap.identity(Re)) == K


def test_miura_of_dx_under_scaling():
    # w = 2u maps dx to 4 dx
    K = MatDiffOp(R, [[d]])
    m = MiuraMap([u.scale(2)])
    assert miura_op(K, m) == MatDiffOp(R, [[ScalarDiffOp(R, {1: R.const(4)})]])
