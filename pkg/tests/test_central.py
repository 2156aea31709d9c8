import pytest
from gmpy2 import mpq

from drham.algebra import Ring
from drham.central import DegenerateSymbol, central_invariant_scalar, eps2_tensor_check, eps2_tensor_sides
from drham.drk2 import CohFTModel, build_K1, build_K2
from drham.models import cp1_model, rspin3_model, rspin4_model, trivial_model
from drham.operators import ScalarDiffOp

R = Ring(1, None)
u, ux = R.u(0), R.u(0, 1)
D = ScalarDiffOp(R, {1: R.one()})


def test_kdv_pencil():
    m = trivial_model()
    c = central_invariant_scalar(build_K1(m.hom, m.ring), build_K2(m))
    assert c.is_constant() and c.value() == mpq(1, 24)


def test_dispersionless_pencil():
    c = central_invariant_scalar(D, ScalarDiffOp(R, {1: u, 0: ux / 2}))
    assert c.value() == 0


@pytest.mark.parametrize("s", [mpq(1), mpq(-2, 7), mpq(5, 3)])
def test_third_order_term(s):
    P2 = ScalarDiffOp(R, {1: u, 0: ux / 2, 3: R.eps(2).scale(3 * s)})
    assert central_invariant_scalar(D, P2).value() == s


def test_affine_canonical_coordinate():
    # u^ = u + 1 and g1 = 2: c = P2_3 / (3 * 4)
    P1 = ScalarDiffOp(R, {1: R.const(2)})
    P2 = ScalarDiffOp(R, {1: (u + R.one()).scale(2), 0: ux, 3: R.eps(2).scale(6)})
    assert central_invariant_scalar(P1, P2) == mpq(1, 2)


def test_degenerate_symbol():
    with pytest.raises(DegenerateSymbol):
        central_invariant_scalar(D, ScalarDiffOp(R, {1: u ** 2, 0: u * ux}))


@pytest.mark.parametrize("make", [trivial_model, rspin3_model, rspin4_model, lambda: cp1_model(3)])
def test_tensor_identity(make):
    assert eps2_tensor_check(make())


def test_tensor_sides_kdv():
    lhs, rhs = eps2_tensor_sides(trivial_model())
    assert lhs[0][0] == rhs[0][0] == trivial_model().ring.const(mpq(1, 8))


def test_tensor_identity_detects_wrong_genus_one_term():
    m = trivial_model()
    R = m.ring
    bad = CohFTModel("bad", m.hom, m.gbar + (R.eps(2) * R.u(0) * R.u(0, 2)) / 48, m.F)
    assert not eps2_tensor_check(bad)
