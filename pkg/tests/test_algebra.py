import pytest
from gmpy2 import mpq

from drham.algebra import (ExpGen, Ring, SignatureError, dilation_D, euler_Ehat, exp_series,
                           standard_degree_of, substitute)
from drham.models import cp1_model, cp1_unit_level1, trivial_model
from drham.variational import functional_equal

R1 = Ring(1, None)
R2 = Ring(2, None)
RE = Ring(2, 6, (ExpGen("E", {1: 1}),))


def test_odd_square_vanishes():
    t = R1.theta(0)
    assert not t * t


def test_odd_anticommute():
    a, b = R2.theta(0), R2.theta(1, 3)
    assert a * b == -(b * a)


def test_dx_of_product():
    u, u1, u2 = R2.u(0), R2.u(0, 1), R2.u(0, 2)
    assert (u * u1).dx() == u1 ** 2 + u * u2


def test_dx_with_theta():
    t = R2.theta(0)
    u = R2.u(0)
    assert (t * u).dx() == R2.theta(0, 1) * u + t * R2.u(0, 1)


def test_dx_of_exponential():
    assert RE.gen("E").dx() == RE.gen("E") * RE.u(1, 1)


def test_standard_degree():
    R = Ring(2, 6)
    assert standard_degree_of(R.eps(2) * R.u(0) * R.u(0, 2)) == 0
    mono = R.theta(0) * R.theta(1, 3)
    assert mono.theta_degree() == 2
    assert standard_degree_of(mono) == 3


def test_truncation_drops_high_eps():
    R = Ring(1, 2)
    assert not R.eps(3)
    assert not R.eps(2) * R.eps(2)


def test_signature_errors():
    with pytest.raises(SignatureError):
        R1.u(3)
    with pytest.raises(SignatureError):
        Ring(1, None, (ExpGen("E", {4: 1}),))


def test_euler_Ehat_on_kdv():
    m = trivial_model()
    R = m.ring
    u = R.u(0)
    a = u ** 3 / 6
    b = (R.eps(2) * u * R.u(0, 2)).scale(mpq(1, 48))
    assert euler_Ehat(a, m.hom) == a.scale(3)
    assert euler_Ehat(b, m.hom) == b.scale(3)
    assert euler_Ehat(m.gbar, m.hom) == m.gbar.scale(3)


def test_dilation():
    u1, u2 = R2.u(0), R2.u(1)
    p = u1 ** 2 * u2
    assert dilation_D(p) == p.scale(3)
    q = R2.u(0) * R2.u(0, 2)
    assert dilation_D(q) == q.scale(4)


def test_dilation_cp1_unit():
    m = cp1_model(3)
    lhs = dilation_D(m.gbar) - m.gbar.scale(2)
    assert functional_equal(lhs, cp1_unit_level1(m.ring))


def test_substitute_identity_and_shift():
    u = R1.u(0)
    p = u ** 2 * R1.u(0, 1)
    assert substitute(p, [u]) == p
    shifted = substitute(u ** 2, [u + R1.one()])
    assert shifted == u ** 2 + u.scale(2) + R1.one()


def test_exp_series():
    R = Ring(1, 4)
    x = R.eps(2) * R.u(0, 2)
    assert exp_series(x) == R.one() + x + (x * x).scale(mpq(1, 2))
