import pytest
from gmpy2 import mpq

from drham.algebra import Ring
from drham.drk2 import (CohFTModel, HomogeneityData, InvalidModel, RecursionFailure, build_K1, build_K2,
                        check_homogeneity, genus0_K2, genus0_check, level0_gradient, mutual_commutativity,
                        r_vector_field, recursion_check, recursion_generate)
from drham.models import cp1_model, rspin3_model, rspin4_model, trivial_model
from drham.operators import MatDiffOp, ScalarDiffOp
from drham.variational import functional_equal, var_gradient

from helpers import mat


def test_kdv_K2():
    m = trivial_model()
    R = m.ring
    expected = mat(R, [[{1: R.u(0), 0: R.u(0, 1) / 2, 3: R.eps(2).scale(mpq(1, 8))}]])
    assert build_K2(m) == expected
    assert build_K2(m, "defining") == expected


@pytest.mark.parametrize("make", [trivial_model, rspin3_model, rspin4_model, lambda: cp1_model(2)])
def test_forms_agree_and_homogeneity(make):
    m = make()
    assert check_homogeneity(m)
    Ka = build_K2(m, "alternative")
    assert Ka == build_K2(m, "defining")
    assert Ka.is_skew()


def test_homogeneity_fails_for_wrong_charges():
    m = trivial_model()
    bad = CohFTModel("bad", HomogeneityData([[1]], [mpq(1, 3)], [0], 0, validate=False), m.gbar, m.F)
    assert not check_homogeneity(bad)


def test_rspin3_entries_from_generating_density():
    R = rspin3_model().ring
    K = build_K2(rspin3_model())
    w1, w2 = R.u(0), R.u(1)
    assert K.entries[0][1] == ScalarDiffOp(R, {1: w1, 0: R.u(0, 1) / 3})
    assert K.entries[1][1] == ScalarDiffOp(R, {1: w2.scale(mpq(2, 3)), 0: R.u(1, 1) / 3,
                                               3: R.eps(2).scale(mpq(2, 9))})


def test_trivial_data_gives_zero():
    R = Ring(2, None)
    hom = HomogeneityData([[0, 1], [1, 0]], [mpq(1, 2), mpq(1, 2)], [0, 0], 1)
    assert hom.mu == [0, 0]
    m = CohFTModel("zero", hom, R.zero())
    assert r_vector_field(m) == [R.zero(), R.zero()]
    assert build_K2(m).is_zero()


def test_invalid_homogeneity_rejected():
    with pytest.raises(InvalidModel):
        HomogeneityData([[0, 1], [1, 0]], [0, 0], [0, 0], 1)  # mu = (-1/2, -1/2) breaks mu eta + eta mu = 0
    with pytest.raises(InvalidModel):
        HomogeneityData([[0, 0], [0, 1]], [0, 0], [0, 0], 0)


def test_kdv_recursion_minus_one():
    m = trivial_model()
    R = m.ring
    K2 = build_K2(m)
    assert K2.apply([R.one()]) == [R.u(0, 1) / 2]
    grads = {(0, -1): [R.one()], (0, 0): [R.u(0)]}
    (res,) = recursion_check(m.hom, K2, grads, [(0, -1)])
    assert res.ok


def test_recursion_negative_control():
    m = trivial_model()
    R = m.ring
    grads = {(0, -1): [R.one()], (0, 0): [R.u(0).scale(2)]}
    (res,) = recursion_check(m.hom, build_K2(m), grads, [(0, -1)])
    assert not res.ok and res.witness()


def test_kdv_generation_reproduces_hamiltonian():
    m = trivial_model()
    R = m.ring
    table = recursion_generate(m.hom, build_K2(m), 2)
    u = R.u(0)
    h1 = u ** 3 / 6 + (R.eps(2) * u * R.u(0, 2)).scale(mpq(1, 24))
    assert functional_equal(table[(0, 1)]["density"], h1)
    assert functional_equal(table[(0, 0)]["density"], u ** 2 / 2)
    # dispersionless tail u^{d+2}/(d+2)!
    assert table[(0, 2)]["density"].at_eps_zero() == u ** 4 / 24
    grads = {k: v["grad"] for k, v in table.items()}
    assert all(r.ok for r in recursion_check(m.hom, build_K2(m), grads, [(0, -1), (0, 0), (0, 1)]))
    assert not mutual_commutativity(table, build_K1(m.hom, R))
    assert not mutual_commutativity(table, build_K2(m))


def test_level_zero_from_generating_density():
    m = rspin3_model()
    table = recursion_generate(m.hom, build_K2(m), 0)
    for a in range(2):
        assert table[(a, 0)]["grad"] == level0_gradient(m.gbar, a)


def test_rspin3_generated_hamiltonians_commute():
    m = rspin3_model()
    table = recursion_generate(m.hom, build_K2(m), 1, reconstruct=False)
    assert not mutual_commutativity(table, build_K1(m.hom, m.ring))
    assert not mutual_commutativity(table, build_K2(m))


def test_degenerate_factor():
    m = cp1_model(1)
    with pytest.raises(RecursionFailure) as e:
        recursion_generate(m.hom, build_K2(m), 1)
    assert e.value.alpha == 0 and e.value.d == -1
    table = recursion_generate(m.hom, build_K2(m), 0, skip_degenerate=True, reconstruct=False)
    assert (0, 0) not in table and (1, 0) in table
    # one level up, component 2 needs the dropped component through A
    with pytest.raises(RecursionFailure) as e:
        recursion_generate(m.hom, build_K2(m), 1, skip_degenerate=True, reconstruct=False)
    assert e.value.alpha == 1 and e.value.d == 0


@pytest.mark.parametrize("make", [trivial_model, rspin3_model, rspin4_model, lambda: cp1_model(1)])
def test_genus0(make):
    m = make()
    rep = genus0_check(m.hom, m.F, 3, build_K2(m))
    assert all(r.ok for r in rep.recursion)
    assert rep.string_ok and rep.homogeneity_ok and rep.k2_matches


def test_genus0_operator_is_dispersionless_limit():
    m = rspin4_model()
    G = genus0_K2(m.hom, m.F)
    assert G == build_K2(m).eps_part(0)
