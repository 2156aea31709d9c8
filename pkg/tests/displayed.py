"""Reference K2 matrices of the 3-spin and 4-spin theories, typed in by hand."""
from gmpy2 import mpq

from drham.algebra import Ring
from drham.operators import MatDiffOp, ScalarDiffOp


def _op(R, terms):
    out = {}
    for s, c in terms:
        out[s] = out[s] + c if s in out else c
    return ScalarDiffOp(R, out)


def rspin3_K2(R: Ring) -> MatDiffOp:
    w = lambda a, i=0: R.u(a - 1, i)  # noqa: E731
    e2, e4 = R.eps(2), R.eps(4)
    k11 = _op(R, [(1, (w(2) ** 2).scale(mpq(2, 9))), (0, (w(2) * w(2, 1)).scale(mpq(2, 9))),
                  (3, (e2 * w(2)).scale(mpq(5, 54))), (2, (e2 * w(2, 1)).scale(mpq(5, 36))),
                  (1, (e2 * w(2, 2)).scale(mpq(1, 12))), (0, (e2 * w(2, 3)).scale(mpq(1, 54))),
                  (5, e4.scale(mpq(1, 162)))])
    k12 = _op(R, [(1, w(1)), (0, w(1, 1).scale(mpq(1, 3)))])
    k21 = _op(R, [(1, w(1)), (0, w(1, 1).scale(mpq(2, 3)))])
    k22 = _op(R, [(1, w(2).scale(mpq(2, 3))), (0, w(2, 1).scale(mpq(1, 3))), (3, e2.scale(mpq(2, 9)))])
    return MatDiffOp(R, [[k11, k12], [k21, k22]])


def rspin4_K2(R: Ring) -> MatDiffOp:
    w = lambda a, i=0: R.u(a - 1, i)  # noqa: E731
    e2, e4, e6 = R.eps(2), R.eps(4), R.eps(6)
    Q = mpq
    k11 = _op(R, [
        (1, (w(3) ** 3).scale(Q(1, 32)) + (w(2) ** 2).scale(Q(3, 16))),
        (0, (w(2) * w(2, 1)).scale(Q(3, 16)) + (w(3) ** 2 * w(3, 1)).scale(Q(3, 64))),
        (3, e2 * ((w(3) ** 2).scale(Q(7, 256)) + w(1).scale(Q(1, 48)))),
        (2, e2 * (w(1, 1).scale(Q(1, 32)) + (w(3) * w(3, 1)).scale(Q(21, 256)))),
        (1, e2 * ((w(3, 1) ** 2).scale(Q(5, 128)) + (w(3) * w(3, 2)).scale(Q(13, 256)) + w(1, 2).scale(Q(1, 24)))),
        (0, e2 * ((w(3, 1) * w(3, 2)).scale(Q(3, 128)) + w(1, 3).scale(Q(1, 64))
                  + (w(3) * w(3, 3)).scale(Q(3, 256)))),
        (5, e4 * w(3).scale(Q(7, 1152))), (4, e4 * w(3, 1).scale(Q(35, 2304))),
        (3, e4 * w(3, 2).scale(Q(91, 4608))), (2, e4 * w(3, 3).scale(Q(133, 9216))),
        (1, e4 * w(3, 4).scale(Q(47, 9216))), (0, e4 * w(3, 5).scale(Q(1, 1536))),
        (7, e6.scale(Q(17, 36864))),
    ])
    k12 = _op(R, [
        (1, (w(2) * w(3)).scale(Q(5, 16))),
        (0, (w(3) * w(2, 1)).scale(Q(1, 8)) + (w(2) * w(3, 1)).scale(Q(1, 8))),
        (3, e2 * w(2).scale(Q(7, 64))), (2, e2 * w(2, 1).scale(Q(7, 48))),
        (1, e2 * w(2, 2).scale(Q(17, 192))), (0, e2 * w(2, 3).scale(Q(1, 48))),
    ])
    k13 = _op(R, [(1, w(1)), (0, w(1, 1).scale(Q(1, 4))),
                  (3, e2 * w(3).scale(Q(7, 192))), (2, e2 * w(3, 1).scale(Q(7, 192))),
                  (5, e4.scale(Q(7, 768)))])
    k22 = _op(R, [
        (1, (w(3) ** 2).scale(Q(1, 8)) + w(1)),
        (0, w(1, 1).scale(Q(1, 2)) + (w(3) * w(3, 1)).scale(Q(1, 8))),
        (3, e2 * w(3).scale(Q(1, 8))), (2, e2 * w(3, 1).scale(Q(3, 16))),
        (1, e2 * w(3, 2).scale(Q(1, 12))), (0, e2 * w(3, 3).scale(Q(1, 96))),
        (5, e4.scale(Q(1, 64))),
    ])
    k23 = _op(R, [(1, w(2).scale(Q(3, 4))), (0, w(2, 1).scale(Q(1, 4)))])
    k33 = _op(R, [(1, w(3).scale(Q(1, 2))), (0, w(3, 1).scale(Q(1, 4))), (3, e2.scale(Q(5, 16)))])
    # the lower triangle is fixed by skew-symmetry
    k21 = -k12.adjoint()
    k31 = -k13.adjoint()
    k32 = -k23.adjoint()
    return MatDiffOp(R, [[k11, k12, k13], [k21, k22, k23], [k31, k32, k33]])
