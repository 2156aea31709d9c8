"""Small builders shared by the tests."""
from gmpy2 import mpq

from drham.operators import MatDiffOp, ScalarDiffOp


def op(ring, coeffs):
    return ScalarDiffOp(ring, {s: c for s, c in coeffs.items()})


def mat(ring, rows):
    return MatDiffOp(ring, [[op(ring, e) if isinstance(e, dict) else e for e in row] for row in rows])


def q(a, b=1):
    return mpq(a, b)
