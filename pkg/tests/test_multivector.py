import numpy as np
import pytest
from hypothesis import given, strategies as st

from gkahler import oracle
from gkahler.multivector import (
    EndValuedMultivector,
    GeneralizedVector,
    Multivector,
    algebra,
    clifford_act,
    clifford_involution,
    interior,
    spin_pair,
    wedge,
    wedge_sign,
)

cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def mv(n):
    D = 1 << (2 * n)
    return st.lists(cplx, min_size=D, max_size=D).map(lambda c: Multivector.from_dense(n, np.array(c)))


def vec(n):
    return st.lists(cplx, min_size=2 * n, max_size=2 * n).map(np.array)


def close(a, b, tol=1e-12):
    return (a - b).norm() <= tol * max(1.0, a.norm(), b.norm())


def test_basic_signs():
    e1, e2 = Multivector.basis(1, [0]), Multivector.basis(1, [1])
    assert wedge(e2, e1).terms == {3: -1}
    assert wedge(e1, e1).terms == {}
    assert wedge_sign(0b10, 0b01) == -1
    # interior of theta^2 into theta^1 theta^2 gives -theta^1
    assert interior([0, 1], Multivector.basis(1, [0, 1])).terms == {1: -1}


def test_spin_pair_frozen():
    # values from the dense oracle: sigma is -1 in degree 2
    one, top = Multivector.scalar(1), Multivector.basis(1, [0, 1])
    assert spin_pair(one, top) == -1
    assert spin_pair(top, one) == 1
    assert spin_pair(one, top) == oracle.spin_pair(1, one.to_dense(), top.to_dense())


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        wedge(Multivector.scalar(1), Multivector.scalar(2))
    with pytest.raises(ValueError):
        Multivector(1, {16: 1.0})
    with pytest.raises(ValueError):
        Multivector(0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_oracle_agreement_random(n, rng):
    D = 1 << (2 * n)
    for _ in range(100 if n < 3 else 30):
        A = rng.normal(size=D) + 1j * rng.normal(size=D)
        B = rng.normal(size=D) + 1j * rng.normal(size=D)
        v = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
        xi = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
        a, b = Multivector.from_dense(n, A), Multivector.from_dense(n, B)
        np.testing.assert_allclose(wedge(a, b).to_dense(), oracle.wedge(n, A, B), atol=1e-11)
        np.testing.assert_allclose(interior(v, a).to_dense(), oracle.interior(n, v, A), atol=1e-11)
        np.testing.assert_allclose(clifford_act(GeneralizedVector(v, xi), a).to_dense(),
                                   oracle.clifford_act(n, v, xi, A), atol=1e-11)
        np.testing.assert_allclose(clifford_involution(a).to_dense(), oracle.involution(n, A))
        assert abs(spin_pair(a, b) - oracle.spin_pair(n, A, B)) < 1e-10


@given(mv(1), mv(1), mv(1))
def test_wedge_associative(a, b, c):
    assert close(wedge(wedge(a, b), c), wedge(a, wedge(b, c)), 1e-10)


@given(vec(2), vec(2), mv(2))
def test_clifford_relation(v, xi, a):
    e = GeneralizedVector(v, xi)
    assert close(clifford_act(e, clifford_act(e, a)), a * e.pair(e), 1e-10)


@given(vec(1), mv(1), mv(1))
def test_interior_is_antiderivation(v, a, b):
    theta = a.grade(1)
    lhs = interior(v, wedge(theta, b))
    rhs = wedge(interior(v, theta), b) - wedge(theta, interior(v, b))
    assert close(lhs, rhs, 1e-10)


@given(mv(2), mv(2))
def test_spin_pair_symmetry(a, b):
    # on even forms in real dimension 4 the pairing is symmetric
    ae = sum((a.grade(k) for k in (0, 2, 4)), Multivector(2))
    be = sum((b.grade(k) for k in (0, 2, 4)), Multivector(2))
    assert abs(spin_pair(ae, be) - spin_pair(be, ae)) <= 1e-9 * max(1.0, ae.norm() * be.norm())


def test_dense_tables_match_sparse(rng):
    alg = algebra(2)
    A = rng.normal(size=16)
    a = Multivector.from_dense(2, A)
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1
        np.testing.assert_allclose(alg.eps[k] @ A, wedge(Multivector.one_form(e), a).to_dense())
        np.testing.assert_allclose(alg.iota[k] @ A, interior(e, a).to_dense())
    B = rng.normal(size=16)
    assert abs(alg.pair(A, B) - spin_pair(a, Multivector.from_dense(2, B))) < 1e-12
    T = alg.wedge_tensor
    np.testing.assert_allclose(np.einsum("a,b,abk->k", A, B, T), wedge(a, Multivector.from_dense(2, B)).to_dense(),
                               atol=1e-12)


def test_end_valued_roundtrip(rng):
    arr = rng.normal(size=(2, 2, 4)) + 0j
    E = EndValuedMultivector.from_dense(1, arr)
    np.testing.assert_allclose(E.to_dense(), arr)
    with pytest.raises(ValueError):
        EndValuedMultivector([[Multivector.scalar(1)], [Multivector.scalar(1)]])
