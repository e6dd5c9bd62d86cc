import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkahler import matfun as mf
from gkahler.bundle import (
    GeneralizedConnection,
    GeneralizedHolomorphicStructure,
    HermitianBundle,
    b_transform_connection,
    canonical_connection,
    chern_form_top,
    curvature,
    curvature_spinor,
    degree_slope,
    einstein_residual,
    gauge_act,
    gauge_transform_metric,
    generalized_d,
    random_connection,
)
from gkahler.multivector import algebra
from gkahler.structures import PureSpinor, standard_symplectic
from gkahler.suite import b_covariance_error, b_einstein_invariance_error, trace_curvature_closedness
from gkahler.torus import Grid, gradient, integrate, random_bandlimited, spectral_partial

SP1 = PureSpinor(standard_symplectic(1))
seeds = st.integers(0, 2**32 - 1)


def line_connection(g, Ax=None, Ay=None):
    z = np.zeros((2,) + g.shape + (1, 1), dtype=complex)
    A = z.copy()
    if Ax is not None:
        A[0, ..., 0, 0] = Ax
    if Ay is not None:
        A[1, ..., 0, 0] = Ay
    return GeneralizedConnection(g, A, z.copy())


def test_shapes_validated():
    g = Grid(1, 8)
    with pytest.raises(ValueError):
        GeneralizedConnection(g, np.zeros((2, 8, 8, 1, 1)), np.zeros((1, 8, 8, 1, 1)))
    with pytest.raises(ValueError):
        HermitianBundle(g, 1, -np.ones(g.shape + (1, 1)))
    with pytest.raises(ValueError):
        GeneralizedHolomorphicStructure(g, np.zeros((2, 8, 8, 1, 1)), np.zeros((2, 8, 8, 1, 1)))


def test_mean_curvature_of_sine_connection():
    # F = i cos x dx^dy and pi(omega psi) = i/2, so K = -cos(x)/2
    g = Grid(1, 32)
    x, y = g.coords()
    K = curvature(line_connection(g, Ay=1j * np.sin(x)), SP1, HermitianBundle.trivial(g, 1)).K[..., 0, 0]
    np.testing.assert_allclose(K, -0.5 * np.cos(x), atol=1e-12)


def test_constant_V_is_flat():
    g = Grid(1, 16)
    z = np.zeros((2,) + g.shape + (1, 1), dtype=complex)
    V = z.copy()
    V[0] = 0.3j
    V[1] = -0.2j
    assert np.abs(curvature_spinor(GeneralizedConnection(g, z, V), SP1.dense)).max() < 1e-14


def test_line_bundle_curvature_is_laplacian_of_log_h():
    g = Grid(1, 32)
    x, y = g.coords()
    phi = 0.4 * np.cos(x) + 0.3 * np.sin(x + 2 * y)
    lap = -0.4 * np.cos(x) - 1.5 * np.sin(x + 2 * y)
    bun = HermitianBundle.from_log(g, phi[..., None, None])
    conn = canonical_connection(GeneralizedHolomorphicStructure.zero(g, 1), bun)
    K = curvature(conn, SP1, bun).K[..., 0, 0]
    np.testing.assert_allclose(K, -0.25 * lap, atol=1e-12)


def test_split_roundtrip(rng):
    g = Grid(1, 8)
    c = random_connection(g, 2, rng)
    back = GeneralizedConnection.from_split(g, *c.split())
    np.testing.assert_allclose(back.A, c.A, atol=1e-14)
    np.testing.assert_allclose(back.V, c.V, atol=1e-14)


@given(seeds)
@settings(max_examples=10)
def test_canonical_connection_metric_compatible(seed):
    rng = np.random.default_rng(seed)
    # products with h = e^L alias; N = 32 keeps that below 1e-9
    g = Grid(1, 32)
    L = mf.herm(random_bandlimited(g, rng, (2, 2), kmax=1, amplitude=0.3))
    bun = HermitianBundle.from_log(g, L)
    hs = GeneralizedHolomorphicStructure(g, random_bandlimited(g, rng, (2, 2), kmax=1, amplitude=0.5)[None],
                                         0.4 * np.broadcast_to(rng.normal(size=(2, 2)), g.shape + (2, 2))[None])
    conn = canonical_connection(hs, bun)
    # skew-Hermitian only in a unitary frame
    assert canonical_connection(hs, HermitianBundle.trivial(g, 2)).skew_defect(HermitianBundle.trivial(g, 2)) < 1e-14
    s1 = random_bandlimited(g, rng, (2,), kmax=1)
    s2 = random_bandlimited(g, rng, (2,), kmax=1)
    for k in range(2):
        D1 = spectral_partial(s1, k, g) + np.einsum("...ab,...b->...a", conn.A[k], s1)
        D2 = spectral_partial(s2, k, g) + np.einsum("...ab,...b->...a", conn.A[k], s2)
        lhs = spectral_partial(bun.inner(s1, s2), k, g)
        assert np.abs(lhs - bun.inner(D1, s2) - bun.inner(s1, D2)).max() < 1e-9


def test_gauge_transform_metric_matches_direct(rng):
    g = Grid(1, 16)
    hs = GeneralizedHolomorphicStructure(g, random_bandlimited(g, rng, (2, 2), kmax=1, amplitude=0.5)[None],
                                         np.zeros((1,) + g.shape + (2, 2), dtype=complex))
    X = mf.herm(random_bandlimited(g, rng, (2, 2), kmax=1, amplitude=0.2))
    c0 = canonical_connection(hs, HermitianBundle.trivial(g, 2))
    cf = gauge_transform_metric(c0, mf.hexp(X), L=X)
    cs = canonical_connection(hs, HermitianBundle.from_log(g, X))
    assert np.abs(cf.A - cs.A).max() < 1e-12
    assert np.abs(cf.V - cs.V).max() < 1e-12


def test_b_field_covariance_rank_one(rng):
    g = Grid(1, 32)
    b = np.array([[0, 0.8], [-0.8, 0]])
    assert b_covariance_error(random_connection(g, 1, rng, kmax=2, amplitude=0.5), b, standard_symplectic(1)) < 1e-9


def test_b_field_defect_rank_two_is_commutator(rng):
    # F_{Ad A}(e^b psi) - e^b F_A(psi) = -1/2 sum b_ij [V^i, V^j] psi (zero for commuting V)
    g = Grid(1, 16)
    conn = random_connection(g, 2, rng, kmax=1, amplitude=0.5)
    b = np.array([[0, 0.6], [-0.6, 0]])
    alg = algebra(1)
    Eb = np.eye(4) + alg.two_form_matrix(b)
    lhs = curvature_spinor(b_transform_connection(conn, b), PureSpinor(standard_symplectic(1), b).dense)
    rhs = curvature_spinor(conn, SP1.dense) @ Eb.T
    comm = sum(0.5 * b[i, j] * (conn.V[i] @ conn.V[j] - conn.V[j] @ conn.V[i]) for i in range(2) for j in range(2))
    defect = lhs - rhs + comm[..., None] * SP1.dense @ Eb.T
    assert np.abs(defect).max() < 1e-12
    assert np.abs(comm).max() > 1e-2
    assert b_einstein_invariance_error(conn, b, standard_symplectic(1), HermitianBundle.trivial(g, 2)) < 1e-12


def test_tensoriality_defect_sign(rng):
    # (d^A)^2 (f s psi) - f (d^A)^2 (s psi) = + df(V) s psi
    g = Grid(1, 32)
    conn = random_connection(g, 2, rng, kmax=1, amplitude=0.5)
    Om = random_bandlimited(g, rng, (2,), kmax=1)[..., None] * SP1.dense
    f = random_bandlimited(g, rng, (), kmax=1, real=True)

    def dd(X):
        return generalized_d(conn, generalized_d(conn, X))

    lhs = dd(f[..., None, None] * Om) - f[..., None, None] * dd(Om)
    df = gradient(f, g)
    dfV = sum(df[k][..., None, None] * conn.V[k] for k in range(2))
    assert np.abs(lhs - np.einsum("...ab,...bd->...ad", dfV, Om)).max() < 1e-10


@pytest.mark.parametrize("n,N", [(1, 16), (2, 8)])
def test_trace_curvature_closed(n, N, rng):
    g = Grid(n, N)
    sp = PureSpinor(standard_symplectic(n))
    assert trace_curvature_closedness(random_connection(g, 2, rng, kmax=1), sp) < 1e-9


def test_degree_values(rng):
    g = Grid(1, 16)
    assert degree_slope(GeneralizedConnection.zero(g, 3), SP1, HermitianBundle.trivial(g, 3)) == (0.0, 0.0, 0.0)
    # constant curvature F = i c dx^dy on a line bundle is not periodic, so use an exact form: degree 0
    conn = random_connection(g, 2, rng, kmax=2)
    deg = degree_slope(conn, SP1, HermitianBundle.trivial(g, 2))[0]
    assert abs(deg) < 1e-12
    dens = chern_form_top(conn, SP1)
    assert abs(integrate(dens, g)) < 1e-12


def test_gauge_act_preserves_curvature_conjugacy(rng):
    # G = exp(X) is not band-limited; N = 32 resolves it to ~1e-12
    g = Grid(1, 32)
    conn = random_connection(g, 2, rng, kmax=1)
    G = mf.hexp(mf.herm(random_bandlimited(g, rng, (2, 2), kmax=1, amplitude=0.2)))
    F0 = curvature_spinor(conn, SP1.dense)
    F1 = curvature_spinor(gauge_act(conn, G), SP1.dense)
    expect = np.einsum("...ab,...bcd,...ce->...aed", G, F0, np.linalg.inv(G))
    assert np.abs(F1 - expect).max() < 1e-9


def test_einstein_residual_flat():
    g = Grid(1, 8)
    R, sup, l2 = einstein_residual(GeneralizedConnection.zero(g, 2), SP1, HermitianBundle.trivial(g, 2), 0.0)
    assert sup == 0.0 and l2 == 0.0
