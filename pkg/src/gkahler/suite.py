"""Seeded identity suite: one row per structural identity.

Each check builds random data from a seed, evaluates both sides with the
library operations and reports (name, residual, tolerance, passed). The
default tolerances reflect the error model: exact algebra is checked near
machine precision, spectral field identities near 1e-9 (aliasing of
band-limited products), and first-order finite differences by their slope.
"""

from dataclasses import dataclass

import numpy as np

from . import matfun as mf
from . import oracle
from .bundle import (
    GeneralizedConnection,
    GeneralizedHolomorphicStructure,
    HermitianBundle,
    b_transform_connection,
    canonical_connection,
    curvature_spinor,
    degree_slope,
    einstein_residual,
    random_connection,
)
from .multivector import GeneralizedVector, Multivector, algebra, clifford_act, interior, spin_pair, wedge
from .solver import WorkProblem, herm_f, kftpsiint_sides, laplacian_dbar_form
from .stability import (
    adjointness_residual,
    alg_d,
    block_product_trace,
    energy_from_dbar,
    holomorphic_sections,
    positivity_traces,
    second_fundamental_form,
    slope_inequality,
    subcurvature_identity,
    vanishing_identity_suite,
)
from .structures import (
    PureSpinor,
    frame_identity_residuals,
    gcs_from_pure_spinor,
    project_Uminus_n,
    random_kaehler_data,
    skew_projection_residual,
    skew_top_residual,
    standard_symplectic,
)
from .torus import Grid, gradient, random_bandlimited


@dataclass
class Row:
    name: str
    residual: float
    tol: float

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual < self.tol)


def _rand_mv(n, rng):
    D = 1 << (2 * n)
    vec = rng.normal(size=D) + 1j * rng.normal(size=D)
    return Multivector.from_dense(n, vec)


def clifford_oracle_error(n, rng, samples=100):
    """Max relative error of the sparse algebra against the dense oracle."""
    err = 0.0
    m = 2 * n

    def rel(a, b):
        return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))

    for _ in range(samples):
        a, b = _rand_mv(n, rng), _rand_mv(n, rng)
        v = rng.normal(size=m) + 1j * rng.normal(size=m)
        xi = rng.normal(size=m) + 1j * rng.normal(size=m)
        A, B = a.to_dense(), b.to_dense()
        err = max(err,
                  rel(wedge(a, b).to_dense(), oracle.wedge(n, A, B)),
                  rel(interior(v, a).to_dense(), oracle.interior(n, v, A)),
                  rel(clifford_act(GeneralizedVector(v, xi), a).to_dense(), oracle.clifford_act(n, v, xi, A)),
                  rel(np.array([spin_pair(a, b)]), np.array([oracle.spin_pair(n, A, B)])))
    return err


def clifford_square_error(n, rng, samples=20):
    """max |e.(e.a) - <e, e> a| over random complex e and a."""
    err = 0.0
    m = 2 * n
    for _ in range(samples):
        e = GeneralizedVector(rng.normal(size=m) + 1j * rng.normal(size=m), rng.normal(size=m) + 1j * rng.normal(size=m))
        a = _rand_mv(n, rng)
        d = clifford_act(e, clifford_act(e, a)) - a * e.pair(e)
        err = max(err, d.norm() / max(1.0, a.norm()))
    return err


def kernel_eigenspace_error(sp):
    """Distance between ker psi and the -i eigenspace of J_psi (orthogonal projectors)."""
    K = sp.kernel()
    E = gcs_from_pure_spinor(sp).eigenspace(-1j)
    PK = K @ np.linalg.pinv(K)
    PE = E @ np.linalg.pinv(E)
    return float(np.abs(PK - PE).max())


def _b_field(rng, m, scale=0.5):
    b = scale * rng.normal(size=(m, m))
    return b - b.T


def b_covariance_error(conn, b, omega):
    """sup |F_{Ad_{e^b}(A,V)}(e^b psi) - e^b F_{A,V}(psi)|."""
    n = conn.grid.n
    alg = algebra(n)
    sp0 = PureSpinor(omega)
    spb = PureSpinor(omega, b)
    # e^b as an operator: exponential of the nilpotent wedge matrix
    Bm = alg.two_form_matrix(b)
    Eb = np.eye(alg.dim, dtype=complex)
    term = np.eye(alg.dim, dtype=complex)
    for k in range(1, n + 1):
        term = term @ Bm / k
        Eb = Eb + term
    lhs = curvature_spinor(b_transform_connection(conn, b), spb.dense)
    rhs = curvature_spinor(conn, sp0.dense) @ Eb.T
    return float(np.abs(lhs - rhs).max())


def b_einstein_invariance_error(conn, b, omega, bundle):
    """sup |K_{Ad_{e^b}(A,V)}(e^b psi) - K_{A,V}(psi)|."""
    sp0, spb = PureSpinor(omega), PureSpinor(omega, b)
    R0 = einstein_residual(conn, sp0, bundle, 0.0)[0]
    Rb = einstein_residual(b_transform_connection(conn, b), spb, bundle, 0.0)[0]
    return float(np.abs(R0 - Rb).max())


def trace_curvature_closedness(conn, sp):
    """sup |d tr F(psi)|."""
    trF = np.trace(curvature_spinor(conn, sp.dense), axis1=-3, axis2=-2)
    return float(np.abs(alg_d(trF, conn.grid)).max())


def degree_drifts(hs, bundle, sp, rng):
    """(drift under h -> h f, drift under an exact perturbation of A, trivial-bundle degree)."""
    g = hs.grid
    r = hs.r
    deg0 = degree_slope(canonical_connection(hs, bundle), sp, bundle)[0]
    X = mf.herm(random_bandlimited(g, rng, (r, r), kmax=2, amplitude=0.3))
    bf = HermitianBundle.from_log(g, bundle.log_h + X if bundle.log_h is not None else X)
    deg1 = degree_slope(canonical_connection(hs, bf), sp, bf)[0]
    conn = canonical_connection(hs, bundle)
    u = random_bandlimited(g, rng, (), kmax=2, amplitude=0.5, real=True)
    du = gradient(u, g)
    A = conn.A + np.stack([1j * du[k][..., None, None] * np.eye(r) for k in range(g.dim)])
    deg2 = degree_slope(GeneralizedConnection(g, A, conn.V), sp, bundle)[0]
    flat = GeneralizedConnection.zero(g, r)
    deg_triv = degree_slope(flat, sp, HermitianBundle.trivial(g, r))[0]
    return abs(deg1 - deg0), abs(deg2 - deg0), abs(deg_triv)


def variation_slope(hs, sp, rng, ts=(1e-2, 1e-3, 1e-4)):
    """Errors of the finite-difference quotient of K against Delta_f xi, and the fitted log-log slope."""
    g, r = hs.grid, hs.r
    wp = WorkProblem(hs, sp, 0.0)
    L = mf.herm(random_bandlimited(g, rng, (r, r), kmax=1, amplitude=0.3))
    X = mf.herm(random_bandlimited(g, rng, (r, r), kmax=1, amplitude=1.0))
    s, sinv = mf.hexp(0.5 * L), mf.hexp(-0.5 * L)
    xi = sinv @ X @ s
    K = wp.evaluate(L, 0.0)[2]
    target = laplacian_dbar_form(wp, L, xi)
    errs = []
    for t in ts:
        Kt = wp.evaluate(mf.hlog(s @ mf.hexp(t * X) @ s), 0.0)[2]
        errs.append(float(np.abs(herm_f((Kt - K) / t, L) - target).max()))
    slope = float(np.polyfit(np.log(ts), np.log(errs), 1)[0])
    return errs, slope


def integral_identity_gap(hs, sp, rng):
    """|lhs - rhs| of int h0(K_f - K_0, T) = int h0(dbar^E(f^{-1} d_0 f) psi, T conj psi) with T = log f."""
    g, r = hs.grid, hs.r
    wp = WorkProblem(hs, sp, 0.0)
    L = mf.herm(random_bandlimited(g, rng, (r, r), kmax=1, amplitude=0.3))
    lhs, rhs = kftpsiint_sides(wp, L, L)
    return abs(lhs - rhs)


def upper_triangular_family(grid, rng, amplitude=0.5):
    """A01 = [[0, b], [0, 0]] dzbar on the trivial rank-2 bundle, with the projector onto e_1."""
    b = random_bandlimited(grid, rng, (), kmax=2, amplitude=amplitude)
    A01 = np.zeros((grid.n,) + grid.shape + (2, 2), dtype=complex)
    A01[0, ..., 0, 1] = b
    hs = GeneralizedHolomorphicStructure(grid, A01, np.zeros_like(A01))
    P = np.zeros(grid.shape + (2, 2), dtype=complex)
    P[..., 0, 0] = 1.0
    return hs, P


def _theta(a, w, tau, nmax=12):
    k = np.arange(-nmax, nmax + 1).reshape((-1,) + (1,) * np.ndim(w))
    return np.sum(np.exp(1j * np.pi * (k + a) ** 2 * tau + 2j * np.pi * (k + a) * w), axis=0)


def theta_subbundle(grid):
    """Projector onto the line spanned by two level-2 theta functions in the flat trivial rank-2 bundle.

    The trivial bundle with its flat metric is Einstein-Hermitian (lambda = 0);
    the holomorphic line subbundle it spans has degree -2.
    """
    if grid.n != 1:
        raise ValueError("theta subbundle is defined on T^2")
    x, y = grid.coords()
    w = (x + 1j * y) / (2 * np.pi)
    v = np.stack([_theta(0.0, 2 * w, 2j), _theta(0.5, 2 * w, 2j)], -1)
    return v[..., :, None] * np.conj(v[..., None, :]) / np.sum(np.abs(v) ** 2, -1)[..., None, None]


def run_suite(seed=0, n=1, N=None, tol=None):
    """Run every identity check; returns a list of Row."""
    rng = np.random.default_rng(seed)
    N = N or (32 if n == 1 else 8)
    grid = Grid(n, N)
    m = 2 * n
    omega = standard_symplectic(n)
    sp = PureSpinor(omega)
    rows = []

    def add(name, res, t):
        rows.append(Row(name, float(res), t if tol is None else tol))

    add("sparse Clifford algebra matches dense oracle", clifford_oracle_error(n, rng, 30), 1e-12)
    add("e.e acts as the pairing <e,e>", clifford_square_error(n, rng), 1e-12)

    data = [random_kaehler_data(n, rng) for _ in range(5)]
    add("ker psi is the -i eigenspace of J_psi", max(kernel_eigenspace_error(p.sp) for p in data), 1e-10)
    fr = [frame_identity_residuals(p) for p in data]
    add("minus frame: <conj e_i e_j psi, conj psi> = -2 delta <psi, conj psi>", max(a for a, _ in fr), 1e-10)
    add("plus frame: <e_i conj e_j psi, conj psi> = +2 delta <psi, conj psi>", max(b for _, b in fr), 1e-10)
    add("pi(omega ^ psi) = i n/2 psi for psi = exp(-i omega)",
        abs(project_Uminus_n(wedge(Multivector.two_form(omega), sp.psi), sp) - 0.5j * n), 1e-12)
    tv = [(rng.normal(size=m), rng.normal(size=m)) for _ in range(5)]
    # the theta.v identity concerns psi = exp(-i omega), i.e. b = 0
    plain = [PureSpinor(p.sp.omega) for p in data]
    add("4 pi(theta.v.psi) = 2 theta(v)", max(skew_top_residual(q, t, v) for q in plain for t, v in tv), 1e-10)
    Ps = []
    for _ in range(3):
        Z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        Ps.append(Z - Z.conj().T)
    add("Hermitian part of pi(P theta.v psi) vanishes for skew P",
        max(skew_projection_residual(P, q, t, v) for P in Ps for q in plain[:2] for t, v in tv), 1e-10)

    b = _b_field(rng, m)
    conn1 = random_connection(grid, 1, rng, kmax=2, amplitude=0.5)
    add("b-field covariance of F(psi), rank 1", b_covariance_error(conn1, b, omega), 1e-9)
    conn2 = random_connection(grid, 2, rng, kmax=2, amplitude=0.5)
    add("b-field invariance of the Einstein residual, rank 2",
        b_einstein_invariance_error(conn2, b, omega, HermitianBundle.trivial(grid, 2)), 1e-9)
    add("d tr F(psi) = 0", trace_curvature_closedness(conn2, sp), 1e-9)

    L = mf.herm(random_bandlimited(grid, rng, (2, 2), kmax=2, amplitude=0.3))
    hs, P = upper_triangular_family(grid, rng)
    d_metric, d_exact, d_triv = degree_drifts(hs, HermitianBundle.from_log(grid, L), sp, rng)
    add("degree invariant under h -> h f", d_metric, 1e-7)
    add("degree invariant under exact perturbation of A", d_exact, 1e-7)
    add("trivial bundle has degree 0", d_triv, 1e-12)

    if n == 1:
        hs0 = GeneralizedHolomorphicStructure(grid, random_bandlimited(grid, rng, (2, 2), kmax=1, amplitude=0.4)[None],
                                              np.zeros((1,) + grid.shape + (2, 2), dtype=complex))
        errs, slope = variation_slope(hs0, sp, rng)
        add("dK/dt = Delta_f xi, first-order slope (|slope - 1|)", abs(slope - 1.0), 0.1)
        add("integral identity for K_f - K_0", integral_identity_gap(hs0, sp, rng), 1e-6)

        bundle = HermitianBundle.trivial(grid, 2)
        conn = canonical_connection(hs, bundle)
        sub = subcurvature_identity(P, conn, sp, bundle)
        add("tr(pi K pi) = tr K^S + |H^S|^2", sub.sup, 1e-7)
        sff = second_fundamental_form(P, conn, sp, bundle, hs=hs)
        add("H^S and H^S-perp are adjoint", adjointness_residual(sff, bundle), 1e-10)
        t1, t2 = positivity_traces(sff, sp, bundle)
        add("tr(H^perp.H^S psi) = |H^S|^2 and tr(H^S.H^perp psi) = -|H^S|^2",
            max(np.abs(t1 - sub.norm_sq).max(), np.abs(t2 + sub.norm_sq).max()), 1e-10)
        add("2 tr(A_sq A_qs + V_sq V_qs) = 2 |H^S|^2", np.abs(block_product_trace(P, conn, sp, bundle) - 2 * sub.norm_sq).max(), 1e-10)
        rep = slope_inequality(P, conn, sp, bundle)
        add("second fundamental form energy from dbar", abs(energy_from_dbar(P, hs, sp, bundle) - rep.energy), 1e-10)
        add("mu_S = mu_E - energy/p (up to the Einstein defect)", abs(rep.identity_residual), 1e-10)
        Pt = theta_subbundle(grid)
        rep_t = slope_inequality(Pt, canonical_connection(GeneralizedHolomorphicStructure.zero(grid, 2), bundle), sp, bundle)
        add("Einstein-Hermitian bundle: mu_S <= mu_E (excess)", max(0.0, rep_t.mu_S - rep_t.mu_E), 1e-12)

    conn_v = random_connection(grid, 2, rng, kmax=1 if n > 1 else 2)
    s = random_bandlimited(grid, rng, (2,), kmax=1 if n > 1 else 2)
    vr = vanishing_identity_suite(conn_v, sp, HermitianBundle.trivial(grid, 2), s)
    add("(d'' d' + d' d'')(s psi) = 2 (F_A + omega(V) omega(V)) s psi", vr.anticommutator, 1e-9)
    add("Leibniz rule for h<.,.> with D', D''", max(vr.leibniz, vr.leibniz_swapped), 1e-9)
    if n == 1:
        gs = Grid(1, 12)
        basis, _ = holomorphic_sections(GeneralizedHolomorphicStructure.zero(gs, 2))
        flat = GeneralizedConnection.zero(gs, 2)
        en = max([0.0] + [max(abs(r.energy_Dprime), abs(r.energy_Ddprime)) for r in
                          (vanishing_identity_suite(flat, sp, HermitianBundle.trivial(gs, 2), b) for b in basis)])
        add("flat bundle: holomorphic sections are parallel (energy)", en, 1e-10)
        add("flat bundle: section count equals rank", abs(len(basis) - 2), 0.5)
    return rows


def format_rows(rows):
    width = max(len(r.name) for r in rows)
    lines = [f"{'identity':<{width}}  {'residual':>10}  {'tol':>8}  result"]
    for r in rows:
        lines.append(f"{r.name:<{width}}  {r.residual:10.3e}  {r.tol:8.1e}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)
