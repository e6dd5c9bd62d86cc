"""Continuity method for the Einstein-Hermitian equation on the torus.

The unknown is a positive endomorphism f relative to a reference metric h0,
solving L_eps(f) = K_f - lambda id + eps log f = 0 for a decreasing sequence
of eps. All iterations run in the frame where h0 is the identity, so f is a
Hermitian matrix field and is stored through its logarithm L = log f.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import matfun as mf
from .bundle import (
    GeneralizedConnection,
    GeneralizedHolomorphicStructure,
    HermitianBundle,
    canonical_connection,
    curvature_spinor,
    degree_slope,
    dz,
    dzbar,
    project_field,
)
from .multivector import algebra
from .torus import drop_nyquist, integrate, spectral_partial


class SolverError(RuntimeError):
    pass


# iterates with an eigenvalue of f below 1e-10 are treated as a loss of positivity
LOG_POSITIVITY_FLOOR = float(np.log(1e-10))


@dataclass
class Problem:
    """Generalized holomorphic bundle data for the continuity method.

    ``k_offset`` is an optional constant matrix added to the U^{-n}
    coefficient of F(psi) before the Hermitian projection. It is an
    artificial device for engineering block-constant mean curvature and is
    zero for geometric problems.
    """

    hs: GeneralizedHolomorphicStructure
    bundle: HermitianBundle
    sp: object
    lam: float = None
    k_offset: np.ndarray = None

    def __post_init__(self):
        if self.lam is None:
            conn = canonical_connection(self.hs, self.bundle)
            self.lam = degree_slope(conn, self.sp, self.bundle)[2]

    @property
    def grid(self):
        return self.hs.grid

    @property
    def r(self):
        return self.hs.r


def mean_curvature_of(hs, bundle, sp, k_offset=None):
    """(U, K) for the canonical connection of (hs, h)."""
    conn = canonical_connection(hs, bundle)
    U = project_field(curvature_spinor(conn, sp.dense), sp)
    if k_offset is not None:
        U = U + k_offset
    return U, bundle.herm_part(U), conn


def scalar_laplacian_symbol(sp, grid):
    """Fourier symbol of the operator u -> K_{e^u h} - K_h (a multiple of id).

    K shifts by Re pi(d(du)^{1,0} psi) = sum c_ab d_a d_b u; the symbol is
    -sum c_ab k_a k_b (nonnegative, 1/4 |k|^2 on T^2 with the standard form).
    """
    alg = algebra(sp.n)
    m = grid.dim
    # du^{1,0} = sum_b d_b u w_b with w_{2j} = dz_j/2, w_{2j+1} = -i dz_j/2
    w = np.zeros((m, m), dtype=complex)
    for j in range(sp.n):
        w[2 * j, 2 * j] = 0.5
        w[2 * j, 2 * j + 1] = 0.5j
        w[2 * j + 1, 2 * j] = -0.5j
        w[2 * j + 1, 2 * j + 1] = 0.5
    c = np.zeros((m, m))
    for a in range(m):
        for b in range(m):
            form = sum(w[b, q] * (alg.eps[a] @ (alg.eps[q] @ sp.dense)) for q in range(m))
            c[a, b] = (alg.pair(form, sp.conj_dense) / sp.norm_pair).real
    ks = np.meshgrid(*[grid.wavenumbers(k) for k in range(m)], indexing="ij")
    return -sum(c[a, b] * ks[a] * ks[b] for a in range(m) for b in range(m))


def solve_scalar(rhs, symbol, shift=0.0):
    """Solve (Delta + shift) u = rhs spectrally; the zero mode is set to 0 when shift = 0."""
    ax = tuple(range(symbol.ndim))
    R = np.fft.fftn(rhs, axes=ax)
    den = symbol + shift
    out = np.zeros_like(R)
    ok = np.abs(den) > 1e-12
    out[ok] = R[ok] / den[ok]
    return np.fft.ifftn(out, axes=ax)


def normalize_start_metric(problem):
    """Return (h0, f1, u) with tr K_hat(h0) = 0 and L_1(f1) = 0.

    First h1 = e^u h solves the scalar equation r Delta u = -tr K_hat.
    Then h0 = h1 e^{K_hat(h1)} and f1 = e^{-K_hat(h1)}, so h0 f1 = h1.
    """
    g, r, sp = problem.grid, problem.r, problem.sp
    b = problem.bundle
    L = b.log_h if b.log_h is not None else mf.hlog(b.h)
    U, K, _ = mean_curvature_of(problem.hs, HermitianBundle.from_log(g, L), sp, problem.k_offset)
    trK = np.trace(K, axis1=-2, axis2=-1).real - r * problem.lam
    symbol = scalar_laplacian_symbol(sp, g)
    u = -solve_scalar(trK, symbol).real / r
    L1 = L + u[..., None, None] * np.eye(r)
    b1 = HermitianBundle.from_log(g, L1)
    _, K1, _ = mean_curvature_of(problem.hs, b1, sp, problem.k_offset)
    Khat = K1 - problem.lam * np.eye(r)
    # K_hat is h1-Hermitian: h1 e^{K_hat} = h1^{1/2} e^{h1^{1/2} K_hat h1^{-1/2}} h1^{1/2}
    s = mf.hexp(0.5 * L1)
    sinv = mf.hexp(-0.5 * L1)
    Kt = mf.herm(s @ Khat @ sinv)
    H0 = s @ mf.hexp(Kt) @ s
    L0 = mf.hlog(H0)
    f1 = sinv @ mf.hexp(-Kt) @ s
    return HermitianBundle.from_log(g, L0), f1, u


def to_identity_frame(hs, bundle):
    """Complex gauge g = h^{1/2} moving h to the identity; returns (hs', g)."""
    gr = hs.grid
    L = bundle.log_h if bundle.log_h is not None else mf.hlog(bundle.h)
    g = mf.hexp(0.5 * L)
    ginv = mf.hexp(-0.5 * L)
    A01 = []
    Phi = []
    for k in range(gr.n):
        # (dbar g) g^{-1} = g (g^{-1} dbar g) g^{-1}
        dg = g @ mf.dexp_left(0.5 * L, dzbar(0.5 * L, gr, k)) @ ginv
        A01.append(g @ hs.A01[k] @ ginv - dg)
        Phi.append(g @ hs.Phi[k] @ ginv)
    return GeneralizedHolomorphicStructure(gr, np.stack(A01), np.stack(Phi)), g


@dataclass
class SolverState:
    """Point on the continuity path in the h0 = id frame (f = exp(L))."""

    epsilon: float
    L: np.ndarray
    lam: float
    history: list = field(default_factory=list)
    converged: bool = True
    iterations: int = 0

    @property
    def f(self):
        return mf.hexp(self.L)

    def m(self):
        return float(np.abs(np.linalg.eigvalsh(self.L)).max())

    def det_drift(self):
        return float(np.abs(np.trace(self.L, axis1=-2, axis2=-1)).max())


class WorkProblem:
    """Problem data in the frame where the reference metric is the identity."""

    def __init__(self, hs, sp, lam, k_offset=None):
        self.hs = hs
        self.sp = sp
        self.lam = lam
        self.k_offset = k_offset
        self.grid = hs.grid
        self.r = hs.r
        self.symbol = scalar_laplacian_symbol(sp, self.grid)

    def evaluate(self, L, eps):
        """(conn, U, K, S) with S = K - lambda + eps L."""
        b = HermitianBundle.from_log(self.grid, L)
        U, K, conn = mean_curvature_of(self.hs, b, self.sp, self.k_offset)
        S = K - self.lam * np.eye(self.r) + eps * L
        return conn, U, K, S

    def hermitian_residual(self, L, eps):
        """Dealiased f^{1/2} S f^{-1/2}: the equation the solver drives to zero.

        The conjugate of S by f^{1/2} is Hermitian and its pointwise norm is
        the h_f-norm of S. Modes at the Nyquist index are dropped; they only
        carry aliasing from the nonlinear terms and are invisible to the
        spectral Laplacian.
        """
        S = self.evaluate(L, eps)[3]
        G = mf.herm(mf.hexp(0.5 * L) @ S @ mf.hexp(-0.5 * L))
        return drop_nyquist(G, self.grid)

    def residual(self, L, eps):
        G = self.hermitian_residual(L, eps)
        return G, float(mf.frob(G).max())


def herm_f(X, L):
    """pi^{Herm_f}(X) = (X + f^{-1} X^dagger f) / 2 for f = e^L."""
    return 0.5 * (X + mf.conj_exp(L, mf.dagger(X)))


def connection_variation(conn, L, xi):
    """D^{1,0}_f xi: the derivative of the canonical connection along f e^{t xi}."""
    g = conn.grid
    a, alpha, Phi, V01 = conn.split()
    adot = np.stack([dz(xi, g, k) + a[k] @ xi - xi @ a[k] for k in range(g.n)])
    vdot = np.stack([V01[k] @ xi - xi @ V01[k] for k in range(g.n)])
    z = np.zeros_like(adot)
    return GeneralizedConnection.from_split(g, adot, z, z, vdot)


def _add(c1, c2, s=1.0):
    return GeneralizedConnection(c1.grid, c1.A + s * c2.A, c1.V + s * c2.V)


def curvature_derivative(conn, cdot, sp):
    """Exact directional derivative of F(psi) (F is quadratic in A and V)."""
    Fp = curvature_spinor(_add(conn, cdot, 1.0), sp.dense)
    Fm = curvature_spinor(_add(conn, cdot, -1.0), sp.dense)
    return 0.5 * (Fp - Fm)


def laplacian(wp, L, xi, conn=None, U=None, K=None):
    """pi^{Herm_f} dK/dt along f_t = f e^{t xi} (xi f-Hermitian)."""
    if conn is None:
        conn, U, K, _ = wp.evaluate(L, 0.0)
    cdot = connection_variation(conn, L, xi)
    Udot = project_field(curvature_derivative(conn, cdot, wp.sp), wp.sp)
    skew = U - K
    return herm_f(Udot, L) - 0.5 * (skew @ xi - xi @ skew)


def dbar_E_spinor(hs, X):
    """Generalized dbar^E on End-valued spinor fields: dbar + [A01, .] + [Phi, .] contraction."""
    g = hs.grid
    alg = algebra(g.n)
    out = np.zeros(X.shape, dtype=complex)
    for k in range(g.n):
        dzb = alg.eps[2 * k] - 1j * alg.eps[2 * k + 1]
        Y = dzbar(X, g, k) + np.einsum("...ab,...bcd->...acd", hs.A01[k], X) \
            - np.einsum("...abd,...bc->...acd", X, hs.A01[k])
        out += Y @ dzb.T
        C = np.einsum("...ab,...bcd->...acd", hs.Phi[k], X) - np.einsum("...abd,...bc->...acd", X, hs.Phi[k])
        iz = 0.5 * (alg.iota[2 * k] - 1j * alg.iota[2 * k + 1])  # contraction with d/dz_k
        out += C @ iz.T
    return out


def laplacian_dbar_form(wp, L, xi, conn=None):
    """pi^{Herm_f} pi_{U^{-n}}(dbar^E (D^{1,0}_f xi . psi)), the closed form of dK/dt."""
    if conn is None:
        conn = wp.evaluate(L, 0.0)[0]
    cdot = connection_variation(conn, L, xi)
    alg = algebra(wp.grid.n)
    X = sum(cdot.A[k][..., None] * (alg.eps[k] @ wp.sp.dense) for k in range(wp.grid.dim)) \
        + sum(cdot.V[k][..., None] * (alg.iota[k] @ wp.sp.dense) for k in range(wp.grid.dim))
    return herm_f(project_field(dbar_E_spinor(wp.hs, X), wp.sp), L)


def dlog_term(L, xi):
    """pi^{Herm_f} of the derivative of log f along f e^{t xi}."""
    return herm_f(mf.dlog(L, xi), L)


def linearized_operator(state, xi, wp):
    """Delta_f xi + eps D(log f)(xi)."""
    xi = np.asarray(xi, dtype=complex)
    herm_defect = np.abs(xi - mf.conj_exp(state.L, mf.dagger(xi))).max()
    if herm_defect > 1e-8 * max(1.0, np.abs(xi).max()):
        raise ValueError("xi is not Hermitian with respect to the current metric")
    out = laplacian(wp, state.L, xi)
    if state.epsilon:
        out = out + state.epsilon * dlog_term(state.L, xi)
    return out


def kftpsiint_sides(wp, L, T):
    """Both sides of int h0(K_f - K_0, T) = int h0(dbar^E(f^{-1} d_0 f) psi, T conj psi)."""
    g, r = wp.grid, wp.r
    c0, U0, K0, _ = wp.evaluate(np.zeros_like(L), 0.0)
    cf, Uf, Kf, _ = wp.evaluate(L, 0.0)
    lhs = integrate(np.einsum("...ab,...ba->...", Kf - K0, T).real, g)
    diff = GeneralizedConnection(g, cf.A - c0.A, cf.V - c0.V)
    alg = algebra(g.n)
    X = sum(diff.A[k][..., None] * (alg.eps[k] @ wp.sp.dense) for k in range(g.dim)) \
        + sum(diff.V[k][..., None] * (alg.iota[k] @ wp.sp.dense) for k in range(g.dim))
    Y = project_field(dbar_E_spinor(wp.hs, X), wp.sp)
    rhs = integrate(np.einsum("...ab,...ba->...", Y, T).real, g)
    return float(lhs), float(rhs)


# Newton machinery in Hermitian coordinates X = f^{1/2} xi f^{-1/2}


def _pack(X):
    r = X.shape[-1]
    iu = np.triu_indices(r, 1)
    d = np.real(np.diagonal(X, axis1=-2, axis2=-1))
    return np.concatenate([d.reshape(-1), X[..., iu[0], iu[1]].real.reshape(-1),
                           X[..., iu[0], iu[1]].imag.reshape(-1)])


def _unpack(v, shape, r):
    iu = np.triu_indices(r, 1)
    npts = int(np.prod(shape))
    nd, no = npts * r, npts * len(iu[0])
    X = np.zeros(shape + (r, r), dtype=complex)
    idx = np.arange(r)
    X[..., idx, idx] = v[:nd].reshape(shape + (r,))
    off = v[nd:nd + no].reshape(shape + (len(iu[0]),)) + 1j * v[nd + no:nd + 2 * no].reshape(shape + (len(iu[0]),))
    X[..., iu[0], iu[1]] = off
    X[..., iu[1], iu[0]] = np.conj(off)
    return X


def _traceless(X):
    r = X.shape[-1]
    return X - (np.trace(X, axis1=-2, axis2=-1)[..., None, None] / r) * np.eye(r)


def _step(L, X, t, grid):
    """log(f^{1/2} e^{tX} f^{1/2}), trace re-projected to zero, Nyquist modes dropped."""
    s = mf.hexp(0.5 * L)
    Lnew = mf.hlog(s @ mf.hexp(t * X) @ s)
    return mf.herm(drop_nyquist(_traceless(Lnew), grid))


def newton_direction(wp, L, eps, G, rtol=1e-3, maxiter=60, h=1e-5, shift=0.0):
    """Inexact Newton step for the discrete residual in Hermitian coordinates.

    Jacobian-vector products are central differences of the dealiased
    Hermitian residual X -> G(f_X) along f_X = f^{1/2} e^X f^{1/2}. Differentiating the discrete map (rather
    than using ``laplacian``, which agrees with it only up to aliasing error)
    keeps Newton quadratic on under-resolved data. The preconditioner is the
    Fourier symbol of Delta + eps. A positive ``shift`` adds a
    Levenberg-Marquardt term, used at eps = 0 where the constant
    automorphisms of E make the Jacobian singular.
    """
    g, r = wp.grid, wp.r
    shape = g.shape
    b = _pack(_traceless(-G))
    nrm = np.linalg.norm(b)
    if nrm == 0:
        return np.zeros_like(L)

    def matvec(v):
        X = drop_nyquist(_traceless(_unpack(v, shape, r)), g)
        size = float(mf.frob(X).max())
        if size == 0:
            return np.zeros_like(v)
        t = h / size
        Gp = wp.hermitian_residual(_step(L, X, t, g), eps)
        Gm = wp.hermitian_residual(_step(L, X, -t, g), eps)
        return _pack(_traceless((Gp - Gm) / (2 * t)) + shift * X)

    den = wp.symbol + max(eps, 0.0) + shift + 1e-3

    def precond(v):
        X = _unpack(v, shape, r)
        ax = tuple(range(g.dim))
        Xh = np.fft.fftn(X, axes=ax) / den[..., None, None]
        return _pack(drop_nyquist(mf.herm(np.fft.ifftn(Xh, axes=ax)), g))

    n = b.size
    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=precond, dtype=float)
    sol, _ = gmres(A, b, rtol=rtol, atol=0.0, restart=maxiter, maxiter=1, M=M)
    return drop_nyquist(_traceless(_unpack(sol, shape, r)), g)


def solve_at_epsilon(state, wp, tol=1e-10, max_iter=50, newton=True):
    """Damped Newton / exponential-descent iteration for L_eps(f) = 0.

    The residual is the sup over the grid of the h_f-norm of the dealiased
    S = K_f - lambda + eps log f. Every accepted step strictly decreases it.
    """
    eps = state.epsilon
    L = mf.herm(drop_nyquist(_traceless(state.L), wp.grid))
    lmin = float(np.linalg.eigvalsh(L).min())
    if lmin < LOG_POSITIVITY_FLOOR:
        raise SolverError(f"loss of positivity in f: min eigenvalue {np.exp(lmin):.3e} at eps = {eps:.3e}")
    G, res = wp.residual(L, eps)
    it = 0
    eta = 1.0
    while res >= tol and it < max_iter:
        it += 1
        accepted = False
        directions = []
        if newton:
            shift = max(res, 1e-6) if eps == 0 else 0.0
            directions.append(("newton", newton_direction(wp, L, eps, G, shift=shift)))
        directions.append(("descent", -_traceless(G)))
        for kind, X in directions:
            t = 1.0 if kind == "newton" else eta
            for _ in range(30):
                Lt = _step(L, X, t, wp.grid)
                if float(np.linalg.eigvalsh(Lt).min()) < LOG_POSITIVITY_FLOOR:
                    t *= 0.5
                    continue
                G2, r2 = wp.residual(Lt, eps)
                if r2 < (1 - 1e-4 * t) * res:
                    L, G, res = Lt, G2, r2
                    accepted = True
                    if kind == "descent":
                        eta = min(2 * t, 1.0)
                    break
                t *= 0.5
            if accepted:
                break
            if kind == "descent":
                eta = t
        if not accepted:
            break
    out = SolverState(eps, L, state.lam, list(state.history), res < tol, it)
    out.residual = res
    return out


@dataclass
class PathResult:
    verdict: str
    rows: list
    state: SolverState
    problem: Problem
    h0: HermitianBundle
    gauge: np.ndarray
    khat0_norm: float
    slices: list = field(default_factory=list)
    destabilizer: dict = None
    residual: float = None

    def final_metric(self):
        """h_final = h0 f in the original frame."""
        f = self.state.f
        return self.gauge @ f @ self.gauge


def continuity_path(problem, eps0=1.0, ratio=0.7, eps_floor=1e-4, tol=1e-10, max_iter=50,
                    growth_factor=10.0, extra_slices=2, polish_tol=None):
    """Run the eps-continuation and classify the outcome."""
    g, r = problem.grid, problem.r
    h0, f1, u = normalize_start_metric(problem)
    hs_w, gauge = to_identity_frame(problem.hs, h0)
    off = None
    if problem.k_offset is not None:
        ginv = np.linalg.inv(gauge)
        off = gauge @ problem.k_offset @ ginv
    wp = WorkProblem(hs_w, problem.sp, problem.lam, off)
    L = mf.herm(_traceless(mf.hlog(mf.herm(gauge @ f1 @ np.linalg.inv(gauge)))))
    K0 = wp.evaluate(np.zeros_like(L), 0.0)[2]
    khat0 = float(np.abs(np.linalg.eigvalsh(mf.herm(K0 - problem.lam * np.eye(r)))).max())
    state = SolverState(eps0, L, problem.lam)
    rows, slices = [], []
    eps = eps0
    grown = None
    verdict = None
    while True:
        state.epsilon = eps
        state = solve_at_epsilon(state, wp, tol=tol, max_iter=max_iter)
        m = state.m()
        rows.append({"epsilon": eps, "iters": state.iterations, "sup_residual": state.residual,
                     "m_eps": m, "det_drift": state.det_drift()})
        slices.append((eps, state.L.copy()))
        if not state.converged:
            verdict = "non_converged"
            break
        if grown is None and m > growth_factor * max(khat0, 1e-300) and khat0 > 0:
            grown = len(rows)
        if grown is not None and len(rows) - grown >= extra_slices:
            verdict = "destabilizer_found"
            break
        if eps <= eps_floor:
            break
        eps = max(eps * ratio, eps_floor) if eps * ratio > eps_floor * 0.999 else eps_floor
    result = PathResult(verdict, rows, state, problem, h0, gauge, khat0, slices)
    if verdict == "destabilizer_found":
        report = destabilizer_probe(slices, problem, h0, gauge, wp)
        result.destabilizer = report
        if report is None:
            result.verdict = "non_converged"
        return result
    if verdict == "non_converged":
        return result
    # extrapolate to eps = 0 and polish
    if len(slices) >= 2:
        (e1, L1), (e2, L2) = slices[-2], slices[-1]
        Lx = mf.herm(_traceless(L2 - e2 * (L1 - L2) / (e1 - e2)))
        if wp.residual(Lx, 0.0)[1] < wp.residual(L2, 0.0)[1]:
            state = SolverState(0.0, Lx, problem.lam, [], True)
    state.epsilon = 0.0
    state = solve_at_epsilon(state, wp, tol=polish_tol or tol, max_iter=max_iter)
    rows.append({"epsilon": 0.0, "iters": state.iterations, "sup_residual": state.residual,
                 "m_eps": state.m(), "det_drift": state.det_drift()})
    result.state = state
    result.residual = state.residual
    result.verdict = "einstein_metric" if state.converged else "non_converged"
    return result


def destabilizer_probe(slices, problem, h0, gauge, wp=None, sigmas=(0.5, 0.25, 0.1), threshold=0.5):
    """Candidate destabilizing projector from the blow-up of log f_eps.

    Rescales f by rho = e^{-M} (M the largest eigenvalue of log f), takes
    small powers (rho f)^sigma and keeps the eigenspaces whose eigenvalues
    fall below ``threshold``, i.e. the directions where rho f collapses.
    Returns None when no growth is present.
    """
    from .stability import slope_inequality, weak_holomorphy_residual

    if len(slices) < 3:
        return None
    ms = [float(np.abs(np.linalg.eigvalsh(L)).max()) for _, L in slices[-3:]]
    if not (ms[0] < ms[1] < ms[2]):
        return None
    eps, L = slices[-1]
    r = L.shape[-1]
    M = float(np.linalg.eigvalsh(L).max())
    w, V = np.linalg.eigh(L)
    candidates = []
    for sig in sigmas:
        vals = np.exp(sig * (w - M))
        keep = vals < threshold
        P = (V * keep[..., None, :]) @ mf.dagger(V)
        candidates.append((sig, P, keep.sum(axis=-1)))
    ranks = [np.unique(k) for _, _, k in candidates]
    consistent = [c for c, rk in zip(candidates, ranks) if rk.size == 1 and 0 < rk[0] < r]
    if not consistent:
        return None
    sig, P, rk = consistent[-1]
    p = int(rk.reshape(-1)[0])
    ginv = np.linalg.inv(gauge)
    pi = ginv @ P @ gauge
    r1, r2, r3 = weak_holomorphy_residual(pi, problem.hs, h0)
    rep = slope_inequality(pi, canonical_connection(problem.hs, h0), problem.sp, h0,
                           k_offset=problem.k_offset, rank=p)
    return {"pi": pi, "rank": p, "sigma": sig, "residuals": (r1, r2, r3), "mu_S": rep.mu_S,
            "mu_E": rep.mu_E, "destabilizing": rep.mu_S >= rep.mu_E - 1e-12, "report": rep,
            "sigma_ranks": [int(k.reshape(-1)[0]) if k.size == 1 else None for k in ranks]}
