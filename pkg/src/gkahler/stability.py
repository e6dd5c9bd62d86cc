"""Subbundles: second fundamental forms, slopes, weak holomorphy and the vanishing identities.

A subbundle S of the trivial bundle is given by a field of projectors pi
(shape (*grid, r, r)). Generalized-vector valued endomorphisms are stored in
stacked coordinates (v_1..v_{2n}, xi_1..xi_{2n}) on a leading axis, i.e. with
shape (4n, *grid, r, r).
"""

from dataclasses import dataclass, field

import numpy as np

from . import matfun as mf
from .bundle import (
    GeneralizedConnection,
    HermitianBundle,
    curvature,
    dzbar,
    ordinary_curvature,
    _comm,
)
from .multivector import algebra
from .structures import (
    gcs_from_complex_structure,
    gk_pair,
    pairing_matrix,
    standard_complex_structure,
)
from .torus import gradient, integrate, spectral_partial


class HolomorphyError(ValueError):
    def __init__(self, residual, tol):
        super().__init__(f"projector is not weakly holomorphic: residual {residual:.3e} > {tol:.1e}")
        self.residual = residual


def _bundle(grid, r, bundle):
    return HermitianBundle.trivial(grid, r) if bundle is None else bundle


def _l2(X, grid):
    pw = np.sum(np.abs(X) ** 2, axis=tuple(range(grid.dim, X.ndim)))
    return float(np.sqrt(integrate(pw, grid)))


@dataclass
class SubbundleProjector:
    """Field of h-orthogonal projectors of constant rank p."""

    grid: object
    pi: np.ndarray
    rank: int
    bundle: HermitianBundle = None
    tol: float = 1e-8

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=complex)
        r = self.pi.shape[-1]
        if self.pi.shape != self.grid.shape + (r, r):
            raise ValueError("projector field has the wrong shape")
        if not 0 <= self.rank <= r:
            raise ValueError("rank out of range")
        self.bundle = _bundle(self.grid, r, self.bundle)
        P = self.pi
        idem = np.abs(P @ P - P).max()
        selfadj = np.abs(P - self.bundle.adjoint(P)).max()
        if idem > self.tol or selfadj > self.tol:
            raise ValueError(f"not an orthogonal projector (|pi^2-pi| = {idem:.2e}, |pi-pi*| = {selfadj:.2e})")
        tr = np.trace(P, axis1=-2, axis2=-1).real
        if np.abs(tr - self.rank).max() > 1e-6:
            raise ValueError("projector rank differs from the declared rank")

    @property
    def r(self):
        return self.pi.shape[-1]

    @property
    def complement(self):
        return np.eye(self.r) - self.pi


def _as_projector(pi, grid, bundle, rank=None):
    if isinstance(pi, SubbundleProjector):
        return pi
    pi = np.asarray(pi, dtype=complex)
    if rank is None:
        rank = int(round(float(np.trace(pi, axis1=-2, axis2=-1).real.mean())))
    return SubbundleProjector(grid, pi, rank, bundle)


def _kaehler_frames(sp):
    pair = gk_pair(gcs_from_complex_structure(standard_complex_structure(sp.n)), sp)
    return pair


def weak_holomorphy_residual(pi, hs, bundle=None):
    """L2 norms of pi - pi^2, pi - pi^{*h} and (1 - pi) dbar^E pi."""
    g = hs.grid
    P = np.asarray(pi.pi if isinstance(pi, SubbundleProjector) else pi, dtype=complex)
    bundle = _bundle(g, P.shape[-1], bundle)
    Q = np.eye(P.shape[-1]) - P
    r1 = _l2(P - P @ P, g)
    r2 = _l2(P - bundle.adjoint(P), g)
    parts = []
    for k in range(g.n):
        parts.append(Q @ (dzbar(P, g, k) + _comm(hs.A01[k], P)))
        parts.append(Q @ _comm(hs.Phi[k], P))
    r3 = _l2(np.stack(parts), g)
    return r1, r2, r3


def _gamma_blocks(P, conn):
    """Stacked blocks (1-pi) D pi and pi D (1-pi) of the full generalized connection."""
    g = conn.grid
    m = g.dim
    Q = np.eye(P.shape[-1]) - P
    dP = gradient(P, g)
    shape = (2 * m,) + P.shape
    qs = np.zeros(shape, dtype=complex)
    sq = np.zeros(shape, dtype=complex)
    for k in range(m):
        qs[k] = Q @ conn.V[k] @ P
        sq[k] = P @ conn.V[k] @ Q
        qs[m + k] = Q @ (dP[k] + conn.A[k] @ P)
        sq[m + k] = P @ (-dP[k] + conn.A[k] @ Q)
    return qs, sq


def _stacked_apply(M, X):
    return np.einsum("ab,b...->a...", M, X)


@dataclass
class SecondFundamentalForm:
    """H^S (L_J valued) and H^{S-perp} (conj L_J valued) with frame coefficients.

    ``coeffs`` has one entry per vector of the normalized frame of L_J
    (plus frame first), with H^S = sum_a coeffs[a] e_a.
    """

    HS: np.ndarray
    HSperp: np.ndarray
    coeffs: np.ndarray
    signs: np.ndarray
    frame: np.ndarray = field(repr=False)

    def norm_sq(self, bundle):
        """Pointwise sum_a |c_a|_h^2 over the 2n frame vectors."""
        c = self.coeffs
        return np.sum(np.trace(bundle.adjoint(c) @ c, axis1=-2, axis2=-1).real, axis=0)


def second_fundamental_form(pi, conn, sp, bundle=None, hs=None, tol=1e-6):
    """H^S = (1 - pi) D^{1,0} pi and H^{S-perp} = pi D^{0,1} (1 - pi).

    When a holomorphic structure ``hs`` is given the weak holomorphy of pi is
    checked first.
    """
    g = conn.grid
    bundle = _bundle(g, conn.r, bundle)
    proj = _as_projector(pi, g, bundle)
    if hs is not None:
        r3 = weak_holomorphy_residual(proj, hs, bundle)[2]
        if r3 > tol:
            raise HolomorphyError(r3, tol)
    qs, sq = _gamma_blocks(proj.pi, conn)
    pair = _kaehler_frames(sp)
    J = pair.J1.J
    I = np.eye(J.shape[0])
    HS = _stacked_apply(0.5 * (I + 1j * J), qs)
    HSperp = _stacked_apply(0.5 * (I - 1j * J), sq)
    frame = np.concatenate([pair.plus, pair.minus], axis=1)
    signs = np.array([1.0] * pair.plus.shape[1] + [-1.0] * pair.minus.shape[1])
    dual = pairing_matrix(sp.n) @ frame.conj()
    coeffs = np.einsum("a,ca,c...->a...", signs, dual, HS)
    return SecondFundamentalForm(HS, HSperp, coeffs, signs, frame)


def adjointness_residual(sff, bundle):
    """sup |H H^S_c + (H^{S-perp}_c)^dagger H| over stacked components."""
    H = bundle.h
    return float(np.abs(H @ sff.HS + mf.dagger(sff.HSperp) @ H).max())


def _clifford_ops(n):
    alg = algebra(n)
    return list(alg.iota) + list(alg.eps)


def clifford_product_trace(X, Y, sp, bundle):
    """Pointwise tr pi^{Herm} pi_{U^{-n}}(X . Y . psi) for stacked End-valued X, Y."""
    ops = _clifford_ops(sp.n)
    alg = algebra(sp.n)
    out = 0.0
    for c, Ec in enumerate(ops):
        for d, Ed in enumerate(ops):
            coef = alg.pair(Ec @ (Ed @ sp.dense), sp.conj_dense) / sp.norm_pair
            if abs(coef) < 1e-15:
                continue
            out = out + coef * (X[c] @ Y[d])
    out = bundle.herm_part(out)
    return np.trace(out, axis1=-2, axis2=-1).real


def positivity_traces(sff, sp, bundle):
    """(tr pi^Herm (H^perp . H^S) psi, tr pi^Herm (H^S . H^perp) psi) pointwise."""
    return (clifford_product_trace(sff.HSperp, sff.HS, sp, bundle),
            clifford_product_trace(sff.HS, sff.HSperp, sp, bundle))


def block_product_trace(pi, conn, sp, bundle=None):
    """Pointwise 2 tr pi^Herm pi_{U^{-n}}(A_sq ^ A_qs + V_sq V_qs) psi."""
    g = conn.grid
    bundle = _bundle(g, conn.r, bundle)
    P = np.asarray(pi.pi if isinstance(pi, SubbundleProjector) else pi, dtype=complex)
    qs, sq = _gamma_blocks(P, conn)
    alg = algebra(sp.n)
    m = g.dim
    out = 0.0
    for k in range(m):
        for l in range(m):
            ca = alg.pair(alg.eps[k] @ (alg.eps[l] @ sp.dense), sp.conj_dense) / sp.norm_pair
            cv = alg.pair(alg.iota[k] @ (alg.iota[l] @ sp.dense), sp.conj_dense) / sp.norm_pair
            out = out + ca * (sq[m + k] @ qs[m + l]) + cv * (sq[k] @ qs[l])
    return 2 * np.trace(bundle.herm_part(out), axis1=-2, axis2=-1).real


def split_connection(P, conn):
    """pi D pi + (1 - pi) D (1 - pi): the direct sum of the connections induced on S and S-perp."""
    g = conn.grid
    Q = np.eye(P.shape[-1]) - P
    dP = gradient(P, g)
    A = np.stack([P @ dP[k] - Q @ dP[k] + P @ conn.A[k] @ P + Q @ conn.A[k] @ Q for k in range(g.dim)])
    V = np.stack([P @ conn.V[k] @ P + Q @ conn.V[k] @ Q for k in range(g.dim)])
    return GeneralizedConnection(g, A, V)


@dataclass
class SubcurvatureData:
    lhs: np.ndarray
    trKS: np.ndarray
    norm_sq: np.ndarray
    residual: np.ndarray
    sff: SecondFundamentalForm = field(repr=False)

    @property
    def sup(self):
        return float(np.abs(self.residual).max())


def subcurvature_identity(pi, conn, sp, bundle=None, rank=None):
    """tr(pi K pi) - (tr K^S + |H^S|^2) pointwise.

    The left side projects the full mean curvature; the right side uses the
    connection induced on S (through the split connection, so no global frame
    of S is needed) and the frame sum of |H^S|^2.
    """
    g = conn.grid
    bundle = _bundle(g, conn.r, bundle)
    proj = _as_projector(pi, g, bundle, rank)
    P = proj.pi
    K = curvature(conn, sp, bundle).K
    lhs = np.trace(P @ K @ P, axis1=-2, axis2=-1).real
    KS = curvature(split_connection(P, conn), sp, bundle).K
    trKS = np.trace(P @ KS @ P, axis1=-2, axis2=-1).real
    sff = second_fundamental_form(proj, conn, sp, bundle)
    nsq = sff.norm_sq(bundle)
    return SubcurvatureData(lhs, trKS, nsq, lhs - trKS - nsq, sff)


@dataclass
class SlopeReport:
    mu_E: float
    mu_S: float
    energy: float
    rank: int
    identity_residual: float
    subcurvature_sup: float
    einstein_defect: float
    destabilizing: bool = field(init=False)

    def __post_init__(self):
        self.destabilizing = self.mu_S >= self.mu_E - 1e-12

    def rows(self):
        return [
            ("mu_E", self.mu_E), ("mu_S", self.mu_S), ("energy", self.energy), ("rank", self.rank),
            ("identity_residual", self.identity_residual), ("subcurvature_sup", self.subcurvature_sup),
            ("einstein_defect", self.einstein_defect), ("destabilizing", self.destabilizing),
        ]


def slope_inequality(pi, conn, sp, bundle=None, k_offset=None, rank=None):
    """Slopes of E and of the subbundle pi, and the second fundamental form energy.

    deg = (1/2pi) int tr K vol_psi and mu = deg / rank. ``k_offset`` is an
    artificial constant endomorphism added to the mean curvature of E (its
    compression to S is added to that of S). ``identity_residual`` is
    mu_S - (mu_E - energy/p) - (defect term); it vanishes identically because
    of the subcurvature identity, and ``einstein_defect`` measures how far K
    is from a constant multiple of the identity.
    """
    g = conn.grid
    bundle = _bundle(g, conn.r, bundle)
    proj = _as_projector(pi, g, bundle, rank)
    p, r = proj.rank, conn.r
    if not 0 < p < r:
        raise ValueError("subbundle rank must satisfy 0 < p < r")
    sub = subcurvature_identity(proj, conn, sp, bundle)
    K = curvature(conn, sp, bundle).K
    if k_offset is not None:
        K = K + np.asarray(k_offset)
    P = proj.pi
    trK = np.trace(K, axis1=-2, axis2=-1).real
    trPK = np.trace(P @ K @ P, axis1=-2, axis2=-1).real
    off_S = 0.0 if k_offset is None else np.trace(P @ np.asarray(k_offset) @ P, axis1=-2, axis2=-1).real
    scale = sp.volume_density / (2 * np.pi)
    degE = float(integrate(trK, g)) * scale
    degS = float(integrate(sub.trKS + off_S, g)) * scale
    energy = float(integrate(sub.norm_sq, g)) * scale
    mu_E, mu_S = degE / r, degS / p
    # for an Einstein metric tr(pi K pi) = p lambda, so mu_S = mu_E - energy / p
    defect = trPK - p * trK / r
    resid = mu_S - (mu_E - energy / p) - float(integrate(defect, g)) * scale / p
    lam = trK / r
    einstein = float(mf.frob(K - lam[..., None, None] * np.eye(r)).max())
    return SlopeReport(mu_E, mu_S, energy, p, resid, sub.sup, einstein)


def energy_from_dbar(pi, hs, sp, bundle=None):
    """(1/2pi) int |H^S|^2 computed from the (0,1) part pi D^{0,1} (1 - pi)."""
    g = hs.grid
    from .bundle import canonical_connection

    bundle = _bundle(g, hs.r, bundle)
    conn = canonical_connection(hs, bundle)
    sff = second_fundamental_form(pi, conn, sp, bundle)
    pair = _kaehler_frames(sp)
    frame = np.concatenate([pair.plus, pair.minus], axis=1).conj()
    signs = -np.array([1.0] * pair.plus.shape[1] + [-1.0] * pair.minus.shape[1])
    dual = pairing_matrix(sp.n) @ frame.conj()
    c = np.einsum("a,ca,c...->a...", signs, dual, sff.HSperp)
    nsq = np.sum(np.trace(bundle.adjoint(c) @ c, axis1=-2, axis2=-1).real, axis=0)
    return float(integrate(nsq, g)) * sp.volume_density / (2 * np.pi)


# ---------------------------------------------------------------- vanishing suite


def omega_of_V(conn, sp):
    """W = i_V omega as an End-valued 1-form, shape (2n, *grid, r, r)."""
    return np.einsum("ij,i...->j...", sp.omega, conn.V)


def _d_conn(Aform, Om, grid):
    """d Om + sum_k A_k theta^k ^ Om for section-valued forms Om of shape (*grid, r, D)."""
    alg = algebra(grid.n)
    out = np.zeros(Om.shape, dtype=complex)
    for k in range(grid.dim):
        Y = spectral_partial(Om, k, grid) + np.einsum("...ab,...bd->...ad", Aform[k], Om)
        out += Y @ alg.eps[k].T
    return out


def hpair_forms(O1, O2, bundle):
    """h<O1, O2> = h(s1, s2) alpha_1 ^ sigma(conj alpha_2) as a dense form field."""
    alg = algebra(bundle.grid.n)
    hs = np.einsum("...ab,...bd->...ad", bundle.h, O1)
    right = np.conj(O2) * alg.sigma
    return np.einsum("...ac,...ad,cdk->...k", hs, right, alg.wedge_tensor)


@dataclass
class VanishingReport:
    anticommutator: float
    leibniz: float
    leibniz_swapped: float
    energy_Dprime: float
    energy_Ddprime: float
    density_min: float
    dbar_residual: float

    def rows(self):
        return [(k, getattr(self, k)) for k in self.__dataclass_fields__]


def vanishing_identity_suite(conn, sp, bundle, s):
    """Identities for D' = D^A + i omega(V) and D'' = D^A - i omega(V) on s psi.

    Requires b = 0 (apply the joint b-transform first otherwise).
    """
    g = conn.grid
    if np.abs(sp.b).max() > 0:
        raise ValueError("the vanishing suite expects b = 0")
    alg = algebra(g.n)
    W = omega_of_V(conn, sp)
    Ap, Ad = conn.A + 1j * W, conn.A - 1j * W
    s = np.asarray(s, dtype=complex)
    spsi = s[..., None] * sp.dense
    Dp, Dd = _d_conn(Ap, spsi, g), _d_conn(Ad, spsi, g)
    lhs = _d_conn(Ad, Dp, g) + _d_conn(Ap, Dd, g)
    F = ordinary_curvature(conn)
    rhs = np.zeros_like(spsi)
    for (k, l), Fkl in F.items():
        rhs += np.einsum("...ab,...bd->...ad", Fkl, spsi) @ (alg.eps[k] @ alg.eps[l]).T
    for k in range(g.dim):
        for l in range(g.dim):
            rhs += np.einsum("...ab,...bd->...ad", W[k] @ W[l], spsi) @ (alg.eps[k] @ alg.eps[l]).T
    anti = float(np.abs(lhs - 2 * rhs).max())

    # Leibniz rules for h<., .>: d h<O1, O2> = h<D' O1, O2> + (-1)^{|a1|+|a2|} h<O1, D'' O2>
    parity = np.array([(-1) ** (bin(mask).count("1") % 2) for mask in range(alg.dim)])
    O1 = spsi
    O2 = Dd

    def leib(Dfirst, Dsecond):
        err = 0.0
        for Oa, Ob in ((O1, O2), (O1, O1)):
            total = 0.0
            for pa in (+1, -1):
                for pb in (+1, -1):
                    Pa = Oa * (parity == pa)
                    Pb = Ob * (parity == pb)
                    lhs_ = alg_d(hpair_forms(Pa, Pb, bundle), g)
                    rhs_ = hpair_forms(_d_conn(Dfirst, Pa, g), Pb, bundle) \
                        + pa * pb * hpair_forms(Pa, _d_conn(Dsecond, Pb, g), bundle)
                    total = total + lhs_ - rhs_
            err = max(err, float(np.abs(total).max()))
        return err

    le1 = leib(Ap, Ad)
    le2 = leib(Ad, Ap)

    vol = sp.volume_density
    top_p = hpair_forms(Dp, Dp, bundle)[..., -1]
    top_d = hpair_forms(Dd, Dd, bundle)[..., -1]
    dens_p = (top_p / sp.norm_pair).real
    dens_d = (top_d / sp.norm_pair).real
    e_p = float(integrate(dens_p, g)) * vol
    e_d = float(integrate(dens_d, g)) * vol
    dbar = _dbar_section(conn, s)
    return VanishingReport(anti, le1, le2, e_p, e_d, float(min(dens_p.min(), dens_d.min())), dbar)


def alg_d(form, grid):
    alg = algebra(grid.n)
    out = np.zeros(form.shape, dtype=complex)
    for k in range(grid.dim):
        out += spectral_partial(form, k, grid) @ alg.eps[k].T
    return out


def _dbar_section(conn, s):
    """sup norm of D^{0,1} s = (dbar + alpha) s dzbar + Phi s d/dz."""
    g = conn.grid
    a, alpha, Phi, V01 = conn.split()
    err = 0.0
    for k in range(g.n):
        ds = dzbar(s, g, k) + np.einsum("...ab,...b->...a", alpha[k], s)
        err = max(err, float(np.abs(ds).max()), float(np.abs(np.einsum("...ab,...b->...a", Phi[k], s)).max()))
    return err


def dbar_section_operator(hs):
    """Dense matrix of s -> (dbar_k s + A01_k s, Phi_k s)_k on the grid (small grids only)."""
    g = hs.grid
    r = hs.r
    size = int(np.prod(g.shape)) * r
    if size > 4096:
        raise ValueError("grid too large for the dense section operator")
    nyq = np.zeros(g.shape, dtype=bool)
    for ax in range(g.dim):
        idx = [slice(None)] * g.dim
        idx[ax] = g.N // 2
        nyq[tuple(idx)] = True
    cols = []
    for j in range(size):
        e = np.zeros(size, dtype=complex)
        e[j] = 1.0
        s = e.reshape(g.shape + (r,))
        out = []
        for k in range(g.n):
            out.append(dzbar(s, g, k) + np.einsum("...ab,...b->...a", hs.A01[k], s))
            out.append(np.einsum("...ab,...b->...a", hs.Phi[k], s))
        # Nyquist modes are invisible to the first-order spectral derivative
        out.append(np.fft.fftn(s, axes=tuple(range(g.dim)))[nyq] / np.sqrt(size))
        cols.append(np.concatenate([o.ravel() for o in out]))
    return np.stack(cols, axis=1)


def holomorphic_sections(hs, tol=1e-8):
    """Least-squares kernel of dbar^E on sections: (basis fields, singular values).

    The basis is orthonormal for the discrete L2 product; the singular values
    are returned in increasing order so that an empty kernel shows up as a
    strictly positive first entry.
    """
    g = hs.grid
    M = dbar_section_operator(hs)
    _, s, vh = np.linalg.svd(M)
    s = s[::-1]
    vh = vh[::-1]
    k = int(np.sum(s < tol * max(1.0, s[-1])))
    basis = [vh[i].conj().reshape(g.shape + (hs.r,)) / np.sqrt(g.cell_volume) for i in range(k)]
    return basis, s
