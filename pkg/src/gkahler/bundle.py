"""Hermitian bundles over the torus, generalized connections and their curvature.

Layout conventions
------------------
* A and V of a generalized connection are arrays of shape (2n, *grid, r, r):
  A = sum_k A[k] dx_k and V = sum_k V[k] d/dx_k.
* A generalized holomorphic structure stores A01[k] (coefficient of dzbar_k)
  and Phi[k] (coefficient of d/dz_k), shape (n, *grid, r, r), with
  z_k = x_{2k} + i x_{2k+1} (0-based coordinates).
* Spinor-valued endomorphism fields have shape (*grid, r, r, 2^{2n}).
* A metric h is a field of positive Hermitian matrices H with
  h(s1, s2) = s2^dagger H s1.
"""

from dataclasses import dataclass

import numpy as np

from . import matfun as mf
from .multivector import algebra
from .torus import gradient, integrate, spectral_partial


def _comm(X, Y):
    return X @ Y - Y @ X


@dataclass
class HermitianBundle:
    """Trivial rank-r bundle with a Hermitian metric field.

    ``log_h`` (optional) is the Hermitian logarithm of ``h``; when present it
    is used to differentiate the metric, which avoids aliasing from e^L.
    """

    grid: object
    r: int
    h: np.ndarray
    log_h: np.ndarray = None
    h0: np.ndarray = None

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        if self.h.shape != self.grid.shape + (self.r, self.r):
            raise ValueError("metric field has the wrong shape")
        if np.abs(self.h - mf.dagger(self.h)).max() > 1e-10 * max(1.0, np.abs(self.h).max()):
            raise ValueError("metric is not Hermitian")
        w = np.linalg.eigvalsh(mf.herm(self.h))
        if w.min() <= 1e-12:
            raise ValueError(f"metric is not positive definite (min eigenvalue {w.min():.3e})")
        if self.h0 is None:
            self.h0 = self.h

    @classmethod
    def trivial(cls, grid, r):
        h = np.broadcast_to(np.eye(r, dtype=complex), grid.shape + (r, r)).copy()
        return cls(grid, r, h, log_h=np.zeros_like(h))

    @classmethod
    def from_log(cls, grid, L, h0=None):
        L = mf.herm(np.asarray(L, dtype=complex))
        return cls(grid, L.shape[-1], mf.hexp(L), log_h=L, h0=h0)

    def inv(self):
        return np.linalg.inv(self.h)

    def adjoint(self, X):
        """h-adjoint H^{-1} X^dagger H."""
        return np.linalg.solve(self.h, mf.dagger(X) @ self.h)

    def herm_part(self, X):
        return 0.5 * (X + self.adjoint(X))

    def inner(self, s1, s2):
        """Pointwise h(s1, s2) for section fields of shape (*grid, r)."""
        return np.einsum("...i,...ij,...j->...", np.conj(s2), self.h, s1)


@dataclass
class GeneralizedConnection:
    """D = d + A + V on a trivial bundle."""

    grid: object
    A: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.V = np.asarray(self.V, dtype=complex)
        if self.A.shape != self.V.shape or self.A.shape[:1 + self.grid.dim] != (self.grid.dim,) + self.grid.shape:
            raise ValueError("A and V must have shape (2n, *grid, r, r)")

    @property
    def r(self):
        return self.A.shape[-1]

    @classmethod
    def zero(cls, grid, r):
        z = np.zeros((grid.dim,) + grid.shape + (r, r), dtype=complex)
        return cls(grid, z, z.copy())

    def skew_defect(self, bundle):
        """max |X + X^{*h}| over the components of A and V.

        Zero for a unitary connection in a unitary frame; with a non-constant
        metric, metric compatibility is dH = A^dagger H + H A instead.
        """
        return max(np.abs(X + bundle.adjoint(X)).max() for X in list(self.A) + list(self.V))

    def split(self):
        """(a, alpha, Phi, V01): the (1,0)/(0,1) parts of A and V per complex pair."""
        n = self.grid.n
        a = np.stack([0.5 * (self.A[2 * k] - 1j * self.A[2 * k + 1]) for k in range(n)])
        alpha = np.stack([0.5 * (self.A[2 * k] + 1j * self.A[2 * k + 1]) for k in range(n)])
        Phi = np.stack([self.V[2 * k] + 1j * self.V[2 * k + 1] for k in range(n)])
        V01 = np.stack([self.V[2 * k] - 1j * self.V[2 * k + 1] for k in range(n)])
        return a, alpha, Phi, V01

    @classmethod
    def from_split(cls, grid, a, alpha, Phi, V01):
        A = np.empty((grid.dim,) + a.shape[1:], dtype=complex)
        V = np.empty_like(A)
        for k in range(grid.n):
            A[2 * k] = a[k] + alpha[k]
            A[2 * k + 1] = 1j * (a[k] - alpha[k])
            V[2 * k] = 0.5 * (Phi[k] + V01[k])
            V[2 * k + 1] = 0.5 * (-1j * Phi[k] + 1j * V01[k])
        return cls(grid, A, V)


def dz(X, grid, k):
    """d/dz_k of a field."""
    return 0.5 * (spectral_partial(X, 2 * k, grid) - 1j * spectral_partial(X, 2 * k + 1, grid))


def dzbar(X, grid, k):
    return 0.5 * (spectral_partial(X, 2 * k, grid) + 1j * spectral_partial(X, 2 * k + 1, grid))


@dataclass
class GeneralizedHolomorphicStructure:
    """dbar + A01 together with a co-Higgs field Phi."""

    grid: object
    A01: np.ndarray
    Phi: np.ndarray

    def __post_init__(self):
        self.A01 = np.asarray(self.A01, dtype=complex)
        self.Phi = np.asarray(self.Phi, dtype=complex)
        if self.A01.shape != self.Phi.shape or self.A01.shape[0] != self.grid.n:
            raise ValueError("A01 and Phi must have shape (n, *grid, r, r)")

    @property
    def r(self):
        return self.A01.shape[-1]

    @classmethod
    def zero(cls, grid, r):
        z = np.zeros((grid.n,) + grid.shape + (r, r), dtype=complex)
        return cls(grid, z, z.copy())

    def dbar_E(self, X, k):
        """k-th component of dbar^E on endomorphisms, including the co-Higgs part."""
        return dzbar(X, self.grid, k) + _comm(self.A01[k], X)

    def residuals(self):
        """(F^{0,2}, dbar-holomorphy of Phi, [Phi ^ Phi]) sup norms."""
        g, n = self.grid, self.grid.n
        f02 = hol = ww = 0.0
        for j in range(n):
            for k in range(n):
                hol = max(hol, np.abs(dzbar(self.Phi[k], g, j) + _comm(self.A01[j], self.Phi[k])).max())
                if j < k:
                    F = dzbar(self.A01[k], g, j) - dzbar(self.A01[j], g, k) + _comm(self.A01[j], self.A01[k])
                    f02 = max(f02, np.abs(F).max())
                    ww = max(ww, np.abs(_comm(self.Phi[j], self.Phi[k])).max())
        return f02, hol, ww


@dataclass
class CurvatureData:
    Fpsi: np.ndarray
    U: np.ndarray
    K: np.ndarray


def ordinary_curvature(conn):
    """F_kl = d_k A_l - d_l A_k + [A_k, A_l] for k < l, as a dict."""
    g = conn.grid
    dA = [gradient(conn.A[l], g) for l in range(g.dim)]
    F = {}
    for k in range(g.dim):
        for l in range(k + 1, g.dim):
            F[k, l] = dA[l][k] - dA[k][l] + _comm(conn.A[k], conn.A[l])
    return F


def _outer(M, spinor):
    return M[..., None] * spinor


def _apply(X, op):
    """Apply a spinor operator matrix to the last axis."""
    return X @ op.T


def d_A(conn, X):
    """d^A of an End-valued spinor field: dX + sum_k [A_k, X] ^ theta^k."""
    g = conn.grid
    alg = algebra(g.n)
    out = np.zeros(X.shape, dtype=complex)
    for k in range(g.dim):
        Y = spectral_partial(X, k, g)
        Y = Y + np.einsum("...ab,...bcd->...acd", conn.A[k], X) - np.einsum("...abd,...bc->...acd", X, conn.A[k])
        out += _apply(Y, alg.eps[k])
    return out


def curvature_spinor(conn, phi):
    """F(phi) = F_A phi + d^A(V phi) + 1/2 [V . V] phi for a constant spinor phi."""
    g = conn.grid
    alg = algebra(g.n)
    phi = np.asarray(phi, dtype=complex)
    out = np.zeros(g.shape + (conn.r, conn.r, alg.dim), dtype=complex)
    for (k, l), Fkl in ordinary_curvature(conn).items():
        out += _outer(Fkl, alg.eps[k] @ (alg.eps[l] @ phi))
    Vphi = sum(_outer(conn.V[i], alg.iota[i] @ phi) for i in range(g.dim))
    out += d_A(conn, Vphi)
    for i in range(g.dim):
        for j in range(g.dim):
            if i != j:
                out += 0.5 * _outer(_comm(conn.V[i], conn.V[j]), alg.iota[i] @ (alg.iota[j] @ phi))
    return out


def project_field(X, sp):
    """pi_{U^{-n}} coefficient of a spinor-valued field (last axis)."""
    alg = algebra(sp.n)
    return alg.pair(X, sp.conj_dense) / sp.norm_pair


def curvature(conn, sp, bundle):
    Fpsi = curvature_spinor(conn, sp.dense)
    U = project_field(Fpsi, sp)
    return CurvatureData(Fpsi, U, bundle.herm_part(U))


def mean_curvature(cd, sp, bundle):
    """Hermitian part (w.r.t. h) of the U^{-n} coefficient of F(psi)."""
    Fpsi = cd.Fpsi if isinstance(cd, CurvatureData) else cd
    return bundle.herm_part(project_field(Fpsi, sp))


def psi_volume(sp, grid):
    return sp.volume_density * grid.volume


def degree_slope(conn, sp, bundle):
    """(degree, slope, lambda) from the first Chern form (i/2pi) tr F_A.

    deg = (1/2pi) int Re pi_{U^{-n}}(tr F_A psi) i^n <psi, conj psi>, so that
    for K = lambda id one has deg = r lambda vol_psi / 2pi.
    """
    g = conn.grid
    alg = algebra(g.n)
    trF = np.zeros(g.shape + (alg.dim,), dtype=complex)
    for (k, l), Fkl in ordinary_curvature(conn).items():
        trF += np.trace(Fkl, axis1=-2, axis2=-1)[..., None] * (alg.eps[k] @ (alg.eps[l] @ sp.dense))
    c = project_field(trF, sp).real
    deg = float(integrate(c, g) * sp.volume_density / (2 * np.pi))
    r = conn.r
    lam = 2 * np.pi * deg / (r * psi_volume(sp, g))
    return deg, deg / r, lam


def chern_form_top(conn, sp):
    """Top coefficient of i^n <c_1 psi, conj psi> as a real density, c_1 = (i/2pi) tr F_A."""
    g = conn.grid
    alg = algebra(g.n)
    trF = np.zeros(g.shape + (alg.dim,), dtype=complex)
    for (k, l), Fkl in ordinary_curvature(conn).items():
        trF += np.trace(Fkl, axis1=-2, axis2=-1)[..., None] * (alg.eps[k] @ (alg.eps[l] @ sp.dense))
    return -(1j ** (g.n + 1)) * alg.pair(trF, sp.conj_dense) / (2 * np.pi)


def _metric_log_derivative(bundle, k):
    """H^{-1} dH/dz_k, through log_h when available."""
    g = bundle.grid
    if bundle.log_h is not None:
        return mf.dexp_left(bundle.log_h, dz(bundle.log_h, g, k))
    return np.linalg.solve(bundle.h, dz(bundle.h, g, k))


def canonical_connection(hs, bundle):
    """Chern connection of (dbar + A01, h) plus V = Phi d/dz - Phi^{*h} d/dzbar."""
    g = hs.grid
    a, V01 = [], []
    for k in range(g.n):
        a.append(_metric_log_derivative(bundle, k) - bundle.adjoint(hs.A01[k]))
        V01.append(-bundle.adjoint(hs.Phi[k]))
    return GeneralizedConnection.from_split(g, np.stack(a), hs.A01, hs.Phi, np.stack(V01))


def gauge_transform_metric(conn0, f, L=None):
    """Canonical connection of h0 f from that of h0: D^{1,0}_f = f^{-1} D^{1,0}_0 f.

    ``f`` is the field of h0-Hermitian positive endomorphisms; when the
    Hermitian logarithm ``L`` of f is supplied (h0 = identity frame) it is
    used for f^{-1} df.
    """
    g = conn0.grid
    a0, alpha, Phi, V01 = conn0.split()
    f = np.asarray(f, dtype=complex)
    finv = np.linalg.inv(f)
    a = []
    V01f = []
    for k in range(g.n):
        dlogf = mf.dexp_left(L, dz(L, g, k)) if L is not None else finv @ dz(f, g, k)
        a.append(dlogf + finv @ a0[k] @ f)
        V01f.append(finv @ V01[k] @ f)
    return GeneralizedConnection.from_split(g, np.stack(a), alpha, Phi, np.stack(V01f))


def herm_projection(S, f):
    """pi^{Herm_f}(S) = (S + f^{-1} S^dagger f) / 2."""
    return 0.5 * (S + np.linalg.solve(f, mf.dagger(S) @ f))


def einstein_residual(conn, sp, bundle, lam):
    """K - lambda id with its sup (pointwise Frobenius) and L2 norms."""
    K = curvature(conn, sp, bundle).K
    R = K - lam * np.eye(conn.r)
    pw = mf.frob(R)
    return R, float(pw.max()), float(np.sqrt(integrate(pw ** 2, conn.grid)))


def b_transform_connection(conn, b):
    """Ad_{e^b}(A + V) = A - i_V b + V."""
    b = np.asarray(b, dtype=float)
    A = conn.A + np.einsum("ji,i...->j...", b, conn.V)
    return GeneralizedConnection(conn.grid, A, conn.V.copy())


def gauge_act(conn, gfield):
    """g . (d + A + V) = g (d + A + V) g^{-1}."""
    ginv = np.linalg.inv(gfield)
    dg = gradient(gfield, conn.grid)
    A = np.stack([gfield @ conn.A[k] @ ginv - dg[k] @ ginv for k in range(conn.grid.dim)])
    V = np.stack([gfield @ conn.V[k] @ ginv for k in range(conn.grid.dim)])
    return GeneralizedConnection(conn.grid, A, V)


def generalized_d(conn, Om):
    """d^A Omega = d Omega + A . Omega + V . Omega for Omega of shape (*grid, r, D) or (*grid, r, r, D)."""
    g = conn.grid
    alg = algebra(g.n)
    sec = Om.ndim == g.dim + 2
    out = np.zeros(Om.shape, dtype=complex)
    for k in range(g.dim):
        dO = spectral_partial(Om, k, g)
        if sec:
            AO = np.einsum("...ab,...bd->...ad", conn.A[k], Om)
            VO = np.einsum("...ab,...bd->...ad", conn.V[k], Om)
        else:
            AO = np.einsum("...ab,...bcd->...acd", conn.A[k], Om)
            VO = np.einsum("...ab,...bcd->...acd", conn.V[k], Om)
        out += _apply(dO + AO, alg.eps[k]) + _apply(VO, alg.iota[k])
    return out


def random_connection(grid, r, rng, kmax=1, amplitude=0.3, skew=True, with_V=True):
    """Band-limited random generalized connection (skew-Hermitian for h = id)."""
    from .torus import random_bandlimited

    def comp():
        X = random_bandlimited(grid, rng, (r, r), kmax=kmax, amplitude=amplitude)
        return 0.5 * (X - mf.dagger(X)) if skew else X

    A = np.stack([comp() for _ in range(grid.dim)])
    V = np.stack([comp() if with_V else np.zeros_like(A[0]) for _ in range(grid.dim)])
    return GeneralizedConnection(grid, A, V)
